"""
Run configuration.

A run is described by a JSON document. The smallest accepted form is

    {"A_mu": 0, "A_rhosigma": 1, "initial": [[2, 0.01, 0]]}

and every other field falls back to the defaults below. Physical parameters
may also be grouped under "params", integrator settings go under
"integrator". Unknown keys are rejected, duplicate keys are a parse error.
"""

import json
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Tuple

from modules.errors import ConfigParseError, ConfigValidationError, ParameterError
from modules.geometry import PhysicalParams
from modules.time_integrator import IntegratorConfig

# Redirects every relative output directory
OUTPUT_ROOT_ENV = "MUSKAT_OUTPUT_ROOT"
DEFAULT_OUTPUT_DIR = "output"
EMIT_CHOICES = ("norms", "curves", "spectrum", "vorticity", "diagnostics")

TOP_LEVEL_KEYS = {
    "A_mu", "A_rhosigma", "params", "integrator", "initial", "outputs", "emit",
    "curve_stride", "curve_points", "spectrum_stride", "decay_window",
}
PARAM_KEYS = ("A_mu", "A_rhosigma")
INTEGRATOR_KEYS = {f.name for f in fields(IntegratorConfig)}
INITIAL_KEYS = {"modes", "snapshot", "normalize"}


@dataclass(frozen=True)
class InitialData:
    """Either a list of (k, amplitude, phase) cosine modes or a snapshot file."""

    modes: Tuple[Tuple[int, float, float], ...] = ()
    snapshot: Optional[Path] = None
    normalize: bool = True

    def to_dict(self):
        return {
            "modes": [list(mode) for mode in self.modes],
            "snapshot": str(self.snapshot) if self.snapshot else None,
            "normalize": self.normalize,
        }


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    integrator: IntegratorConfig
    initial: InitialData
    outputs: Path = Path(DEFAULT_OUTPUT_DIR)
    emit: frozenset = field(default_factory=lambda: frozenset(EMIT_CHOICES))
    curve_stride: int = 100
    curve_points: int = 256
    spectrum_stride: int = 100
    decay_window: Tuple[float, Optional[float]] = (0.5, None)

    def to_dict(self):
        """Fully resolved configuration, as embedded in the run manifest."""
        return {
            "params": asdict(self.params),
            "integrator": self.integrator.to_dict(),
            "initial": self.initial.to_dict(),
            "outputs": str(self.outputs),
            "emit": sorted(self.emit),
            "curve_stride": self.curve_stride,
            "curve_points": self.curve_points,
            "spectrum_stride": self.spectrum_stride,
            "decay_window": list(self.decay_window),
        }

    def with_initial(self, initial):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values["initial"] = initial
        return RunConfig(**values)


class _DuplicateKey(Exception):
    def __init__(self, key):
        super().__init__(key)
        self.key = key


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise _DuplicateKey(key)
        seen[key] = value
    return seen


def _locate(text, position):
    line = text.count("\n", 0, position) + 1
    column = position - (text.rfind("\n", 0, position) + 1) + 1
    return line, column


def _load_json(text):
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from None
    except _DuplicateKey as exc:
        occurrences = [match.start() for match in re.finditer(r'"%s"\s*:' % re.escape(exc.key), text)]
        position = occurrences[1] if len(occurrences) > 1 else occurrences[0] if occurrences else 0
        raise ConfigParseError(f"duplicate key {exc.key!r}", *_locate(text, position)) from None


def _number(value, name, problems, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{name} must be a number")
        return None
    if kind is int:
        if int(value) != value:
            problems.append(f"{name} must be an integer")
            return None
        return int(value)
    return float(value)


def _parse_params(document, problems):
    section = document.get("params", {})
    if not isinstance(section, dict):
        problems.append("params must be an object")
        section = {}
    raw = dict(section)
    for key in PARAM_KEYS:
        if key in document:
            if key in raw:
                problems.append(f"{key} given both at top level and under params")
            raw[key] = document[key]
    unknown = set(raw) - set(PARAM_KEYS)
    if unknown:
        problems.append(f"unknown params keys: {', '.join(sorted(unknown))}")
    values = {}
    for key in PARAM_KEYS:
        if key not in raw:
            problems.append(f"{key} is required")
            continue
        number = _number(raw[key], key, problems)
        if number is not None:
            values[key] = number
    if len(values) != len(PARAM_KEYS):
        return None
    try:
        return PhysicalParams(**values)
    except ParameterError as exc:
        problems.append(str(exc))
        return None


def _parse_integrator(section, problems):
    if not isinstance(section, dict):
        problems.append("integrator must be an object")
        return None
    unknown = set(section) - INTEGRATOR_KEYS
    if unknown:
        problems.append(f"unknown integrator keys: {', '.join(sorted(unknown))}")
    values = {}
    for f in fields(IntegratorConfig):
        if f.name not in section:
            continue
        if f.name == "scheme":
            values["scheme"] = str(section["scheme"])
            continue
        kind = int if f.type in (int, "int") else float
        number = _number(section[f.name], f"integrator.{f.name}", problems, kind)
        if number is not None:
            values[f.name] = number
    try:
        return IntegratorConfig(**values)
    except ParameterError as exc:
        problems.extend(str(exc).split("; "))
        return None


def _parse_modes(raw, problems, n_max):
    if not isinstance(raw, list) or not raw:
        problems.append("initial modes must be a non-empty list of [k, amplitude, phase]")
        return ()
    modes = []
    for index, entry in enumerate(raw):
        if not isinstance(entry, (list, tuple)) or len(entry) not in (2, 3):
            problems.append(f"initial mode {index} must be [k, amplitude] or [k, amplitude, phase]")
            continue
        k = _number(entry[0], f"initial mode {index} k", problems, int)
        amplitude = _number(entry[1], f"initial mode {index} amplitude", problems)
        phase = _number(entry[2], f"initial mode {index} phase", problems) if len(entry) == 3 else 0.0
        if k is None or amplitude is None or phase is None:
            continue
        if k < 1:
            problems.append(f"initial mode {index}: k must be >= 1")
        elif n_max is not None and k > n_max:
            problems.append(f"initial mode {index}: k={k} exceeds n_max={n_max}")
        else:
            modes.append((k, amplitude, phase))
    return tuple(modes)


def _parse_initial(raw, problems, n_max):
    if raw is None:
        problems.append("initial is required")
        return None
    if isinstance(raw, list):
        return InitialData(_parse_modes(raw, problems, n_max))
    if not isinstance(raw, dict):
        problems.append("initial must be a mode list or an object")
        return None
    raw = {key: value for key, value in raw.items() if value is not None}
    unknown = set(raw) - INITIAL_KEYS
    if unknown:
        problems.append(f"unknown initial keys: {', '.join(sorted(unknown))}")
    normalize = raw.get("normalize", True)
    if not isinstance(normalize, bool):
        problems.append("initial.normalize must be true or false")
        normalize = True
    if ("modes" in raw) == ("snapshot" in raw):
        problems.append("initial needs exactly one of modes or snapshot")
        return None
    if "snapshot" in raw:
        return InitialData(snapshot=Path(str(raw["snapshot"])), normalize=False)
    return InitialData(_parse_modes(raw["modes"], problems, n_max), normalize=normalize)


def resolve_output_dir(outputs):
    """Relative output paths are placed under $MUSKAT_OUTPUT_ROOT when it is set."""
    path = Path(outputs)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _positive_int(document, key, default, problems):
    if key not in document:
        return default
    value = _number(document[key], key, problems, int)
    if value is not None and value < 1:
        problems.append(f"{key} must be >= 1")
        return default
    return default if value is None else value


def parse_config(text):
    """
    Parse and validate a JSON run configuration.

    Raises:
        ConfigParseError: malformed JSON or duplicate keys (with line and column)
        ConfigValidationError: every invalid or unknown field, in one message
    """
    document = _load_json(text)
    if not isinstance(document, dict):
        raise ConfigValidationError(["configuration must be a JSON object"])

    problems = []
    unknown = set(document) - TOP_LEVEL_KEYS
    if unknown:
        problems.append(f"unknown keys: {', '.join(sorted(unknown))}")

    params = _parse_params(document, problems)
    integrator = _parse_integrator(document.get("integrator", {}), problems)
    n_max = integrator.n_max if integrator else None
    initial = _parse_initial(document.get("initial"), problems, n_max)

    emit = document.get("emit", list(EMIT_CHOICES))
    if not isinstance(emit, list) or not set(emit) <= set(EMIT_CHOICES):
        problems.append(f"emit must be a list drawn from {', '.join(EMIT_CHOICES)}")
        emit = list(EMIT_CHOICES)

    window = document.get("decay_window", [0.5, None])
    if (not isinstance(window, list) or len(window) != 2
            or _number(window[0], "decay_window start", problems) is None
            or (window[1] is not None and _number(window[1], "decay_window end", problems) is None)):
        problems.append("decay_window must be [start, end or null]")
        window = [0.5, None]

    outputs = document.get("outputs", DEFAULT_OUTPUT_DIR)
    if not isinstance(outputs, str) or not outputs:
        problems.append("outputs must be a directory path")
        outputs = DEFAULT_OUTPUT_DIR

    curve_stride = _positive_int(document, "curve_stride", 100, problems)
    curve_points = _positive_int(document, "curve_points", 256, problems)
    spectrum_stride = _positive_int(document, "spectrum_stride", 100, problems)

    if problems:
        raise ConfigValidationError(problems)
    return RunConfig(
        params=params,
        integrator=integrator,
        initial=initial,
        outputs=resolve_output_dir(outputs),
        emit=frozenset(emit),
        curve_stride=curve_stride,
        curve_points=curve_points,
        spectrum_stride=spectrum_stride,
        decay_window=(float(window[0]), None if window[1] is None else float(window[1])),
    )


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))
