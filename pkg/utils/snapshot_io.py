"""
Lossless spectrum snapshots.

One JSON object per line. Every float is written with float.hex so that a
save/load cycle reproduces the coefficients bit for bit; a sha256 digest of
the payload guards against truncated or edited files.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from modules.errors import SnapshotIntegrityError
from modules.geometry import BubbleState
from modules.spectral_core import SpectralFunction


def _payload(t, coeffs, c):
    parts = [float(t).hex()]
    parts.extend(f"{k}:{re.hex()}:{im.hex()}" for k, re, im in coeffs)
    parts.extend(value.hex() for value in c)
    return "|".join(parts)


def _digest(t, coeffs, c):
    return hashlib.sha256(_payload(t, coeffs, c).encode("ascii")).hexdigest()


@dataclass(frozen=True)
class SnapshotRecord:
    """Coefficients k = 0..n_max as (k, re, im); negative modes follow by symmetry."""

    t: float
    coeffs: Tuple[Tuple[int, float, float], ...]
    c: Tuple[float, float]
    checksum: str

    @classmethod
    def from_state(cls, state):
        f = state.f
        coeffs = tuple(
            (k, float(f.mode(k).real), float(f.mode(k).imag)) for k in range(f.n_max + 1)
        )
        c = (float(state.c[0]), float(state.c[1]))
        return cls(float(state.t), coeffs, c, _digest(state.t, coeffs, c))

    @property
    def n_max(self):
        return len(self.coeffs) - 1

    def verify(self):
        if _digest(self.t, self.coeffs, self.c) != self.checksum:
            raise SnapshotIntegrityError(f"checksum mismatch for snapshot at t={self.t!r}")
        if [k for k, _, _ in self.coeffs] != list(range(len(self.coeffs))):
            raise SnapshotIntegrityError("snapshot modes must be 0..n_max in order")
        return self

    def to_state(self):
        self.verify()
        positive = np.array([re + 1j * im for _, re, im in self.coeffs[1:]])
        f = SpectralFunction.from_positive(self.n_max, positive, self.coeffs[0][1])
        return BubbleState(f, np.array(self.c), self.t)

    def to_json_line(self):
        return json.dumps({
            "t": self.t.hex(),
            "coeffs": [[k, re.hex(), im.hex()] for k, re, im in self.coeffs],
            "c": [value.hex() for value in self.c],
            "checksum": self.checksum,
        })

    @classmethod
    def from_json_line(cls, line):
        try:
            raw = json.loads(line)
            record = cls(
                float.fromhex(raw["t"]),
                tuple((int(k), float.fromhex(re), float.fromhex(im)) for k, re, im in raw["coeffs"]),
                tuple(float.fromhex(value) for value in raw["c"]),
                str(raw["checksum"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotIntegrityError(f"malformed snapshot record: {exc}") from exc
        return record.verify()


def write_snapshots(path, states):
    path = Path(path)
    with path.open("w", encoding="ascii") as handle:
        for state in states:
            handle.write(SnapshotRecord.from_state(state).to_json_line() + "\n")
    return path


def read_snapshots(path):
    with Path(path).open(encoding="ascii") as handle:
        return [SnapshotRecord.from_json_line(line) for line in handle if line.strip()]


def load_snapshot(path, t=None):
    """
    State stored in a snapshot file: the last record, or the one closest to t.

    Raises:
        SnapshotIntegrityError: empty file or checksum mismatch
    """
    records = read_snapshots(path)
    if not records:
        raise SnapshotIntegrityError(f"no snapshot records in {path}")
    if t is None:
        return records[-1].to_state()
    closest = min(records, key=lambda record: abs(record.t - t))
    return closest.to_state()
