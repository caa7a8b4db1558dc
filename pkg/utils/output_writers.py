"""
Text outputs of a run.

Each file holds one kind of data so that any plotting tool can read it
directly: norms.csv, curves/curve_<step>.csv, spectrum.jsonl,
vorticity.jsonl, diagnostics.json and the manifest.json that records the
resolved configuration, the code version and the run status.
"""

import json
import logging
import os
from pathlib import Path

import numpy as np
import pandas as pd

from modules import __version__
from modules.errors import ConfigValidationError
from modules.geometry import reconstruct_curve
from utils.snapshot_io import SnapshotRecord

logger = logging.getLogger(__name__)

# 17 significant digits round-trip a double exactly
FLOAT_FORMAT = "%.17g"
NORM_COLUMNS = [
    "t", "norm_f01", "norm_f11", "norm_f11_nu", "area_residual", "vorticity_mean",
    "c_dot_x", "c_dot_y", "c_x", "c_y",
]


def prepare_output_dir(path):
    """
    Create the output directory and check that it is writable.

    Raises:
        ConfigValidationError: the directory cannot be created or written
    """
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigValidationError([f"output directory {path} cannot be created: {exc}"]) from exc
    if not os.access(path, os.W_OK):
        raise ConfigValidationError([f"output directory {path} is not writable"])
    return path


def _strided(sequence, stride):
    indices = list(range(0, len(sequence), stride))
    if indices and indices[-1] != len(sequence) - 1:
        indices.append(len(sequence) - 1)
    return indices


def write_norms(root, trajectory):
    frame = trajectory.to_frame()[NORM_COLUMNS]
    path = Path(root) / "norms.csv"
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_curves(root, trajectory, stride, points):
    folder = Path(root) / "curves"
    folder.mkdir(exist_ok=True)
    written = []
    for index in _strided(trajectory.snapshots, stride):
        state = trajectory.snapshots[index]
        xy = reconstruct_curve(state, points)
        path = folder / f"curve_{index:06d}.csv"
        frame = pd.DataFrame({"x": xy[:, 0], "y": xy[:, 1]})
        with path.open("w", encoding="utf-8") as handle:
            handle.write(f"# t={state.t!r}\n")
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT)
        written.append(path)
    return written


def write_spectrum(root, trajectory, stride):
    path = Path(root) / "spectrum.jsonl"
    with path.open("w", encoding="ascii") as handle:
        for index in _strided(trajectory.snapshots, stride):
            handle.write(SnapshotRecord.from_state(trajectory.snapshots[index]).to_json_line() + "\n")
    return path


def write_vorticity(root, trajectory, stride):
    path = Path(root) / "vorticity.jsonl"
    with path.open("w", encoding="ascii") as handle:
        for index in _strided(trajectory.snapshots, stride):
            omega = trajectory.vorticity[index]
            if omega is None:
                continue
            positive = omega.omega.positive_modes
            record = {
                "t": trajectory.snapshots[index].t.hex(),
                "coeffs": [[k + 1, float(value.real).hex(), float(value.imag).hex()]
                           for k, value in enumerate(positive)],
                "residual": omega.residual,
                "iterations": omega.iterations,
                "method": omega.method,
            }
            handle.write(json.dumps(record) + "\n")
    return path


def _plain(value):
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(path, document):
    path = Path(path)
    path.write_text(json.dumps(_plain(document), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_diagnostics(root, document):
    return write_json(Path(root) / "diagnostics.json", document)


def write_manifest(root, config, status, abort_reason=None, files=()):
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "status": status,
        "abort_reason": abort_reason,
        "files": sorted(str(Path(path).relative_to(root)) for path in files),
    }
    return write_json(Path(root) / "manifest.json", manifest)


def write_outputs(root, config, trajectory, diagnostics_document=None):
    """Write every requested output of a trajectory; returns the list of files."""
    files = []
    if not len(trajectory):
        return files
    if "norms" in config.emit:
        files.append(write_norms(root, trajectory))
    if "curves" in config.emit:
        files.extend(write_curves(root, trajectory, config.curve_stride, config.curve_points))
    if "spectrum" in config.emit:
        files.append(write_spectrum(root, trajectory, config.spectrum_stride))
    if "vorticity" in config.emit:
        files.append(write_vorticity(root, trajectory, config.spectrum_stride))
    if "diagnostics" in config.emit and diagnostics_document is not None:
        files.append(write_diagnostics(root, diagnostics_document))
    logger.info("wrote %d output files to %s", len(files), root)
    return files
