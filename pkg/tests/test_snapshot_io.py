import json

import numpy as np
import pytest

from modules.errors import SnapshotIntegrityError
from modules.geometry import BubbleState
from modules.spectral_core import random_function
from utils.snapshot_io import SnapshotRecord, load_snapshot, read_snapshots, write_snapshots


@pytest.fixture
def states(rng):
    pf = random_function(16, rng, decay=0.3) * 0.01
    return [BubbleState.from_projection(pf, c=(0.1 * t, 1.0 / 3.0 + t), t=t) for t in (0.0, 0.25, 0.5)]


def test_round_trip_is_bit_exact(states, tmp_path):
    path = write_snapshots(tmp_path / "spectrum.jsonl", states)
    restored = load_snapshot(path)
    assert restored.f.max_abs_difference(states[-1].f) == 0.0
    assert np.array_equal(restored.c, states[-1].c)
    assert restored.t == states[-1].t


def test_closest_record_is_selected(states, tmp_path):
    path = write_snapshots(tmp_path / "spectrum.jsonl", states)
    assert load_snapshot(path, t=0.3).t == 0.25
    assert [record.t for record in read_snapshots(path)] == [0.0, 0.25, 0.5]


def test_tampered_record_is_rejected(states):
    raw = json.loads(SnapshotRecord.from_state(states[0]).to_json_line())
    raw["t"] = (1.0).hex()
    with pytest.raises(SnapshotIntegrityError, match="checksum"):
        SnapshotRecord.from_json_line(json.dumps(raw))


def test_malformed_record_is_rejected():
    with pytest.raises(SnapshotIntegrityError, match="malformed"):
        SnapshotRecord.from_json_line('{"t": "0x0p+0"}')
    with pytest.raises(SnapshotIntegrityError):
        SnapshotRecord.from_json_line("not json")


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(SnapshotIntegrityError, match="no snapshot records"):
        load_snapshot(path)
