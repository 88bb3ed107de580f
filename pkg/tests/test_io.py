import json

import numpy as np
import pytest

from conftest import random_connection
from ymtorus import io
from ymtorus.errors import ConfigError


def test_snapshot_roundtrip_bit_exact(tmp_path, rng):
    A = random_connection(rng, 8)
    path = tmp_path / "a.json"
    io.save_snapshot(path, A)
    B = io.load_snapshot(path)
    assert np.array_equal(A.a, B.a)
    assert (A.base.alpha, A.base.beta) == (B.base.alpha, B.base.beta)
    data = json.loads(path.read_text())
    assert data["N"] == 8 and len(data["a_x"]) == 64 and len(data["a_x"][0]) == 3
    # row-major: entry ix * N + iy
    assert data["a_y"][3 * 8 + 5] == list(A.a[1, 3, 5])


@pytest.mark.parametrize("patch,key", [
    ({"extra": 1}, "extra"),
    ({"N": 7}, "N"),
    ({"N": "8"}, "N"),
    ({"a_x": [[0, 0, 0]]}, "a_x"),
    ({"alpha": "pi"}, "alpha"),
])
def test_snapshot_errors_name_key(patch, key, rng):
    A = random_connection(rng, 8)
    data = json.loads(io.snapshot_text(A))
    data.update(patch)
    with pytest.raises(ConfigError, match=key):
        io.snapshot_from_dict(data)


def test_snapshot_missing_key(rng):
    data = json.loads(io.snapshot_text(random_connection(rng, 8)))
    del data["beta"]
    with pytest.raises(ConfigError, match="beta"):
        io.snapshot_from_dict(data)


def test_atomic_write_leaves_no_partial_file(tmp_path):
    path = tmp_path / "out.txt"
    io.atomic_write_text(path, "old")
    with pytest.raises(RuntimeError):
        with io.atomic_open(path) as fh:
            fh.write("new")
            raise RuntimeError("interrupted")
    assert path.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_fmt():
    assert float(io.fmt(0.1)) == 0.1
    assert io.fmt(1 / 3) == "0.33333333333333331"
    with pytest.raises(ValueError):
        io.fmt(float("nan"))
