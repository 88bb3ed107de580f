"""Atomic file output and the connection snapshot format.

A snapshot is a JSON object ``{"N", "alpha", "beta", "a_x", "a_y"}`` where
``a_x`` / ``a_y`` list the ``N*N`` sites in row-major order (index
``ix * N + iy``) as ``[c_I, c_J, c_K]`` triples.  Reals are written with 17
significant digits so a save/load round trip is bit exact.
"""

import json
import math
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from .errors import ConfigError
from .gaugefield import Connection, FlatBase
from .lattice import Grid, GridError


def fmt(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be written")
    return f"{x:.17g}"


@contextmanager
def atomic_open(path, mode="w", newline=None):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    with atomic_open(path) as fh:
        fh.write(text)


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _triples(field):
    N = field.shape[0]
    rows = field.reshape(N * N, 3)
    return ",\n    ".join("[" + ", ".join(fmt(v) for v in r) + "]" for r in rows)


def snapshot_text(A):
    a = A.a
    return (
        "{\n"
        f'  "N": {A.N},\n'
        f'  "alpha": {fmt(A.base.alpha)},\n'
        f'  "beta": {fmt(A.base.beta)},\n'
        f'  "a_x": [\n    {_triples(a[0])}\n  ],\n'
        f'  "a_y": [\n    {_triples(a[1])}\n  ]\n'
        "}\n"
    )


def save_snapshot(path, A):
    atomic_write_text(path, snapshot_text(A))


def snapshot_from_dict(data):
    required = ("N", "alpha", "beta", "a_x", "a_y")
    if not isinstance(data, dict):
        raise ConfigError("snapshot must be a JSON object")
    for key in data:
        if key not in required:
            raise ConfigError(f"snapshot: unknown key '{key}'")
    for key in required:
        if key not in data:
            raise ConfigError(f"snapshot: missing key '{key}'")
    N = data["N"]
    if not isinstance(N, int) or isinstance(N, bool):
        raise ConfigError("snapshot: key 'N' must be an integer")
    try:
        Grid(N)
    except GridError as exc:
        raise ConfigError(f"snapshot: key 'N': {exc}") from exc
    comps = []
    for key in ("a_x", "a_y"):
        try:
            arr = np.array(data[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"snapshot: key '{key}' is not a list of real triples") from exc
        if arr.shape != (N * N, 3):
            raise ConfigError(f"snapshot: key '{key}' must hold N*N = {N * N} triples")
        comps.append(arr.reshape(N, N, 3))
    try:
        base = FlatBase(float(data["alpha"]), float(data["beta"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("snapshot: keys 'alpha' and 'beta' must be reals") from exc
    return Connection(base, np.stack(comps))


def load_snapshot(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"snapshot {path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"snapshot {path}: {exc.strerror}") from exc
    return snapshot_from_dict(data)
