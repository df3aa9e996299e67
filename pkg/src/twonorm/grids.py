"""Periodic 1-D grid functions with sup and discrete Lipschitz norms.

These realize the weak/strong norm pair used by the transport instances:
the weak norm is the sup norm over the samples, the strong norm adds the
largest one-sided difference quotient (periodic wrap included).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

_NODE_SNAP = 1e-12  # offsets closer than this to a node collapse onto it

INTERP_SCHEMES = ("linear", "cubic")


@dataclass(frozen=True)
class GridFunction1D:
    """Samples of a periodic function on [0, length) at x_i = i*length/n.

    Values are stored as a read-only float64 array; instances are immutable
    and safe to share between threads.
    """

    n: int
    length: float
    values: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 grid points, got n={self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"domain length must be positive, got {self.length}")
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if vals.shape != (self.n,):
            raise ValueError(f"expected {self.n} samples, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must all be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dx(self) -> float:
        return self.length / self.n

    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * (self.length / self.n)


def sup_norm_values(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


def lip_norm_values(values: np.ndarray, length: float) -> float:
    dx = length / len(values)
    slopes = np.abs(np.roll(values, -1) - values) / dx
    return float(np.max(np.abs(values)) + np.max(slopes))


def sup_norm(u: GridFunction1D) -> float:
    """Largest absolute sample value."""
    return sup_norm_values(u.values)


def lip_norm(u: GridFunction1D) -> float:
    """sup norm plus the largest periodic forward difference quotient.

    Constants get norm |c| (zero slope term), so this is a norm rather
    than a seminorm.
    """
    return lip_norm_values(u.values, u.length)


def sup_distance(u: GridFunction1D, v: GridFunction1D) -> float:
    if u.n != v.n or u.length != v.length:
        raise ValueError("grid functions live on different grids")
    return float(np.max(np.abs(u.values - v.values)))


def interp_values(values: np.ndarray, length: float, x, scheme: str = "cubic"):
    """Periodic interpolation of raw samples at positions x (scalar or array).

    'linear' is piecewise linear; 'cubic' is the 4-point Catmull-Rom
    cardinal spline. Both reproduce node values exactly: offsets within
    _NODE_SNAP of a node are snapped so float jitter in x never leaks
    neighbour values into node queries.
    """
    if scheme not in INTERP_SCHEMES:
        raise ValueError(f"unknown interpolation scheme {scheme!r}")
    n = len(values)
    x_arr = np.asarray(x, dtype=np.float64)
    s = (np.mod(x_arr, length)) * (n / length)
    idx = np.floor(s).astype(np.int64)
    frac = s - idx
    # snap near-node offsets onto the node
    snap_hi = frac > 1.0 - _NODE_SNAP
    idx = np.where(snap_hi, idx + 1, idx)
    frac = np.where(snap_hi | (frac < _NODE_SNAP), 0.0, frac)
    i1 = np.mod(idx, n)
    i2 = np.mod(i1 + 1, n)
    p1 = values[i1]
    p2 = values[i2]
    if scheme == "linear":
        out = p1 + frac * (p2 - p1)
    else:
        i0 = np.mod(i1 - 1, n)
        i3 = np.mod(i1 + 2, n)
        p0 = values[i0]
        p3 = values[i3]
        out = p1 + 0.5 * frac * (
            p2 - p0
            + frac * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + frac * (3.0 * (p1 - p2) + p3 - p0))
        )
    if np.ndim(x) == 0:
        return float(out)
    return out


def interpolate(u: GridFunction1D, x, scheme: str = "cubic"):
    """Evaluate u at arbitrary positions, wrapped periodically into [0, L)."""
    return interp_values(u.values, u.length, x, scheme)


def from_callable(f, n: int, length: float) -> GridFunction1D:
    """Sample a callable at the grid nodes."""
    xs = np.arange(n) * (length / n)
    return GridFunction1D(n=n, length=length, values=np.asarray(f(xs), dtype=np.float64))


# -- serialization ----------------------------------------------------------

def to_dict(u: GridFunction1D) -> dict:
    return {"n": u.n, "length": u.length, "values": [float(v) for v in u.values]}


def from_dict(d: dict) -> GridFunction1D:
    return GridFunction1D(n=int(d["n"]), length=float(d["length"]), values=np.asarray(d["values"]))


def to_json(u: GridFunction1D) -> str:
    return json.dumps(to_dict(u))


def from_json(text: str) -> GridFunction1D:
    return from_dict(json.loads(text))


def write_csv(u: GridFunction1D, path) -> None:
    xs = u.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for xi, vi in zip(xs, u.values):
            w.writerow([repr(float(xi)), repr(float(vi))])


def read_csv(path, length: float | None = None) -> GridFunction1D:
    """Read (x, value) rows written by write_csv.

    The domain length is recovered from the node spacing unless given.
    """
    xs, vs = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["x", "value"]:
            raise ValueError(f"unexpected CSV header {header}")
        for row in r:
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    n = len(vs)
    if length is None:
        if n < 2:
            raise ValueError("cannot infer domain length from fewer than 2 rows")
        length = (xs[1] - xs[0]) * n
    return GridFunction1D(n=n, length=float(length), values=np.asarray(vs))
