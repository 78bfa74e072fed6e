"""Uniform tensor grids, scalar fields on them, and field dump formats."""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = ["Grid", "ScalarField", "write_field_csv", "read_field_csv",
           "write_field_binary", "read_field_binary", "fmt"]


def fmt(x):
    """Format a float with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


class Grid:
    """Uniform grid on the box ``prod [lower_i, upper_i]`` with spacing ``h`` on every axis.

    Node arrays use ``indexing="ij"`` (row-major in the axis order).
    ``ball=True`` restricts the active region to the inscribed
    ball centred at the box centre; nodes outside it stay part of the grid
    (they hold boundary data) but are never interior.
    """

    def __init__(self, lower, upper, points, ball=False):
        lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
        points = np.atleast_1d(np.asarray(points, dtype=int))
        n = max(lower.size, upper.size, points.size)
        lower = np.broadcast_to(lower, (n,)).copy()
        upper = np.broadcast_to(upper, (n,)).copy()
        points = np.broadcast_to(points, (n,)).copy()
        if np.any(points < 2) or np.any(upper <= lower):
            raise InvalidInputError("grid needs at least two points per axis and upper > lower")
        hs = (upper - lower) / (points - 1)
        if not np.allclose(hs, hs[0], rtol=1e-10, atol=0):
            raise InvalidInputError(f"grid spacing differs between axes: {hs}")
        self.n = n
        self.lower = lower
        self.upper = upper
        self.shape = tuple(int(p) for p in points)
        self.h = float(hs[0])
        self.ball = bool(ball)
        axes = [lower[i] + self.h * np.arange(points[i]) for i in range(n)]
        self.axes = axes
        self.coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        center = 0.5 * (lower + upper)
        radius = 0.5 * float(np.min(upper - lower))
        if ball:
            r2 = ((self.coords - center) ** 2).sum(axis=-1)
            self.mask = r2 <= radius * radius * (1 + 1e-12)
        else:
            self.mask = np.ones(self.shape, dtype=bool)
        self.center = center
        self.radius = radius

    @classmethod
    def cube(cls, n, half_width, points, ball=False):
        """The box ``[-half_width, half_width]^n`` with ``points`` nodes per axis."""
        return cls([-half_width] * n, [half_width] * n, [points] * n, ball=ball)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def interior(self, width=1):
        """Nodes at least ``width`` steps from the box faces (and inside the ball, if any)."""
        m = np.zeros(self.shape, dtype=bool)
        core = tuple(slice(width, s - width) for s in self.shape)
        m[core] = True
        return m & self.mask

    def boundary(self):
        """Complement of ``interior(1)``."""
        return ~self.interior(1)

    def nearest_node(self, point):
        point = np.asarray(point, dtype=np.float64)
        idx = np.rint((point - self.lower) / self.h).astype(int)
        return tuple(int(np.clip(i, 0, s - 1)) for i, s in zip(idx, self.shape))

    def evaluate(self, func):
        """Apply ``func`` to the stacked coordinates ``(..., n)``."""
        return np.asarray(func(self.coords), dtype=np.float64)

    def __eq__(self, other):
        return (isinstance(other, Grid) and self.shape == other.shape and self.ball == other.ball
                and np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __repr__(self):
        return f"Grid(n={self.n}, shape={self.shape}, h={self.h:g}, ball={self.ball})"


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise InvalidInputError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, grid.evaluate(func))


def write_field_csv(grid, values, path, only_finite=False):
    """Dump a field as CSV with header ``index,x1..xn,value`` in row-major node order.

    Entries outside a derived field's domain are written as ``nan`` unless
    ``only_finite`` drops those rows.
    """
    values = np.asarray(values, dtype=np.float64)
    coords = grid.coords.reshape(-1, grid.n)
    flat = values.reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [f"x{i + 1}" for i in range(grid.n)] + ["value"])
        for i in range(flat.size):
            if only_finite and not np.isfinite(flat[i]):
                continue
            w.writerow([i] + [fmt(c) for c in coords[i]] + [fmt(flat[i])])


def read_field_csv(path):
    """Read a CSV dump back as ``(index, coords, values)`` arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=np.float64)
    data = np.atleast_1d(data)
    names = data.dtype.names
    coords = np.stack([data[nm] for nm in names[1:-1]], axis=-1)
    return data["index"].astype(int), coords, data["value"]


_HEADER = struct.Struct("<4i")


def write_field_binary(grid, values, path):
    """Binary dump: 16-byte header (dimension and up to three axis counts as
    little-endian int32) followed by float64 values in row-major order."""
    if grid.n > 3:
        raise InvalidInputError("binary dump supports dimension <= 3")
    counts = list(grid.shape) + [0] * (3 - grid.n)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.n, *counts))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_field_binary(path):
    """Return ``(shape, values)`` from a binary dump."""
    with open(path, "rb") as fh:
        n, *counts = _HEADER.unpack(fh.read(_HEADER.size))
        shape = tuple(counts[:n])
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
    return shape, values.copy()
