"""Uniform periodic 1-D grids and the discrete calculus on them.

Cells are numbered ``0 .. N-1`` in code; cell ``j`` covers
``[j*dx, (j+1)*dx)`` and has its center at ``(j + 1/2)*dx``. Neighbour
access always wraps modulo ``N`` (no ghost cells), so periodic sums of
differences telescope exactly.

Reductions use :func:`numpy.sum`, which performs pairwise summation on
contiguous arrays.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from roughfd._validation import (
    check_norm_order,
    check_same_grid,
    check_scalar,
    check_unit_exponent,
    check_vector,
)
from roughfd.exceptions import InvalidArgumentError, NumericError

__all__ = [
    "Grid",
    "GridFunction",
    "make_grid",
    "cell_average",
    "diff",
    "weighted_lp_norm",
    "space_modulus",
    "time_modulus",
    "holder_seminorm",
    "DEFAULT_SUBSAMPLES",
]

#: Midpoint subsamples per cell used by :func:`cell_average`.
DEFAULT_SUBSAMPLES = 64


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, domain_length)`` with ``num_cells`` cells."""

    domain_length: float
    num_cells: int

    @property
    def dx(self):
        return self.domain_length / self.num_cells

    @property
    def centers(self):
        return (np.arange(self.num_cells) + 0.5) * self.dx

    @property
    def edges(self):
        """Left cell edges ``x_{j-1/2}``."""
        return np.arange(self.num_cells) * self.dx


def make_grid(domain_length, num_cells):
    """Build a :class:`Grid`, validating ``domain_length > 0`` and ``num_cells >= 2``."""
    domain_length = check_scalar(domain_length, "domain_length", lower=0.0,
                                 include_lower=False)
    num_cells = check_scalar(num_cells, "num_cells", lower=2, integer=True)
    return Grid(domain_length, num_cells)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant cell values on a :class:`Grid`.

    The value array is copied on construction and made read-only.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = check_vector(self.values, "values", length=self.grid.num_cells,
                           finite=False).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.grid.num_cells

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def with_values(self, values):
        return GridFunction(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _raw(other, self.grid))

    def __sub__(self, other):
        return self.with_values(self.values - _raw(other, self.grid))

    def __mul__(self, other):
        return self.with_values(self.values * _raw(other, self.grid))

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def to_csv(self, path, column="value"):
        """Write ``x,<column>`` rows, one per cell center, with 17 significant digits."""
        write_columns(path, self.grid, {column: self.values})

    @classmethod
    def from_csv(cls, path, domain_length=None, column=None):
        """Read a file written by :meth:`to_csv`.

        The domain length is inferred from the cell centers unless given.
        """
        header, table = read_columns(path)
        if column is None:
            column = header[1]
        x = table["x"]
        n = x.shape[0]
        if domain_length is None:
            domain_length = float(x[0] * 2 * n)
        return cls(make_grid(domain_length, n), table[column])


def _raw(other, grid):
    if isinstance(other, GridFunction):
        if other.grid != grid:
            raise InvalidArgumentError(f"grid mismatch: {grid} vs {other.grid}")
        return other.values
    return other


def write_columns(path, grid, columns):
    """Write an ``x,...`` CSV with the given named columns (17 significant digits)."""
    names = list(columns)
    data = [np.asarray(columns[k], dtype=np.float64) for k in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", *names])
        for j, x in enumerate(grid.centers):
            writer.writerow([f"{x:.17g}"] + [f"{col[j]:.17g}" for col in data])


def read_columns(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    return header, {name: arr[:, k].copy() for k, name in enumerate(header)}


def block_mean(values, size):
    """Mean over consecutive blocks of ``size`` entries of a 1-D array.

    For power-of-two ``size`` the sum is an adjacent-pair tree followed by an
    exact power-of-two scaling, so constants are reproduced bit for bit and
    nested block means agree exactly with a single one.
    """
    blocks = np.asarray(values, dtype=np.float64).reshape(-1, size)
    if size & (size - 1):
        return blocks.mean(axis=1)
    while blocks.shape[1] > 1:
        blocks = blocks[:, 0::2] + blocks[:, 1::2]
    return blocks[:, 0] * (1.0 / size)


def cell_average(f, grid, subsamples=DEFAULT_SUBSAMPLES):
    """Average ``f`` over every cell with the composite midpoint rule.

    ``f`` must accept a NumPy array of positions. Affine functions are
    reproduced exactly up to rounding.
    """
    subsamples = check_scalar(subsamples, "subsamples", lower=1, integer=True)
    n = grid.num_cells
    # (j*M + i + 1/2) * (dx/M) keeps every node dyadic when dx is
    offsets = np.arange(n)[:, None] * subsamples + np.arange(subsamples)[None, :] + 0.5
    x = offsets * (grid.dx / subsamples)
    fx = np.broadcast_to(np.asarray(f(x.ravel()), dtype=np.float64), (x.size,))
    fx = fx.reshape(n, subsamples)
    bad = ~np.isfinite(fx)
    if bad.any():
        cell = int(np.flatnonzero(bad.any(axis=1))[0])
        raise NumericError(f"integrand is not finite in cell {cell}", cell=cell)
    return GridFunction(grid, block_mean(fx.ravel(), subsamples))


def _shift(values, k):
    """``out[j] = values[(j + k) mod N]``."""
    return np.roll(values, -k)


def forward_difference(values, h):
    """``(v[j+1] - v[j]) / h`` on a raw periodic array."""
    return (np.roll(values, -1) - values) / h


def backward_difference(values, h):
    """``(v[j] - v[j-1]) / h`` on a raw periodic array."""
    return (values - np.roll(values, 1)) / h


def central_difference(values, h):
    """``(v[j+1] - v[j-1]) / (2h)`` on a raw periodic array."""
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * h)


_DIFFERENCES = {
    "forward": forward_difference,
    "backward": backward_difference,
    "central": central_difference,
}


def diff(gf, kind="forward", gamma=1.0):
    """Difference quotient with a fractional power of ``dx`` in the denominator.

    ``forward``: ``(v[j+1] - v[j]) / dx**gamma``; ``backward``:
    ``(v[j] - v[j-1]) / dx**gamma``; ``central``:
    ``(v[j+1] - v[j-1]) / (2 dx**gamma)``.
    """
    gamma = check_unit_exponent(gamma)
    try:
        op = _DIFFERENCES[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown difference kind {kind!r}") from None
    h = gf.grid.dx if gamma == 1.0 else gf.grid.dx ** gamma
    return gf.with_values(op(gf.values, h))


def weighted_lp_norm(gf, weight=None, p=2):
    """``(dx * sum |v|^p / weight)^(1/p)``, or ``max |v|`` for ``p='inf'``."""
    p = check_norm_order(p)
    v = np.abs(gf.values)
    if p == "inf":
        return float(v.max())
    if weight is not None:
        check_same_grid(gf, weight)
        w = weight.values
        if np.any(w <= 0):
            raise InvalidArgumentError("weight must be strictly positive")
        integrand = v ** p / w
    else:
        integrand = v ** p
    total = gf.grid.dx * np.sum(integrand)
    return float(total if p == 1 else np.sqrt(total))


def _lp_of(values, dx, p):
    total = dx * np.sum(np.abs(values) ** p)
    return float(total if p == 1 else total ** (1.0 / p))


def space_modulus(gf, sigma, p=1):
    """Largest ``L^p`` norm of ``v(. + k dx) - v`` over shifts with ``|k| dx <= sigma``.

    Negative shifts give the same periodic sums as positive ones, so only
    ``k >= 1`` is scanned. Returns 0 and warns when no shift is admissible.
    """
    p = check_norm_order(p, allowed=(1, 2))
    grid = gf.grid
    sigma = check_scalar(sigma, "sigma", lower=0.0, upper=grid.domain_length / 2,
                         include_lower=False)
    kmax = int(np.floor(sigma / grid.dx * (1 + 1e-12)))
    kmax = min(kmax, grid.num_cells // 2)
    if kmax < 1:
        warnings.warn(f"sigma={sigma} is below dx={grid.dx}; no admissible shift",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    v = gf.values
    return max(_lp_of(_shift(v, k) - v, grid.dx, p) for k in range(1, kmax + 1))


def time_modulus(snapshots, times, sigma, p=1):
    """Largest spatial ``L^p`` distance between snapshots at most ``sigma`` apart in time."""
    p = check_norm_order(p, allowed=(1, 2))
    snapshots = list(snapshots)
    times = np.asarray(times, dtype=np.float64)
    if len(snapshots) < 2:
        raise InvalidArgumentError("time_modulus needs at least two snapshots")
    if times.shape != (len(snapshots),):
        raise InvalidArgumentError("need exactly one timestamp per snapshot")
    if np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("timestamps must be strictly increasing")
    grid = check_same_grid(*snapshots)
    sigma = check_scalar(sigma, "sigma", lower=0.0)
    best = 0.0
    for i in range(len(snapshots)):
        for k in range(i + 1, len(snapshots)):
            if times[k] - times[i] > sigma * (1 + 1e-12):
                break
            d = _lp_of(snapshots[k].values - snapshots[i].values, grid.dx, p)
            best = max(best, d)
    return best


def holder_seminorm(gf, exponent):
    """Brute-force Hölder quotient over all cell pairs, with periodic distance."""
    exponent = check_unit_exponent(exponent, "exponent")
    grid = gf.grid
    v = gf.values
    best = 0.0
    for k in range(1, grid.num_cells // 2 + 1):
        dist = min(k, grid.num_cells - k) * grid.dx
        jump = np.max(np.abs(_shift(v, k) - v))
        best = max(best, float(jump / dist ** exponent))
    return best
