"""Rough coefficients and initial data.

Generators return plain callables of position (vectorised over NumPy
arrays) or, for fields synthesised directly on a grid, a
:class:`Coefficient`. All randomness goes through
``numpy.random.Generator(PCG64(seed))``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from roughfd._validation import check_scalar, check_unit_exponent
from roughfd.exceptions import InvalidArgumentError, PositivityViolationError
from roughfd.grid import GridFunction, block_mean, make_grid

__all__ = [
    "Coefficient",
    "WeierstrassSpec",
    "LogNormalSpec",
    "weierstrass",
    "weierstrass_cell_average",
    "hat",
    "random_hats",
    "lognormal_field",
    "bump_kernel",
    "mollify",
    "coarsen",
    "bounds",
    "make_rng",
    "BUMP_NORMALIZATION",
]

#: Integral of ``exp(-1/(1-y^2))`` over ``(-1, 1)`` (adaptive quadrature, 1e-15 abs).
BUMP_NORMALIZATION = 0.4439938161680793

#: Midpoint nodes on ``(-1, 1)`` used by :func:`mollify`.
MOLLIFIER_NODES = 1024


def make_rng(seed):
    """The one generator used throughout: PCG64 seeded with a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(seed))


def bounds(values):
    """Return ``(min, max)`` of a strictly positive grid function."""
    v = np.asarray(values, dtype=np.float64)
    bad = np.flatnonzero(~(v > 0))
    if bad.size:
        cell = int(bad[0])
        raise PositivityViolationError(
            f"coefficient must be strictly positive; cell {cell} holds {v[cell]!r}",
            cell=cell)
    return float(v.min()), float(v.max())


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Cell-averaged positive coefficient with cached bounds.

    ``lower_bound``/``upper_bound`` default to the exact min/max of the
    values. Looser bounds may be passed (e.g. the bounds of the fine field a
    coarsened coefficient came from) but must still enclose every value.
    """

    values: GridFunction
    lower_bound: float = None
    upper_bound: float = None
    holder_exponent_hint: float = None
    _inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = bounds(self.values.values)
        lower = lo if self.lower_bound is None else float(self.lower_bound)
        upper = hi if self.upper_bound is None else float(self.upper_bound)
        if not (0 < lower <= lo and hi <= upper):
            raise InvalidArgumentError(
                f"bounds ({lower}, {upper}) do not enclose values in [{lo}, {hi}]")
        object.__setattr__(self, "lower_bound", lower)
        object.__setattr__(self, "upper_bound", upper)
        inv = 1.0 / self.values.values
        inv.flags.writeable = False
        object.__setattr__(self, "_inverse", inv)

    @classmethod
    def from_function(cls, a, grid, holder_exponent_hint=None, **kwargs):
        from roughfd.grid import cell_average

        return cls(cell_average(a, grid, **kwargs),
                   holder_exponent_hint=holder_exponent_hint)

    @property
    def grid(self):
        return self.values.grid

    @property
    def a(self):
        return self.values.values

    @property
    def inverse(self):
        """``1 / a_j`` (cached)."""
        return self._inverse

    def coarsen(self, factor):
        """Block-average to a coarser grid, keeping this field's bounds."""
        return Coefficient(coarsen(self.values, factor), self.lower_bound,
                           self.upper_bound, self.holder_exponent_hint)

    def to_csv(self, path):
        self.values.to_csv(path, column="a")


@dataclass(frozen=True)
class WeierstrassSpec:
    """Truncated, shifted Weierstrass series ``sum 2^(-gamma n) cos(2^n pi x) + offset``.

    When ``offset`` is None it is set to ``0.1 + sum_n 2^(-gamma n)``, which
    keeps the function above 0.1 everywhere.
    """

    gamma: float
    num_terms: int = 400
    offset: float = None

    def __post_init__(self):
        check_unit_exponent(self.gamma)
        check_scalar(self.num_terms, "num_terms", lower=1, integer=True)
        if self.offset is None:
            object.__setattr__(self, "offset", 0.1 + float(self.amplitudes.sum()))
        elif not self.offset > 0:
            raise InvalidArgumentError(f"offset must be positive, got {self.offset!r}")

    @property
    def amplitudes(self):
        n = np.arange(1, self.num_terms + 1, dtype=np.float64)
        return 2.0 ** (-self.gamma * n)


@dataclass(frozen=True)
class LogNormalSpec:
    """Parameters of ``exp(G)``, ``G`` stationary Gaussian with exponential covariance."""

    correlation_length: float = 0.1
    variance: float = 0.5
    mean_log: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_scalar(self.correlation_length, "correlation_length", lower=0.0,
                     include_lower=False)
        check_scalar(self.variance, "variance", lower=0.0)
        check_scalar(self.mean_log, "mean_log")
        check_scalar(self.seed, "seed", lower=0, upper=2**64 - 1, integer=True)


def weierstrass(spec, x):
    """Evaluate the truncated Weierstrass series at ``x``.

    The phase ``2^n x mod 2`` is formed by repeated exact doubling, so
    high-frequency terms are evaluated without the catastrophic loss of
    ``cos(2^n * pi * x)``. Once every phase is zero (every double is a
    dyadic rational) the remaining terms contribute their amplitudes.
    """
    x = np.asarray(x, dtype=np.float64)
    amp = spec.amplitudes
    phase = np.mod(x, 2.0)
    out = np.zeros_like(phase)
    for n in range(spec.num_terms):
        phase = np.mod(2.0 * phase, 2.0)
        if not phase.any():
            out += amp[n:].sum()
            break
        out += amp[n] * np.cos(np.pi * phase)
    return out + spec.offset


def weierstrass_cell_average(spec, grid, weight=None):
    """Exact cell averages of ``weight(x) * weierstrass(spec, x)``.

    Each cosine term is integrated in closed form, so the frequencies
    ``2^n`` that a midpoint rule on a dyadic grid would alias to a constant
    average out correctly. ``weight`` must be continuous and affine on every
    cell (e.g. :func:`hat` on grids whose cell count is a multiple of 4);
    ``None`` means 1.
    """
    xl = grid.edges
    dx = grid.dx
    if weight is None:
        hl = np.ones_like(xl)
        slope = np.zeros_like(xl)
    else:
        hl = np.asarray(weight(xl), dtype=np.float64)
        slope = (np.asarray(weight(xl + dx), dtype=np.float64) - hl) / dx
    # integral of the offset term: h is affine, so use its midpoint value
    total = spec.offset * (hl + 0.5 * dx * slope) * dx
    amp = spec.amplitudes
    pl = np.mod(xl, 2.0)
    pr = np.mod(xl + dx, 2.0)
    for n in range(spec.num_terms):
        pl = np.mod(2.0 * pl, 2.0)
        pr = np.mod(2.0 * pr, 2.0)
        if not (pl.any() or pr.any()):
            break
        omega = 2.0 ** (n + 1) * np.pi
        sl, sr = np.sin(np.pi * pl), np.sin(np.pi * pr)
        cl, cr = np.cos(np.pi * pl), np.cos(np.pi * pr)
        # int (hl + slope (x - xl)) cos(omega x) dx over the cell
        term = hl * (sr - sl) / omega + slope * (dx * sr / omega + (cr - cl) / omega ** 2)
        total += amp[n] * term
    return GridFunction(grid, total / dx)


def hat(x):
    """Piecewise-linear hat of period 2 with slopes +-2: 0 at x = 0, 1; 1 at x = 1/2, 3/2."""
    x = np.mod(np.asarray(x, dtype=np.float64), 2.0)
    return np.select(
        [x < 0.5, x < 1.0, x < 1.5],
        [1 + 2 * (x - 0.5), 1 - 2 * (x - 0.5), 1 + 2 * (x - 1.5)],
        1 - 2 * (x - 1.5),
    )


def random_hats(count, rng_seed):
    """Sum of ``count`` random hats on ``[0, 2]``.

    Each hat draws, in order, ``q ~ U(-1, 1)``, ``x0 ~ U(0, 1)``,
    ``x1 ~ U(x0, 2)`` and ``x2 ~ U(x1, 2)``; it rises linearly from 0 at
    ``x0`` to ``q`` at ``x1`` and falls back to 0 at ``x2``.
    """
    count = check_scalar(count, "count", lower=1, integer=True)
    rng = make_rng(rng_seed)
    params = []
    for _ in range(count):
        q = rng.uniform(-1.0, 1.0)
        x0 = rng.uniform(0.0, 1.0)
        x1 = rng.uniform(x0, 2.0)
        x2 = rng.uniform(x1, 2.0)
        params.append((q, x0, x1, x2))
    params = np.array(params)

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for q, x0, x1, x2 in params:
            up = (x > x0) & (x <= x1)
            down = (x > x1) & (x <= x2)
            out[up] += q * (x[up] - x0) / (x1 - x0)
            out[down] += q * (x2 - x[down]) / (x2 - x1)
        return out

    f.params = params
    return f


def lognormal_field(spec, grid):
    """Sample ``exp(G)`` at cell centers by circulant (spectral) synthesis.

    The covariance ``variance * exp(-d / correlation_length)`` with periodic
    distance ``d`` is circulant on the periodic grid; its eigenvalues are the
    FFT of the first row. Negative eigenvalues from round-off are clipped.
    """
    n = grid.num_cells
    if n & (n - 1):
        raise InvalidArgumentError(f"num_cells must be a power of two, got {n}")
    k = np.arange(n)
    dist = np.minimum(k, n - k) * grid.dx
    row = spec.variance * np.exp(-dist / spec.correlation_length)
    eig = np.fft.fft(row).real
    if eig.min() < 0:
        if eig.min() < -1e-10 * max(eig.max(), 1e-300):
            warnings.warn(f"clipping negative covariance eigenvalue {eig.min():.3e}",
                          RuntimeWarning, stacklevel=2)
        eig = np.clip(eig, 0.0, None)
    rng = make_rng(spec.seed)
    xi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    g = np.fft.fft(np.sqrt(eig / n) * xi).real
    values = np.exp(spec.mean_log + g)
    return Coefficient(GridFunction(grid, values), holder_exponent_hint=0.5)


def bump_kernel(y):
    """Normalized smooth bump ``exp(-1/(1-y^2)) / BUMP_NORMALIZATION`` on ``(-1, 1)``."""
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1
    out[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2)) / BUMP_NORMALIZATION
    return out


def _mollifier_rule(nodes):
    h = 2.0 / nodes
    y = -1.0 + (np.arange(nodes) + 0.5) * h
    return y, bump_kernel(y) * h


def mollify(f, delta, nodes=MOLLIFIER_NODES):
    """Return ``x -> (f * omega_delta)(x)`` evaluated by a fixed midpoint rule.

    ``omega_delta(x) = omega(x/delta)/delta`` with ``omega`` the normalized
    bump; the smooth compactly supported kernel makes the midpoint rule
    spectrally accurate.
    """
    delta = check_scalar(delta, "delta", lower=0.0, include_lower=False)
    y, w = _mollifier_rule(nodes)

    def smoothed(x):
        x = np.asarray(x, dtype=np.float64)
        samples = np.asarray(f(x[..., None] - delta * y), dtype=np.float64)
        return samples @ w

    return smoothed


def coarsen(fine, factor):
    """Block-average a grid function by an integer factor."""
    factor = check_scalar(factor, "factor", lower=1, integer=True)
    n = fine.grid.num_cells
    if n % factor:
        raise InvalidArgumentError(f"factor {factor} does not divide {n} cells")
    if factor == 1:
        return fine
    grid = make_grid(fine.grid.domain_length, n // factor)
    return GridFunction(grid, block_mean(fine.values, factor))
