"""scikit-learn style wrappers around the solvers.

Each row of ``X`` is one set of cell-averaged initial data on the grid the
estimator was fitted to; ``fit`` receives the coefficient values. These are
thin adapters for pipelines and parameter sweeps, not a second solver.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from roughfd import advection, wave
from roughfd.coefficients import Coefficient
from roughfd.exceptions import InvalidArgumentError
from roughfd.grid import GridFunction, block_mean, make_grid

__all__ = ["UpwindAdvection", "AcousticWave", "BlockAverager"]


def _fit_coefficient(a, domain_length):
    values = check_array(np.asarray(a, dtype=np.float64).reshape(1, -1),
                         ensure_min_features=2).ravel()
    grid = make_grid(domain_length, values.shape[0])
    return Coefficient(GridFunction(grid, values))


class UpwindAdvection(TransformerMixin, BaseEstimator):
    """Map initial data ``w0`` to the upwind solution ``w`` at ``final_time``.

    ``fit(a)`` stores the coefficient; ``transform(X)`` solves once per row.
    """

    def __init__(self, final_time=1.0, theta_fraction=0.4, domain_length=2.0):
        self.final_time = final_time
        self.theta_fraction = theta_fraction
        self.domain_length = domain_length

    def fit(self, X, y=None):
        self.coefficient_ = _fit_coefficient(X, self.domain_length)
        self.dt_ = advection.cfl_dt(self.coefficient_, self.coefficient_.grid.dx,
                                    self.theta_fraction)
        self.n_features_in_ = self.coefficient_.grid.num_cells
        return self

    def transform(self, X):
        check_is_fitted(self, "coefficient_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"expected {self.n_features_in_} cells per row, got {X.shape[1]}")
        grid = self.coefficient_.grid
        out = np.empty_like(X)
        for i, row in enumerate(X):
            tr = advection.solve_advection(GridFunction(grid, row), self.coefficient_,
                                           self.final_time, self.theta_fraction)
            out[i] = tr.final.w.values
        return out


class AcousticWave(TransformerMixin, BaseEstimator):
    """Map rows ``[u0 | v0]`` to ``[u | v | p]`` at ``final_time``."""

    def __init__(self, final_time=1.0, safety=1.0, domain_length=2.0):
        self.final_time = final_time
        self.safety = safety
        self.domain_length = domain_length

    def fit(self, X, y=None):
        self.coefficient_ = _fit_coefficient(X, self.domain_length)
        self.dt_ = wave.cfl_dt_wave(self.coefficient_, self.coefficient_.grid.dx,
                                    self.safety)
        self.n_features_in_ = 2 * self.coefficient_.grid.num_cells
        return self

    def transform(self, X):
        check_is_fitted(self, "coefficient_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"expected {self.n_features_in_} values per row, got {X.shape[1]}")
        grid = self.coefficient_.grid
        n = grid.num_cells
        out = np.empty((X.shape[0], 3 * n))
        for i, row in enumerate(X):
            tr = wave.solve_wave(GridFunction(grid, row[:n]), GridFunction(grid, row[n:]),
                                 self.coefficient_, self.final_time, self.safety)
            f = tr.final
            out[i] = np.concatenate([f.u.values, f.v.values, f.p.values])
        return out


class BlockAverager(TransformerMixin, BaseEstimator):
    """Average consecutive blocks of ``factor`` cells (restriction to a coarser grid)."""

    def __init__(self, factor=2):
        self.factor = factor

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not isinstance(self.factor, (int, np.integer)) or self.factor < 1:
            raise InvalidArgumentError(f"factor must be a positive integer, got {self.factor!r}")
        if X.shape[1] % self.factor:
            raise InvalidArgumentError(
                f"{X.shape[1]} cells are not divisible by factor {self.factor}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"expected {self.n_features_in_} cells per row, got {X.shape[1]}")
        # same reduction as coarsen, so the two agree bit for bit
        return block_mean(X.ravel(), self.factor).reshape(X.shape[0], -1)
