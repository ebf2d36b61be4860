"""Upwind scheme for the transport equation ``d/dt (w / a) + d/dx w = 0``.

The update is ``w_j <- (1 - lam a_j) w_j + lam a_j w_{j-1}`` with
``lam = dt / dx``; under ``lam * max(a) <= 1`` it is a convex combination,
which is where every invariant checked in this module comes from.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from roughfd._validation import CFL_SLACK, check_norm_order, check_scalar
from roughfd.exceptions import InvalidArgumentError, StabilityViolationError
from roughfd.grid import GridFunction

__all__ = [
    "AdvectionState",
    "PropagationOperator",
    "Trajectory",
    "cfl_dt",
    "initial_state",
    "upwind_step",
    "solve_advection",
    "to_u",
    "from_u",
    "entropy_residual",
    "entropy_tolerance",
    "propagation_operator",
    "trace_characteristic",
    "characteristics_solve",
    "conservation_sum",
    "CHARACTERISTIC_SUBSTEP",
]

#: Default RK4 substep for characteristic tracing.
CHARACTERISTIC_SUBSTEP = 1e-4


@dataclass(frozen=True, eq=False)
class AdvectionState:
    """Snapshot ``w^n`` together with the step ``dt`` to be taken from it."""

    w: GridFunction
    coefficient: object
    time: float
    dt: float
    step: int = 0

    @property
    def grid(self):
        return self.w.grid

    @property
    def lam(self):
        return self.dt / self.grid.dx

    @property
    def u(self):
        return to_u(self.w, self.coefficient)


@dataclass
class Trajectory:
    """Result of a solve: final state plus requested snapshots (initial state first)."""

    final: object
    snapshots: list = field(default_factory=list)
    num_steps: int = 0
    nominal_dt: float = None
    last_dt: float = None

    @property
    def times(self):
        return [s.time for s in self.snapshots]


def cfl_dt(coefficient, dx, theta_fraction=0.4):
    """Time step ``theta_fraction * dx / upper_bound``."""
    theta_fraction = check_scalar(theta_fraction, "theta_fraction", lower=0.0,
                                  upper=1.0, include_lower=False)
    return theta_fraction * dx / coefficient.upper_bound


def _check_cfl(coefficient, dt, dx):
    if not dt > 0:
        raise StabilityViolationError(f"time step must be positive, got {dt!r}")
    lam_a = dt / dx * coefficient.upper_bound
    if lam_a > 1.0 + CFL_SLACK:
        raise StabilityViolationError(
            f"CFL violated: dt/dx * max(a) = {lam_a!r} > 1")


def initial_state(w0, coefficient, dt, time=0.0):
    if w0.grid != coefficient.grid:
        raise InvalidArgumentError("initial data and coefficient live on different grids")
    _check_cfl(coefficient, dt, w0.grid.dx)
    return AdvectionState(w0, coefficient, float(time), float(dt), 0)


def _upwind_kernel(w, s):
    """One step on raw arrays; ``s = lam * a``."""
    return w - s * (w - np.roll(w, 1))


def upwind_step(state):
    """Advance one step of size ``state.dt``; refuses to step if CFL fails."""
    _check_cfl(state.coefficient, state.dt, state.grid.dx)
    s = state.lam * state.coefficient.a
    w_new = _upwind_kernel(state.w.values, s)
    return replace(state, w=state.w.with_values(w_new),
                   time=state.time + state.dt, step=state.step + 1)


def _step_count(final_time, dt):
    ratio = final_time / dt
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest), 0.0
    n = int(math.floor(ratio))
    return n, final_time - n * dt


def solve_advection(w0, coefficient, final_time, theta_fraction=0.4,
                    snapshot_times=(), dt=None, callback=None):
    """Run the upwind scheme up to ``final_time``.

    The last step is shortened so the final state lands on ``final_time``.
    A snapshot requested at time ``t`` is the state ``w^n`` with the largest
    ``t^n <= t``; the initial state is always the first snapshot.
    ``callback(before, after)`` is invoked after every step with full
    :class:`AdvectionState` objects (slower; meant for diagnostics).
    """
    final_time = check_scalar(final_time, "final_time", lower=0.0)
    if dt is None:
        dt = cfl_dt(coefficient, w0.grid.dx, theta_fraction)
    state = initial_state(w0, coefficient, dt)
    n_full, remainder = _step_count(final_time, dt)
    total = n_full + (1 if remainder > 0 else 0)
    dx = w0.grid.dx
    pending = sorted(float(t) for t in snapshot_times if t > 0)
    snapshots = [state]

    w = w0.values.copy()
    s = (dt / dx) * coefficient.a
    for n in range(total):
        step_dt = remainder if n == n_full else dt
        t_next = final_time if n == total - 1 else (n + 1) * dt
        before = None
        if callback is not None or (pending and pending[0] < t_next):
            before = AdvectionState(w0.with_values(w), coefficient, n * dt, step_dt, n)
        if pending and pending[0] < t_next:
            if n > 0:
                snapshots.append(before)
            while pending and pending[0] < t_next:
                pending.pop(0)
        if step_dt == dt:
            w = _upwind_kernel(w, s)
        else:
            _check_cfl(coefficient, step_dt, dx)
            w = _upwind_kernel(w, (step_dt / dx) * coefficient.a)
        if callback is not None:
            callback(before, AdvectionState(w0.with_values(w), coefficient, t_next,
                                            dt, n + 1))
    final = AdvectionState(w0.with_values(w), coefficient, final_time, dt, total)
    if pending and total > 0:
        snapshots.append(final)
    last_dt = remainder if remainder > 0 else dt
    return Trajectory(final, snapshots, total, dt, last_dt)


def to_u(w, coefficient):
    """``u_j = w_j / a_j``."""
    return w.with_values(w.values / coefficient.a)


def from_u(u, coefficient):
    """``w_j = a_j u_j``."""
    return u.with_values(u.values * coefficient.a)


def conservation_sum(state):
    """Signed ``dx * sum w_j / a_j``; exactly invariant along a periodic solve."""
    return float(state.grid.dx * np.sum(state.w.values * state.coefficient.inverse))


def _check_consecutive(before, after):
    if before.grid != after.grid or before.coefficient is not after.coefficient:
        raise InvalidArgumentError("states belong to different problems")
    if after.step != before.step + 1:
        raise InvalidArgumentError(
            f"states are not consecutive (steps {before.step} and {after.step})")
    if not math.isclose(after.time, before.time + before.dt, rel_tol=1e-9,
                        abs_tol=1e-12 * before.dt):
        raise InvalidArgumentError("state times are not one step apart")


def entropy_tolerance(state, k, p):
    """Scale-aware zero for the entropy residual: ``1e-12 (1 + |k| + max|w|)^p``."""
    return 1e-12 * (1.0 + abs(k) + float(np.max(np.abs(state.w.values)))) ** p


def entropy_residual(state_before, state_after, k=0.0, p=1):
    """Per-cell residual of the discrete Kruzkov entropy inequality.

    ``R_j = (|w^{n+1}_j - k|^p - |w^n_j - k|^p) / a_j
    + lam (|w^n_j - k|^p - |w^n_{j-1} - k|^p)``, which is ``<= 0`` under CFL
    for ``p`` in {1, 2}.
    """
    p = check_norm_order(p, allowed=(1, 2))
    _check_consecutive(state_before, state_after)
    inv_a = state_before.coefficient.inverse
    eta_old = np.abs(state_before.w.values - k) ** p
    eta_new = np.abs(state_after.w.values - k) ** p
    flux_jump = eta_old - np.roll(eta_old, 1)
    r = (eta_new - eta_old) * inv_a + state_before.lam * flux_jump
    return state_before.w.with_values(r)


@dataclass(frozen=True)
class PropagationOperator:
    """Banded k-step operator: ``w^k_j = sum_m bands[j, m] * w^0_{j-m}``."""

    bands: np.ndarray
    steps: int
    lam: float

    def row_sums(self):
        return self.bands.sum(axis=1)

    def apply(self, w0):
        values = np.asarray(w0, dtype=np.float64)
        out = np.zeros_like(values)
        for m in range(self.steps + 1):
            out += self.bands[:, m] * np.roll(values, m)
        return out

    def to_dense(self):
        n = self.bands.shape[0]
        dense = np.zeros((n, n))
        rows = np.arange(n)
        for m in range(self.steps + 1):
            np.add.at(dense, (rows, (rows - m) % n), self.bands[:, m])
        return dense


def propagation_operator(coefficient, lam, steps, method="product"):
    """Weights expressing ``w^k`` as combinations of the initial cells.

    ``method="product"`` composes ``steps`` applications of the upwind step
    (``B^k[j, m] = (1 - s_j) B^{k-1}[j, m] + s_j B^{k-1}[j-1, m-1]`` with
    ``s_j = lam a_j``); this is the operator the solver actually applies.
    ``method="source_weighted"`` instead weights each term by
    ``s_l``/``1 - s_l`` of the source cell ``l = j - m``. For variable
    coefficients its rows do not sum to one; it is kept for comparison.
    """
    steps = check_scalar(steps, "steps", lower=0, integer=True)
    _check_cfl(coefficient, lam * coefficient.grid.dx, coefficient.grid.dx)
    s = lam * coefficient.a
    v = 1.0 - s
    n = s.shape[0]
    bands = np.zeros((n, steps + 1))
    bands[:, 0] = 1.0
    if method == "product":
        for k in range(1, steps + 1):
            prev = bands[:, :k].copy()
            bands[:, :k] = v[:, None] * prev
            bands[:, 1:k + 1] += s[:, None] * np.roll(prev, 1, axis=0)
    elif method == "source_weighted":
        # s_l, v_l with l = j - m, laid out on the band
        idx = (np.arange(n)[:, None] - np.arange(steps + 1)[None, :]) % n
        s_src, v_src = s[idx], v[idx]
        for k in range(1, steps + 1):
            prev = bands[:, :k].copy()
            bands[:, :k] = v_src[:, :k] * prev
            bands[:, 1:k + 1] += s_src[:, 1:k + 1] * np.roll(prev, 1, axis=0)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    return PropagationOperator(bands, steps, float(lam))


def trace_characteristic(a, x, t, substep=CHARACTERISTIC_SUBSTEP):
    """Integrate ``d eta/ds = a(eta)`` from ``x`` over signed time ``t`` with classical RK4.

    ``a`` is a vectorised callable; a non-positive speed anywhere along the
    path raises :class:`InvalidArgumentError`.
    """
    eta = np.array(x, dtype=np.float64, copy=True)
    if t == 0:
        return eta
    nsub = math.ceil(abs(t) / substep)
    h = t / nsub

    def speed(y):
        val = np.asarray(a(y), dtype=np.float64)
        if np.any(~(val > 0)):
            raise InvalidArgumentError("characteristic speed must be positive")
        return val

    for _ in range(nsub):
        k1 = speed(eta)
        k2 = speed(eta + 0.5 * h * k1)
        k3 = speed(eta + 0.5 * h * k2)
        k4 = speed(eta + h * k3)
        eta += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return eta


def characteristics_solve(w0, smooth_coefficient, t, query_points,
                          substep=CHARACTERISTIC_SUBSTEP):
    """Exact transport of ``w`` by tracing characteristics back to ``t = 0``.

    ``w`` is constant along ``dx/dt = a(x)``, so ``w(t, x) = w0(x0)`` where
    ``x0`` is the foot of the backward characteristic through ``(t, x)``.
    """
    t = check_scalar(t, "t", lower=0.0)
    feet = trace_characteristic(smooth_coefficient, query_points, -t, substep)
    return np.asarray(w0(feet), dtype=np.float64)
