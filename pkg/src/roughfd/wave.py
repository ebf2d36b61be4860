"""Diffusive centered scheme for the first-order acoustic system.

Solves ``u_t = v_x``, ``v_t / a = u_x`` (``u = p_x``, ``v = p_t``) with

    u^{n+1} = u + dt (Dc v + dx/2 D+D- u)
    v^{n+1} = v + a dt (Dc u + dx/2 D+D- v)

on collocated cell centers. Under the time-step restriction of
:func:`cfl_dt_wave` the weighted energy ``dx sum u^2 + v^2/a`` does not
grow. The pressure ``p`` is integrated alongside by forward Euler.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from roughfd._validation import CFL_SLACK, check_scalar, check_unit_exponent
from roughfd.advection import Trajectory, _step_count
from roughfd.exceptions import InvalidArgumentError, StabilityViolationError
from roughfd.grid import (
    GridFunction,
    backward_difference,
    central_difference,
    forward_difference,
)

__all__ = [
    "WaveState",
    "EnergyRecord",
    "FractionalBoundsReport",
    "cfl_dt_wave",
    "wave_cfl_factor",
    "wave_step",
    "solve_wave",
    "energy",
    "weighted_energy",
    "wave_entropy_residual",
    "wave_entropy_tolerance",
    "qer_identity_check",
    "fractional_bounds",
    "reconstruct_pressure",
]


@dataclass(frozen=True, eq=False)
class WaveState:
    """``(u^n, v^n)`` plus the pressure integrated so far and the next step size."""

    u: GridFunction
    v: GridFunction
    coefficient: object
    time: float
    dt: float
    step: int = 0
    p: GridFunction = None

    def __post_init__(self):
        if self.u.grid != self.v.grid or self.u.grid != self.coefficient.grid:
            raise InvalidArgumentError("u, v and the coefficient must share one grid")
        if self.p is None:
            object.__setattr__(self, "p", self.u.with_values(np.zeros(len(self.u))))

    @property
    def grid(self):
        return self.u.grid


@dataclass(frozen=True)
class EnergyRecord:
    total_energy: float
    flux_divergence_check: float
    k: float = 0.0
    ell: float = 0.0


@dataclass
class FractionalBoundsReport:
    """Per-step fractional difference energies and the bounds they must respect."""

    gamma: float
    time_energy: np.ndarray
    space_energy: np.ndarray
    time_bound: float
    space_bound: float
    time_nonincreasing: bool = field(default=False)

    @property
    def max_time_energy(self):
        return float(self.time_energy.max())

    @property
    def max_space_energy(self):
        return float(self.space_energy.max())

    @property
    def holds(self):
        tol = 1e-10
        return (self.max_time_energy <= self.time_bound * (1 + tol) + 1e-300
                and self.max_space_energy <= self.space_bound * (1 + tol) + 1e-300)


def wave_cfl_factor(coefficient):
    """``max_j max(2 a_j + 1, a_j / 4 + 5 / 4)``, evaluated at the upper bound.

    Both branches increase with ``a``, so this equals the maximum over
    cells when the bound is tight.
    """
    a = coefficient.upper_bound
    return max(2.0 * a + 1.0, 0.25 * a + 1.25)


def cfl_dt_wave(coefficient, dx, safety=1.0):
    """``safety * dx / (2 max_j max(2 a_j + 1, a_j/4 + 5/4))``."""
    safety = check_scalar(safety, "safety", lower=0.0, upper=1.0, include_lower=False)
    return safety * dx / (2.0 * wave_cfl_factor(coefficient))


def _check_cfl(coefficient, dt, dx):
    if not dt > 0:
        raise StabilityViolationError(f"time step must be positive, got {dt!r}")
    lhs = 2.0 * dt * wave_cfl_factor(coefficient)
    if lhs > dx * (1.0 + CFL_SLACK):
        raise StabilityViolationError(f"wave CFL violated: {lhs!r} > dx = {dx!r}")


def _rates(u, v, a, dx):
    """Right-hand sides ``(D_t u, D_t v)`` of the scheme on raw arrays."""
    half = 0.5 * dx
    du = central_difference(v, dx) + half * forward_difference(backward_difference(u, dx), dx)
    dv = a * (central_difference(u, dx)
              + half * forward_difference(backward_difference(v, dx), dx))
    return du, dv


def wave_step(state):
    """Advance ``(u, v, p)`` by ``state.dt``; refuses to step if the CFL bound fails."""
    dx = state.grid.dx
    _check_cfl(state.coefficient, state.dt, dx)
    u, v = state.u.values, state.v.values
    du, dv = _rates(u, v, state.coefficient.a, dx)
    return replace(
        state,
        u=state.u.with_values(u + state.dt * du),
        v=state.v.with_values(v + state.dt * dv),
        p=state.p.with_values(state.p.values + state.dt * v),
        time=state.time + state.dt,
        step=state.step + 1,
    )


def solve_wave(u0, v0, coefficient, final_time, safety=1.0, snapshot_times=(),
               p0=None, dt=None, callback=None):
    """Iterate :func:`wave_step` up to ``final_time`` (last step shortened).

    Snapshot semantics follow :func:`roughfd.advection.solve_advection`.
    ``p0`` defaults to zero.
    """
    final_time = check_scalar(final_time, "final_time", lower=0.0)
    dx = u0.grid.dx
    if dt is None:
        dt = cfl_dt_wave(coefficient, dx, safety)
    _check_cfl(coefficient, dt, dx)
    if p0 is None:
        p0 = u0.with_values(np.zeros(len(u0)))
    first = WaveState(u0, v0, coefficient, 0.0, float(dt), 0, p0)
    n_full, remainder = _step_count(final_time, dt)
    total = n_full + (1 if remainder > 0 else 0)
    pending = sorted(float(t) for t in snapshot_times if t > 0)
    snapshots = [first]
    a = coefficient.a

    u, v, p = u0.values.copy(), v0.values.copy(), p0.values.copy()

    def as_state(time, step_dt, n):
        return WaveState(u0.with_values(u), v0.with_values(v), coefficient, time,
                         step_dt, n, p0.with_values(p))

    for n in range(total):
        step_dt = remainder if n == n_full else dt
        t_next = final_time if n == total - 1 else (n + 1) * dt
        before = None
        if callback is not None or (pending and pending[0] < t_next):
            before = as_state(n * dt, step_dt, n)
        if pending and pending[0] < t_next:
            if n > 0:
                snapshots.append(before)
            while pending and pending[0] < t_next:
                pending.pop(0)
        if step_dt != dt:
            _check_cfl(coefficient, step_dt, dx)
        du, dv = _rates(u, v, a, dx)
        p = p + step_dt * v
        u = u + step_dt * du
        v = v + step_dt * dv
        if callback is not None:
            callback(before, as_state(t_next, dt, n + 1))
    final = as_state(final_time, dt, total)
    if pending and total > 0:
        snapshots.append(final)
    return Trajectory(final, snapshots, total, dt, remainder if remainder > 0 else dt)


def weighted_energy(state):
    """``dx sum_j u_j^2 + v_j^2 / a_j`` (twice the entropy with ``k = l = 0``)."""
    u, v = state.u.values, state.v.values
    return float(state.grid.dx * np.sum(u * u + v * v * state.coefficient.inverse))


def energy(state, k=0.0, ell=0.0):
    """Total discrete entropy ``dx sum eta_j`` and the summed flux divergence.

    ``eta_j = |u_j - k|^2 / 2 + |v_j - l|^2 / (2 a_j)``, ``q_j = -(u_j - k)(v_j - l)``.
    """
    dx = state.grid.dx
    uk = state.u.values - k
    vl = state.v.values - ell
    eta = 0.5 * uk * uk + 0.5 * vl * vl * state.coefficient.inverse
    q = -uk * vl
    return EnergyRecord(float(dx * np.sum(eta)),
                        float(dx * np.sum(central_difference(q, dx))), float(k), float(ell))


def _check_consecutive(before, after):
    if before.grid != after.grid or before.coefficient is not after.coefficient:
        raise InvalidArgumentError("states belong to different problems")
    if after.step != before.step + 1:
        raise InvalidArgumentError(
            f"states are not consecutive (steps {before.step} and {after.step})")
    if not math.isclose(after.time, before.time + before.dt, rel_tol=1e-9,
                        abs_tol=1e-12 * before.dt):
        raise InvalidArgumentError("state times are not one step apart")


def wave_entropy_tolerance(state, k=0.0, ell=0.0):
    """Scale-aware zero for per-cell entropy residuals.

    The residual carries difference quotients of squares, which scale like
    ``(1 + |k| + |l| + max|u| + max|v|)^2 * max(1, a) / dx``.
    """
    mag = 1.0 + abs(k) + abs(ell) + np.max(np.abs(state.u.values)) + np.max(
        np.abs(state.v.values))
    return 1e-12 * float(mag) ** 2 * max(1.0, state.coefficient.upper_bound,
                                         1.0 / state.coefficient.lower_bound) / state.grid.dx


def wave_entropy_residual(state_before, state_after, k=0.0, ell=0.0):
    """Per-cell residual of the discrete entropy inequality (``<= 0`` under CFL).

    ``R_j = D+_t eta_j + Dc q_j - dx (dt - dx)/2 D-[D+(u-k) D+(v-l)]
    - dx/4 D+D-[(u-k)^2 + (v-l)^2]``.
    """
    _check_consecutive(state_before, state_after)
    dx, dt = state_before.grid.dx, state_before.dt
    inv_a = state_before.coefficient.inverse

    def eta(s):
        uk, vl = s.u.values - k, s.v.values - ell
        return 0.5 * uk * uk + 0.5 * vl * vl * inv_a

    uk = state_before.u.values - k
    vl = state_before.v.values - ell
    dt_eta = (eta(state_after) - eta(state_before)) / dt
    flux = central_difference(-uk * vl, dx)
    cross = backward_difference(forward_difference(uk, dx) * forward_difference(vl, dx), dx)
    smoothing = forward_difference(backward_difference(uk * uk + vl * vl, dx), dx)
    r = dt_eta + flux - 0.5 * dx * (dt - dx) * cross - 0.25 * dx * smoothing
    return state_before.u.with_values(r)


def qer_identity_check(state_before, state_after):
    """Both sides of the algebraic identity linking time and space differences.

    ``lhs = sum |D+_t u|^2 + a^-2 |D+_t v|^2``;
    ``rhs = sum |Dc u|^2 + |Dc v|^2 + dx^2/4 (|D+D- u|^2 + |D+D- v|^2)``.
    """
    _check_consecutive(state_before, state_after)
    dx, dt = state_before.grid.dx, state_before.dt
    inv_a = state_before.coefficient.inverse
    u, v = state_before.u.values, state_before.v.values
    dtu = (state_after.u.values - u) / dt
    dtv = (state_after.v.values - v) / dt
    lhs = np.sum(dtu ** 2 + (inv_a * dtv) ** 2)
    lap_u = forward_difference(backward_difference(u, dx), dx)
    lap_v = forward_difference(backward_difference(v, dx), dx)
    rhs = np.sum(central_difference(u, dx) ** 2 + central_difference(v, dx) ** 2
                 + 0.25 * dx * dx * (lap_u ** 2 + lap_v ** 2))
    return float(lhs), float(rhs)


def fractional_bounds(states, gamma=1.0):
    """Fractional-order difference energies along consecutive equal-step states.

    For each step ``n`` this evaluates

    * ``T_n = dx sum |D+_{gamma,t} u|^2 + |D+_{gamma,t} v|^2 / a``
    * ``S_n = dx sum |Dc_{gamma,x} u|^2 + |Dc_{gamma,x} v|^2
      + dx^2/4 (|D+_{gamma,x} D- u|^2 + |D+_{gamma,x} D- v|^2)``

    and the bounds ``T_n <= C`` and ``S_n <= theta^(2 gamma - 2) max(1, 1/lower) C``
    with ``C = max(1, upper) dx sum |D+_{gamma,t} u^0|^2 + |D+_{gamma,t} v^0|^2 / a^2``
    and ``theta = dt/dx``.
    """
    gamma = check_unit_exponent(gamma)
    states = list(states)
    if len(states) < 2:
        raise InvalidArgumentError("need at least two consecutive states")
    for before, after in zip(states, states[1:]):
        _check_consecutive(before, after)
    dt = states[0].dt
    if any(not math.isclose(s.dt, dt, rel_tol=1e-12) for s in states[:-1]):
        raise InvalidArgumentError("fractional bounds need a uniform time step")
    coef = states[0].coefficient
    dx = states[0].grid.dx
    inv_a = coef.inverse
    ht, hx = dt ** gamma, dx ** gamma
    time_e, space_e = [], []
    for before, after in zip(states, states[1:]):
        dtu = (after.u.values - before.u.values) / ht
        dtv = (after.v.values - before.v.values) / ht
        time_e.append(dx * np.sum(dtu ** 2 + inv_a * dtv ** 2))
    for s in states[:-1]:
        u, v = s.u.values, s.v.values
        space_e.append(dx * np.sum(
            central_difference(u, hx) ** 2 + central_difference(v, hx) ** 2
            + 0.25 * dx * dx * (forward_difference(backward_difference(u, dx), hx) ** 2
                                + forward_difference(backward_difference(v, dx), hx) ** 2)))
    u0, v0 = states[0].u.values, states[0].v.values
    dtu0 = (states[1].u.values - u0) / ht
    dtv0 = (states[1].v.values - v0) / ht
    c = max(1.0, coef.upper_bound) * dx * np.sum(dtu0 ** 2 + (inv_a * dtv0) ** 2)
    theta = dt / dx
    space_bound = theta ** (2 * gamma - 2) * max(1.0, 1.0 / coef.lower_bound) * c
    time_e = np.array(time_e)
    nonincreasing = bool(np.all(np.diff(time_e) <= 1e-12 * max(time_e[0], 1e-300)))
    return FractionalBoundsReport(gamma, time_e, np.array(space_e), float(c),
                                  float(space_bound), nonincreasing)


def reconstruct_pressure(states, p0=None):
    """Forward-Euler pressure ``p^{n+1} = p^n + dt_n v^n`` over consecutive states.

    Returns one grid function per state (the first is ``p0``, zero by default).
    """
    states = list(states)
    if not states:
        raise InvalidArgumentError("no states given")
    for before, after in zip(states, states[1:]):
        _check_consecutive(before, after)
    if p0 is None:
        p0 = states[0].u.with_values(np.zeros(len(states[0].u)))
    out = [p0]
    p = p0.values
    for s in states[:-1]:
        p = p + s.dt * s.v.values
        out.append(p0.with_values(p))
    return out
