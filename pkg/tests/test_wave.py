import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughfd.coefficients import Coefficient, LogNormalSpec, lognormal_field
from roughfd.exceptions import InvalidArgumentError, StabilityViolationError
from roughfd.grid import GridFunction, cell_average, make_grid
from roughfd.wave import (
    WaveState,
    cfl_dt_wave,
    energy,
    fractional_bounds,
    qer_identity_check,
    reconstruct_pressure,
    solve_wave,
    wave_entropy_residual,
    wave_entropy_tolerance,
    wave_step,
    weighted_energy,
)


def const_coef(value, n, length=2.0):
    return Coefficient(GridFunction(make_grid(length, n), np.full(n, float(value))))


def random_state(seed, n=None, safety=1.0):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(4, 64))
    grid = make_grid(2.0, n)
    coef = Coefficient(GridFunction(grid, rng.uniform(0.5, 2.0, n)))
    u = GridFunction(grid, rng.uniform(-1, 1, n))
    v = GridFunction(grid, rng.uniform(-1, 1, n))
    dt = cfl_dt_wave(coef, grid.dx, safety)
    return WaveState(u, v, coef, 0.0, dt), rng


class TestCfl:
    def test_examples(self):
        assert cfl_dt_wave(const_coef(1.0, 4), 0.6) == pytest.approx(0.1)
        assert cfl_dt_wave(const_coef(4.0, 4), 0.9) == pytest.approx(0.05)
        c = const_coef(1.7, 4)
        assert cfl_dt_wave(c, 0.1, 0.5) == 0.5 * cfl_dt_wave(c, 0.1, 1.0)

    def test_small_coefficient_branch(self):
        # below a = 1/7 the a/4 + 5/4 branch dominates
        assert cfl_dt_wave(const_coef(0.1, 4), 1.0) == pytest.approx(1 / (2 * 1.275))

    def test_step_refuses(self):
        state, _ = random_state(0)
        with pytest.raises(StabilityViolationError):
            wave_step(WaveState(state.u, state.v, state.coefficient, 0.0, 2 * state.dt))


class TestStep:
    def test_golden_single_step(self):
        coef = const_coef(1.0, 4)
        grid = coef.grid
        u = GridFunction(grid, [0.0, 1.0, 0.0, 0.0])
        v = GridFunction(grid, np.zeros(4))
        out = wave_step(WaveState(u, v, coef, 0.0, grid.dx / 6))
        np.testing.assert_allclose(out.u.values, [1 / 12, 5 / 6, 1 / 12, 0.0], atol=1e-16)
        np.testing.assert_allclose(out.v.values, [1 / 12, 0.0, -1 / 12, 0.0], atol=1e-16)
        np.testing.assert_array_equal(out.p.values, 0.0)

    def test_constants_fixed(self):
        state, _ = random_state(1)
        n = state.grid.num_cells
        s = WaveState(state.u.with_values(np.full(n, 0.4)), state.v.with_values(np.full(n, -2.0)),
                      state.coefficient, 0.0, state.dt)
        out = wave_step(s)
        np.testing.assert_array_equal(out.u.values, 0.4)
        np.testing.assert_array_equal(out.v.values, -2.0)

    def test_solver_matches_repeated_steps(self):
        state, _ = random_state(2, n=32)
        tr = solve_wave(state.u, state.v, state.coefficient, 20 * state.dt)
        s = state
        for _ in range(20):
            s = wave_step(s)
        np.testing.assert_allclose(tr.final.u.values, s.u.values, rtol=1e-14, atol=1e-15)
        np.testing.assert_allclose(tr.final.p.values, s.p.values, rtol=1e-14, atol=1e-15)

    def test_mismatched_grids(self):
        state, _ = random_state(3, n=8)
        with pytest.raises(InvalidArgumentError):
            WaveState(state.u, GridFunction(make_grid(2.0, 4), np.zeros(4)),
                      state.coefficient, 0.0, state.dt)


class TestSolve:
    def test_zero_time(self):
        state, _ = random_state(4)
        tr = solve_wave(state.u, state.v, state.coefficient, 0.0)
        np.testing.assert_array_equal(tr.final.u.values, state.u.values)
        np.testing.assert_array_equal(tr.final.v.values, state.v.values)

    def test_zero_data(self):
        coef = lognormal_field(LogNormalSpec(seed=1), make_grid(2.0, 64))
        z = GridFunction(coef.grid, np.zeros(64))
        tr = solve_wave(z, z, coef, 0.5)
        assert not tr.final.u.values.any() and not tr.final.v.values.any()

    def test_lands_on_final_time(self):
        state, _ = random_state(5)
        tr = solve_wave(state.u, state.v, state.coefficient, 0.1234)
        assert tr.final.time == 0.1234

    def test_energy_decreases_every_step(self):
        g = make_grid(2.0, 256)
        coef = lognormal_field(LogNormalSpec(seed=0), g)
        u0 = cell_average(lambda x: np.cos(2 * np.pi * x), g)
        v0 = cell_average(lambda x: np.sin(2 * np.pi * x), g)
        energies = []
        solve_wave(u0, v0, coef, 0.5,
                   callback=lambda b, a: energies.append((weighted_energy(b),
                                                          weighted_energy(a))))
        assert all(after <= before * (1 + 1e-12) for before, after in energies)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32), st.floats(-3, 3), st.floats(-3, 3))
    def test_superposition(self, seed, alpha, beta):
        s1, rng = random_state(seed, n=24)
        u2 = s1.u.with_values(rng.uniform(-1, 1, 24))
        v2 = s1.v.with_values(rng.uniform(-1, 1, 24))
        c = s1.coefficient
        t = 30 * s1.dt
        a = solve_wave(s1.u, s1.v, c, t).final
        b = solve_wave(u2, v2, c, t).final
        mix = solve_wave(s1.u * alpha + u2 * beta, s1.v * alpha + v2 * beta, c, t).final
        scale = 1 + abs(alpha) + abs(beta)
        np.testing.assert_allclose(mix.u.values, alpha * a.u.values + beta * b.u.values,
                                   atol=1e-12 * scale)
        np.testing.assert_allclose(mix.v.values, alpha * a.v.values + beta * b.v.values,
                                   atol=1e-12 * scale)


class TestEnergy:
    def test_zero(self):
        state, _ = random_state(6)
        z = state.u.with_values(np.zeros(state.grid.num_cells))
        assert energy(WaveState(z, z, state.coefficient, 0.0, state.dt)).total_energy == 0.0

    def test_unit_u(self):
        coef = const_coef(1.0, 8)
        one = GridFunction(coef.grid, np.ones(8))
        zero = GridFunction(coef.grid, np.zeros(8))
        assert energy(WaveState(one, zero, coef, 0.0, 0.01)).total_energy == pytest.approx(1.0)

    @given(st.integers(0, 2**32), st.floats(-5, 5))
    def test_translation(self, seed, c):
        state, _ = random_state(seed)
        shifted = WaveState(state.u + c, state.v, state.coefficient, 0.0, state.dt)
        assert energy(shifted, k=c).total_energy == pytest.approx(
            energy(state).total_energy, rel=1e-12, abs=1e-12)

    @given(st.integers(0, 2**32))
    def test_flux_telescopes(self, seed):
        state, _ = random_state(seed)
        rec = energy(state, 0.3, -0.2)
        assert abs(rec.flux_divergence_check) <= 1e-12


class TestEntropyAndIdentity:
    def test_constant_state_zero_residual(self):
        state, _ = random_state(7)
        n = state.grid.num_cells
        s = WaveState(state.u.with_values(np.full(n, 0.5)), state.v.with_values(np.full(n, 0.25)),
                      state.coefficient, 0.0, state.dt)
        r = wave_entropy_residual(s, wave_step(s), 0.5, 0.25).values
        np.testing.assert_array_equal(r, 0.0)

    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 2**32))
    def test_random_sweep(self, seed):
        state, rng = random_state(seed)
        after = wave_step(state)
        for k, ell in [(0.0, 0.0)] + [tuple(rng.uniform(-2, 2, 2)) for _ in range(3)]:
            r = wave_entropy_residual(state, after, k, ell).values
            assert r.max() <= wave_entropy_tolerance(state, k, ell)

    @given(st.integers(0, 2**32))
    def test_divergence_terms_telescope(self, seed):
        state, _ = random_state(seed)
        after = wave_step(state)
        r = wave_entropy_residual(state, after).values
        dt_eta = (0.5 * (after.u.values ** 2 - state.u.values ** 2)
                  + 0.5 * (after.v.values ** 2 - state.v.values ** 2) * state.coefficient.inverse)
        assert np.sum(r) == pytest.approx(np.sum(dt_eta) / state.dt, rel=1e-9, abs=1e-9)

    def test_qer_zero(self):
        state, _ = random_state(8)
        z = state.u.with_values(np.zeros(state.grid.num_cells))
        s = WaveState(z, z, state.coefficient, 0.0, state.dt)
        assert qer_identity_check(s, wave_step(s)) == (0.0, 0.0)

    @given(st.integers(0, 2**32))
    def test_qer_unit_coefficient(self, seed):
        state, _ = random_state(seed)
        n = state.grid.num_cells
        c = const_coef(1.0, n)
        s = WaveState(state.u, state.v, c, 0.0, cfl_dt_wave(c, c.grid.dx))
        lhs, rhs = qer_identity_check(s, wave_step(s))
        assert lhs == pytest.approx(rhs, rel=1e-13)

    @given(st.integers(0, 2**32))
    def test_qer_rough_coefficient(self, seed):
        state, _ = random_state(seed)
        lhs, rhs = qer_identity_check(state, wave_step(state))
        assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_not_consecutive(self):
        state, _ = random_state(9)
        with pytest.raises(InvalidArgumentError):
            wave_entropy_residual(state, wave_step(wave_step(state)))


class TestFractionalBounds:
    def _trajectory(self, n=128, steps=40):
        g = make_grid(2.0, n)
        coef = lognormal_field(LogNormalSpec(seed=3), g)
        u0 = cell_average(lambda x: np.cos(2 * np.pi * x), g)
        v0 = cell_average(lambda x: np.sin(2 * np.pi * x), g)
        s = WaveState(u0, v0, coef, 0.0, cfl_dt_wave(coef, g.dx))
        out = [s]
        for _ in range(steps):
            s = wave_step(s)
            out.append(s)
        return out

    def test_constant_trajectory(self):
        state, _ = random_state(10)
        n = state.grid.num_cells
        s = WaveState(state.u.with_values(np.ones(n)), state.v.with_values(np.ones(n)),
                      state.coefficient, 0.0, state.dt)
        rep = fractional_bounds([s, wave_step(s), wave_step(wave_step(s))], 0.5)
        assert rep.max_time_energy == 0.0 and rep.max_space_energy == 0.0

    def test_gamma_one_is_plain_energy(self):
        states = self._trajectory(steps=3)
        rep = fractional_bounds(states, 1.0)
        s0, s1 = states[0], states[1]
        dtu = (s1.u.values - s0.u.values) / s0.dt
        dtv = (s1.v.values - s0.v.values) / s0.dt
        plain = s0.grid.dx * np.sum(dtu ** 2 + dtv ** 2 * s0.coefficient.inverse)
        assert rep.time_energy[0] == pytest.approx(plain, rel=1e-14)

    @pytest.mark.parametrize("gamma", [1.0, 0.5])
    def test_bounds_hold_for_h1_data(self, gamma):
        rep = fractional_bounds(self._trajectory(), gamma)
        assert rep.holds
        assert rep.time_nonincreasing

    def test_needs_two_states(self):
        state, _ = random_state(11)
        with pytest.raises(InvalidArgumentError):
            fractional_bounds([state], 1.0)


class TestPressure:
    def test_zero_velocity(self):
        coef = const_coef(1.0, 8)
        z = GridFunction(coef.grid, np.zeros(8))
        p0 = GridFunction(coef.grid, np.arange(8.0))
        tr = solve_wave(z, z, coef, 0.7, p0=p0)
        np.testing.assert_array_equal(tr.final.p.values, p0.values)

    def test_unit_velocity(self):
        coef = const_coef(1.0, 8)
        one = GridFunction(coef.grid, np.ones(8))
        tr = solve_wave(GridFunction(coef.grid, np.zeros(8)), one, coef, 0.7)
        np.testing.assert_allclose(tr.final.p.values, 0.7, rtol=1e-13)

    def test_reconstruct_matches_inline(self):
        state, _ = random_state(12, n=16)
        states = [state]
        for _ in range(10):
            states.append(wave_step(states[-1]))
        ps = reconstruct_pressure(states)
        np.testing.assert_allclose(ps[-1].values, states[-1].p.values, rtol=1e-14, atol=1e-15)

    def test_reconstruct_missing_step(self):
        state, _ = random_state(13)
        s2 = wave_step(wave_step(state))
        with pytest.raises(InvalidArgumentError):
            reconstruct_pressure([state, s2])
