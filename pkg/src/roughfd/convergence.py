"""Mesh-refinement studies, observed and predicted convergence rates.

A study builds the coefficient and the initial data once on the reference
grid, block-averages them down to every resolution, solves, and compares
each solution with the reference solution restricted to its grid.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from roughfd import advection, wave
from roughfd._validation import check_scalar, check_unit_exponent
from roughfd.coefficients import (
    Coefficient,
    LogNormalSpec,
    WeierstrassSpec,
    coarsen,
    hat,
    lognormal_field,
    random_hats,
    weierstrass,
    weierstrass_cell_average,
)
from roughfd.exceptions import DegenerateReferenceError, InvalidArgumentError
from roughfd.grid import GridFunction, cell_average, make_grid, write_columns

__all__ = [
    "StudyConfig",
    "CoefficientSpec",
    "InitialDataSpec",
    "RateReport",
    "relative_error",
    "observed_rate",
    "theoretical_rate_advection",
    "theoretical_rate_wave",
    "refinement_study",
    "build_coefficient",
    "build_initial_data",
    "child_seeds",
    "gronwall_bound",
    "verify_gronwall",
]


def relative_error(approx, reference, m=1, root=True):
    """Percentage distance of ``approx`` from ``reference`` in the discrete ``L^m`` norm.

    The reference is block-averaged onto the grid of ``approx`` first. With
    ``root=True`` (the default) the result is
    ``100 * (sum |d|^m / sum |ref|^m)^(1/m)``, i.e. a ratio of norms;
    ``root=False`` drops the ``1/m`` power.
    """
    if m not in (1, 2):
        raise InvalidArgumentError(f"m must be 1 or 2, got {m!r}")
    na, nr = approx.grid.num_cells, reference.grid.num_cells
    if nr % na or not math.isclose(approx.grid.domain_length, reference.grid.domain_length):
        raise InvalidArgumentError(
            f"reference grid ({nr} cells) does not nest over {na} cells")
    ref = coarsen(reference, nr // na).values
    denom = np.sum(np.abs(ref) ** m)
    if denom == 0:
        raise DegenerateReferenceError("reference has zero norm")
    ratio = np.sum(np.abs(approx.values - ref) ** m) / denom
    if root and m != 1:
        ratio = ratio ** (1.0 / m)
    return float(100.0 * ratio)


def observed_rate(errors):
    """Mean of ``log2(E_k / E_{k+1})`` over consecutive halvings of ``dx``.

    Errors are ordered from coarse to fine; halving errors gives +1.
    """
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim != 1 or e.size < 2:
        raise InvalidArgumentError("need at least two errors")
    if np.any(~(e > 0)):
        raise InvalidArgumentError("errors must be strictly positive")
    return float(np.mean(np.log2(e[:-1] / e[1:])))


def theoretical_rate_advection(alpha, gamma):
    """Exponent ``gamma alpha / (gamma alpha + 2 - gamma)`` of the upwind error bound."""
    alpha = check_unit_exponent(alpha, "alpha")
    gamma = check_unit_exponent(gamma, "gamma")
    return gamma * alpha / (gamma * alpha + (2.0 - gamma))


def theoretical_rate_wave(alpha, gamma):
    """Exponent ``alpha gamma / (2 (alpha gamma + 1 - gamma))`` of the wave-scheme bound."""
    alpha = check_unit_exponent(alpha, "alpha")
    gamma = check_unit_exponent(gamma, "gamma")
    return alpha * gamma / (2.0 * (alpha * gamma + (1.0 - gamma)))


def gronwall_bound(x0, c1, c2, k):
    """``x0 + sqrt(c1) + c2 k``."""
    x0 = check_scalar(x0, "x0", lower=0.0)
    c1 = check_scalar(c1, "c1", lower=0.0)
    c2 = check_scalar(c2, "c2", lower=0.0)
    k = check_scalar(k, "k", lower=0, integer=True)
    return x0 + math.sqrt(c1) + c2 * k


def verify_gronwall(sequence, c1, c2):
    """True iff ``X_k^2 <= X_0^2 + c1 + c2 sum_{i<=k} X_i`` for every ``k``."""
    x = np.asarray(sequence, dtype=np.float64)
    if np.any(x < 0):
        raise InvalidArgumentError("sequence must be nonnegative")
    rhs = x[0] ** 2 + c1 + c2 * np.cumsum(x)
    return bool(np.all(x ** 2 <= rhs))


@dataclass(frozen=True)
class CoefficientSpec:
    """How to build the coefficient on the reference grid.

    ``kind`` is ``"lognormal"`` (parameters of :class:`LogNormalSpec`,
    seeded from the study seed), ``"smooth"`` (``mean + amplitude sin(pi x)``)
    or ``"constant"`` (``mean``).
    """

    kind: str = "lognormal"
    correlation_length: float = 0.1
    variance: float = 0.5
    mean_log: float = 0.0
    mean: float = 1.1
    amplitude: float = 0.5

    def __post_init__(self):
        if self.kind not in ("lognormal", "smooth", "constant"):
            raise InvalidArgumentError(f"unknown coefficient kind {self.kind!r}")

    def function(self):
        """The analytic coefficient (smooth/constant kinds only)."""
        if self.kind == "smooth":
            mean, amp = self.mean, self.amplitude
            return lambda x: mean + amp * np.sin(np.pi * np.asarray(x))
        if self.kind == "constant":
            mean = self.mean
            return lambda x: np.full_like(np.asarray(x, dtype=np.float64), mean)
        raise InvalidArgumentError("a lognormal coefficient has no closed form")

    @property
    def holder_exponent(self):
        return 0.5 if self.kind == "lognormal" else 1.0


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial data of a study.

    Advection kinds (``w0``): ``"hat"``, ``"weierstrass_hat"`` (hat times
    the shifted Weierstrass series with exponent ``gamma``), ``"smooth"``
    (``1 + 0.5 sin(pi x)``). Wave kinds (``u0, v0``): ``"trig"``
    (``cos 2 pi x, sin 2 pi x``), ``"hats"`` (``h, -h``), ``"random_hats"``
    (``count`` random hats, ``-h``).
    """

    kind: str = "weierstrass_hat"
    gamma: float = 0.5
    num_terms: int = 400
    count: int = 30

    ADVECTION_KINDS = ("hat", "weierstrass_hat", "smooth")
    WAVE_KINDS = ("trig", "hats", "random_hats")

    def __post_init__(self):
        if self.kind not in self.ADVECTION_KINDS + self.WAVE_KINDS:
            raise InvalidArgumentError(f"unknown initial data kind {self.kind!r}")

    @property
    def holder_exponent(self):
        """Hölder exponent of the data (1 for Lipschitz data)."""
        return self.gamma if self.kind == "weierstrass_hat" else 1.0


@dataclass(frozen=True)
class StudyConfig:
    """Complete description of a refinement study."""

    equation: str = "advection"
    coefficient: CoefficientSpec = field(default_factory=CoefficientSpec)
    initial_data: InitialDataSpec = field(default_factory=InitialDataSpec)
    resolutions: tuple = (32, 64, 128, 256, 512)
    reference_resolution: int = 4096
    final_time: float = 1.0
    cfl: float = 0.4
    seed: int = 0
    norms: tuple = (1, 2)
    domain_length: float = 2.0
    reference: str = "self"
    expected_rates: dict = field(default_factory=dict)
    band: float = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(int(n) for n in self.resolutions))
        object.__setattr__(self, "norms", tuple(int(m) for m in self.norms))
        if self.equation not in ("advection", "wave"):
            raise InvalidArgumentError(f"unknown equation {self.equation!r}")
        kinds = (InitialDataSpec.ADVECTION_KINDS if self.equation == "advection"
                 else InitialDataSpec.WAVE_KINDS)
        if self.initial_data.kind not in kinds:
            raise InvalidArgumentError(
                f"initial data {self.initial_data.kind!r} does not fit {self.equation}")
        if len(self.resolutions) < 2:
            raise InvalidArgumentError("need at least two resolutions")
        if any(b != 2 * a for a, b in zip(self.resolutions, self.resolutions[1:])):
            raise InvalidArgumentError("resolutions must double from one level to the next")
        ref = self.reference_resolution
        if ref < 2 * max(self.resolutions):
            raise InvalidArgumentError(
                "reference_resolution must be at least twice the finest resolution")
        if any(ref % n for n in self.resolutions):
            raise InvalidArgumentError("every resolution must divide reference_resolution")
        if self.reference not in ("self", "characteristics"):
            raise InvalidArgumentError(f"unknown reference {self.reference!r}")
        if self.reference == "characteristics" and (
                self.equation != "advection" or self.coefficient.kind == "lognormal"):
            raise InvalidArgumentError(
                "characteristics reference needs advection with a smooth coefficient")
        check_scalar(self.final_time, "final_time", lower=0.0)
        check_scalar(self.cfl, "cfl", lower=0.0, upper=1.0, include_lower=False)
        check_scalar(self.seed, "seed", lower=0, upper=2**63 - 1, integer=True)
        if any(m not in (1, 2) for m in self.norms):
            raise InvalidArgumentError("norms must be drawn from {1, 2}")

    @property
    def variables(self):
        return ("u", "w") if self.equation == "advection" else ("u", "v", "p")

    def to_dict(self):
        return asdict(self)


@dataclass
class RateReport:
    """Errors per resolution and observed/theoretical rates for every variable."""

    resolutions: list
    errors: dict
    observed_rates: dict
    theoretical_rate: float
    alpha: float
    gamma: float
    metadata: dict = field(default_factory=dict)
    self_convergence: bool = True
    invariants: dict = field(default_factory=dict)
    expected_rates: dict = field(default_factory=dict)
    band: float = None

    def rate(self, variable, m):
        return self.observed_rates[variable][m]

    def verdicts(self):
        """``{(variable, m): (observed, expected, within_band)}`` for every expected rate."""
        out = {}
        for key, expected in self.expected_rates.items():
            var, m = key
            obs = self.observed_rates[var][m]
            ok = None if self.band is None else abs(obs - expected) <= self.band
            out[key] = (obs, expected, ok)
        return out

    def to_csv(self, path):
        """One row per resolution, then a blank line and a summary block."""
        variables = list(self.errors)
        norms = sorted(next(iter(self.errors.values())))
        lines = []
        header = ["N_x", "dx"] + [f"error_L{m}_{v}" for v in variables for m in norms]
        lines.append(",".join(header))
        length = self.metadata.get("domain_length", 2.0)
        for i, n in enumerate(self.resolutions):
            row = [str(n), f"{length / n:.17g}"]
            row += [f"{self.errors[v][m][i]:.17g}" for v in variables for m in norms]
            lines.append(",".join(row))
        lines.append("")
        lines.append("variable,norm,observed_rate,theoretical_rate,expected_rate,band,verdict")
        for v in variables:
            for m in norms:
                obs = self.observed_rates[v][m]
                exp = self.expected_rates.get((v, m))
                if exp is None or self.band is None:
                    verdict = "n/a"
                else:
                    verdict = "pass" if abs(obs - exp) <= self.band else "fail"
                lines.append(",".join([
                    v, str(m), f"{obs:.17g}", f"{self.theoretical_rate:.17g}",
                    "" if exp is None else f"{exp:.17g}",
                    "" if self.band is None else f"{self.band:.17g}", verdict]))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_loglog(self, directory):
        """Write ``loglog_<var>_L<m>.dat`` files with columns ``dx error``."""
        from pathlib import Path

        length = self.metadata.get("domain_length", 2.0)
        paths = []
        for v, per_norm in self.errors.items():
            for m, errs in per_norm.items():
                path = Path(directory) / f"loglog_{v}_L{m}.dat"
                with open(path, "w") as fh:
                    fh.write(f"# dx relative_error_L{m}_{v}\n")
                    for n, e in zip(self.resolutions, errs):
                        fh.write(f"{length / n:.17g} {e:.17g}\n")
                paths.append(path)
        return paths


def child_seeds(seed, count=2):
    """Independent 64-bit seeds derived from the study seed."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(count)]


def build_coefficient(spec, grid, seed):
    if spec.kind == "lognormal":
        field_spec = LogNormalSpec(spec.correlation_length, spec.variance, spec.mean_log,
                                   child_seeds(seed)[0])
        return lognormal_field(field_spec, grid)
    return Coefficient.from_function(spec.function(), grid,
                                     holder_exponent_hint=spec.holder_exponent)


def _smooth_w0(x):
    return 1.0 + 0.5 * np.sin(np.pi * np.asarray(x))


def build_initial_data(spec, grid, seed):
    """Cell-averaged initial data on ``grid``: ``(w0,)`` or ``(u0, v0)``."""
    kind = spec.kind
    if kind == "hat":
        return (cell_average(hat, grid),)
    if kind == "weierstrass_hat":
        wspec = WeierstrassSpec(spec.gamma, spec.num_terms)
        if grid.num_cells % 4 == 0 and grid.domain_length == 2.0:
            return (weierstrass_cell_average(wspec, grid, weight=hat),)
        return (cell_average(lambda x: hat(x) * weierstrass(wspec, x), grid),)
    if kind == "smooth":
        return (cell_average(_smooth_w0, grid),)
    neg_hat = cell_average(lambda x: -hat(x), grid)
    if kind == "trig":
        return (cell_average(lambda x: np.cos(2 * np.pi * x), grid),
                cell_average(lambda x: np.sin(2 * np.pi * x), grid))
    if kind == "hats":
        return cell_average(hat, grid), neg_hat
    if kind == "random_hats":
        return cell_average(random_hats(spec.count, child_seeds(seed)[1]), grid), neg_hat
    raise InvalidArgumentError(f"unknown initial data kind {kind!r}")


def initial_data_function(spec):
    """Analytic ``w0`` for advection kinds (used by the characteristics reference)."""
    if spec.kind == "smooth":
        return _smooth_w0
    if spec.kind == "hat":
        return hat
    wspec = WeierstrassSpec(spec.gamma, spec.num_terms)
    return lambda x: hat(x) * weierstrass(wspec, x)


def _solve_level(config, coefficient, data):
    """Solve on one grid and return ``({variable: GridFunction}, invariants)``."""
    if config.equation == "advection":
        (w0,) = data
        tr = advection.solve_advection(w0, coefficient, config.final_time, config.cfl)
        final = tr.final
        c0 = advection.conservation_sum(advection.AdvectionState(
            w0, coefficient, 0.0, tr.nominal_dt))
        checks = {
            "max_principle": bool(np.max(np.abs(final.w.values))
                                  <= np.max(np.abs(w0.values)) * (1 + 1e-12)),
            "conservation": bool(abs(advection.conservation_sum(final) - c0)
                                 <= 1e-12 * max(abs(c0), 1e-300) * max(1, tr.num_steps) ** 0.5
                                 + 1e-14),
        }
        return {"u": final.u, "w": final.w}, checks
    u0, v0 = data
    tr = wave.solve_wave(u0, v0, coefficient, config.final_time, config.cfl)
    final = tr.final
    first = tr.snapshots[0]
    checks = {"energy_nonincreasing": bool(
        wave.weighted_energy(final) <= wave.weighted_energy(first) * (1 + 1e-12))}
    return {"u": final.u, "v": final.v, "p": final.p}, checks


def _characteristics_reference(config, coefficient_fn, finest_grid, subsamples=8):
    """Exact solution cell averages on ``finest_grid`` via characteristics."""
    w0 = initial_data_function(config.initial_data)
    n = finest_grid.num_cells
    x = ((np.arange(n)[:, None] * subsamples + np.arange(subsamples)[None, :] + 0.5)
         * (finest_grid.dx / subsamples)).ravel()
    w = advection.characteristics_solve(w0, coefficient_fn, config.final_time, x)
    a = coefficient_fn(x)
    w_avg = w.reshape(n, subsamples).mean(axis=1)
    u_avg = (w / a).reshape(n, subsamples).mean(axis=1)
    return {"w": GridFunction(finest_grid, w_avg), "u": GridFunction(finest_grid, u_avg)}


def refinement_study(config, n_jobs=1):
    """Run every resolution of ``config`` and measure errors and rates."""
    length = config.domain_length
    ref_grid = make_grid(length, config.reference_resolution)
    coefficient = build_coefficient(config.coefficient, ref_grid, config.seed)
    data = build_initial_data(config.initial_data, ref_grid, config.seed)
    nref = config.reference_resolution

    def level(n):
        factor = nref // n
        coef = coefficient.coarsen(factor)
        return _solve_level(config, coef, tuple(coarsen(d, factor) for d in data))

    levels = list(config.resolutions)
    self_convergence = config.reference == "self"
    if self_convergence:
        levels.append(nref)
    if n_jobs == 1:
        results = [level(n) for n in levels]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(level, levels))

    if self_convergence:
        reference = results[-1][0]
        results = results[:-1]
    else:
        finest = make_grid(length, max(config.resolutions))
        reference = _characteristics_reference(config, config.coefficient.function(), finest)

    errors = {v: {m: [] for m in config.norms} for v in config.variables}
    for solution, _ in results:
        for v in config.variables:
            for m in config.norms:
                errors[v][m].append(relative_error(solution[v], reference[v], m))
    rates = {v: {m: observed_rate(errors[v][m]) for m in config.norms}
             for v in config.variables}

    alpha = config.coefficient.holder_exponent
    gamma = config.initial_data.holder_exponent
    if config.equation == "advection":
        theory = theoretical_rate_advection(alpha, gamma)
    else:
        theory = theoretical_rate_wave(alpha, gamma)
    invariants = {n: checks for n, (_, checks) in zip(config.resolutions, results)}
    metadata = {
        "seed": config.seed,
        "final_time": config.final_time,
        "cfl": config.cfl,
        "reference_resolution": nref,
        "domain_length": length,
        "coefficient_lower_bound": coefficient.lower_bound,
        "coefficient_upper_bound": coefficient.upper_bound,
        "label": config.label,
    }
    return RateReport(list(config.resolutions), errors, rates, theory, alpha, gamma,
                      metadata, self_convergence, invariants,
                      dict(config.expected_rates), config.band)
