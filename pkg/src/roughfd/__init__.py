"""Finite difference schemes for transport and acoustic waves with rough coefficients."""

__version__ = "0.1.0"

from roughfd.advection import (  # noqa: E402
    characteristics_solve,
    conservation_sum,
    entropy_residual,
    propagation_operator,
    solve_advection,
    upwind_step,
)
from roughfd.coefficients import (  # noqa: E402
    Coefficient,
    LogNormalSpec,
    WeierstrassSpec,
    coarsen,
    hat,
    lognormal_field,
    weierstrass,
)
from roughfd.convergence import (  # noqa: E402
    StudyConfig,
    observed_rate,
    refinement_study,
    relative_error,
)
from roughfd.exceptions import (  # noqa: E402
    ConfigError,
    DegenerateReferenceError,
    InvalidArgumentError,
    NumericError,
    PositivityViolationError,
    RoughFDError,
    StabilityViolationError,
)
from roughfd.grid import Grid, GridFunction, cell_average, make_grid  # noqa: E402
from roughfd.wave import solve_wave, wave_step, weighted_energy  # noqa: E402
