"""Pseudospectral laboratory for the doubly damped sigma-evolution equation

    u_tt + (-Delta)^sigma u + u_t + (-Delta)^sigma u_t = F

on a periodic box: exact linear propagator, exponential time differencing
for power nonlinearities, decay-rate fitting and inequality checks.
"""

__version__ = "0.1.0"

from .spectral import (  # noqa: E402
    GridSpec,
    RealField,
    SpectralField,
    StatePair,
    forward_transform,
    inverse_transform,
    frac_laplacian,
    lq_norm,
)
from .propagator import ModeCoeffs, mode_coeffs, duhamel_kernel, evolve_linear, closed_form_w  # noqa: E402
from .evolver import (  # noqa: E402
    Nonlinearity,
    NonlinearityKind,
    EvolveConfig,
    BlowUp,
    OracleBlowUp,
    eval_nonlinearity,
    step_etd,
    evolve,
    bernoulli_oracle,
    picard_solve,
)
from .observables import ObservableSeries, observe  # noqa: E402
from .rates import RateModel, RateTarget, RateReport, RadialData, fit_rate, continuum_l2_norm, theorem_rate_table  # noqa: E402
from .inequalities import InequalityCheck, fgn_check, integral_ineq_1, integral_ineq_2  # noqa: E402

__all__ = [
    "GridSpec", "RealField", "SpectralField", "StatePair",
    "forward_transform", "inverse_transform", "frac_laplacian", "lq_norm",
    "ModeCoeffs", "mode_coeffs", "duhamel_kernel", "evolve_linear", "closed_form_w",
    "Nonlinearity", "NonlinearityKind", "EvolveConfig", "BlowUp", "OracleBlowUp",
    "eval_nonlinearity", "step_etd", "evolve", "bernoulli_oracle", "picard_solve",
    "ObservableSeries", "observe",
    "RateModel", "RateTarget", "RateReport", "RadialData", "fit_rate", "continuum_l2_norm", "theorem_rate_table",
    "InequalityCheck", "fgn_check", "integral_ineq_1", "integral_ineq_2",
]
