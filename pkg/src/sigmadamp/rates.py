"""
Decay-rate fitting, the predicted-rate tables and a continuum backend.

The continuum backend evaluates whole-space L2 norms of the linear solution
directly in frequency space for radial data,

    ||K(t, D) u1||^2 = (2 pi)^(-n) |S^(n-1)| int_0^inf |K(t, r)|^2 |u1_hat(r)|^2 r^(n-1) dr,

so long-time polynomial decay is not masked by the spectral gap of a box.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .observables import ObservableSeries
from .propagator import duhamel_kernel, kernel_time_derivative

__all__ = [
    "RateModel",
    "RateTarget",
    "RateReport",
    "RadialData",
    "Multiplier",
    "ConditionViolation",
    "QuadratureError",
    "FitError",
    "fit_rate",
    "continuum_l2_norm",
    "continuum_series",
    "theorem_rate_table",
    "check_semilinear_u_conditions",
]


class RateModel(enum.Enum):
    POLYNOMIAL = "polynomial"
    EXPONENTIAL = "exponential"


class FitError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


class ConditionViolation(ValueError):
    """The requested model/parameters fall outside the theorem's hypotheses."""

    def __init__(self, model: str, violations: list[str]):
        self.model = model
        self.violations = list(violations)
        super().__init__(f"{model}: " + "; ".join(self.violations))


@dataclass(frozen=True)
class RateTarget:
    """Predicted decay of one observable.

    For POLYNOMIAL the exponent e means (1+t)^(-e); for EXPONENTIAL the rate
    r means exp(-r t).  `comparison` is "sharp" (|fitted - e| <= tol) or
    "at_least" (fitted >= e - tol, decay at least as fast as predicted).
    """

    observable: str
    model: RateModel
    exponent: float
    source: str
    tolerance: float = 0.02
    comparison: str = "sharp"

    def __post_init__(self):
        object.__setattr__(self, "model", RateModel(self.model))
        if not math.isfinite(self.exponent):
            raise ValueError("exponent must be finite")
        if not self.source:
            raise ValueError("source must be nonempty")
        if self.comparison not in ("sharp", "at_least"):
            raise ValueError(f"unknown comparison {self.comparison!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def accepts(self, fitted: float) -> bool:
        if self.comparison == "sharp":
            return abs(fitted - self.exponent) <= self.tolerance
        return fitted >= self.exponent - self.tolerance

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "model": self.model.value,
            "exponent": self.exponent,
            "source": self.source,
            "tolerance": self.tolerance,
            "comparison": self.comparison,
        }


@dataclass(frozen=True)
class RateReport:
    """Result of a log-coordinate least-squares fit.

    `slope` is the raw regression slope (negative for decay); `fitted` is the
    decay exponent or rate, i.e. -slope, which is what targets compare to.
    """

    observable: str
    model: RateModel
    fitted: float
    slope: float
    intercept: float
    residual: float
    window: tuple[float, float]
    samples: int
    target: RateTarget | None = None

    @property
    def passed(self) -> bool | None:
        return None if self.target is None else self.target.accepts(self.fitted)

    @property
    def verdict(self) -> str:
        p = self.passed
        return "n/a" if p is None else ("pass" if p else "fail")

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "model": self.model.value,
            "fitted": self.fitted,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "window": list(self.window),
            "samples": self.samples,
            "target": None if self.target is None else self.target.to_dict(),
            "verdict": self.verdict,
        }


def fit_rate(
    series: ObservableSeries,
    model: RateModel | str,
    window: tuple[float, float],
    target: RateTarget | None = None,
    min_samples: int = 10,
) -> RateReport:
    """Ordinary least squares of log(value) against log(1+t) or t."""
    model = RateModel(model)
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise FitError(f"empty window ({lo}, {hi})")
    t = series.times
    v = series.values
    m = (t >= lo) & (t <= hi)
    tw, vw = t[m], v[m]
    if tw.size < min_samples:
        raise FitError(
            f"{series.name}: {tw.size} samples in window [{lo}, {hi}], need {min_samples}"
        )
    bad = ~(np.isfinite(vw) & (vw > 0))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise FitError(f"{series.name}: value {float(vw[i])!r} at t = {float(tw[i])!r} is not positive")
    x = np.log1p(tw) if model is RateModel.POLYNOMIAL else tw
    y = np.log(vw)
    a = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(a, y, rcond=None)
    res = y - (slope * x + icpt)
    rms = float(np.sqrt(np.mean(res**2)))
    if target is not None and (target.observable != series.name or target.model is not model):
        raise FitError(f"target {target.observable}/{target.model.value} does not match the fit")
    return RateReport(
        series.name, model, float(-slope), float(slope), float(icpt), rms,
        (float(tw[0]), float(tw[-1])), int(tw.size), target,
    )


# ---------------------------------------------------------------------------
# continuum backend

_SPHERE = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


@dataclass(frozen=True)
class RadialData:
    """Radial initial velocity u1 on R^n.

    profile "gaussian":           u1 = A exp(-|x|^2 / (2 w^2))
    profile "laplacian_gaussian": u1 = -Delta of the Gaussian above (mean zero)
    """

    n: int
    sigma: float
    amplitude: float = 1.0
    width: float = 1.0
    profile: str = "gaussian"

    def __post_init__(self):
        if self.n not in _SPHERE:
            raise ValueError(f"n must be 1, 2 or 3, got {self.n}")
        if not (self.sigma > 0 and self.width > 0):
            raise ValueError("sigma and width must be positive")
        if self.profile not in ("gaussian", "laplacian_gaussian"):
            raise ValueError(f"unknown profile {self.profile!r}")

    def hat(self, r):
        """Fourier transform (convention int f e^{-i x xi} dx) at |xi| = r."""
        w = self.width
        g = self.amplitude * (2 * math.pi * w * w) ** (self.n / 2) * np.exp(-0.5 * (w * r) ** 2)
        return g * r * r if self.profile == "laplacian_gaussian" else g

    @property
    def vanishes_at_origin(self) -> bool:
        return self.profile == "laplacian_gaussian"

    def cutoff(self) -> float:
        """Radius beyond which |u1_hat|^2 is below 1e-40 of its scale."""
        return math.sqrt(2 * 92.0) / self.width + (4.0 / self.width if self.vanishes_at_origin else 0.0)


_SELECTOR = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


@dataclass(frozen=True)
class Multiplier:
    """Fourier multiplier K(t, |xi|) of a linear observable.

    kinds: u, ut, elastic(a), dtk_frac(a, k), q_combo, diff_combo,
    ut_plus_u, utt_combo, inv_combo.
    """

    kind: str
    a: float = 0.0
    k: int = 0

    _KINDS = ("u", "ut", "elastic", "dtk_frac", "q_combo", "diff_combo", "ut_plus_u", "utt_combo", "inv_combo")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown multiplier {self.kind!r}; choose from {self._KINDS}")
        if self.a < 0 or self.k < 0:
            raise ValueError("a and k must be >= 0")

    @classmethod
    def parse(cls, which) -> Multiplier:
        """Accepts a Multiplier, a tuple (kind, a[, k]) or text like 'elastic(1)'."""
        if isinstance(which, Multiplier):
            return which
        if isinstance(which, tuple):
            kind, *args = which
        else:
            m = _SELECTOR.match(str(which))
            if not m:
                raise ValueError(f"cannot parse multiplier {which!r}")
            kind = m.group(1)
            args = [float(x) for x in m.group(2).split(",")] if m.group(2) else []
        if kind == "elastic":
            return cls(kind, a=float(args[0]) if args else 0.0)
        if kind == "dtk_frac":
            if len(args) != 2:
                raise ValueError("dtk_frac needs (a, k)")
            return cls(kind, a=float(args[0]), k=int(args[1]))
        if args:
            raise ValueError(f"multiplier {kind!r} takes no arguments")
        return cls(kind)

    def __call__(self, t: float, r, sigma: float):
        r = np.asarray(r, dtype=float)
        mu = r ** (2 * sigma)
        et = math.exp(-t)
        kind = self.kind
        if kind == "q_combo":
            return np.full_like(r, et)
        if kind == "utt_combo":
            return np.full_like(r, -et)
        if kind == "ut_plus_u":
            return np.exp(-mu * t)
        if kind == "inv_combo":
            with np.errstate(divide="ignore"):
                return et / mu
        d = duhamel_kernel(mu, t)
        if kind == "u":
            return d
        if kind == "ut":
            return et - mu * d
        if kind == "diff_combo":
            return et - 2 * mu * d
        if kind == "elastic":
            return r**self.a * d
        return r**self.a * kernel_time_derivative(mu, t, self.k)


def continuum_l2_norm(data: RadialData, which, t: float, rtol: float = 1e-10) -> float:
    """Whole-space L2 norm of the selected linear observable at time t
    for data u0 = 0, u1 = data."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    mult = Multiplier.parse(which)
    if mult.kind == "inv_combo" and not data.vanishes_at_origin and data.n <= 4 * data.sigma:
        raise ValueError("inv_combo needs data whose transform vanishes at the origin")
    n, s = data.n, data.sigma

    def f(r):
        k = mult(t, r, s)
        h = data.hat(r)
        if mult.kind == "inv_combo":
            # K * u1_hat with K = e^{-t}/r^(2s); finite as r -> 0
            val = float(k * h) if r > 0 else 0.0
            return val * val * r ** (n - 1)
        return float(k * k * h * h * r ** (n - 1))

    rmax = data.cutoff()
    pts = {rmax, min(1.0, rmax)}
    if t > 0:
        rt = t ** (-1.0 / (2 * s))
        for c in (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
            pts.add(min(c * rt, rmax))
    edges = sorted(p for p in pts if p > 0)
    edges = [0.0] + edges
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        val, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
        total += val
        err += e
    if total > 0 and err > rtol * total:
        raise QuadratureError(f"quadrature reached relative error {err / total:.2e} > {rtol:.1e}")
    if total == 0 and err > 0:
        raise QuadratureError(f"quadrature absolute error {err:.2e} on a zero integral")
    return math.sqrt(_SPHERE[n] * total / (2 * math.pi) ** n)


def continuum_series(data: RadialData, which, times) -> ObservableSeries:
    mult = Multiplier.parse(which)
    name = mult.kind if mult.kind not in ("elastic", "dtk_frac") else f"{mult.kind}({mult.a:g},{mult.k})"
    times = np.asarray(times, dtype=float)
    return ObservableSeries(name, times, np.array([continuum_l2_norm(data, mult, t) for t in times]))


# ---------------------------------------------------------------------------
# predicted rates


def check_semilinear_u_conditions(n: int, sigma: float, p: float) -> list[str]:
    """Hypotheses on (n, sigma, p) for global small-data solutions with |u|^p."""
    out = []
    if n <= 2 * sigma:
        if p < 2:
            out.append(f"p >= 2 is required when n <= 2*sigma (got p = {p:g})")
    elif n <= 4 * sigma:
        top = n / (n - 2 * sigma)
        if not 2 <= p <= top:
            out.append(f"2 <= p <= n/(n - 2*sigma) = {top:g} is required when 2*sigma < n <= 4*sigma (got p = {p:g})")
    else:
        out.append(f"n <= 4*sigma is required (got n = {n}, sigma = {sigma:g})")
    fujita = 1 + 2 * sigma / n
    if not p > fujita:
        out.append(f"p > 1 + 2*sigma/n = {fujita:g} is required, the Fujita exponent (got p = {p:g})")
    return out


def theorem_rate_table(n: int, sigma: float, p: float | None, model_id: str) -> list[RateTarget]:
    """Predicted decay for the observables of a run.

    model_id: linear, semilinear_u (|u|^p), semilinear_q (|u_t + (-D)^s u|^p)
    or semilinear_ut_plus_u (experimental; no prediction, empty list).
    """
    poly, expo = RateModel.POLYNOMIAL, RateModel.EXPONENTIAL
    base = n / (4 * sigma)
    violations = []
    if sigma < 1:
        violations.append(f"sigma >= 1 is required (got sigma = {sigma:g})")
    if model_id != "linear" and (p is None or not p > 1):
        violations.append(f"p > 1 is required (got p = {p})")
    if model_id == "semilinear_u" and p is not None:
        violations += check_semilinear_u_conditions(n, sigma, p)
    if model_id not in ("linear", "semilinear_u", "semilinear_q", "semilinear_ut_plus_u"):
        raise ValueError(f"unknown model {model_id!r}")
    if violations:
        raise ConditionViolation(model_id, violations)

    if model_id == "linear":
        src = "linear decay, L1 and L2 data"
        return [
            RateTarget("u_L2", poly, base, src),
            RateTarget("ut_L2", poly, base + 1, src),
            RateTarget("elastic_L2", poly, base + 0.5, src),
            RateTarget("lap_u_L2", poly, base + 1, src),
            RateTarget("ut_minus_lap_u_L2", poly, base + 1, src),
            RateTarget("ut_plus_u_L2", poly, base, "diffusion factor of u_t + u"),
            RateTarget("Q_L2", expo, 1.0, "w = exp(-t) u1", tolerance=1e-6),
            RateTarget("utt_combo_L2", expo, 1.0, "w_t = -exp(-t) u1", tolerance=1e-6),
        ]
    if model_id == "semilinear_u":
        src = "|u|^p, small L1 and L2 data"
        return [
            RateTarget("u_L2", poly, base, src, tolerance=0.15),
            RateTarget("ut_L2", poly, base + 1, src, tolerance=0.15),
            RateTarget("elastic_L2", poly, base + 0.5, src, tolerance=0.15),
            RateTarget("Q_L2", poly, n * p / (2 * sigma) - base, src, tolerance=0.3),
        ]
    if model_id == "semilinear_q":
        src = "|u_t + (-D)^s u|^p, small L2 and Linf data"
        return [
            RateTarget("u_L2", poly, 0.0, src, tolerance=0.05, comparison="at_least"),
            RateTarget("ut_L2", poly, 1.0, src, tolerance=0.1, comparison="at_least"),
            RateTarget("elastic_L2", poly, 0.5, src, tolerance=0.1, comparison="at_least"),
            RateTarget("Q_L2", expo, 1.0, src, tolerance=0.02),
            RateTarget("Q_Linf", expo, 1.0, src, tolerance=0.02),
        ]
    return []
