"""Numerical checks of the interpolation and convolution-in-time inequalities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .spectral import GridSpec, irfft_values, lq_norm, rfft_coeffs

__all__ = [
    "InequalityCheck",
    "fgn_theta",
    "random_bumps",
    "fgn_ratio",
    "fgn_check",
    "integral_ineq_1",
    "integral_ineq_2",
    "log_time_grid",
    "trend_slope",
]


@dataclass
class InequalityCheck:
    """Sup of LHS/RHS over an ensemble of trials (fields or times).

    `witness` identifies the trial attaining `worst_ratio`: a trial index
    for field ensembles, a time for the integral inequalities.
    """

    name: str
    worst_ratio: float
    trials: int
    parameters: dict
    witness: float
    ratios: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    trend: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "worst_ratio": self.worst_ratio,
            "trials": self.trials,
            "parameters": self.parameters,
            "witness": self.witness,
            "trend": self.trend,
        }


def trend_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of y against log(x); ~0 for a bounded quantity."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return 0.0
    return float(np.polyfit(np.log(x), y, 1)[0])


# ---------------------------------------------------------------------------
# fractional Gagliardo-Nirenberg


def fgn_theta(n: int, sigma: float, q: float, s: float) -> float:
    return (n / sigma) * (0.5 - 1.0 / q + s / n)


def random_bumps(
    grid: GridSpec,
    rng: np.random.Generator,
    max_bumps: int = 5,
    min_width: float | None = None,
    max_width: float | None = None,
) -> np.ndarray:
    """Sum of 1..max_bumps Gaussians with random centres, widths and signs.

    Centres lie in the middle half of the box and widths in [L/24, L/10]
    by default, so each bump is below 1e-12 at the box edge.  The width
    range does not depend on N, which keeps the ensemble fixed under grid
    refinement.
    """
    L = grid.half_length
    lo = L / 24 if min_width is None else min_width
    hi = L / 10 if max_width is None else max_width
    if not 0 < lo <= hi:
        raise ValueError("need 0 < min_width <= max_width")
    coords = grid.coordinates()
    out = np.zeros(grid.shape)
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        c = rng.uniform(-L / 2, L / 2, size=grid.dim)
        w = rng.uniform(lo, hi)
        amp = rng.uniform(0.5, 1.5) * rng.choice((-1.0, 1.0))
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        out += amp * np.exp(-r2 / (2 * w * w))
    return out


def _l2(ch: np.ndarray, grid: GridSpec) -> float:
    wts = np.full(grid.points // 2 + 1, 2.0)
    wts[0] = wts[-1] = 1.0
    return float(np.sqrt(grid.volume * np.sum(np.abs(ch) ** 2 * wts)))


def fgn_ratio(f: np.ndarray, grid: GridSpec, q: float, s: float) -> float:
    """||(-D)^(s/2) f||_q / (||(-D)^(sigma/2) f||_2^theta ||f||_2^(1-theta))."""
    theta = fgn_theta(grid.dim, grid.sigma, q, s)
    fh = rfft_coeffs(f, grid)
    xi = grid.xi_norm_half
    with np.errstate(divide="ignore"):
        ds = fh * xi**s if s > 0 else fh
    if q == 2:
        lhs = _l2(ds, grid)
    else:
        lhs = lq_norm(irfft_values(ds, grid), q, grid)
    top = _l2(fh * xi**grid.sigma, grid)
    base = _l2(fh, grid)
    if theta == 0:
        return lhs / base
    return lhs / (top**theta * base ** (1 - theta))


def fgn_check(
    grid: GridSpec,
    q: float,
    s: float,
    trials: int,
    seed: int = 0,
    max_bumps: int = 5,
    min_width: float | None = None,
    max_width: float | None = None,
) -> InequalityCheck:
    """Worst ratio of the fractional Gagliardo-Nirenberg inequality over
    random bump fields.  Trial i draws from its own generator seeded by
    (seed, i), so results do not depend on the order trials are run in."""
    sigma = grid.sigma
    if not 1 < q < np.inf:
        raise ValueError(f"need 1 < q < inf, got q = {q}")
    if not 0 <= s < sigma:
        raise ValueError(f"need 0 <= s < sigma = {sigma}, got s = {s}")
    theta = fgn_theta(grid.dim, sigma, q, s)
    if not (s / sigma - 1e-14 <= theta <= 1 + 1e-14):
        raise ValueError(
            f"theta_q = (n/sigma)(1/2 - 1/q + s/n) = {theta:g} must lie in [s/sigma, 1] = [{s / sigma:g}, 1]"
        )
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ratios = np.empty(trials)
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        f = random_bumps(grid, rng, max_bumps, min_width, max_width)
        ratios[i] = fgn_ratio(f, grid, q, s)
    k = int(np.argmax(ratios))
    running = np.maximum.accumulate(ratios)
    half = trials // 2
    trend = trend_slope(np.arange(half, trials) + 1.0, running[half:]) if trials >= 4 else 0.0
    return InequalityCheck(
        "fgn",
        float(ratios[k]),
        trials,
        {"n": grid.dim, "points": grid.points, "L": grid.half_length, "sigma": sigma, "q": q, "s": s, "theta": theta, "seed": seed},
        float(k),
        ratios,
        trend,
    )


# ---------------------------------------------------------------------------
# integral inequalities


def log_time_grid(t_max: float, per_decade: int = 100, t_min: float = 1e-2) -> np.ndarray:
    """0 together with t = 10^(k/per_decade) in [t_min, t_max], plus t_max.

    The grids are nested: the grid for a smaller t_max is a prefix of the
    grid for a larger one.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    k0 = int(np.ceil(np.log10(t_min) * per_decade))
    k1 = int(np.floor(np.log10(t_max) * per_decade + 1e-9))
    t = 10.0 ** (np.arange(k0, k1 + 1) / per_decade)
    t = t[t < t_max * (1 - 1e-12)]
    return np.concatenate([[0.0], t, [t_max]])


def _quad_pieces(f, edges):
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return total


def _summarize(name, ts, ratios, params) -> InequalityCheck:
    k = int(np.argmax(ratios))
    t_max = ts[-1]
    tail = ts >= t_max / 10
    trend = trend_slope(ts[tail], ratios[tail]) if t_max > 0 and np.count_nonzero(tail) > 1 else 0.0
    return InequalityCheck(name, float(ratios[k]), int(ts.size), params, float(ts[k]), ratios, trend)


def integral_ineq_1(a: float, b: float, t_max: float, per_decade: int = 100) -> InequalityCheck:
    """sup_t (1+t)^min(a,b) int_0^t (1+t-s)^(-a) (1+s)^(-b) ds."""
    if not max(a, b) > 1:
        raise ValueError(f"need max(a, b) > 1, got a = {a}, b = {b}")
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    ts = log_time_grid(t_max, per_decade) if t_max > 0 else np.array([0.0])
    m = min(a, b)
    ratios = np.empty(ts.size)
    for i, t in enumerate(ts):
        if t == 0:
            ratios[i] = 0.0
            continue
        f = lambda s, t=t: (1 + t - s) ** (-a) * (1 + s) ** (-b)  # noqa: E731
        edges = sorted({0.0, min(1.0, t / 2), t / 2, max(t / 2, t - 1.0), t})
        ratios[i] = _quad_pieces(f, edges) * (1 + t) ** m
    return _summarize("integral_ineq_1", ts, ratios, {"a": a, "b": b, "t_max": t_max})


def integral_ineq_2(c: float, alpha: float, t_max: float, per_decade: int = 100) -> InequalityCheck:
    """sup_t (1+t)^alpha int_0^t exp(-c(t-s)) (1+s)^(-alpha) ds."""
    if not c > 0:
        raise ValueError(f"need c > 0, got c = {c}")
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    ts = log_time_grid(t_max, per_decade) if t_max > 0 else np.array([0.0])
    ratios = np.empty(ts.size)
    for i, t in enumerate(ts):
        if t == 0:
            ratios[i] = 0.0
            continue
        f = lambda s, t=t: np.exp(-c * (t - s)) * (1 + s) ** (-alpha)  # noqa: E731
        edges = sorted({0.0, max(0.0, t - 50.0 / c), max(0.0, t - 5.0 / c), t})
        ratios[i] = _quad_pieces(f, edges) * (1 + t) ** alpha
    return _summarize("integral_ineq_2", ts, ratios, {"c": c, "alpha": alpha, "t_max": t_max})
