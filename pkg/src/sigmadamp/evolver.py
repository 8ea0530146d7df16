"""
Semilinear evolution on top of the exact propagator.

Internally a state is held as the pair (u_hat, w_hat) with
w = u_t + (-Delta)^sigma u.  In these variables the damped equation
u_tt + (-Delta)^sigma u + u_t + (-Delta)^sigma u_t = F is triangular,

    w_t = -w + F,        u_t = -(-Delta)^sigma u + w,

so w is advanced with scalar multipliers only and never has to be recovered
from the difference of two large terms.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .propagator import duhamel_kernel, forcing_weights, phi1, phi2
from .spectral import (
    GridSpec,
    RealField,
    StatePair,
    dealias_mask,
    irfft_values,
    rfft_coeffs,
)

log = logging.getLogger(__name__)

__all__ = [
    "NonlinearityKind",
    "Nonlinearity",
    "EvolveConfig",
    "BlowUp",
    "OracleBlowUp",
    "Trajectory",
    "PicardReport",
    "eval_nonlinearity",
    "step_etd",
    "evolve",
    "bernoulli_oracle",
    "bernoulli_blowup_time",
    "picard_solve",
    "recover_u_from_w",
    "bt_norm",
]


class NonlinearityKind(enum.Enum):
    NONE = "none"
    ABS_POWER_U = "abs_u"  # |u|^p
    ABS_POWER_Q = "abs_q"  # |u_t + (-Delta)^sigma u|^p
    ABS_POWER_UT_PLUS_U = "abs_ut_plus_u"  # |u_t + u|^p


@dataclass(frozen=True)
class Nonlinearity:
    kind: NonlinearityKind = NonlinearityKind.NONE
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NonlinearityKind(self.kind))
        if not (np.isfinite(self.p) and self.p > 1):
            raise ValueError(f"p must be > 1, got {self.p}")

    @property
    def is_none(self) -> bool:
        return self.kind is NonlinearityKind.NONE

    def default_dealias(self) -> bool:
        """2/3 rule for polynomial powers p in {2, 3}; plain collocation otherwise.

        The |w|^p model is excluded: there w_t + w = |w|^p holds point by
        point, so collocation is exact and truncation only adds error.
        """
        if self.kind in (NonlinearityKind.NONE, NonlinearityKind.ABS_POWER_Q):
            return False
        return float(self.p).is_integer() and self.p <= 3


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    blowup_threshold: float = 1e8
    picard_max_iters: int = 60
    picard_tol: float = 1e-6
    sample_every: int = 1
    dealias: bool | None = None

    def __post_init__(self):
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end * (1 + 1e-12):
            raise ValueError(f"dt = {self.dt} exceeds t_end = {self.t_end}")
        if not (self.blowup_threshold > 0 and self.picard_tol > 0):
            raise ValueError("thresholds must be positive")
        if self.sample_every < 1 or self.picard_max_iters < 1:
            raise ValueError("sample_every and picard_max_iters must be >= 1")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError(f"t_end = {self.t_end} is not a multiple of dt = {self.dt}")
        return n


class BlowUp(RuntimeError):
    """The monitored sup norm left the finite range or crossed the threshold.

    `time` is the extrapolated blow-up time, `last_valid_time` the last step
    whose state passed the checks.
    """

    def __init__(self, time: float, last_valid_time: float, detected_at: float, reason: str):
        super().__init__(
            f"blow-up detected at t = {detected_at:.6g} ({reason}); "
            f"estimated T* = {time:.6g}, last valid t = {last_valid_time:.6g}"
        )
        self.time = time
        self.last_valid_time = last_valid_time
        self.detected_at = detected_at
        self.reason = reason


@dataclass(frozen=True)
class OracleBlowUp:
    """Closed-form blow-up of w' = -w + w^p at `time`."""

    time: float


# ---------------------------------------------------------------------------
# nonlinearity


def _power(arg: np.ndarray, p: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.abs(arg) ** p


def eval_nonlinearity(nl: Nonlinearity, state: StatePair, dealias: bool = False) -> RealField:
    """Pointwise |.|^p of the combination selected by `nl.kind`.

    Raises BlowUp if the result is not finite.
    """
    g = state.grid
    if nl.is_none:
        return RealField.zeros(g)
    arg = _argument_physical(nl, state)
    out = _power(arg, nl.p)
    if dealias:
        out = irfft_values(rfft_coeffs(out, g) * dealias_mask(g), g)
    if not np.all(np.isfinite(out)):
        raise BlowUp(state.time, state.time, state.time, "non-finite nonlinearity")
    return RealField(g, out)


def _argument_physical(nl: Nonlinearity, state: StatePair) -> np.ndarray:
    if nl.kind is NonlinearityKind.ABS_POWER_U:
        return state.u.values
    if nl.kind is NonlinearityKind.ABS_POWER_Q:
        return state.w_field().values
    return state.ut.values + state.u.values


class _Kernel:
    """Step coefficients and forcing evaluation on the half spectrum."""

    def __init__(self, grid: GridSpec, nl: Nonlinearity, dt: float, dealias: bool | None):
        self.grid = grid
        self.nl = nl
        self.dt = dt
        mu = grid.mu_half
        self.mu = mu
        self.e_mu = np.exp(-mu * dt)
        self.d = duhamel_kernel(mu, dt)
        i0, i1 = forcing_weights(mu.ravel(), dt)
        self.i0 = i0.reshape(mu.shape)
        self.i1 = i1.reshape(mu.shape)
        self.e1 = np.exp(-dt)
        self.p1 = dt * float(phi1(-dt))
        self.p2 = dt * float(phi2(-dt))
        if dealias is None:
            dealias = nl.default_dealias()
        self.mask = dealias_mask(grid) if dealias and not nl.is_none else None

    def argument(self, uh: np.ndarray, wh: np.ndarray) -> np.ndarray:
        g = self.grid
        kind = self.nl.kind
        if kind is NonlinearityKind.ABS_POWER_U:
            return irfft_values(uh, g)
        if kind is NonlinearityKind.ABS_POWER_Q:
            return irfft_values(wh, g)
        return irfft_values(wh - self.mu * uh + uh, g)

    def forcing(self, uh, wh):
        """Return (F_hat, F_physical, sup |argument|)."""
        arg = self.argument(uh, wh)
        f = _power(arg, self.nl.p)
        fh = rfft_coeffs(f, self.grid)
        if self.mask is not None:
            fh = fh * self.mask
            f = None
        with np.errstate(invalid="ignore"):
            amax = float(np.max(np.abs(arg)))
        return fh, f, amax

    def linear(self, uh, wh):
        return self.e_mu * uh + self.d * wh, self.e1 * wh

    def step(self, uh, wh, f0):
        """One ETD2 step (Cox-Matthews predictor/corrector) given F(t_n)."""
        u_lin, w_lin = self.linear(uh, wh)
        if f0 is None:
            return u_lin, w_lin
        u_star = u_lin + self.i0 * f0
        w_star = w_lin + self.p1 * f0
        f1, _, _ = self.forcing(u_star, w_star)
        df = f1 - f0
        return u_star + self.i1 * df, w_star + self.p2 * df


def _to_internal(state: StatePair):
    g = state.grid
    uh = rfft_coeffs(state.u.values, g)
    if state.w is not None:
        wh = rfft_coeffs(state.w.values, g)
    else:
        wh = rfft_coeffs(state.ut.values, g) + g.mu_half * uh
    return uh, wh


def _to_state(uh, wh, grid: GridSpec, t: float) -> StatePair:
    u = irfft_values(uh, grid)
    vt = irfft_values(wh - grid.mu_half * uh, grid)
    w = irfft_values(wh, grid)
    return StatePair(RealField(grid, u), RealField(grid, vt), t, RealField(grid, w))


def step_etd(state: StatePair, nl: Nonlinearity, dt: float, dealias: bool | None = None) -> StatePair:
    """Advance by one ETD2 step.  With nl.kind = NONE this is the exact
    linear propagator."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k = _Kernel(state.grid, nl, dt, dealias)
    uh, wh = _to_internal(state)
    f0 = None
    if not nl.is_none:
        f0, _, amax = k.forcing(uh, wh)
        if not (np.isfinite(amax) and np.all(np.isfinite(f0))):
            raise BlowUp(state.time, state.time, state.time, "non-finite nonlinearity")
    uh, wh = k.step(uh, wh, f0)
    if not (np.all(np.isfinite(uh)) and np.all(np.isfinite(wh))):
        raise BlowUp(state.time + dt, state.time, state.time + dt, "non-finite state")
    return _to_state(uh, wh, state.grid, state.time + dt)


# ---------------------------------------------------------------------------
# time loop


@dataclass
class Trajectory:
    samples: list = field(default_factory=list)
    times: list = field(default_factory=list)
    final: StatePair | None = None
    blowup: BlowUp | None = None


def _estimate_blowup_time(history: list[tuple[float, float]], p: float, dt: float) -> float:
    """Extrapolate the blow-up time from the sup-norm history.

    Near a power-type singularity y' ~ y^p, so z = y^(1-p) falls linearly to
    zero.  The last pair of steps that was still resolved (growth per step
    below 10 %) is extrapolated to z = 0.
    """
    ts = np.array([h[0] for h in history])
    ys = np.array([h[1] for h in history])
    ok = np.isfinite(ys) & (ys > 0)
    for m in range(len(ys) - 1, 0, -1):
        if not (ok[m] and ok[m - 1]):
            continue
        if ys[m] > 1.1 * ys[m - 1] or ys[m] <= ys[m - 1]:
            continue
        z0, z1 = ys[m - 1] ** (1 - p), ys[m] ** (1 - p)
        return float(ts[m] + z1 * (ts[m] - ts[m - 1]) / (z0 - z1))
    return float(ts[ok][-1]) if np.any(ok) else 0.0


def evolve(
    state: StatePair,
    nl: Nonlinearity,
    config: EvolveConfig,
    observer: Callable[[StatePair, RealField | None], Any] | None = None,
) -> Trajectory:
    """Integrate from `state` to state.time + config.t_end.

    Every `sample_every` steps (and at both ends) `observer(state, forcing)`
    is called and its return value stored; the default stores the state.
    A blow-up stops the run and is recorded in `Trajectory.blowup` instead
    of being raised.
    """
    g = state.grid
    dt = config.dt
    n_steps = config.n_steps
    k = _Kernel(g, nl, dt, config.dealias)
    if observer is None:
        observer = lambda s, f: s  # noqa: E731
    uh, wh = _to_internal(state)
    t0 = state.time
    traj = Trajectory()
    history: list[tuple[float, float]] = []
    thr = config.blowup_threshold
    last_valid = t0

    def record(t, fphys):
        st = _to_state(uh, wh, g, t)
        if fphys is None and not nl.is_none:
            fphys = irfft_values(f0, g)
        forcing = None if nl.is_none else RealField(g, fphys)
        traj.samples.append(observer(st, forcing))
        traj.times.append(t)

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps + 1):
            t = t0 + n * dt
            f0 = fphys = None
            amax = 0.0
            if not nl.is_none:
                f0, fphys, amax = k.forcing(uh, wh)
            umax = float(np.max(np.abs(irfft_values(uh, g))))
            bad = None
            if not (np.isfinite(umax) and np.isfinite(amax)) or not np.all(np.isfinite(wh)):
                bad = "non-finite state"
            elif f0 is not None and not np.all(np.isfinite(f0)):
                bad = "non-finite nonlinearity"
            elif max(umax, amax) > thr:
                bad = f"sup norm {max(umax, amax):.3e} above threshold {thr:.3e}"
            if bad is not None:
                history.append((t, amax))
                est = _estimate_blowup_time(history, nl.p, dt) if not nl.is_none else last_valid
                traj.blowup = BlowUp(est, last_valid, t, bad)
                log.info("%s", traj.blowup)
                break
            history.append((t, amax))
            if len(history) > 64:
                del history[:-64]
            last_valid = t
            if n % config.sample_every == 0 or n == n_steps:
                record(t, fphys)
            if n == n_steps:
                break
            uh, wh = k.step(uh, wh, f0)
    if traj.blowup is None:
        traj.final = _to_state(uh, wh, g, t0 + n_steps * dt)
    return traj


# ---------------------------------------------------------------------------
# Bernoulli oracle


def bernoulli_blowup_time(w0: float, p: float) -> float:
    """Blow-up time of w' = -w + w^p from w0 > 1 (inf when w0 <= 1)."""
    if w0 <= 1:
        return np.inf
    a = w0 ** (p - 1)
    return float(np.log(a / (a - 1.0)) / (p - 1))


def bernoulli_oracle(w0: float, p: float, t: float) -> float | OracleBlowUp:
    """Exact solution of w' = -w + w^p, w(0) = w0 > 0.

    With v(t) = (w0^(1-p) - 1) exp((p-1) t) + 1 the solution is
    v^(-1/(p-1)) while v > 0; otherwise OracleBlowUp(T*) is returned.
    """
    if not w0 > 0:
        raise ValueError(f"oracle needs w0 > 0, got {w0}")
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    t_star = bernoulli_blowup_time(w0, p)
    if t >= t_star:
        return OracleBlowUp(t_star)
    # v = 1 + (w0^(1-p) - 1) e^{(p-1)t}, written to keep w0 near 1 accurate
    c = np.expm1((1 - p) * np.log(w0))
    v = 1.0 + c * np.exp((p - 1) * t)
    if v <= 0:
        return OracleBlowUp(t_star)
    return float(v ** (-1.0 / (p - 1)))


# ---------------------------------------------------------------------------
# Picard iteration on the Duhamel formula


@dataclass
class PicardReport:
    iterates: int = 0
    successive_distances: list[float] = field(default_factory=list)
    contraction_factors: list[float] = field(default_factory=list)
    converged: bool = False
    tol: float = 0.0


def _l2_half(ch: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Riemann-sum L2 norm from half-spectrum coefficients (Parseval).

    Works on a stack: leading axes are kept.
    """
    n = grid.points
    wts = np.full(n // 2 + 1, 2.0)
    wts[0] = 1.0
    wts[-1] = 1.0
    a = np.abs(ch) ** 2 * wts
    s = a.reshape(a.shape[: a.ndim - grid.dim] + (-1,)).sum(axis=-1)
    return np.sqrt(grid.volume * s)


def bt_norm(nl: Nonlinearity, grid: GridSpec, times: np.ndarray, uh: np.ndarray, wh: np.ndarray) -> float:
    """Weighted sup-in-time norm of a trajectory stack (u_hat, w_hat).

    |u|^p-type models use weights (1+t)^(n/4s), (1+t)^(n/4s+1/2),
    (1+t)^(n/4s+1), (1+t)^(np/2s - n/4s) on ||u||, ||(-D)^(s/2) u||, ||u_t||,
    ||w||.  The |w|^p model uses 1, (1+t)^(1/2), (1+t) and
    exp(t) (||w||_2 + ||w||_inf).
    """
    mu = grid.mu_half
    n, s, p = grid.dim, grid.sigma, nl.p
    t = np.asarray(times, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        nu = _l2_half(uh, grid)
        ne = _l2_half(np.sqrt(mu) * uh, grid)
        nv = _l2_half(wh - mu * uh, grid)
        nw = _l2_half(wh, grid)
        if nl.kind is NonlinearityKind.ABS_POWER_Q:
            winf = np.array([np.max(np.abs(irfft_values(c, grid))) for c in wh])
            tot = nu + np.sqrt(1 + t) * ne + (1 + t) * nv + np.exp(t) * (nw + winf)
        else:
            a = n / (4 * s)
            tot = (
                (1 + t) ** a * nu
                + (1 + t) ** (a + 0.5) * ne
                + (1 + t) ** (a + 1) * nv
                + (1 + t) ** (n * p / (2 * s) - a) * nw
            )
    m = float(np.max(tot))
    return m if np.isfinite(m) else np.inf


def picard_solve(
    u1: RealField,
    nl: Nonlinearity,
    T: float,
    grid_steps: int,
    config: EvolveConfig,
) -> tuple[list[StatePair], PicardReport]:
    """Fixed-point iteration u <- u^L + Duhamel(N(u)) on a uniform time grid.

    The Duhamel integral is the trapezoidal rule on the grid_steps + 1 nodes
    against the exact kernels: D for u_hat and exp(-t) for w_hat.  Distances
    between successive iterates are measured in `bt_norm`.
    """
    if nl.is_none:
        raise ValueError("picard_solve needs a nonlinearity")
    if not T > 0 or grid_steps < 1:
        raise ValueError("T must be positive and grid_steps >= 1")
    g = u1.grid
    h = T / grid_steps
    times = h * np.arange(grid_steps + 1)
    mu = g.mu_half
    kd = np.stack([np.asarray(duhamel_kernel(mu, tm)) for tm in times])
    ke = np.exp(-times)
    u1h = rfft_coeffs(u1.values, g)
    lin_u = kd * u1h
    lin_w = ke.reshape((-1,) + (1,) * g.dim) * u1h

    k = _Kernel(g, nl, h, config.dealias)
    report = PicardReport(tol=config.picard_tol)
    cur_u, cur_w = lin_u.copy(), lin_w.copy()
    nodes = grid_steps + 1
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, config.picard_max_iters + 1):
            fh = np.stack([k.forcing(cur_u[j], cur_w[j])[0] for j in range(nodes)])
            new_u = lin_u.copy()
            new_w = lin_w.copy()
            for i in range(1, nodes):
                c = np.ones(i + 1)
                c[0] = c[-1] = 0.5
                lag = i - np.arange(i + 1)
                f = fh[: i + 1]
                new_u[i] += h * np.tensordot(c, kd[lag] * f, axes=1)
                new_w[i] += h * np.tensordot(c * ke[lag], f, axes=1)
            dist = bt_norm(nl, g, times, new_u - cur_u, new_w - cur_w)
            report.iterates = it
            if report.successive_distances:
                prev = report.successive_distances[-1]
                report.contraction_factors.append(dist / prev if prev > 0 else (0.0 if dist == 0 else np.inf))
            report.successive_distances.append(dist)
            cur_u, cur_w = new_u, new_w
            if not np.isfinite(dist):
                break
            if dist <= config.picard_tol:
                report.converged = True
                break
    traj = []
    if np.all(np.isfinite(cur_u)) and np.all(np.isfinite(cur_w)):
        traj = [_to_state(cur_u[i], cur_w[i], g, float(times[i])) for i in range(nodes)]
    return traj, report


def recover_u_from_w(w_samples: list[RealField], dt: float, u0: RealField | None = None) -> list[RealField]:
    """Integrate u_t = -(-Delta)^sigma u + w mode by mode from samples of w
    taken every dt, with w linear between samples."""
    g = w_samples[0].grid
    mu = g.mu_half
    e = np.exp(-mu * dt)
    a = dt * phi1(-mu * dt)
    b = dt * phi2(-mu * dt)
    uh = np.zeros_like(rfft_coeffs(w_samples[0].values, g)) if u0 is None else rfft_coeffs(u0.values, g)
    out = [RealField(g, irfft_values(uh, g))]
    wprev = rfft_coeffs(w_samples[0].values, g)
    for w in w_samples[1:]:
        wn = rfft_coeffs(w.values, g)
        uh = e * uh + a * wprev + b * (wn - wprev)
        out.append(RealField(g, irfft_values(uh, g)))
        wprev = wn
    return out
