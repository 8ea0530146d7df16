"""
Exact per-mode solution operator of

    u_tt + (-Delta)^sigma u + u_t + (-Delta)^sigma u_t = 0.

In Fourier space every mode solves v'' + (1 + mu) v' + mu v = 0 with
mu = |xi|^(2 sigma); the characteristic roots are -1 and -mu.  Everything is
expressed through the velocity-impulse response

    D(t, mu) = (exp(-mu t) - exp(-t)) / (1 - mu)
             = t exp(-min(mu, 1) t) phi1(-|1 - mu| t),

whose second form has no removable singularity at mu = 1 and never forms
exp(+large).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .spectral import RealField, StatePair, irfft_values, rfft_coeffs

__all__ = [
    "ModeCoeffs",
    "phi1",
    "phi2",
    "mode_coeffs",
    "duhamel_kernel",
    "kernel_time_derivative",
    "forcing_weights",
    "evolve_linear",
    "closed_form_w",
]

_PHI1_SERIES = 1e-4
_PHI2_SERIES = 0.5
_WEIGHT_SERIES_TERMS = 30


def _check_nonneg(name, x):
    if np.any(np.asarray(x) < 0) or np.any(~np.isfinite(np.asarray(x))):
        raise ValueError(f"{name} must be finite and >= 0, got {x!r}")


def phi1(z):
    """(exp(z) - 1) / z with phi1(0) = 1."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < _PHI1_SERIES
    safe = np.where(small, 1.0, z)
    out = np.expm1(safe) / safe
    series = 1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0
    out = np.where(small, series, out)
    return out[()] if out.ndim == 0 else out


def phi2(z):
    """(exp(z) - 1 - z) / z^2 with phi2(0) = 1/2."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < _PHI2_SERIES
    safe = np.where(small, 1.0, z)
    out = (np.expm1(safe) - safe) / (safe * safe)
    series = np.zeros_like(z)
    term = np.ones_like(z)
    for j in range(20):
        series = series + term / factorial(j + 2)
        term = term * z
    out = np.where(small, series, out)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ModeCoeffs:
    """Solution matrix [[a00, a01], [a10, a11]] taking (u0_hat, u1_hat) at
    time 0 to (u_hat, ut_hat) at time t.  Entries may be arrays over mu."""

    a00: np.ndarray | float
    a01: np.ndarray | float
    a10: np.ndarray | float
    a11: np.ndarray | float

    def as_array(self) -> np.ndarray:
        return np.array([[self.a00, self.a01], [self.a10, self.a11]], dtype=float)


def duhamel_kernel(mu, t):
    """D(t, mu): response of u_hat at time t to a unit velocity impulse at 0."""
    _check_nonneg("mu", mu)
    _check_nonneg("t", t)
    mu = np.asarray(mu, dtype=float)
    t = np.asarray(t, dtype=float)
    m = np.minimum(mu, 1.0)
    out = t * np.exp(-m * t) * phi1(-np.abs(1.0 - mu) * t)
    return out[()] if np.ndim(out) == 0 else out


def mode_coeffs(mu, t) -> ModeCoeffs:
    _check_nonneg("mu", mu)
    _check_nonneg("t", t)
    mu = np.asarray(mu, dtype=float)
    t = np.asarray(t, dtype=float)
    d = np.asarray(duhamel_kernel(mu, t))
    md = mu * d
    a00 = np.exp(-mu * t) + md
    a11 = np.exp(-t) - md
    sq = (lambda x: x[()] if np.ndim(x) == 0 else x)
    return ModeCoeffs(sq(a00), sq(d), sq(-md), sq(a11))


def kernel_time_derivative(mu, t, k: int):
    """d^k/dt^k D(t, mu) = (-1)^k [mu^k D - exp(-t) (1 + mu + ... + mu^(k-1))]."""
    if k < 0:
        raise ValueError("k must be >= 0")
    mu = np.asarray(mu, dtype=float)
    d = np.asarray(duhamel_kernel(mu, t))
    geo = sum(mu**i for i in range(k)) if k else 0.0
    out = (-1.0) ** k * (mu**k * d - np.exp(-np.asarray(t, dtype=float)) * geo)
    return out[()] if np.ndim(out) == 0 else out


def forcing_weights(mu, h: float):
    """Exact responses of u_hat over one step of length h to a forcing
    entering the velocity equation.

    Returns (I0, I1) with
        I0 = int_0^h D(r) dr                 (forcing held constant)
        I1 = (1/h) int_0^h (h - r) D(r) dr   (forcing ramp s/h)
    The velocity responses are D(h) and I0 / h.
    """
    _check_nonneg("mu", mu)
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    x = np.maximum(mu, 1.0) * h
    i0 = np.empty_like(mu)
    i1 = np.empty_like(mu)

    ser = x <= 1.0
    if np.any(ser):
        # D(r) = sum_j (-1)^j H_j r^(j+1)/(j+1)!,  H_j = 1 + mu + ... + mu^j
        m = mu[ser]
        hj = np.ones_like(m)
        s0 = np.zeros_like(m)
        s1 = np.zeros_like(m)
        hp = h * h
        for j in range(_WEIGHT_SERIES_TERMS):
            sign = -1.0 if j % 2 else 1.0
            s0 += sign * hj * hp / factorial(j + 2)
            s1 += sign * hj * hp / factorial(j + 3)
            hj = 1.0 + m * hj
            hp *= h
        i0[ser] = s0
        i1[ser] = s1

    lo = ~ser & (mu < 1.0)
    if np.any(lo):
        m = mu[lo]
        d = duhamel_kernel(m, h)
        i0[lo] = h * phi1(-m * h) - d
        i1[lo] = h * phi2(-m * h) - phi1(-m * h) + d / h

    hi = ~ser & (mu >= 1.0)
    if np.any(hi):
        m = mu[hi]
        d = duhamel_kernel(m, h)
        e1 = h * phi1(-h)
        i0[hi] = (e1 - d) / m
        i1[hi] = (d - e1 + m * h * h * phi2(-h)) / (h * m * m)
    return i0, i1


def evolve_linear(state: StatePair, dt: float) -> StatePair:
    """Advance the linear problem by dt with the exact mode propagator."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = state.grid
    c = mode_coeffs(g.mu_half, dt)
    uh = rfft_coeffs(state.u.values, g)
    vh = rfft_coeffs(state.ut.values, g)
    u_new = c.a00 * uh + c.a01 * vh
    v_new = c.a10 * uh + c.a11 * vh
    w = None if state.w is None else state.w * np.exp(-dt)
    return StatePair(
        RealField(g, irfft_values(u_new, g)),
        RealField(g, irfft_values(v_new, g)),
        state.time + dt,
        w,
    )


def closed_form_w(u1: RealField, t: float) -> RealField:
    """exp(-t) u1: the exact value of u_t + (-Delta)^sigma u for the linear
    problem started from u(0) = 0, u_t(0) = u1."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return RealField(u1.grid, np.exp(-t) * u1.values)
