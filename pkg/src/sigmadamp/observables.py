"""Scalar observables of a state: norms, energies and the special combinations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .spectral import GridSpec, RealField, StatePair, rfft_coeffs

__all__ = [
    "OBSERVABLE_NAMES",
    "ObservableSeries",
    "observe",
    "collect_series",
    "l2_from_half",
]

OBSERVABLE_NAMES = (
    "u_L2",
    "u_L1",
    "u_Linf",
    "ut_L2",
    "elastic_L2",  # ||(-D)^(s/2) u||
    "lap_u_L2",  # ||(-D)^s u||
    "energy",  # ||u_t||^2 + ||(-D)^(s/2) u||^2
    "Q_L2",  # ||u_t + (-D)^s u||
    "Q_Linf",
    "ut_plus_u_L2",
    "ut_minus_lap_u_L2",
    "utt_combo_L2",  # ||u_tt + (-D)^s u_t||, from the equation
    "inv_combo_L2",  # ||u + (-D)^(-s) u_t||, NaN unless u_t has zero mean
)

MEAN_ZERO_REL = 1e-12


def l2_from_half(ch: np.ndarray, grid: GridSpec) -> float:
    """Riemann-sum L2 norm of the field with half-spectrum coefficients ch."""
    wts = np.full(grid.points // 2 + 1, 2.0)
    wts[0] = wts[-1] = 1.0
    return float(np.sqrt(grid.volume * np.sum(np.abs(ch) ** 2 * wts)))


def observe(state: StatePair, rhs_field: RealField | None = None) -> dict[str, float]:
    """All registered observables of `state`.

    `rhs_field` is the current forcing F; it enters only through
    u_tt + (-D)^s u_t = F - w.  When absent the linear equation (F = 0) is
    assumed.
    """
    g = state.grid
    mu = g.mu_half
    uh = rfft_coeffs(state.u.values, g)
    vh = rfft_coeffs(state.ut.values, g)
    w = state.w_field()
    wh = rfft_coeffs(w.values, g)
    uv = state.u.values
    dv = g.cell_volume

    out = {
        "u_L2": l2_from_half(uh, g),
        "u_L1": float(dv * np.sum(np.abs(uv))),
        "u_Linf": float(np.max(np.abs(uv))),
        "ut_L2": l2_from_half(vh, g),
        "elastic_L2": l2_from_half(np.sqrt(mu) * uh, g),
        "lap_u_L2": l2_from_half(mu * uh, g),
    }
    out["energy"] = out["ut_L2"] ** 2 + out["elastic_L2"] ** 2
    out["Q_L2"] = l2_from_half(wh, g)
    out["Q_Linf"] = float(np.max(np.abs(w.values)))
    out["ut_plus_u_L2"] = l2_from_half(vh + uh, g)
    # u_t - (-D)^s u = w - 2 (-D)^s u
    out["ut_minus_lap_u_L2"] = l2_from_half(wh - 2 * mu * uh, g)
    if rhs_field is None:
        out["utt_combo_L2"] = out["Q_L2"]
    else:
        if rhs_field.grid != g:
            raise ValueError("rhs_field lives on a different grid")
        out["utt_combo_L2"] = l2_from_half(rfft_coeffs(rhs_field.values, g) - wh, g)
    # u + (-D)^(-s) u_t = w / (-D)^s; the zero mode of u_t equals that of w
    peak = np.max(np.abs(vh))
    if abs(vh.flat[0]) <= MEAN_ZERO_REL * peak or peak == 0:
        inv = np.zeros_like(wh)
        nz = mu > 0
        inv[nz] = wh[nz] / mu[nz]
        out["inv_combo_L2"] = l2_from_half(inv, g)
    else:
        out["inv_combo_L2"] = float("nan")
    return out


@dataclass(frozen=True)
class ObservableSeries:
    """Named scalar time series; `blowup_time` marks a terminal blow-up."""

    name: str
    times: np.ndarray
    values: np.ndarray
    blowup_time: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError(f"times of series {self.name!r} are not strictly increasing")
        finite = v[np.isfinite(v)]
        if np.any(finite < 0):
            raise ValueError(f"series {self.name!r} has negative values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size

    def window(self, lo: float, hi: float) -> ObservableSeries:
        m = (self.times >= lo) & (self.times <= hi)
        return ObservableSeries(self.name, self.times[m], self.values[m])


def collect_series(
    times: Iterable[float],
    samples: Iterable[Mapping[str, float]],
    blowup_time: float | None = None,
) -> dict[str, ObservableSeries]:
    """Turn a list of observe() dicts into one series per name."""
    times = list(times)
    samples = list(samples)
    names = samples[0].keys() if samples else OBSERVABLE_NAMES
    return {
        k: ObservableSeries(k, np.array(times), np.array([s[k] for s in samples]), blowup_time)
        for k in names
    }
