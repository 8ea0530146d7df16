"""
Periodic-box spectral substrate.

The whole space R^n is replaced by the periodic box [-L, L)^n sampled on N
points per axis.  Grid nodes are x_j = -L + j*dx with dx = 2L/N and the
wavenumber attached to the signed index k in [-N/2, N/2) is xi_k = (pi/L) k.

Transform convention
--------------------
    c_k = (1/N^n) * sum_j f(x_j) exp(-i xi_k . x_j)

so c_0 is the field mean, cos(pi x / L) has c_{+-1} = 1/2, and Parseval reads

    dx^n * sum_j |f_j|^2 = (2L)^n * sum_k |c_k|^2.

The phase exp(-i xi_k . x_0) coming from the box origin x_0 = -L is folded
into the coefficients, so they are the Fourier-series coefficients of f on
the box and not merely the raw FFT output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "GridSpec",
    "RealField",
    "SpectralField",
    "StatePair",
    "SpectralError",
    "HermitianSymmetryError",
    "MeanZeroError",
    "forward_transform",
    "inverse_transform",
    "frac_laplacian",
    "lq_norm",
    "rfft_coeffs",
    "irfft_values",
    "dealias_mask",
]

HERMITIAN_TOL = 1e-10
IMAG_TOL = 1e-10
MEAN_ZERO_TOL = 1e-12


class SpectralError(ValueError):
    """Invalid field, grid or transform request."""


class HermitianSymmetryError(SpectralError):
    pass


class MeanZeroError(SpectralError):
    """Negative powers of the Laplacian need a vanishing zero mode."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [-L, L)^dim with `points` nodes per axis.

    `sigma` is the order of the elastic operator (-Delta)^sigma.  The
    decay estimates assume sigma >= 1, but any positive value is accepted.
    """

    dim: int
    points: int
    half_length: float
    sigma: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise SpectralError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.points
        if not isinstance(n, (int, np.integer)) or n < 4 or (n & (n - 1)) != 0:
            raise SpectralError(f"points must be a power of two >= 4, got {n}")
        if not (np.isfinite(self.half_length) and self.half_length > 0):
            raise SpectralError(f"half_length must be positive, got {self.half_length}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise SpectralError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "points", int(n))
        object.__setattr__(self, "half_length", float(self.half_length))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_length) ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def with_sigma(self, sigma: float) -> GridSpec:
        return GridSpec(self.dim, self.points, self.half_length, sigma)

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return _readonly(-self.half_length + self.dx * np.arange(self.points))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """xi_k along one axis, in FFT index order."""
        k = np.fft.fftfreq(self.points, d=1.0 / self.points)
        return _readonly(np.pi / self.half_length * k)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def xi_norm(self) -> np.ndarray:
        """|xi| on the full FFT grid."""
        ax = [self.wavenumbers] * self.dim
        return _readonly(_radius(ax))

    @cached_property
    def xi_norm_half(self) -> np.ndarray:
        """|xi| on the real-to-complex (half) FFT grid."""
        k = self.wavenumbers
        half = np.abs(np.pi / self.half_length * np.arange(self.points // 2 + 1))
        ax = [k] * (self.dim - 1) + [half]
        return _readonly(_radius(ax))

    @cached_property
    def mu(self) -> np.ndarray:
        """Symbol |xi|^(2 sigma) of (-Delta)^sigma on the full grid."""
        return _readonly(self.xi_norm ** (2.0 * self.sigma))

    @cached_property
    def mu_half(self) -> np.ndarray:
        return _readonly(self.xi_norm_half ** (2.0 * self.sigma))

    @cached_property
    def _origin_phase(self) -> np.ndarray:
        # exp(-i xi_k x_0) with x_0 = -L is (-1)^k per axis
        k = np.fft.fftfreq(self.points, d=1.0 / self.points).astype(int)
        s = np.where(k % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for d in range(self.dim):
            idx = [None] * self.dim
            idx[d] = slice(None)
            out = out * s[tuple(idx)]
        return _readonly(out)


def _radius(axes: list[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(g * g for g in grids))


@dataclass(frozen=True, eq=False)
class RealField:
    """Real samples of a function on the grid nodes (shape grid.shape)."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise SpectralError(
                f"field has {v.size} values, grid needs {self.grid.size}"
            )
        v = np.array(v.reshape(self.grid.shape), dtype=float, order="C")
        if not np.all(np.isfinite(v)):
            bad = np.unravel_index(np.argmax(~np.isfinite(v)), v.shape)
            raise SpectralError(f"non-finite value {v[bad]!r} at node {bad}")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def zeros(cls, grid: GridSpec) -> RealField:
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> RealField:
        return cls(grid, fn(*grid.coordinates()))

    def __add__(self, other: RealField) -> RealField:
        _same_grid(self, other)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: RealField) -> RealField:
        _same_grid(self, other)
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> RealField:
        return RealField(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier-series coefficients c_k, stored in FFT index order."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise SpectralError(f"coeff shape {c.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", _readonly(np.array(c)))

    def coeff(self, *k: int) -> complex:
        """Coefficient at signed wavenumber index k (one integer per axis)."""
        n = self.grid.points
        return complex(self.coeffs[tuple(int(i) % n for i in k)])

    def mirrored(self) -> np.ndarray:
        """Array whose entry at index k is c_{-k}."""
        c = self.coeffs
        for ax in range(c.ndim):
            c = np.roll(np.flip(c, axis=ax), 1, axis=ax)
        return c


def _same_grid(a, b):
    if a.grid != b.grid:
        raise SpectralError(f"grid mismatch: {a.grid} vs {b.grid}")


def forward_transform(f: RealField) -> SpectralField:
    g = f.grid
    c = np.fft.fftn(f.values) / g.size
    return SpectralField(g, c * g._origin_phase)


def inverse_transform(F: SpectralField) -> RealField:
    g = F.grid
    c = F.coeffs
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if scale > 0.0:
        gap = np.abs(c - np.conj(F.mirrored()))
        worst = np.unravel_index(np.argmax(gap), gap.shape)
        if gap[worst] > HERMITIAN_TOL * scale:
            k = tuple(int(v) for v in np.fft.fftfreq(g.points, 1.0 / g.points)[list(worst)])
            raise HermitianSymmetryError(
                f"coefficients are not Hermitian: |c(k) - conj(c(-k))| = "
                f"{gap[worst]:.3e} at k = {k} (max |c| = {scale:.3e})"
            )
    z = np.fft.ifftn(c * g._origin_phase) * g.size
    vmax = float(np.max(np.abs(z.real))) if z.size else 0.0
    imag = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if imag > IMAG_TOL * max(vmax, np.finfo(float).tiny):
        raise SpectralError(f"imaginary residue {imag:.3e} exceeds tolerance")
    return RealField(g, z.real)


def frac_laplacian(F: SpectralField, s: float) -> SpectralField:
    """Apply (-Delta)^s, i.e. multiply c_k by |xi_k|^(2s).

    For s < 0 the zero mode must already vanish; it is then set to exactly 0.
    """
    g = F.grid
    c = F.coeffs
    if s == 0:
        return SpectralField(g, c)
    if s < 0:
        c0 = abs(c.flat[0])
        scale = float(np.max(np.abs(c)))
        if c0 > MEAN_ZERO_TOL * scale:
            raise MeanZeroError(
                f"(-Delta)^{s} needs a mean-zero field: |c_0| = {c0:.3e} "
                f"exceeds {MEAN_ZERO_TOL:g} * max|c| = {MEAN_ZERO_TOL * scale:.3e}"
            )
        mult = np.zeros(g.shape)
        nz = g.xi_norm > 0
        mult[nz] = g.xi_norm[nz] ** (2.0 * s)
    else:
        mult = g.xi_norm ** (2.0 * s)
    return SpectralField(g, c * mult)


def lq_norm(f: RealField | np.ndarray, q: float, grid: GridSpec | None = None) -> float:
    """Riemann-sum approximation of the whole-space L^q norm.

    (dx^n * sum |f|^q)^(1/q) for finite q >= 1, max |f| for q = inf.
    Accepts a bare array when `grid` is given (used on hot paths).
    """
    if isinstance(f, RealField):
        grid, v = f.grid, f.values
    else:
        v = np.asarray(f)
    if q == np.inf:
        return float(np.max(np.abs(v)))
    if q < 1:
        raise SpectralError(f"q must be >= 1, got {q}")
    a = np.abs(v).ravel()
    if q == 1:
        s = np.sum(a)
    elif q == 2:
        s = np.sum(a * a)
    else:
        s = np.sum(a**q)
    return float((grid.cell_volume * s) ** (1.0 / q))


# Half-spectrum helpers for the time steppers.  Every multiplier applied on
# that path is real and even in xi, so the origin phase cancels and is skipped.


def rfft_coeffs(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.rfftn(values) / grid.size


def irfft_values(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.irfftn(coeffs * grid.size, s=grid.shape, axes=tuple(range(grid.dim)))


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """2/3-rule mask on the half grid: keep |k_i| <= N/3 on every axis."""
    n = grid.points
    k = np.abs(np.fft.fftfreq(n, 1.0 / n))
    kh = np.arange(n // 2 + 1)
    axes = [k] * (grid.dim - 1) + [kh]
    grids = np.meshgrid(*axes, indexing="ij")
    keep = np.ones(grids[0].shape, dtype=bool)
    for kk in grids:
        keep &= kk <= n / 3.0
    return keep


@dataclass(frozen=True, eq=False)
class StatePair:
    """Snapshot (u, u_t) at `time`.

    `w` optionally carries u_t + (-Delta)^sigma u as evolved directly by a
    stepper.  Forming it from (u, u_t) cancels two nearly equal terms once
    w is exponentially small, so observables prefer the carried copy.
    """

    u: RealField
    ut: RealField
    time: float = 0.0
    w: RealField | None = None

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise ValueError("u and ut live on different grids")
        if self.w is not None and self.w.grid != self.u.grid:
            raise ValueError("w lives on a different grid")
        if not (np.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"time must be >= 0, got {self.time}")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @classmethod
    def initial(cls, u1: RealField, u0: RealField | None = None) -> StatePair:
        g = u1.grid
        u0 = RealField.zeros(g) if u0 is None else u0
        w = None
        if not np.any(u0.values):
            w = u1
        return cls(u0, u1, 0.0, w)

    def w_field(self) -> RealField:
        if self.w is not None:
            return self.w
        g = self.grid
        wh = rfft_coeffs(self.ut.values, g) + g.mu_half * rfft_coeffs(self.u.values, g)
        return RealField(g, irfft_values(wh, g))
