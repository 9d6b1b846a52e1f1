"""Periodic grids, sampling, discrete Fourier transforms, and quadrature.

Everything lives on the torus [-L, L)^n sampled at M points per axis.  The
transform convention is

    fhat(xi) = integral f(x) exp(-2 pi i x.xi) dx,

discretized by the rectangle rule, so that coefficients carry physical units
(the DC coefficient of f == 1 is the box volume).  Frequencies are the
physical points k/(2L) for k = -M/2, ..., M/2 - 1, not bare integer indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Box",
    "Grid",
    "SampledFunction",
    "Spectrum",
    "make_grid",
    "sample",
    "dft",
    "idft",
    "lp_quasinorm",
    "pointwise_product",
]


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class Box:
    """Periodic domain [-L, L)^n."""

    n: int
    L: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n}")
        if not (self.L > 0):
            raise ValueError(f"half-width must be positive, got {self.L}")

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.n


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with M (a power of two) points per axis.

    Spatial points per axis are dx * {-M/2, ..., M/2 - 1} with dx = 2L/M;
    frequency points per axis are {-M/2, ..., M/2 - 1} / (2L).  The frequency
    set is symmetric apart from the single Nyquist row at -M/(4L).
    """

    box: Box
    M: int

    def __post_init__(self) -> None:
        if not _is_power_of_two(self.M):
            raise ValueError(f"points per axis must be a power of two, got {self.M}")

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def L(self) -> float:
        return self.box.L

    @property
    def dx(self) -> float:
        return 2.0 * self.box.L / self.M

    @property
    def dxi(self) -> float:
        """Frequency spacing 1/(2L)."""
        return 1.0 / (2.0 * self.box.L)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.n

    @property
    def size(self) -> int:
        return self.M**self.n

    def axis_points(self) -> np.ndarray:
        """Spatial coordinates along one axis, ascending from -L."""
        return self.dx * np.arange(-self.M // 2, self.M // 2, dtype=np.float64)

    def axis_frequencies(self) -> np.ndarray:
        """Frequency coordinates along one axis, ascending from -M/(4L)."""
        return np.arange(-self.M // 2, self.M // 2, dtype=np.float64) / (2.0 * self.box.L)

    def points(self) -> np.ndarray:
        """All grid points, shape (M,)*n + (n,)."""
        axes = [self.axis_points()] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def frequencies(self) -> np.ndarray:
        """All frequency points, shape (M,)*n + (n,)."""
        axes = [self.axis_frequencies()] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _frozen_complex(values: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.complex128)
    if arr.shape != shape:
        raise ValueError(f"value array has shape {arr.shape}, expected {shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SampledFunction:
    """Complex-valued function sampled on a grid.  Immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_complex(self.values, self.grid.shape))

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        _require_same_grid(self.grid, other.grid)
        return SampledFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "SampledFunction") -> "SampledFunction":
        _require_same_grid(self.grid, other.grid)
        return SampledFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "SampledFunction":
        return SampledFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def abs(self) -> "SampledFunction":
        return SampledFunction(self.grid, np.abs(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class Spectrum:
    """Frequency-side coefficients on a grid, indexed like Grid.frequencies()."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coefficients", _frozen_complex(self.coefficients, self.grid.shape)
        )

    def at_zero(self) -> complex:
        """Coefficient at the zero frequency."""
        center = (self.grid.M // 2,) * self.grid.n
        return complex(self.coefficients[center])


def _require_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def make_grid(n: int, L: float, M: int) -> Grid:
    """Build an n-dimensional periodic grid on [-L, L)^n with M points per axis.

    n is capped at 2: m-linear operator application costs O(M^(m n)), so
    higher dimensions are rejected as a memory guard.
    """
    if n not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {n}")
    if M < 8:
        raise ValueError(f"need at least 8 points per axis, got {M}")
    return Grid(Box(n, float(L)), int(M))


def sample(f: Callable[..., complex], grid: Grid) -> SampledFunction:
    """Sample a pointwise evaluator on every grid point.

    The evaluator receives one float argument per dimension.  It may be
    numpy-vectorized; if it is not, it is applied point by point.
    """
    pts = grid.points()
    coords = tuple(pts[..., i] for i in range(grid.n))
    try:
        values = np.asarray(f(*coords), dtype=np.complex128)
        if values.shape != grid.shape:
            raise ValueError("evaluator is not vectorized")
    except (ValueError, TypeError):
        values = np.empty(grid.shape, dtype=np.complex128)
        it = np.ndindex(*grid.shape)
        for idx in it:
            point = tuple(float(c[idx]) for c in coords)
            try:
                values[idx] = complex(f(*point))
            except Exception as exc:
                raise ValueError(f"evaluator failed at point {point}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        point = tuple(float(c[tuple(bad)]) for c in coords)
        raise ValueError(f"evaluator returned a non-finite value at point {point}")
    return SampledFunction(grid, values)


def dft(f: SampledFunction) -> Spectrum:
    """Forward transform, rectangle rule: dx^n * FFT with centered indexing."""
    g = f.grid
    shifted = np.fft.ifftshift(f.values)
    coeffs = np.fft.fftshift(np.fft.fftn(shifted)) * g.dx**g.n
    return Spectrum(g, coeffs)


def idft(s: Spectrum) -> SampledFunction:
    """Inverse transform; exact inverse of dft up to rounding."""
    g = s.grid
    shifted = np.fft.ifftshift(s.coefficients)
    values = np.fft.fftshift(np.fft.ifftn(shifted)) / g.dx**g.n
    return SampledFunction(g, values)


def lp_quasinorm(f: SampledFunction, p: float) -> float:
    """L^p quasinorm by the rectangle rule; p = inf gives the sup norm.

    Valid for every p > 0, including the quasinorm range 0 < p < 1.
    """
    if p == np.inf:
        return f.max_abs()
    if not (p > 0):
        raise ValueError(f"exponent must be positive or inf, got {p}")
    g = f.grid
    mags = np.abs(f.values)
    total = float(np.sum(mags**p)) * g.dx**g.n
    return float(total ** (1.0 / p))


def pointwise_product(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Entrywise product of two functions on the same grid."""
    _require_same_grid(f.grid, g.grid)
    return SampledFunction(f.grid, f.values * g.values)
