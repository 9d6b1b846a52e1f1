"""Smooth and rough maximal functions and the maximal-based H^p quasinorm.

The continuum supremum over dilation scales is resolved on a dyadic ladder
from the grid spacing up to the box diameter; the sampled bump is
renormalized to unit discrete mass at every scale so that averaging a
constant reproduces the constant exactly.  The rough maximal function uses
the r^{-n} normalization (not the ball-volume one) and balls clipped at the
box, with cells included when their center lies in the open ball.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
import numpy as np
from scipy.signal import fftconvolve

from .grid import Grid, SampledFunction, Spectrum, dft, idft, lp_quasinorm

__all__ = [
    "BumpProfile",
    "ScaleLadder",
    "make_bump",
    "make_ladder",
    "smooth_maximal",
    "hl_maximal",
    "power_maximal",
    "hp_quasinorm",
]

_REFERENCE_POINTS = 2**16


@lru_cache(maxsize=8)
def _bump_normalization(n: int) -> float:
    """Constant c_n making the unit-ball bump integrate to 1, by fine quadrature."""
    if n == 1:
        step = 2.0 / _REFERENCE_POINTS
        x = -1.0 + step * (np.arange(_REFERENCE_POINTS) + 0.5)
        total = float(np.sum(np.exp(1.0 / (x * x - 1.0))) * step)
    elif n == 2:
        step = 1.0 / _REFERENCE_POINTS
        r = step * (np.arange(_REFERENCE_POINTS) + 0.5)
        total = float(2.0 * np.pi * np.sum(r * np.exp(1.0 / (r * r - 1.0))) * step)
    else:
        raise ValueError(f"dimension must be 1 or 2, got {n}")
    return 1.0 / total


@dataclass(frozen=True)
class BumpProfile:
    """Smooth bump supported in the closed unit ball with unit integral."""

    n: int
    normalization: float

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points of shape (..., n) (or bare scalars when n = 1)."""
        arr = np.asarray(x, dtype=np.float64)
        if self.n == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
            arr = arr[..., None]
        r2 = np.sum(arr * arr, axis=-1)
        inside = r2 < 1.0
        safe = np.where(inside, r2, 0.0)
        with np.errstate(divide="ignore"):
            vals = np.where(inside, np.exp(1.0 / (safe - 1.0)), 0.0)
        return self.normalization * vals

    @property
    def peak(self) -> float:
        """sup phi = phi(0) = c_n / e."""
        return self.normalization * float(np.exp(-1.0))


def make_bump(n: int = 1) -> BumpProfile:
    """The grid-independent unit-mass bump c_n exp(1/(|x|^2 - 1)) on |x| < 1."""
    return BumpProfile(n, _bump_normalization(n))


@dataclass(frozen=True)
class ScaleLadder:
    """Dyadic dilation scales from the grid spacing up to the box diameter."""

    scales: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.scales:
            raise ValueError("ladder must contain at least one scale")
        object.__setattr__(self, "scales", tuple(float(t) for t in sorted(self.scales)))


def make_ladder(grid: Grid, half_steps: bool = False) -> ScaleLadder:
    """Scales 2^k dx, k = 0..log2(M), topping out at the diameter 2L.

    With ``half_steps`` the ladder is refined by interleaved factors sqrt(2).
    """
    levels = int(np.log2(grid.M))
    scales = [grid.dx * 2.0**k for k in range(levels + 1)]
    if half_steps:
        scales += [grid.dx * 2.0 ** (k + 0.5) for k in range(levels)]
    return ScaleLadder(tuple(scales))


def _periodized_kernel(bump: BumpProfile, t: float, grid: Grid) -> np.ndarray:
    """Sample t^{-n} phi(x/t) on the torus, renormalized to unit discrete mass."""
    pts = grid.points()
    reach = int(np.ceil((t + grid.L) / (2.0 * grid.L)))
    vals = np.zeros(grid.shape)
    for shift in itertools.product(range(-reach, reach + 1), repeat=grid.n):
        offset = 2.0 * grid.L * np.asarray(shift, dtype=np.float64)
        vals += bump((pts + offset) / t)
    vals /= t**grid.n
    mass = float(np.sum(vals)) * grid.dx**grid.n
    if mass <= 0.0:
        raise ValueError(f"sampled bump at scale {t} has no mass on the grid")
    return vals / mass


def smooth_maximal(f: SampledFunction, bump: BumpProfile, ladder: ScaleLadder) -> SampledFunction:
    """sup over ladder scales of |phi_t * f|, convolution done spectrally."""
    grid = f.grid
    spec_f = dft(f).coefficients
    best = np.zeros(grid.shape)
    for t in ladder.scales:
        kern = _periodized_kernel(bump, t, grid)
        spec_k = dft(SampledFunction(grid, kern)).coefficients
        conv = idft(Spectrum(grid, spec_f * spec_k))
        best = np.maximum(best, np.abs(conv.values))
    return SampledFunction(grid, best)


def _ball_offsets(r: float, grid: Grid) -> np.ndarray:
    """Indicator stencil of cell offsets whose centers lie in the open ball |y| < r."""
    reach = int(np.ceil(r / grid.dx))
    axis = grid.dx * np.arange(-reach, reach + 1, dtype=np.float64)
    mesh = np.meshgrid(*([axis] * grid.n), indexing="ij")
    dist2 = sum(ax * ax for ax in mesh)
    return (dist2 < r * r).astype(np.float64)


def hl_maximal(f: SampledFunction, ladder: ScaleLadder) -> SampledFunction:
    """sup over ladder radii of r^{-n} * integral of |f| over B(x, r) within the box.

    Balls are clipped at the box boundary (zero-padded linear convolution), so
    no mass wraps around.
    """
    grid = f.grid
    mags = np.abs(f.values)
    best = np.zeros(grid.shape)
    for r in ladder.scales:
        kern = _ball_offsets(r, grid)
        summed = fftconvolve(mags, kern, mode="same")
        np.maximum(best, summed * (grid.dx**grid.n / r**grid.n), out=best)
    np.clip(best, 0.0, None, out=best)
    return SampledFunction(grid, best)


def power_maximal(f: SampledFunction, r: float, ladder: ScaleLadder) -> SampledFunction:
    """M(|f|^r)^{1/r} for r >= 1."""
    if r < 1:
        raise ValueError(f"power must satisfy r >= 1, got {r}")
    grid = f.grid
    powered = SampledFunction(grid, np.abs(f.values) ** r)
    maximal = hl_maximal(powered, ladder)
    return SampledFunction(grid, np.abs(maximal.values) ** (1.0 / r))


def hp_quasinorm(
    f: SampledFunction, p: float, bump: BumpProfile, ladder: ScaleLadder
) -> float:
    """L^p quasinorm of the smooth maximal function of f, for 0 < p < inf."""
    if not (0 < p < np.inf):
        raise ValueError(f"exponent must be finite and positive, got {p}")
    return lp_quasinorm(smooth_maximal(f, bump, ladder), p)
