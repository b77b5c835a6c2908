"""Phase correlation for pure translations.

Pipeline: Hanning window -> forward DFT -> normalized cross-power
spectrum -> inverse DFT -> 5x5 weighted centroid around the peak.

The transforms are backed by :mod:`scipy.fft` (mixed-radix, any size).
Forward transforms are unnormalized; the ``1/(M*N)`` factor sits on the
inverse so the self-correlation peak is exactly one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import InputError, RegistrationError
from .raster import Displacement, Raster

CROSS_POWER_EPS = 1e-12
CENTROID_RADIUS = 2  # 5x5 neighbourhood


@dataclass(frozen=True, eq=False)
class WindowMatrix:
    weights: np.ndarray  # (height, width)

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    @property
    def height(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex DFT coefficients indexed ``values[v, u]``.

    With ``onesided=True`` only the non-negative ``u`` half of a real
    input's spectrum is stored (``width // 2 + 1`` columns); the other
    half follows from Hermitian symmetry.
    """

    width: int
    height: int
    values: np.ndarray
    onesided: bool = False


@dataclass(frozen=True, eq=False)
class CorrelationSurface:
    values: np.ndarray  # real, (height, width), max == 1

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def _hann_1d(n: int) -> np.ndarray:
    x = np.arange(n)
    # fold onto the first half so the taper is exactly symmetric
    x = np.minimum(x, n - 1 - x)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * x / (n - 1)))


def hanning_window(width: int, height: int) -> WindowMatrix:
    """Separable Hanning taper, zero on all four borders."""
    if width < 2 or height < 2:
        raise InputError(f"window dimensions must be >= 2, got {width}x{height}")
    return WindowMatrix(np.outer(_hann_1d(height), _hann_1d(width)))


def apply_window(r: Raster, w: WindowMatrix) -> Raster:
    if r.shape != w.weights.shape:
        raise InputError(
            f"window {w.width}x{w.height} does not match raster {r.width}x{r.height}"
        )
    return Raster(r.pixels * w.weights, r.bit_depth)


def forward_dft(r: Raster, onesided: bool = False) -> Spectrum:
    if onesided:
        values = scipy.fft.rfft2(r.pixels)
    else:
        values = scipy.fft.fft2(r.pixels)
    return Spectrum(r.width, r.height, values, onesided)


def cross_power_spectrum(
    a: Spectrum, b: Spectrum, eps: float = CROSS_POWER_EPS
) -> Spectrum:
    """``A * conj(B) / (|A * conj(B)| + eps)``; every bin has modulus <= 1."""
    if (a.width, a.height, a.onesided) != (b.width, b.height, b.onesided):
        raise InputError("spectra have mismatched dimensions")
    prod = a.values * np.conj(b.values)
    mag = np.abs(prod)
    mag += eps
    prod /= mag
    return Spectrum(a.width, a.height, prod, a.onesided)


def idft_real(s: Spectrum) -> np.ndarray:
    """Real part of the inverse DFT, including the ``1/(M*N)`` factor."""
    if s.onesided:
        return scipy.fft.irfft2(s.values, s=(s.height, s.width))
    return scipy.fft.ifft2(s.values).real


def inverse_dft(s: Spectrum) -> CorrelationSurface:
    """Inverse transform of a cross-power spectrum, scaled so the max is 1."""
    c = idft_real(s)
    peak = c.max()
    if not np.isfinite(peak) or peak <= 0.0:
        raise RegistrationError(
            "correlation surface has no positive peak (degenerate input images)"
        )
    c /= peak
    return CorrelationSurface(c)


def _signed(p: float, n: int) -> float:
    return p - n if p > n / 2 else p


def locate_peak(c: CorrelationSurface) -> Displacement:
    """Weighted centroid of the 5x5 wrap-around neighbourhood of the maximum.

    Negative surface values get zero weight. Among tied maxima the lowest
    row, then lowest column, wins (``argmax`` on row-major order).
    """
    vals = c.values
    h, w = vals.shape
    y0, x0 = divmod(int(np.argmax(vals)), w)
    offs = np.arange(-CENTROID_RADIUS, CENTROID_RADIUS + 1)
    rows = (y0 + offs) % h
    cols = (x0 + offs) % w
    patch = np.maximum(vals[np.ix_(rows, cols)], 0.0)
    total = patch.sum()
    px = x0 + float((patch.sum(axis=0) * offs).sum() / total)
    py = y0 + float((patch.sum(axis=1) * offs).sum() / total)
    return Displacement(_signed(px, w), _signed(py, h))


def correlation_surface(i1: Raster, i2: Raster) -> CorrelationSurface:
    if i1.shape != i2.shape:
        raise InputError(
            f"images differ in size: {i1.width}x{i1.height} vs {i2.width}x{i2.height}"
        )
    win = hanning_window(i1.width, i1.height)
    spec1 = forward_dft(apply_window(i1, win), onesided=True)
    spec2 = forward_dft(apply_window(i2, win), onesided=True)
    # i2's spectrum goes first so the peak sits at +d rather than -d
    return inverse_dft(cross_power_spectrum(spec2, spec1))


def phase_correlate(i1: Raster, i2: Raster) -> Displacement:
    """Translation ``d`` such that features at ``p`` in ``i1`` appear at
    ``p + d`` in ``i2``."""
    return locate_peak(correlation_surface(i1, i2))
