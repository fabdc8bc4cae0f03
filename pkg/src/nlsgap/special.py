"""Sine integral and the band-limited free-space Green's weights.

The weights are the exact quadrature for ``(-Laplacian)^{-1}`` acting on
functions whose spectrum is supported in the ball ``|xi| <= pi N / L``::

    G(x) = h^3 Si(pi |x| / h) / (2 pi^2 |x|),   G(0) = h^2 / (2 pi),   h = L/N.

Convolution with them is circular, done with one real FFT pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

__all__ = ["sine_integral", "GreenWeights", "greens_weights", "apply_inverse_laplacian"]

_SERIES_MAX = 4.0
_CF_EPS = 1e-17
_CF_MAXITER = 200


def _si_series(x: np.ndarray) -> np.ndarray:
    # sum (-1)^n x^(2n+1) / ((2n+1) (2n+1)!), terms underflow long before n = 40 at x <= 4
    x2 = x * x
    term = x.copy()  # x^(2n+1)/(2n+1)!
    total = x.copy()
    for n in range(1, 40):
        term *= -x2 / ((2 * n) * (2 * n + 1))
        total += term / (2 * n + 1)
    return total


def _si_auxiliary(x: np.ndarray) -> np.ndarray:
    """Si via the auxiliary functions f, g for x > 4.

    ``E1(ix) = exp(-ix) (g(x) - i f(x))`` is evaluated by its continued
    fraction with the modified Lentz algorithm, then
    ``Si = pi/2 - f cos x - g sin x``.
    """
    tiny = 1e-300
    b = 1.0 + 1j * x
    c = np.full(x.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _CF_MAXITER):
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _CF_EPS
        if not active.any():
            break
    # h = exp(ix) E1(ix) = g - i f
    g = h.real
    f = -h.imag
    return np.pi / 2 - f * np.cos(x) - g * np.sin(x)


def sine_integral(x):
    """``Si(x) = int_0^x sin(t)/t dt`` to about 1e-15 absolute, elementwise.

    Odd extension for negative input; NaN input raises ``ValueError``.
    """
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("sine_integral: NaN input")
    ax = np.abs(arr)
    out = np.empty_like(ax)
    small = ax <= _SERIES_MAX
    if small.any():
        out[small] = _si_series(ax[small])
    if (~small).any():
        big = ax[~small]
        res = np.full(big.shape, np.pi / 2)
        fin = np.isfinite(big)
        res[fin] = _si_auxiliary(big[fin])
        out[~small] = res
    out = np.copysign(out, arr)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class GreenWeights:
    """Discrete Green's weights on a grid plus their cached real spectrum.

    ``weights`` is in centered order; ``spectrum`` is the rfftn of the
    weights re-indexed to put the origin first, which is real because the
    kernel is even.
    """

    grid: GridSpec
    weights: np.ndarray
    spectrum: np.ndarray


def green_kernel(grid: GridSpec, r: np.ndarray) -> np.ndarray:
    """Two-branch Green's weight formula evaluated at distances ``r``."""
    h = grid.h
    r = np.asarray(r, dtype=float)
    out = np.full(r.shape, h * h / (2 * np.pi))
    nz = r > 0
    rn = r[nz]
    out[nz] = h ** 3 * sine_integral(np.pi * rn / h) / (2 * np.pi ** 2 * rn)
    return out


def greens_weights(grid: GridSpec) -> GreenWeights:
    """Sample the Green's weights on ``grid`` and precompute their spectrum."""
    w = green_kernel(grid, grid.radius())
    spec = grid.rfft(np.fft.ifftshift(w)).real
    w.setflags(write=False)
    spec.setflags(write=False)
    return GreenWeights(grid, w, spec)


def apply_inverse_laplacian(f: np.ndarray, green: GreenWeights) -> np.ndarray:
    """Circular convolution ``sum_k G(x_j - x_k) f(x_k)`` via FFT."""
    f = green.grid.check_field(f)
    return green.grid.apply_multiplier(f, green.spectrum)
