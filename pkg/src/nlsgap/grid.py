"""Cubic periodic grid, 3D FFTs, spectral derivatives and weighted inner products.

Fields are plain ``float64`` arrays of shape ``(N, N, N)`` in *centered*
order: array index ``i`` along an axis holds the node ``j = i - N/2``, so
``x = (i - N/2) * L / N`` and the origin sits at index ``N/2``.  Row-major
layout means ``j3`` varies fastest.

Transforms follow the unnormalized-forward / ``1/N^3``-inverse convention.
``fft3`` returns spectra in wrap-around frequency order for the field
re-indexed so that ``j = 0`` is the first sample, i.e. the spectrum is the
plain DFT ``F(k) = sum_j f(x_j) exp(-i xi_k . x_j)``.  Diagonal Fourier
multipliers commute with the centering shift, so the hot paths
(:meth:`GridSpec.apply_multiplier`, derivatives) skip the shift and run
``rfftn`` directly on centered arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = ["GridSpec", "make_grid", "fft3", "ifft3", "spectral_derivative",
           "inner_product", "l2_norm", "signed_permutation"]


@dataclass(frozen=True)
class GridSpec:
    """Cube of side ``L`` sampled with ``N`` points per axis.

    Use :func:`make_grid` to construct; it validates the parameters.
    """

    L: float
    N: int
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @cached_property
    def x(self) -> np.ndarray:
        """1D node coordinates in centered order, ``[-L/2, L/2 - h]``."""
        return np.arange(-self.N // 2, self.N // 2) * self.h

    @cached_property
    def xi(self) -> np.ndarray:
        """1D angular frequencies ``2 pi k / L`` in wrap-around order."""
        return 2 * np.pi * sfft.fftfreq(self.N, d=1.0 / self.N) / self.L

    @cached_property
    def xi_half(self) -> np.ndarray:
        """Frequencies along the last (``rfftn``) axis, ``k = 0..N/2``."""
        return 2 * np.pi * np.arange(self.N // 2 + 1) / self.L

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays ``(x1, x2, x3)``."""
        x = self.x
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def radius(self) -> np.ndarray:
        x1, x2, x3 = self.coords()
        return np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)

    # -- half-spectrum helpers used by the hot loops -----------------------

    def half_xi(self, axis: int, zero_nyquist: bool = True) -> np.ndarray:
        """Broadcastable frequency array for ``axis`` on the rfftn layout."""
        n = self.N
        if axis == 2:
            k = self.xi_half.copy()
            if zero_nyquist:
                k[n // 2] = 0.0
            return k[None, None, :]
        k = self.xi.copy()
        if zero_nyquist:
            k[n // 2] = 0.0  # index n/2 holds k = -N/2 in wrap-around order
        return k[:, None, None] if axis == 0 else k[None, :, None]

    @property
    def half_ksq(self) -> np.ndarray:
        """``|xi|^2`` on the rfftn layout (Nyquist modes kept)."""
        if "ksq" not in self._cache:
            k0 = self.xi[:, None, None] ** 2
            k1 = self.xi[None, :, None] ** 2
            k2 = self.xi_half[None, None, :] ** 2
            self._cache["ksq"] = k0 + k1 + k2
        return self._cache["ksq"]

    @property
    def half_weight(self) -> np.ndarray:
        """Multiplicity of each rfftn coefficient in the full spectrum."""
        if "hw" not in self._cache:
            w = np.full(self.N // 2 + 1, 2.0)
            w[0] = w[-1] = 1.0
            self._cache["hw"] = w[None, None, :]
        return self._cache["hw"]

    def rfft(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, workers=_workers())

    def irfft(self, F: np.ndarray) -> np.ndarray:
        return sfft.irfftn(F, s=self.shape, workers=_workers())

    def spectral_sum(self, F: np.ndarray, G: np.ndarray, conj: bool = False) -> float:
        """Full-spectrum ``sum_k F(k) G(k)`` (or ``F conj(G)``) from rfftn halves.

        Both inputs must be half spectra of real fields, so the result is real.
        """
        prod = F * (np.conj(G) if conj else G)
        return float(np.sum(self.half_weight * prod.real))

    def apply_multiplier(self, f: np.ndarray, mult: np.ndarray) -> np.ndarray:
        """Apply a real-field-preserving Fourier multiplier given on the rfftn layout."""
        return self.irfft(self.rfft(f) * mult)

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        return f


def make_grid(L: float, N: int) -> GridSpec:
    """Validate ``(L, N)`` and build the grid.

    ``L > N`` is rejected: at such coarse spacing the soliton iteration is
    known to drift off its fixed point.
    """
    if not np.isfinite(L) or L <= 0:
        raise ValueError(f"box side L must be positive, got {L}")
    if int(N) != N or N < 4 or N % 2:
        raise ValueError(f"N must be an even integer >= 4, got {N}")
    if L > N:
        raise ValueError(f"L={L} exceeds N={N}; grid spacing L/N > 1 is not supported")
    return GridSpec(float(L), int(N))


_WORKERS: int | None = None


def _workers() -> int | None:
    return _WORKERS


def set_threads(n: int | None) -> None:
    """Cap the number of FFT worker threads (``None`` means library default)."""
    global _WORKERS
    _WORKERS = n


def fft3(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Full complex DFT of a field, origin-referenced, wrap-around frequency order."""
    f = grid.check_field(f)
    return sfft.fftn(sfft.ifftshift(f), workers=_workers())


def ifft3(grid: GridSpec, F: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft3`; returns the real part in centered order."""
    F = grid.check_field(F)
    return sfft.fftshift(sfft.ifftn(F, workers=_workers()).real)


def spectral_derivative(grid: GridSpec, f: np.ndarray, axis: int) -> np.ndarray:
    """``d f / d x_axis`` (axis in 0..2) with the unmatched Nyquist mode dropped."""
    f = grid.check_field(f)
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    return grid.apply_multiplier(f, 1j * grid.half_xi(axis))


def inner_product(grid: GridSpec, f: np.ndarray, g: np.ndarray) -> float:
    """``h^3 sum_j f(x_j) g(x_j)``."""
    f = grid.check_field(f)
    g = grid.check_field(g)
    return float(grid.cell_volume * np.vdot(f.ravel(), g.ravel()).real)


def l2_norm(grid: GridSpec, f: np.ndarray) -> float:
    return float(np.sqrt(inner_product(grid, f, f)))


def signed_permutation(f: np.ndarray, perm: tuple[int, int, int],
                       signs: tuple[int, int, int]) -> np.ndarray:
    """Evaluate ``f(sigma x)`` for a signed axis permutation on the periodic grid.

    Reflection ``j -> -j`` maps centered index ``i`` to ``N - i (mod N)``.
    """
    g = np.transpose(f, perm)
    for ax, s in enumerate(signs):
        if s < 0:
            g = np.roll(np.flip(g, axis=ax), 1, axis=ax)
    return np.ascontiguousarray(g)
