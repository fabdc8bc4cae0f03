"""Ground state of ``-Lap phi + phi = phi^(2 beta + 1)`` by modified Petviashvili iteration.

One step is::

    phi <- M^gamma (1 - Lap)^{-1} (|phi|^(2 beta) phi) + delta * sum_j R_j d_j phi

with the stabilizing ratio ``M``, the translation ratios ``R_j`` and
``gamma = (2 beta + 1) / (2 beta)``.  ``M`` and ``R_j`` are bilinear
spectral integrals taken *without* complex conjugation: for real fields
``sum_k F(k) G(k)`` pairs ``f(x)`` with ``g(-x)``, which is what makes
``R_j`` pick up the odd (off-center) part of the iterate.  With
``delta = -1/2`` a small translation of the iterate is removed in one step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec

__all__ = ["SolitonParams", "SolitonResult", "SolitonError", "nonlinearity",
           "compute_M", "compute_R", "euler_lagrange_residual", "petviashvili_step",
           "aitken", "solve_soliton", "gaussian_guess"]

log = logging.getLogger(__name__)


class SolitonError(RuntimeError):
    """Degenerate iterate (vanishing denominators, non-positive M)."""


@dataclass(frozen=True)
class SolitonParams:
    beta: float
    tau: float = 1e-11
    max_iter: int = 500
    delta: float = -0.5
    use_aitken: bool = True
    amplitude: float = 3.0  # of the default Gaussian start exp(-|x|^2)
    divergence_factor: float = 10.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    @property
    def gamma(self) -> float:
        return (2 * self.beta + 1) / (2 * self.beta)


@dataclass
class SolitonResult:
    phi: np.ndarray
    params: SolitonParams
    grid: GridSpec
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    M_history: list[float] = field(default_factory=list)
    R_history: list[tuple[float, float, float]] = field(default_factory=list)
    aitken_history: list[tuple[int, float]] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    under_resolved: bool = False
    message: str = ""

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("inf")

    @property
    def M(self) -> float:
        return self.M_history[-1] if self.M_history else float("nan")

    @property
    def R(self) -> tuple[float, float, float]:
        return self.R_history[-1] if self.R_history else (np.nan,) * 3


def nonlinearity(phi: np.ndarray, beta: float) -> np.ndarray:
    """Sign-preserving power ``|phi|^(2 beta) phi``."""
    if beta == 1.0:
        return phi * phi * phi
    return np.abs(phi) ** (2 * beta) * phi


def gaussian_guess(grid: GridSpec, amplitude: float = 3.0) -> np.ndarray:
    r = grid.radius()
    return amplitude * np.exp(-r * r)


@dataclass
class _Diagnostics:
    phat: np.ndarray
    nhat: np.ndarray
    M: float
    R: tuple[float, float, float]
    R_degenerate: tuple[bool, bool, bool]
    residual: float


def _ratio_M(grid, phat, nhat):
    sym = 1.0 + grid.half_ksq
    num = grid.spectral_sum(sym * phat, phat)
    den = grid.spectral_sum(phat, nhat)
    if abs(den) < 1e-300:
        raise SolitonError("M: vanishing denominator (zero or degenerate field)")
    return num / den


def _ratio_R(grid, phat, nhat, axis):
    ik = 1j * grid.half_xi(axis)
    dphat = ik * phat
    dnhat = ik * nhat
    num = grid.spectral_sum((1.0 + grid.half_ksq) * phat, dphat)
    den = grid.spectral_sum(dphat, dnhat)
    scale = np.sqrt(grid.spectral_sum(dphat, dphat, conj=True)
                    * grid.spectral_sum(dnhat, dnhat, conj=True))
    if not abs(den) > 1e-14 * scale:
        return 0.0, True
    return num / den, False


def _residual(grid, phat, nhat):
    rhat = (1.0 + grid.half_ksq) * phat - nhat
    den = grid.spectral_sum(phat, phat, conj=True)
    if den <= 0:
        return float("inf")
    return float(np.sqrt(grid.spectral_sum(rhat, rhat, conj=True) / den))


def _diagnose(grid: GridSpec, phi: np.ndarray, beta: float) -> _Diagnostics:
    phat = grid.rfft(phi)
    nhat = grid.rfft(nonlinearity(phi, beta))
    M = _ratio_M(grid, phat, nhat)
    Rs = [_ratio_R(grid, phat, nhat, ax) for ax in range(3)]
    return _Diagnostics(phat, nhat, M, tuple(r for r, _ in Rs),
                        tuple(d for _, d in Rs), _residual(grid, phat, nhat))


def compute_M(grid: GridSpec, phi: np.ndarray, beta: float) -> float:
    """Stabilizing ratio ``int (1+|xi|^2) phi^2 / int phi (|phi|^(2b) phi)`` in frequency."""
    phi = grid.check_field(phi)
    return _ratio_M(grid, grid.rfft(phi), grid.rfft(nonlinearity(phi, beta)))


def compute_R(grid: GridSpec, phi: np.ndarray, beta: float, axis: int) -> float:
    """Translation ratio along ``axis`` (0..2); 0.0 if the denominator degenerates."""
    phi = grid.check_field(phi)
    value, _ = _ratio_R(grid, grid.rfft(phi), grid.rfft(nonlinearity(phi, beta)), axis)
    return value


def euler_lagrange_residual(grid: GridSpec, phi: np.ndarray, beta: float) -> float:
    """``||-Lap phi + phi - |phi|^(2b) phi|| / ||phi||``; ``inf`` for the zero field."""
    phi = grid.check_field(phi)
    return _residual(grid, grid.rfft(phi), grid.rfft(nonlinearity(phi, beta)))


def _step_from(grid, diag: _Diagnostics, params: SolitonParams) -> np.ndarray:
    if not diag.M > 0:
        raise SolitonError(f"M = {diag.M:.3e} <= 0: iterate left the basin of attraction")
    new_hat = diag.M ** params.gamma * diag.nhat / (1.0 + grid.half_ksq)
    if params.delta != 0.0:
        drift = sum(r * grid.half_xi(ax) for ax, r in enumerate(diag.R))
        new_hat = new_hat + params.delta * 1j * drift * diag.phat
    return grid.irfft(new_hat)


def petviashvili_step(grid: GridSpec, phi: np.ndarray, params: SolitonParams) -> np.ndarray:
    """One modified Petviashvili update."""
    phi = grid.check_field(phi)
    return _step_from(grid, _diagnose(grid, phi, params.beta), params)


def aitken(f0: np.ndarray, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """Pointwise Aitken extrapolation of three successive iterates.

    Points whose second difference is below ``1e-14 (|f0| + 1)`` keep ``f2``.
    """
    d1 = f1 - f0
    d2 = f2 - 2.0 * f1 + f0
    ok = np.abs(d2) >= 1e-14 * (np.abs(f0) + 1.0)
    out = f2.copy()
    out[ok] = f0[ok] - d1[ok] ** 2 / d2[ok]
    return out


def solve_soliton(grid: GridSpec, params: SolitonParams,
                  initial: np.ndarray | None = None) -> SolitonResult:
    """Iterate to ``residual <= tau``.

    Every third plain step the pointwise Aitken extrapolate of the last three
    iterates replaces the current one if it has a smaller residual.  A fixed
    point with non-positive samples is reported as under-resolved, not
    converged; this is what coarse grids (L of order N/4 and up) produce.  The
    run aborts early when the residual, after having dropped below 1e-3, climbs
    back above ``divergence_factor`` times its best value.  The returned
    ``phi`` is the best iterate seen.
    """
    phi = gaussian_guess(grid, params.amplitude) if initial is None else np.array(
        grid.check_field(initial), dtype=float)
    res = SolitonResult(phi=phi, params=params, grid=grid, iterations=0)
    best_res, best_phi = np.inf, phi
    window = [phi]
    for it in range(params.max_iter + 1):
        try:
            diag = _diagnose(grid, phi, params.beta)
        except SolitonError as exc:
            res.message = str(exc)
            break
        res.residual_history.append(diag.residual)
        res.M_history.append(diag.M)
        res.R_history.append(diag.R)
        res.iterations = it
        if diag.residual < best_res:
            best_res, best_phi = diag.residual, phi
        if diag.residual <= params.tau:
            if phi.min() > 0:
                res.converged = True
                res.message = f"converged in {it} iterations"
            else:
                res.under_resolved = True
                res.message = (
                    f"fixed point reached in {it} iterations but min(phi) = {phi.min():.3e} "
                    f"<= 0: L={grid.L:g} is too large for N={grid.N} "
                    f"(L of the order of N/4 or larger)")
            break
        if best_res < 1e-3 and diag.residual > params.divergence_factor * best_res:
            res.diverged = True
            res.message = (
                f"divergence at iteration {it}: residual {diag.residual:.3e} rose from "
                f"{best_res:.3e}; L={grid.L:g} is coarse for N={grid.N} "
                f"(expect trouble once L is of the order of N/4 or larger)")
            break
        if it == params.max_iter:
            res.message = f"no convergence in {params.max_iter} iterations"
            break
        try:
            phi = _step_from(grid, diag, params)
        except SolitonError as exc:
            res.message = str(exc)
            break
        if not np.all(np.isfinite(phi)):
            res.message = "non-finite iterate"
            break
        window.append(phi)
        if params.use_aitken and len(window) == 3:
            acc = aitken(*window)
            acc_res = euler_lagrange_residual(grid, acc, params.beta)
            res.aitken_history.append((it + 1, acc_res))
            if acc_res < euler_lagrange_residual(grid, phi, params.beta):
                phi = acc
            window = [phi]
        elif not params.use_aitken:
            window = [phi]
    res.phi = best_phi
    if not res.converged:
        log.warning("soliton solve did not converge: %s", res.message)
    return res
