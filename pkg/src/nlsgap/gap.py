"""Gap verdicts per beta, beta sweeps and localization of the critical exponent.

The gap property holds when ``lambda_2(K-) < 1`` and ``lambda_5(K+) < 1``.
Since ``K+ = (2 beta + 1) K-`` exactly, one eigensolve of K- yields both
spectra; a direct K+ solve is available as a cross-check.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .eigensolver import EigenSet, cluster_multiplicities, top_eigs
from .grid import GridSpec
from .operators import make_bs_operator
from .soliton import SolitonParams, SolitonResult, solve_soliton
from .special import GreenWeights, greens_weights

__all__ = ["EigParams", "GapReport", "BetaScan", "BetaStarResult", "BracketError",
           "gap_check", "beta_scan", "find_beta_star", "cubic_root", "lambda5_plus"]

log = logging.getLogger(__name__)


class BracketError(ValueError):
    """``lambda_5(K+) - 1`` does not change sign on the requested bracket."""

    def __init__(self, msg, values=()):
        super().__init__(msg)
        self.values = list(values)


@dataclass(frozen=True)
class EigParams:
    k: int = 6
    tol: float = 1e-12
    max_restarts: int = 300
    seed: int = 0
    block_size: int = 3
    cross_check: bool = False
    cluster_tol: float = 1e-8


@dataclass
class GapReport:
    beta: float
    L: float
    N: int
    lambdas_minus: np.ndarray
    lambdas_plus: np.ndarray
    gap_minus_ok: bool | None
    gap_plus_ok: bool | None
    soliton_residual: float
    soliton_M: float
    soliton_R: tuple[float, float, float]
    soliton_converged: bool
    eig_residual: float = float("nan")
    triplet_spread: float = float("nan")
    clusters: list[tuple[int, ...]] = field(default_factory=list)
    cross_check_error: float | None = None
    message: str = ""
    soliton: SolitonResult | None = field(default=None, repr=False)
    eigs: EigenSet | None = field(default=None, repr=False)

    @property
    def gap_property(self) -> bool | None:
        if self.gap_minus_ok is None or self.gap_plus_ok is None:
            return None
        return self.gap_minus_ok and self.gap_plus_ok

    def lam_plus(self, i: int) -> float:
        """1-based ``lambda_i(K+)``."""
        return float(self.lambdas_plus[i - 1]) if len(self.lambdas_plus) >= i else float("nan")

    def lam_minus(self, i: int) -> float:
        return float(self.lambdas_minus[i - 1]) if len(self.lambdas_minus) >= i else float("nan")


def _withheld(beta, grid, sol: SolitonResult, message: str) -> GapReport:
    return GapReport(beta=beta, L=grid.L, N=grid.N, lambdas_minus=np.array([]),
                     lambdas_plus=np.array([]), gap_minus_ok=None, gap_plus_ok=None,
                     soliton_residual=sol.residual, soliton_M=sol.M, soliton_R=sol.R,
                     soliton_converged=sol.converged, message=message, soliton=sol)


def gap_check(beta: float, grid: GridSpec, soliton_params: SolitonParams | None = None,
              eig_params: EigParams | None = None, *, green: GreenWeights | None = None,
              initial: np.ndarray | None = None,
              soliton: SolitonResult | None = None) -> GapReport:
    """Soliton, K-/K+ top eigenvalues and the gap verdicts for one beta.

    An unconverged soliton yields a report whose verdicts are ``None``.
    """
    sp = replace(soliton_params, beta=beta) if soliton_params else SolitonParams(beta=beta)
    ep = eig_params or EigParams()
    green = green or greens_weights(grid)
    sol = soliton if soliton is not None else solve_soliton(grid, sp, initial)
    if not sol.converged:
        return _withheld(beta, grid, sol, f"soliton not converged: {sol.message}")

    k = max(ep.k, 6)
    kminus = make_bs_operator(sol.phi, beta, "minus", green)
    eigs = top_eigs(kminus, grid, k, tol=ep.tol, max_restarts=ep.max_restarts,
                    seed=ep.seed, block_size=ep.block_size, cluster_tol=ep.cluster_tol)
    lm = eigs.values
    lp = (2 * beta + 1) * lm
    cross = None
    if ep.cross_check:
        direct = top_eigs(kminus.with_scale("plus"), grid, k, tol=ep.tol,
                          max_restarts=ep.max_restarts, seed=ep.seed,
                          block_size=ep.block_size)
        cross = float(np.max(np.abs(direct.values - lp) / np.abs(lp)))
    spread = float((lp[1:4].max() - lp[1:4].min()) / abs(lp[0]))
    msg = "" if eigs.converged else "eigensolver did not reach tolerance"
    return GapReport(
        beta=beta, L=grid.L, N=grid.N, lambdas_minus=lm, lambdas_plus=lp,
        gap_minus_ok=bool(lm[1] < 1.0), gap_plus_ok=bool(lp[4] < 1.0),
        soliton_residual=sol.residual, soliton_M=sol.M, soliton_R=sol.R,
        soliton_converged=True, eig_residual=float(eigs.residuals.max()),
        triplet_spread=spread, clusters=cluster_multiplicities(lp, ep.cluster_tol),
        cross_check_error=cross, message=msg, soliton=sol, eigs=eigs)


@dataclass
class BetaScan:
    L: float
    N: int
    reports: list[GapReport]

    @property
    def betas(self) -> np.ndarray:
        return np.array([r.beta for r in self.reports])

    def column(self, name: str) -> np.ndarray:
        getters = {
            "lambda5_plus": lambda r: r.lam_plus(5),
            "lambda6_plus": lambda r: r.lam_plus(6),
            "lambda2_minus": lambda r: r.lam_minus(2),
            "lambda1_plus": lambda r: r.lam_plus(1),
            "triplet_spread": lambda r: r.triplet_spread,
            "soliton_residual": lambda r: r.soliton_residual,
        }
        return np.array([getters[name](r) for r in self.reports])

    def sign_changes(self) -> list[int]:
        """Row indices ``i`` with ``lambda_5 - 1`` changing sign between rows i and i+1."""
        s = np.sign(self.column("lambda5_plus") - 1.0)
        return [i for i in range(len(s) - 1) if s[i] * s[i + 1] < 0]


def beta_scan(betas: Sequence[float], grid: GridSpec,
              soliton_params: SolitonParams | None = None,
              eig_params: EigParams | None = None, *, warm_start: bool = True,
              workers: int = 1, green: GreenWeights | None = None) -> BetaScan:
    """One :class:`GapReport` per beta.

    Sequential mode warm-starts each soliton from the previous one; with
    ``warm_start=False`` rows are independent and may run on ``workers``
    threads.  Row failures are recorded and the scan continues.
    """
    betas = [float(b) for b in betas]
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta values must be strictly increasing")
    if any(not 0 < b < 2 for b in betas):
        raise ValueError("beta values must lie in (0, 2)")
    green = green or greens_weights(grid)
    sp = soliton_params or SolitonParams(beta=betas[0])

    def row(beta, initial=None):
        try:
            return gap_check(beta, grid, sp, eig_params, green=green, initial=initial)
        except Exception as exc:  # noqa: BLE001 - scan keeps going
            log.error("beta=%g failed: %s", beta, exc)
            nan3 = (float("nan"),) * 3
            return GapReport(beta, grid.L, grid.N, np.array([]), np.array([]), None, None,
                             float("nan"), float("nan"), nan3, False, message=str(exc))

    if warm_start:
        reports, prev = [], None
        for b in betas:
            rep = row(b, prev)
            if rep.soliton is not None and rep.soliton.converged:
                prev = rep.soliton.phi
            reports.append(rep)
    elif workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            reports = list(pool.map(row, betas))
    else:
        reports = [row(b) for b in betas]
    for r in reports:
        r.soliton = None  # drop fields, keep the table small
        r.eigs = None
    return BetaScan(grid.L, grid.N, reports)


# ---------------------------------------------------------------------------
# critical exponent


@dataclass
class CubicFit:
    center: float
    halfwidth: float
    coefficients: np.ndarray  # highest power first, in t = (beta - center) / halfwidth

    def __call__(self, beta):
        return np.polyval(self.coefficients, (np.asarray(beta) - self.center) / self.halfwidth)

    def slope(self, beta) -> float:
        d = np.polyder(self.coefficients)
        return float(np.polyval(d, (beta - self.center) / self.halfwidth) / self.halfwidth)


def cubic_root(betas: Sequence[float], lambdas: Sequence[float],
               target: float = 1.0) -> tuple[list[float], CubicFit]:
    """Interpolating cubic through four ``(beta, lambda)`` points and its roots.

    Returns the real roots of ``p(beta) = target`` lying in ``[min, max]`` of
    the betas (Newton-polished) and the fit.  Works in a centered, scaled
    variable so closely spaced betas stay well conditioned.
    """
    b = np.asarray(betas, dtype=float)
    y = np.asarray(lambdas, dtype=float) - target
    if b.size != 4:
        raise ValueError("cubic interpolation needs exactly four points")
    c = 0.5 * (b.min() + b.max())
    s = 0.5 * (b.max() - b.min())
    t = (b - c) / s
    coef = np.linalg.solve(np.vander(t, 4), y)
    fit = CubicFit(c, s, coef)
    roots = []
    dcoef = np.polyder(coef)
    for r in np.roots(coef):
        if abs(r.imag) > 1e-9 or not -1 - 1e-12 <= r.real <= 1 + 1e-12:
            continue
        x = r.real
        for _ in range(5):
            dv = np.polyval(dcoef, x)
            if dv == 0:
                break
            x -= np.polyval(coef, x) / dv
        roots.append(float(c + s * x))
    return sorted(roots), fit


@dataclass
class BetaStarResult:
    beta_star: float
    uncertainty: float
    bracket: tuple[float, float]
    table: list[tuple[float, float]]
    fit: CubicFit
    evaluations: list[tuple[float, float]] = field(default_factory=list)
    L: float | None = None
    N: int | None = None


def lambda5_plus(grid: GridSpec, soliton_params: SolitonParams | None = None,
                 eig_params: EigParams | None = None) -> Callable[[float], tuple[float, float]]:
    """Evaluator ``beta -> (lambda_5(K+), absolute eigen-residual)`` with shared state.

    Keeps one set of Green's weights and warm-starts each soliton from the
    previously computed one.
    """
    green = greens_weights(grid)
    state: dict = {}

    def evaluate(beta: float) -> tuple[float, float]:
        rep = gap_check(beta, grid, soliton_params, eig_params, green=green,
                        initial=state.get("phi"))
        if rep.gap_plus_ok is None:
            raise RuntimeError(f"beta={beta}: {rep.message}")
        state["phi"] = rep.soliton.phi
        lam = rep.lam_plus(5)
        return lam, rep.eig_residual * rep.lam_plus(1)

    return evaluate


def find_beta_star(bracket: tuple[float, float], evaluate: Callable[[float], tuple[float, float]],
                   beta_tol: float = 1e-4, bisect_width: float = 1e-4) -> BetaStarResult:
    """Locate ``lambda_5(K+) = 1`` on ``bracket``.

    Bisection on the sign of ``lambda_5 - 1`` down to ``bisect_width``, then
    four equispaced evaluations and the root of their interpolating cubic.
    While the bracket is wider than ``beta_tol`` it shrinks to the pair of
    samples around the sign change and the cubic step repeats.  If the cubic
    has several roots in the bracket, one bisection step is taken instead.
    ``evaluate`` returns ``(lambda_5, residual)``; see :func:`lambda5_plus`.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    cache: dict[float, tuple[float, float]] = {}
    evals: list[tuple[float, float]] = []

    def f(beta):
        if beta not in cache:
            cache[beta] = evaluate(beta)
            evals.append((beta, cache[beta][0]))
            log.info("beta=%.10f  lambda5=%.15f", beta, cache[beta][0])
        return cache[beta][0] - 1.0

    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise BracketError(
            f"lambda_5(K+) - 1 has no sign change on [{lo}, {hi}] "
            f"(lambda_5 = {flo + 1:.12f}, {fhi + 1:.12f})", evals)

    def bisect_once():
        nonlocal lo, hi, flo, fhi
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if flo * fm <= 0:  # an exact hit becomes the upper end
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm

    while hi - lo > bisect_width:
        bisect_once()
    while True:
        xs = np.linspace(lo, hi, 4)
        xs[0], xs[-1] = lo, hi
        ys = np.array([f(float(x)) for x in xs])
        roots, fit = cubic_root(xs, ys + 1.0)
        if len(roots) != 1:
            bisect_once()
            continue
        root = roots[0]
        if hi - lo <= beta_tol:
            break
        i = next(i for i in range(3) if ys[i] * ys[i + 1] <= 0)
        lo, hi, flo, fhi = float(xs[i]), float(xs[i + 1]), ys[i], ys[i + 1]
    resid = max(cache[float(x)][1] for x in xs)
    slope = abs(fit.slope(root))
    unc = max(beta_tol, resid / slope if slope > 0 else np.inf)
    table = [(float(x), cache[float(x)][0]) for x in xs]
    return BetaStarResult(root, unc, (lo, hi), table, fit, evals)
