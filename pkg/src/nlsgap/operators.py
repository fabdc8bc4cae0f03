"""Matrix-free Birman-Schwinger operators ``K = s * U (-Lap)^{-1} U`` with ``U = phi^beta``.

``s = 1`` gives K-, ``s = 2 beta + 1`` gives K+.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .special import GreenWeights

__all__ = ["BSOperator", "make_bs_operator", "apply_bs"]


@dataclass(frozen=True, eq=False)
class BSOperator:
    U: np.ndarray
    green: GreenWeights
    scale: float
    beta: float
    which: str

    @property
    def grid(self):
        return self.green.grid

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return apply_bs(self, f)

    def with_scale(self, which: Literal["minus", "plus"]) -> "BSOperator":
        return make_bs_operator(None, self.beta, which, self.green, U=self.U)


def make_bs_operator(phi: np.ndarray | None, beta: float, which: Literal["minus", "plus"],
                     green: GreenWeights, *, U: np.ndarray | None = None) -> BSOperator:
    """Build K- (``which="minus"``) or K+ (``"plus"``) around the soliton ``phi``."""
    if which not in ("minus", "plus"):
        raise ValueError(f"which must be 'minus' or 'plus', got {which!r}")
    if U is None:
        phi = green.grid.check_field(phi)
        if phi.min() < 0:
            raise ValueError(f"soliton has negative samples (min {phi.min():.3e}); "
                             "it is not a converged ground state")
        U = phi ** beta
        U.setflags(write=False)
    scale = 1.0 if which == "minus" else 2.0 * beta + 1.0
    return BSOperator(U, green, scale, float(beta), which)


def apply_bs(op: BSOperator, f: np.ndarray) -> np.ndarray:
    """``scale * U * ifft(G_hat * fft(U * f))``."""
    f = op.grid.check_field(f)
    if np.iscomplexobj(f):
        raise TypeError("Birman-Schwinger operators act on real fields only")
    g = op.grid.apply_multiplier(op.U * f, op.green.spectrum)
    g *= op.U
    if op.scale != 1.0:
        g *= op.scale
    return g
