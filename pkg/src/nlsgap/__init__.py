"""Numerical check of the gap property for the 3D NLS linearized operators."""

from .eigensolver import EigenSet, cluster_multiplicities, top_eigs
from .gap import (BetaScan, BetaStarResult, EigParams, GapReport, beta_scan, cubic_root,
                  find_beta_star, gap_check, lambda5_plus)
from .grid import (GridSpec, fft3, ifft3, inner_product, l2_norm, make_grid,
                   set_threads, spectral_derivative)
from .io import read_field, write_field
from .operators import BSOperator, apply_bs, make_bs_operator
from .soliton import (SolitonParams, SolitonResult, aitken, compute_M, compute_R,
                      euler_lagrange_residual, petviashvili_step, solve_soliton)
from .special import GreenWeights, apply_inverse_laplacian, greens_weights, sine_integral

__version__ = "0.1.0"
