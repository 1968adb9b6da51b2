"""Rank increments of random block bidiagonal matrices over finite fields."""

__version__ = "0.1.0"

from .chain import (ChainSpec, Pmf, corank_dist_even, corank_dist_odd,  # noqa: E402
                    corank_dist_product_finite, corank_dist_truncated, mu_limit, mu_n,
                    product_corank_pmf, rect_rank_dist, rescale_chain_path, sample_chain,
                    stationary, transition_prob)
from .ensembles import EnsembleSpec, Variant, sample_ensemble  # noqa: E402
from .fmat import FqMatrix, kernel_basis, rank, stream_rank_increments  # noqa: E402
from .gf import field_new  # noqa: E402
from .rng import Stream  # noqa: E402
from .stats import EmpiricalPmf, dkw_trials, gaussian_fit_check, tv_distance  # noqa: E402
from .walk import (WalkSpec, excursion_estimates, ju_pmf, sample_D,  # noqa: E402
                   sample_D_minus_infinity, sample_Ju, sample_Lt, sample_walk)
