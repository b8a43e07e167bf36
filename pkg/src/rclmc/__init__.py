"""Random-coordinate Langevin Monte Carlo with exact diagnostics and bounds."""

from .bounds import (BoundReport, Plan, condition_numbers, holder_product, lmc_bound_case1,
                     lmc_bound_case2, lmc_stopping_case1, lmc_stopping_case2, moment_recursion,
                     isotropic_w2_lower_bound, rclmc_bound_case1, rclmc_bound_case2,
                     rclmc_stopping_case1, rclmc_stopping_case2, sde_step_admissible)
from .config import RunConfig, config_hash, parse_config
from .diagnostics import (error_M, gaussian_w2, moment_lower_bound_w2, psi_spectral,
                          w2_1d_empirical)
from .samplers import (ChainState, EnsembleRecord, coupled_pair_step, lmc_step, rc_lmc_step,
                       run_ensemble)
from .schedule import (CoordinateDistribution, phi_alpha, phi_explicit, phi_hessian_optimal,
                       phi_uniform, sample_index)
from .targets import (GraphTarget, ProductTarget, QuadraticTarget, TargetModel, build_target,
                      make_block_gaussian_target)

__version__ = "0.1.0"
