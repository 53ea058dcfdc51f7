"""Block-sparse signal recovery by weighted mixed l2/lp minimization."""

from blocklp.blocks import (
    BlockIndexSet,
    BlockPattern,
    BlockVector,
    best_k_block_approx,
    block_l20,
    block_norms,
    mixed_norm,
    snr_db,
    weighted_objective,
)
from blocklp.conditions import (
    ConditionParams,
    NspReport,
    RicEstimate,
    TrivialNullSpaceError,
    delta_threshold,
    derive_rho_alpha,
    gamma_factor,
    nsp_falsify,
    recovery_constants,
    ric_estimate,
    rip_sufficient_check,
    set_distance,
)
from blocklp.solver import (
    RankDeficiencyWarning,
    RecoveryResult,
    SolverConfig,
    SolverError,
    active_backend,
    init_min_norm,
    irls_recover,
    irls_step,
    irls_weights,
)

__version__ = "0.1.0"
