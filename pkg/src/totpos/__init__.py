"""Gaussian maximum likelihood under the M-matrix (nonnegative partial
correlation) constraint, with spanning-forest, ultrametric, and path-product
graph analysis, sign-switched variants, and a brute-force reference oracle.
"""

from .matcore import (
    NonPositiveDiagonal,
    NotPositiveDefinite,
    PdFactor,
    SymMatrix,
    inverse_pd,
    is_m_matrix,
    log_likelihood,
    pd_factorize,
    rescale_solution,
    schur_complement,
    to_correlation,
)
from .graphs import (
    WeightedForest,
    WeightedGraph,
    forest_path,
    max_clique,
    mwsf,
    positive_part_graph,
    to_dot,
    tree_mle,
)
from .ultra import (
    NegativeEntry,
    UltrametricReport,
    ec_graph,
    is_path_product,
    is_ultrametric,
    single_linkage,
    w_matrix,
)
from .solver import (
    FitConfig,
    FitResult,
    KktCertificate,
    MaxSweepsExceeded,
    MleDoesNotExist,
    duality_gap,
    exists_mle,
    fit,
    kkt_certificate,
)
from .structure import (
    BlockReport,
    InputNotMMatrix,
    NotApplicable,
    block_closed_form,
    grw_graph,
    is_block_graph,
    ml_graph_upper_bound,
    mwsf_containment,
    threshold_k,
    tiered_dot,
)
from .signed import (
    SignedFitResult,
    SignVector,
    ZeroWeightTreeEdge,
    apply_signs,
    d_star,
    exhaustive_sign_search,
    fit_signed,
    is_balanced,
)
from .oracle import ActiveSetSolution, NoKktPoint, active_set_oracle

__version__ = "0.1.0"

__all__ = [
    "ActiveSetSolution",
    "BlockReport",
    "FitConfig",
    "FitResult",
    "InputNotMMatrix",
    "KktCertificate",
    "MaxSweepsExceeded",
    "MleDoesNotExist",
    "NegativeEntry",
    "NoKktPoint",
    "NonPositiveDiagonal",
    "NotApplicable",
    "NotPositiveDefinite",
    "PdFactor",
    "SignVector",
    "SignedFitResult",
    "SymMatrix",
    "UltrametricReport",
    "WeightedForest",
    "WeightedGraph",
    "ZeroWeightTreeEdge",
    "active_set_oracle",
    "apply_signs",
    "block_closed_form",
    "d_star",
    "duality_gap",
    "ec_graph",
    "exhaustive_sign_search",
    "exists_mle",
    "fit",
    "fit_signed",
    "forest_path",
    "grw_graph",
    "inverse_pd",
    "is_balanced",
    "is_block_graph",
    "is_m_matrix",
    "is_path_product",
    "is_ultrametric",
    "kkt_certificate",
    "log_likelihood",
    "max_clique",
    "ml_graph_upper_bound",
    "mwsf",
    "mwsf_containment",
    "pd_factorize",
    "positive_part_graph",
    "rescale_solution",
    "schur_complement",
    "single_linkage",
    "threshold_k",
    "tiered_dot",
    "to_correlation",
    "to_dot",
    "tree_mle",
    "w_matrix",
]
