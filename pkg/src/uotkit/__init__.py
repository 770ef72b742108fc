"""Translation-invariant solvers for 1-D unbalanced optimal transport.

The package covers the regularized problem through three Sinkhorn-type
iterations (plain, translated, and translation-invariant), the
unregularized 1-D problem through Frank-Wolfe with an exact linear-time
balanced oracle, and multimarginal barycenters, all with optimality
certificates and per-iteration traces.
"""

from .barycenter import (
    BarycenterProblem,
    MultiDual,
    MultiPlan,
    extract_barycenter,
    fw_barycenter,
    mot_certificate,
    multimarginal_cost,
    multimarginal_lambda,
    solve_mot_1d,
)
from .certify import (
    Certificate,
    assemble_certificate,
    double_star_norm,
    hilbert_norm,
    scalar_max_oracle,
)
from .duality import (
    DualPair,
    UotProblem,
    eval_F,
    eval_G,
    eval_H,
    eval_primal,
    lambda_star,
    translate,
    updated_marginals,
)
from .entropies import KL, Balanced, Berg, aprox, conj, conj_grad, divergence, softmin
from .exceptions import (
    InfeasibleDualError,
    MassBalanceError,
    NewtonError,
    SubmodularityError,
    UnsupportedEntropyError,
    UotError,
)
from .fw import AtomStore, FwConfig, fw_solve, line_search_h0, pfw_step
from .measures import (
    DiscreteMeasure,
    ExplicitMatrix,
    PowerDistance,
    build_cost_matrix,
    cost_quadruple_diameter,
)
from .ot1d import SparsePlan, check_complementary_slackness, solve_ot_1d
from .sinkhorn import (
    AndersonConfig,
    SinkhornConfig,
    SolverReport,
    anderson_weights,
    birkhoff_rate_bound,
    estimate_rate,
    f_sinkhorn_step,
    g_sinkhorn_step,
    h_optimality_residual,
    h_sinkhorn_step,
    run,
)
from .synthetic import mixture_measure, uniform_measure

__version__ = "0.1.0"
