"""Graph-regularized propagation (GCN+), over-smoothing metrics and a numpy trainer."""

from .errors import GcnPlusError
from .graph import (
    CsrGraph,
    NormalizationKind,
    apply_normalized,
    apply_normalized_transpose,
    build_csr,
    complement_edge_counts,
    spectral_radius_estimate,
)
from .metrics import SmoothnessReport, dirichlet_energy, pairwise_total, smoothness_report
from .propagation import (
    Kernel,
    PropagationConfig,
    PropagationOperator,
    apply_hat,
    apply_hat_transpose,
    closed_form_dense,
    mu_of,
    normal_equation_residual,
    objective_value,
    propagate,
    propagate_transpose,
)

__version__ = "0.1.0"
