"""Binary hidden tree Markov models: coordinates, certificates, recovery.

The library covers the full geometry of binary latent tree models:

* tree topologies and their combinatorics (:mod:`treecumulants.trees`);
* partition posets and Möbius inversion (:mod:`treecumulants.posets`);
* the coordinate pipeline from probability tables through non-central
  and central moments to tree cumulants (:mod:`treecumulants.moments`);
* latent parametrizations, the forward map, and the monomial cumulant
  parametrization (:mod:`treecumulants.models`);
* the complete semialgebraic membership certificate
  (:mod:`treecumulants.membership`);
* tree-metric diagnostics (:mod:`treecumulants.metrics`);
* flattening-rank invariants (:mod:`treecumulants.flattenings`);
* latent-parameter recovery with exact radical arithmetic
  (:mod:`treecumulants.recovery`).
"""

from .flattenings import (
    CumulantFlattening,
    Flattening,
    cumulant_flattening,
    flatten,
    minor_residuals_3x3,
    rank_leq,
    unflatten,
)
from .membership import (
    Certificate,
    Report,
    certify,
    check_C1,
    check_C2,
    check_C3,
    check_C4,
    check_C5,
    hyperdet,
    hyperdet_from_moments,
    triple_hyperdet,
)
from .metrics import (
    CorrelationData,
    SignAssignment,
    TreeMetricMap,
    check_path_factorization,
    correlations,
    edge_correlations,
    four_point_check,
    second_order_necessary,
    sigma_from_moments,
    sign_assignment,
    tree_metric_map,
)
from .models import (
    OmegaParams,
    ThetaParams,
    forward,
    omega_to_theta,
    psi,
    refine_tree_and_params,
    relabel_hidden,
    sample_theta,
    theta_to_omega,
    validate_omega,
    validate_theta,
)
from .moments import (
    MomentSet,
    ProbTable,
    central_to_cumulants,
    central_to_noncentral,
    cumulants_to_central,
    cumulants_to_probs,
    noncentral_to_central,
    noncentral_to_probs,
    probs_to_cumulants,
    probs_to_noncentral,
    table_from_json,
    table_to_json,
)
from .posets import PartitionPoset, TreePartition, leq, mobius, tree_partitions
from .radicals import SqrtValue
from .recovery import (
    KForest,
    RecoveryResult,
    SquareRecovery,
    k_forest,
    recover,
    recover_squares,
    resolve_signs,
)
from .trees import (
    RestrictedTree,
    Split,
    TreeError,
    TreeTopology,
    parse_newick,
    trivalent_refinement,
)

__version__ = "0.1.0"
