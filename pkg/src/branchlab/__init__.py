"""branchlab: simulation and verification lab for recursive-tree profiles,
the branching processes that embed them, and their Gaussian limits."""

from ._version import __version__
from .cmj import (
    BirthEvent,
    CmjTrajectory,
    DecompositionTerms,
    EmbeddedTree,
    ancestor_counts,
    count_generation,
    decomposition_terms,
    expected_event_count,
    renewal_count_samples,
    simulate_cmj,
    simulate_embedded_rrt,
)
from .distributions import (
    IncrementDistribution,
    lorden_constant,
    make_distribution,
)
from .errors import (
    BranchLabError,
    CapExceededError,
    FactorizationError,
    TableCoverageError,
)
from .gaussian_limit import (
    CovMatrix,
    GaussianGridSample,
    build_cov_matrix,
    cov_rkl,
    cov_rkl_integral,
    marginal_sd,
    sample_limit,
)
from .recursive_tree import (
    ProfilePath,
    ProfileVector,
    RecursiveTree,
    depths_from_parents,
    exact_profile_distribution,
    generate_parent_matrix,
    generate_rrt,
    grow_and_record,
    level1_moments,
    level_counts_batch,
    profile,
)
from .renewal import (
    RenewalTable,
    abs_normal_moment,
    build_renewal_table,
    higher_renewal_grid,
    lorden_check,
    moment_ratio,
    renewal_function_grid,
    second_moment_rhs,
    stieltjes_integral,
    table_from_csv,
    uk_bound_check,
    uk_deviation_bound,
    yk3_exact,
)
from .rng import RngStream, mix64
from .runner import map_replicated
from .stat_tests import (
    GridTestReport,
    KsReport,
    NormalizedSample,
    empirical_cov,
    functional_grid_test,
    kolmogorov_pvalue,
    ks_one_sample,
    ks_two_sample,
    normalize_cmj,
    normalize_tree_profile,
)
from .verify import (
    VerifyConfig,
    manifest_core_bytes,
    registry_names,
    verify_suite,
)

__all__ = [
    "__version__",
    "BirthEvent",
    "BranchLabError",
    "CapExceededError",
    "CmjTrajectory",
    "CovMatrix",
    "DecompositionTerms",
    "EmbeddedTree",
    "FactorizationError",
    "GaussianGridSample",
    "GridTestReport",
    "IncrementDistribution",
    "KsReport",
    "NormalizedSample",
    "ProfilePath",
    "ProfileVector",
    "RecursiveTree",
    "RenewalTable",
    "RngStream",
    "TableCoverageError",
    "VerifyConfig",
    "abs_normal_moment",
    "ancestor_counts",
    "build_cov_matrix",
    "build_renewal_table",
    "count_generation",
    "cov_rkl",
    "cov_rkl_integral",
    "decomposition_terms",
    "depths_from_parents",
    "empirical_cov",
    "exact_profile_distribution",
    "expected_event_count",
    "functional_grid_test",
    "generate_parent_matrix",
    "generate_rrt",
    "grow_and_record",
    "higher_renewal_grid",
    "kolmogorov_pvalue",
    "ks_one_sample",
    "ks_two_sample",
    "level1_moments",
    "level_counts_batch",
    "lorden_check",
    "lorden_constant",
    "make_distribution",
    "manifest_core_bytes",
    "map_replicated",
    "marginal_sd",
    "mix64",
    "moment_ratio",
    "normalize_cmj",
    "normalize_tree_profile",
    "profile",
    "registry_names",
    "renewal_count_samples",
    "renewal_function_grid",
    "sample_limit",
    "second_moment_rhs",
    "simulate_cmj",
    "simulate_embedded_rrt",
    "stieltjes_integral",
    "table_from_csv",
    "uk_bound_check",
    "uk_deviation_bound",
    "verify_suite",
    "yk3_exact",
]
