"""Design-based causal estimation under network interference with a possibly misspecified network."""

from .bias import PotentialTable, bias_bound, exact_bias, misclassification_counts, true_means
from .design import Design, sample_assignment
from .estimators import (
    EstimateResult,
    ObservedData,
    conservative_variance,
    effect,
    hajek_mean,
    ht_mean,
    interpolate,
)
from .exposure import (
    ExposureMapping,
    SchoolMapping,
    ThresholdMapping,
    agreement_indicator,
    agreement_levels,
    map_all,
)
from .graph import (
    ClusteredNetwork,
    Network,
    gen_cluster_network,
    gen_preferential_attachment,
    jaccard,
    load_cluster_file,
    load_edge_list,
)
from .pba import (
    CensorFillKernel,
    ContaminationKernel,
    EdgeFlipKernel,
    PbaResult,
    ThetaDist,
    run_pba,
    summarize,
)
from .perturb import SbmSpec, censor_degree, contaminate_clusters, flip_edges, sbm_expected
from .prob import (
    CrossTable,
    PositivityError,
    ProbTables,
    check_positivity,
    estimate_cross,
    estimate_tables,
    exact_cross,
    exact_tables,
)
from .sim import MetricRow, ScenarioSpec, gen_potential_outcomes, realize_outcomes, run_scenario

__version__ = "0.1.0"
