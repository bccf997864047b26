"""recwatch: agent-based simulation of viral marketing under
dishonest-recommender attack, with suspicious-set-shrinkage detection
algorithms and their closed-form performance estimators."""

from .detect import (
    DetectorState,
    EstimatorInputs,
    NeighborReport,
    RoundObservation,
    Variant,
    detect_round_baseline,
    detect_round_churn,
    detect_round_cooperative,
    estimate_pd,
    estimate_phc,
    expected_detection_rounds,
    pfn_theoretic,
    pfp_theoretic_baseline,
    pfp_theoretic_churn,
    pfp_theoretic_cooperative,
    r_distribution,
    run_complete,
    trust_weights_default,
)
from .engine import ChurnModel, Simulation
from .graph import (
    DegreeFit,
    GlpParams,
    Graph,
    PAPER_SCALE_GLP,
    clustering_coefficient,
    fit_power_law,
    generate_glp,
    write_edge_list,
)
from .market import (
    NEGATIVE,
    POSITIVE,
    SILENT,
    AgentPolicy,
    ProductCatalog,
    Recommendation,
    choose_purchase,
    classify,
    dishonest_policy,
    dishonest_recommend,
    honest_forward_decision,
)
from .metrics import (
    ExperimentResult,
    GroundTruth,
    aggregate_replicates,
    empirical_pfn,
    empirical_pfp,
    market_share,
)

__version__ = "0.1.0"
