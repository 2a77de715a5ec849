"""User-centric radio-spectrum provisioning for edge-assisted MAR uploads.

A discrete-time library: synthetic SLAM-flavored traffic, dual-model
key-frame demand prediction with adaptive switching, posterior-quantile
robust reservation, a population-moment slicing baseline, and timeliness
and provisioning metrics.
"""

from .core import (
    ContractViolation,
    DState,
    FrameGraph,
    FrameRecord,
    MapState,
    SState,
    SlotWindow,
    build_frame_graph,
    jaccard_similarity,
    select_cull_set,
    slot_key_count,
    slots_of,
    update_device_map,
    update_edge_map,
)
from .demand import (
    LinkPredictor,
    PolicyRunner,
    PolicyState,
    PredictionVector,
    ReferencePolicy,
    SuffixBackoffPredictor,
    build_dstate,
    fit_link_predictor,
    interval_jaccard,
    policy_decision,
    predict_detailed,
    predict_simplified,
    predict_slot,
    predict_slot_simplified,
    reference_policy_step,
)
from .traces import (
    MODE_FEATURE_SETS,
    MODE_SIMILARITY_ONLY,
    REGIMES,
    ParseError,
    RegimeSchedule,
    Trace,
    WorldModel,
    generate_bernoulli_trace,
    generate_trace,
    read_trace,
    write_trace,
)
from .switching import SwitchState, delta, msf_step, observe_count
from .provisioning import (
    SLICING_CLT,
    SLICING_PAPER_LITERAL,
    ChannelParams,
    DegenerateChannelError,
    ProvisionDecision,
    RadioConfig,
    bandwidth_for_k,
    estimate_channel,
    estimate_population_moments,
    k_star,
    normal_quantile,
    posterior_cdf,
    posterior_cdf_table,
    slicing_bandwidth,
    slicing_inner,
    slot_capacity_k,
    tnr,
    tpr,
)
from .config import (
    ChannelSettings,
    ConfigError,
    EstimationSettings,
    ExperimentConfig,
    GeneratorSettings,
    PredictorSettings,
    SlicingSettings,
    SwitchSettings,
    from_dict,
    from_yaml,
    load,
    to_dict,
    to_yaml,
    validate,
)
from .simulator import (
    MetricsReport,
    SlotLog,
    aggregate_bandwidth,
    compute_metrics,
    per_slot_csv,
    run_experiment,
    run_slot,
)

__version__ = "0.1.0"

__all__ = [
    "ContractViolation", "DState", "FrameGraph", "FrameRecord", "MapState",
    "SState", "SlotWindow", "build_frame_graph", "jaccard_similarity",
    "select_cull_set", "slot_key_count", "slots_of", "update_device_map",
    "update_edge_map",
    "LinkPredictor", "PolicyRunner", "PolicyState", "PredictionVector",
    "ReferencePolicy", "SuffixBackoffPredictor", "build_dstate",
    "fit_link_predictor", "interval_jaccard", "policy_decision",
    "predict_detailed", "predict_simplified", "predict_slot",
    "predict_slot_simplified", "reference_policy_step",
    "MODE_FEATURE_SETS", "MODE_SIMILARITY_ONLY", "REGIMES", "ParseError",
    "RegimeSchedule", "Trace", "WorldModel", "generate_bernoulli_trace",
    "generate_trace", "read_trace", "write_trace",
    "SwitchState", "delta", "msf_step", "observe_count",
    "SLICING_CLT", "SLICING_PAPER_LITERAL", "ChannelParams",
    "DegenerateChannelError", "ProvisionDecision", "RadioConfig",
    "bandwidth_for_k", "estimate_channel", "estimate_population_moments",
    "k_star", "normal_quantile", "posterior_cdf", "posterior_cdf_table",
    "slicing_bandwidth", "slicing_inner", "slot_capacity_k", "tnr", "tpr",
    "ChannelSettings", "ConfigError", "EstimationSettings",
    "ExperimentConfig", "GeneratorSettings", "PredictorSettings",
    "SlicingSettings", "SwitchSettings", "from_dict", "from_yaml", "load",
    "to_dict", "to_yaml", "validate",
    "MetricsReport", "SlotLog", "aggregate_bandwidth", "compute_metrics",
    "per_slot_csv", "run_experiment", "run_slot",
    "__version__",
]
