"""Scenario-based routing on road networks with correlated travel speeds.

The pipeline: load a network and its historical speed panel, study the
panel's correlation structure, condense it into a small scenario set
(day resampling or rank-correlated stratification), optimize a path
objective over the set with an exact bound-and-prune search, and judge
how stable the resulting route choices are across set sizes.
"""

__version__ = "0.1.0"

from .errors import (
    CorrpathError,
    DegenerateObjective,
    DuplicateCell,
    DuplicateLinkId,
    Exhausted,
    InfeasibleError,
    InputError,
    InternalInvariantError,
    InvalidSpec,
    MalformedRow,
    MissingCell,
    MissingHeader,
    NoPath,
    NonPositiveLength,
    NonPositiveSpeed,
    PanelTooLarge,
    STooLarge,
    ScenarioFormatError,
    SelfLoop,
    SizeOutOfRange,
    UnknownLink,
    UnknownNode,
    ZeroVariance,
)
from .network import Link, RoadNetwork, load_network, paths_exist, save_network
from .objectives import (
    DEFAULT_MEET,
    MeetParams,
    ObjectiveSpec,
    Path,
    TraceSegment,
    TraversalTrace,
    evaluate,
    evaluate_all_scenarios,
    make_path,
    meet_rate,
    path_from_nodes,
    traverse,
)
from .scenarios import (
    CopulaScenarioGenerator,
    RandomSampler,
    ScenarioSet,
    StratifiedMarginal,
    full_set,
    generate_sg,
    load_scenarios,
    moments,
    sample_rs,
    save_scenarios,
    sidecar_path,
    stratify_marginal,
)
from .solver import (
    BoundWeights,
    ShortestPathEnumerator,
    SolveResult,
    bound_value,
    hall_solve,
    k_shortest_paths,
    lower_bound_weights,
)
from .speeds import (
    CorrelationSummary,
    ProfileEntry,
    SpeedPanel,
    VarKey,
    correlation_summary,
    load_speeds,
    pair_count,
    pearson,
    profile,
    save_speeds,
    significance_threshold,
    t_critical,
)
from .stability import (
    RequiredScenariosResult,
    RsAggregate,
    StabilityRun,
    derive_seed,
    ord_pct,
    rd,
    rd_degenerate_rows,
    required_scenarios,
    rs_repeated,
    run_stability,
    stability_from_sets,
    var,
)
from .synth import SynthSpec, generate_panel, random_network

__all__ = [name for name in dir() if not name.startswith("_")]
