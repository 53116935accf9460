"""CVaR maximization of monotone stochastic DR-submodular objectives.

Online mini-batched perturbed continuous greedy and its offline baselines,
smoothed tail surrogates, matroid portfolio rounding, cascade scenario
simulation, and an experiment CLI.
"""

from .risk import cvar_variational, empirical_cvar, empirical_var
from .objective import (
    BoundObjective,
    LinearObjective,
    MultilinearObjective,
    ProductObjective,
    SaturatingObjective,
    ScenarioTimes,
    SensorObjective,
    SetFunctionOracle,
    coverage_oracle,
    modular_oracle,
    multilinear_gradient_estimate,
    multilinear_value_estimate,
    sensor_gradient,
    sensor_value,
)
from .feasible import (
    BudgetPolytope,
    FeasibleRegion,
    Matroid,
    MatroidBasePolytope,
    PartitionMatroid,
    ProductRegion,
    UniformMatroid,
    parse_partition_spec,
)
from .smoothing import (
    SmoothingParams,
    h_bar_value,
    h_smooth_value,
    h_value,
    indicator,
    smooth_grad,
    smooth_tau,
    tau_subgradient,
)
from .optimizers import (
    GreedyState,
    OnlineRunResult,
    RunParams,
    ScheduleError,
    StochasticRunResult,
    TraceRecord,
    VertexDecomposition,
    achieved_value,
    alternating_modular_sequence,
    approx_regret,
    best_fixed_comparator,
    best_fixed_value,
    continuous_greedy_batch,
    fitted_growth_exponent,
    fpl_step,
    frank_wolfe_expectation,
    offline_rascal,
    ogd_tau_step,
    online_rascal,
    schedule_continuous,
    stochastic_rascal,
    trace_to_csv,
)
from .discrete import (
    Portfolio,
    build_portfolio,
    default_copy_count,
    default_rounding_count,
    merge_bases,
    portfolio_cvar,
    portfolio_from_csv,
    portfolio_to_csv,
    swap_round,
)
from .scenarios import (
    Graph,
    fresh_stream,
    generate_er_graph,
    load_edge_list,
    load_pool,
    parse_edge_list,
    pool_from_csv,
    pool_stream,
    pool_to_csv,
    save_pool,
    scenario_pool,
    simulate_ctic,
)

__version__ = "0.1.0"
