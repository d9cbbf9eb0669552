"""Stacked Q-learning control with online Kalman-filter model identification.

A small numpy/scipy library for infinite-horizon control of discrete-time
systems whose dynamics are unknown to the controller: a quadratic Q-function
approximant trained by gradient descent, a Kalman filter identifying a linear
prediction model online, and four interchangeable controllers ("gd", "adpq",
"sadpq", "mpc") benchmarked in closed loop.
"""

from .critic import CriticWeights, Transition, bellman_error, critic_update, q_value
from .errors import DivergenceError, EstimatorError
from .harness import (
    CONTROLLERS,
    CompareCell,
    ComparisonReport,
    ConfigError,
    SimConfig,
    SimTrace,
    SweepResult,
    compare_schemes,
    config_hash,
    cumulative_cost,
    read_trace,
    run_closed_loop,
    sweep_param,
    time_to_threshold,
    trace_columns,
    validate_config,
    write_report,
    write_sweep,
    write_trace,
)
from .model_kf import (
    ModelEstimate,
    SampleStack,
    initial_estimate,
    kf_correct,
    kf_predict,
    predict_state,
    regression_matrices,
    rollout,
    theta_to_matrices,
)
from .plant import (
    PLANT_PRESETS,
    MeasurementChannel,
    PlantModel,
    RunningCost,
    make_plant,
    measure,
    running_cost,
    step_true,
)
from .policy import (
    GRADIENT_MODES,
    ControlStack,
    adpq_update,
    gd_update,
    greedy_gain,
    mpc_update,
    sadpq_update,
    stacked_cost_objective,
    stacked_gradient,
    stacked_objective,
)
from .regressor import Regressor

__version__ = "0.1.0"

__all__ = [
    "CONTROLLERS",
    "CompareCell",
    "ComparisonReport",
    "ConfigError",
    "ControlStack",
    "CriticWeights",
    "DivergenceError",
    "EstimatorError",
    "GRADIENT_MODES",
    "MeasurementChannel",
    "ModelEstimate",
    "PLANT_PRESETS",
    "PlantModel",
    "Regressor",
    "RunningCost",
    "SampleStack",
    "SimConfig",
    "SimTrace",
    "SweepResult",
    "Transition",
    "adpq_update",
    "bellman_error",
    "compare_schemes",
    "config_hash",
    "critic_update",
    "cumulative_cost",
    "gd_update",
    "greedy_gain",
    "initial_estimate",
    "kf_correct",
    "kf_predict",
    "make_plant",
    "measure",
    "mpc_update",
    "predict_state",
    "q_value",
    "read_trace",
    "regression_matrices",
    "rollout",
    "run_closed_loop",
    "running_cost",
    "sadpq_update",
    "stacked_cost_objective",
    "stacked_gradient",
    "stacked_objective",
    "step_true",
    "sweep_param",
    "theta_to_matrices",
    "time_to_threshold",
    "trace_columns",
    "validate_config",
    "write_report",
    "write_sweep",
    "write_trace",
]
