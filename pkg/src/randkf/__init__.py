"""Kalman filtering for systems with random transition and measurement matrices."""

from .random_matrix import (
    MatrixDist,
    RandomMatrixSpec,
    deterministic,
    moments_from_dist,
    quad_form,
    quad_form_discrete,
    sample_matrix,
)
from .filter_core import (
    FilterState,
    InitialCondition,
    PredictedState,
    StepModel,
    constant_provider,
    deterministic_model,
    filter_sequence,
    init,
    predict,
    step,
    update,
)
from .adapters import (
    MultiModelDynamics,
    NahiModel,
    PartitionedObsModel,
    UncertainObsModel,
    build_multimodel,
    build_nahi,
    build_partitioned,
    build_uncertain_obs,
    partitioned_quad_form,
)
from .sim_harness import (
    RunMetrics,
    TruthTrajectory,
    batch_lmv_oracle,
    gamma_sweep,
    monte_carlo,
    naive_kf_provider,
    run_filter_on,
    simulate_truth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
