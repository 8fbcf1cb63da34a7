"""Multifunctional reservoir computing lab for the seeing-double benchmark."""

from .dynamics import (
    PredictionTrajectory,
    ReservoirParams,
    ReservoirTrajectory,
    drive_listening,
    rk4_step,
    run_prediction,
)
from .evaluation import (
    AttractorKind,
    AttractorLabel,
    Direction,
    EvaluationConfig,
    FailureMode,
    MfVerdict,
    OrbitCheck,
    classify_attractor,
    classify_orbit,
    evaluate_multifunctionality,
    rotation_direction,
    roundness,
    unique_local_maxima_counts,
)
from .experiments import (
    Branch,
    ConnectomeSource,
    ErdosRenyiSource,
    Experiment1Result,
    RankSumResult,
    SweepCell,
    TrialRecord,
    rank_sum_test,
    run_activation_experiment,
    run_continuation,
    run_experiment1,
    run_sweep,
    run_trial,
)
from .tasks import PERIOD, DriveSignal, OrbitSpec, make_orbit, sample_signal
from .topology import (
    AdjacencyMatrix,
    ConnectomeEdgeList,
    generate_erdos_renyi,
    generate_input_matrix,
    ingest_connectome,
    read_edge_list,
    scale_to_spectral_radius,
    spectral_radius,
)
from .training import (
    TrainedReservoir,
    apply_q,
    blend,
    harvest,
    load_trained,
    ridge_regression,
    save_trained,
    train_multifunctional,
)

__version__ = "0.1.0"
