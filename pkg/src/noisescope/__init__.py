"""noisescope: fidelity decay under random single-qubit rotations, and the
estimation of noise-generator term strengths from initial decay rates."""

__version__ = "0.1.0"

from .linalg import (
    MAX_QUBITS,
    NumericalError,
    PAULIS,
    ProductOperator,
    ValidationError,
    apply_single_qubit_gate,
    kron,
    partial_trace,
    sample_haar_su2,
    unitary_from_generator,
)
from .noise import (
    Constant,
    Correlation,
    DrawScope,
    Gaussian,
    NoiseModel,
    NoiseTerm,
    build_noise_model,
    draw_coefficients,
    error_unitary,
)
from .sim import (
    CircuitForm,
    DecayRateEstimate,
    ExperimentConfig,
    FidelityCurve,
    FirstStep,
    LinearFit,
    MeasurementMode,
    PureBloch,
    estimate_decay_rate,
    run_experiment,
    run_experiment_bernoulli,
)
from .analytics import (
    CoherentDecay,
    DecayRatePrediction,
    LongCorrelationDecay,
    ShortCorrelationDecay,
    initial_decay_rate,
    predicted_decay_rate,
    subset_decay_rate,
    system_fidelity,
)
from .protocol import (
    CoefficientEstimate,
    MeasurementTask,
    ProtocolPlan,
    SampleBudget,
    chernoff_budget,
    invert_pair_strengths,
    plan_protocol,
    probe_triple_strength,
    run_protocol,
    simulation_gamma_source,
)

__all__ = [name for name in dir() if not name.startswith("_")]
