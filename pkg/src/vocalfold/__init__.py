"""Asymmetric vocal-fold model: simulation, phase analysis, adjoint fitting and pathology labels."""

from .adjoint import AdjointTrajectory, Gradient, Residual, gradients, optimal_gain, residual, solve_adjoint
from .config import RunConfig, load_config
from .estimator import AdlesEstimator, FitResult, OptimizerConfig, estimate
from .exceptions import (
    ClassificationError,
    ConfigError,
    DivergenceError,
    DomainError,
    EntrainmentError,
    GridMismatchError,
    NoVoicingError,
    NumericalError,
    SignalError,
    VocalFoldError,
)
from .glottal import (
    GlottalFlow,
    InverseFilter,
    InverseFilterConfig,
    PhysicalConstants,
    SampledSignal,
    estimate_f0,
    flow_from_displacement,
    inverse_filter,
    load_wav,
    write_wav,
)
from .model import ModelParams, State, Trajectory, rhs, simulate
from .pathology import Classification, PathologyClassifier, PathologyRegion, classify, default_regions
from .phase import (
    AttractorReport,
    BifurcationGrid,
    PoincareCrossing,
    SimulationConfig,
    bifurcation_sweep,
    classify_attractor,
    entrainment_ratio,
    poincare_crossings,
)
from .pipeline import BatchReport, analyze_file, run_batch

__version__ = "0.1.0"
