"""Distributed SVM training by continuous-time gradient tracking over switching digraphs."""

from .baseline import CentralSolution, Dataset, generate_ellipse_dataset, shard_dataset, solve_centralized
from .config import ExperimentConfig
from .dynamics import DynamicsConfig, SystemState, assemble_system_matrix, simulate
from .errors import (ConfigError, DimensionError, DSVMError, GraphInvariantError,
                     IntegrationDiverged, InvalidSpectrum, InvariantViolation,
                     NonConvergence, NumericalFailure)
from .graph import Digraph, SwitchingSchedule, build_laplacian, make_cycle_plus_khop
from .loss import Classifier, LossConfig, Problem, Shard, smooth_hinge

__version__ = "0.1.0"

__all__ = [
    "CentralSolution", "Dataset", "generate_ellipse_dataset", "shard_dataset", "solve_centralized",
    "ExperimentConfig", "DynamicsConfig", "SystemState", "assemble_system_matrix", "simulate",
    "ConfigError", "DimensionError", "DSVMError", "GraphInvariantError", "IntegrationDiverged",
    "InvalidSpectrum", "InvariantViolation", "NonConvergence", "NumericalFailure",
    "Digraph", "SwitchingSchedule", "build_laplacian", "make_cycle_plus_khop",
    "Classifier", "LossConfig", "Problem", "Shard", "smooth_hinge",
]
