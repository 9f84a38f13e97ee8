"""Task-order optimisation for continual learning in a linear teacher-student model."""

from .analytic import final_error, ordered_error, psd_sqrt
from .ensemble import Dimensions, TrainingConfig, mc_final_error, sample_ensemble, train_closed, train_gd
from .errors import TaskOrderError
from .orders import compare_rules, enumerate_orders, extremal_path, hamiltonian_optimum, typicality_order
from .perturbation import decompose, g_functions
from .similarity import TransferErrorTable, estimate_similarity, load_table
from .taskspec import (
    CorrelationMatrix,
    GraphSpec,
    Ordering,
    TaskSetSpec,
    constant_correlation,
    graph_similarity,
    sample_correlation,
    validate_correlation,
)

__all__ = [
    "CorrelationMatrix", "Dimensions", "GraphSpec", "Ordering", "TaskOrderError", "TaskSetSpec",
    "TrainingConfig", "TransferErrorTable", "compare_rules", "constant_correlation", "decompose",
    "enumerate_orders", "estimate_similarity", "extremal_path", "final_error", "g_functions",
    "graph_similarity", "hamiltonian_optimum", "load_table", "mc_final_error", "ordered_error",
    "psd_sqrt", "sample_correlation", "sample_ensemble", "train_closed", "train_gd",
    "typicality_order", "validate_correlation",
]
