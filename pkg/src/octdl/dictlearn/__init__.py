"""Structured discriminative dictionary learning: FDDL, COPAR and LRSDL."""
from .classify import (
    classify_gc,
    classify_lc,
    classify_lrsdl,
    code_lrsdl,
    default_rule,
    predict,
    predict_gc,
    predict_lc,
    predict_lrsdl,
)
from .estimators import ESTIMATORS, COPARClassifier, FDDLClassifier, LRSDLClassifier
from .objectives import (
    copar_objective,
    fddl_objective,
    fidelity,
    fisher_gradient,
    fisher_term,
    incoherence,
    lrsdl_objective,
    nuclear_norm,
    shared_scatter,
)
from .structure import (
    ALGORITHMS,
    ClassStats,
    Partition,
    StructuredDictionary,
    TrainConfig,
    TrainedModel,
    init_dictionary,
)
from .training import train, train_copar, train_fddl, train_lrsdl

__all__ = [
    "ALGORITHMS", "ClassStats", "COPARClassifier", "ESTIMATORS", "FDDLClassifier",
    "LRSDLClassifier", "Partition", "StructuredDictionary", "TrainConfig", "TrainedModel",
    "classify_gc", "classify_lc", "classify_lrsdl", "code_lrsdl", "copar_objective",
    "default_rule", "fddl_objective", "fidelity", "fisher_gradient", "fisher_term",
    "incoherence", "init_dictionary", "lrsdl_objective", "nuclear_norm", "predict",
    "predict_gc", "predict_lc", "predict_lrsdl", "shared_scatter", "train", "train_copar",
    "train_fddl", "train_lrsdl",
]
