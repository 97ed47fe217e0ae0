"""Gradient-boosted decision trees: training, prediction, and persistence."""

from .binning import FeatureBinner
from .booster import Ensemble, fit
from .io import (
    ensemble_from_json,
    ensemble_to_json,
    estimated_resident_bytes,
    load,
    save,
    serialized_size,
)
from .params import TrainParams
from .tree import Tree, grow_tree

__all__ = [
    "Ensemble",
    "FeatureBinner",
    "Tree",
    "TrainParams",
    "ensemble_from_json",
    "ensemble_to_json",
    "estimated_resident_bytes",
    "fit",
    "grow_tree",
    "load",
    "save",
    "serialized_size",
]
