"""Approximate pattern matching for oriented point sets.

Patterns and backgrounds are sets of planar points carrying an orientation.
The matchers find a translation, rigid motion or similarity that brings the
pattern close to the background under the directed Hausdorff distance with
a cylinder metric combining position and wrapped angle.
"""
from ._backend import BACKEND
from .ann import OrientedNnIndex, build_index, query_exact
from .geometry import (
    EmptySetError,
    Metric,
    OrientedPoint,
    PointSet,
    SimilarityTransform,
    apply_transform,
    directed_hausdorff,
    mu,
)
from .io import FormatError, ingest_minutiae, load_opts, save_opts
from .matchers import MatchResult, MotionClass, eps_translate, eps_tr, eps_trs, match, run_base
from .oracle import PlantedInstance, plant

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EmptySetError",
    "FormatError",
    "MatchResult",
    "Metric",
    "MotionClass",
    "OrientedNnIndex",
    "OrientedPoint",
    "PlantedInstance",
    "PointSet",
    "SimilarityTransform",
    "apply_transform",
    "build_index",
    "directed_hausdorff",
    "eps_tr",
    "eps_translate",
    "eps_trs",
    "ingest_minutiae",
    "load_opts",
    "match",
    "mu",
    "plant",
    "query_exact",
    "run_base",
    "save_opts",
]
