"""Exact inference for the infinite binary-tree mixture density model on [0, 1)."""

from ._backend import BACKEND
from ._errors import DepthCapExceeded
from .engine import (
    InferenceResult,
    divergence_class,
    double_point_dim_coefficients,
    dimension_distribution,
    evaluate,
    expected_dimension,
    multipoint_dim_coefficients,
    posterior_variance,
    predictive_density,
    prior_dim_coefficients,
    prior_dim_coefficients_closed,
    scaled_evidence,
    split_probability,
    tree_heights,
)
from .index import EvidenceIndex, build_index, local_query
from .model import (
    Dataset,
    DivergenceClass,
    ModelParams,
    NodeAddress,
    compactify,
    dump_dataset,
    load_dataset,
    partition,
)
from .moments import Indicator, MomentSpec, Power, moment
from .numerics import DivergenceMismatch, LogValue
from .skeleton import TreeSkeleton, map_skeleton

__version__ = "0.1.0"
