"""comotion: derivative-stacked motion computation for kinematic trees.

Rigid-body kinematics and dynamics where every quantity carries its
higher-order time derivatives, analytical Jacobians of those stacks with
respect to joint coordinate series, B-spline trajectory optimization,
and inverse cost-weight estimation.
"""

__version__ = "0.1.0"

from .cmtm import Cmtm, PsiMap, psi_map
from .kinodynamics import (
    GravitySpec,
    JointCoordSeries,
    forward_state,
    full_state,
    whole_body_operators,
)
from .jacobians import FAMILIES, jacobian_bundle
from .model import RobotModel, load_model, load_model_file
from .series import DerivSeries
from .spatial import SpatialTransform, SpatialVector
from .trajopt import (
    CostTerm,
    ExperimentSpec,
    IocResult,
    OptResult,
    direct_optimize,
    evaluate_cost,
    inverse_kkt,
)

__all__ = [
    "Cmtm",
    "CostTerm",
    "DerivSeries",
    "ExperimentSpec",
    "FAMILIES",
    "GravitySpec",
    "IocResult",
    "JointCoordSeries",
    "OptResult",
    "PsiMap",
    "RobotModel",
    "SpatialTransform",
    "SpatialVector",
    "direct_optimize",
    "evaluate_cost",
    "forward_state",
    "full_state",
    "inverse_kkt",
    "jacobian_bundle",
    "load_model",
    "load_model_file",
    "psi_map",
    "whole_body_operators",
    "__version__",
]
