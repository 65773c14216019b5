"""Consensus-based optimization in discretized function spaces.

Agents are discretized functions sampled from Gaussian-process posteriors
that already satisfy boundary, initial and pointwise state data; the
consensus dynamics only ever add homogeneous perturbations, so the data are
preserved by every iterate.
"""

from gpcbo.kernel import KernelSpec, eval_kernel, gram
from gpcbo.mesh import Mesh, make_interval_mesh, make_grid_mesh
from gpcbo.gp import (
    GaussianMeasure,
    PointEvaluator,
    TrainingData,
    build_prior,
    build_posterior,
    homogeneous,
    sample,
)
from gpcbo.cbo import CboParams, Ensemble, History, consensus, ensemble_norm, run, step

__all__ = [
    "KernelSpec",
    "eval_kernel",
    "gram",
    "Mesh",
    "make_interval_mesh",
    "make_grid_mesh",
    "GaussianMeasure",
    "PointEvaluator",
    "TrainingData",
    "build_prior",
    "build_posterior",
    "homogeneous",
    "sample",
    "CboParams",
    "Ensemble",
    "History",
    "consensus",
    "ensemble_norm",
    "run",
    "step",
]

__version__ = "0.1.0"
