"""Support-alignment workbench.

Training with method toggles (harness), the losses and models behind
them, exact sample-support divergences, and brute-force / LP oracles for
the discrepancy bounds they estimate.
"""

from . import autodiff, backend, checks, datagen, divergences, harness, imd
from . import kernels, losses, models, simplex
from .autodiff import Graph, Tensor, no_grad
from .datagen import DomainPair, LabelShiftSpec, make_gaussian_domains
from .divergences import SampleCloud, cssd, joint_ssd, ssd, wasserstein_1
from .harness import DataConfig, TrainConfig, run_grid, train
from .imd import (
    ImdInstance,
    ImdResult,
    UnboundedImdError,
    grid_imd_value,
    lemma1_bounds,
    prop1_check,
    remark2_check,
    solve_imd,
)

__version__ = "0.1.0"

__all__ = [
    "autodiff", "backend", "checks", "datagen", "divergences", "harness",
    "imd", "kernels", "losses", "models", "simplex",
    "Graph", "Tensor", "no_grad",
    "DomainPair", "LabelShiftSpec", "make_gaussian_domains",
    "SampleCloud", "cssd", "joint_ssd", "ssd", "wasserstein_1",
    "DataConfig", "TrainConfig", "run_grid", "train",
    "ImdInstance", "ImdResult", "UnboundedImdError", "grid_imd_value",
    "lemma1_bounds", "prop1_check", "remark2_check", "solve_imd",
    "__version__",
]
