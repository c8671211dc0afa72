"""Residual CNN regressors for navigation-error recovery from SAR image pairs."""

from .data import Manifest, load_arrays, load_manifest, load_split, standardization_probe
from .evaluate import evaluate, load_checkpoint
from .model import SmallResidualRegressor, build_model
from .train import TrainSpec, train, transfer_train

__version__ = "0.1.0"
