"""Curriculum/transfer windowed training for physics-informed networks."""

__version__ = "0.1.0"

from .autodiff import Jet, jet_apply, jet_seed, mlp_forward_jet
from .network import MlpSpec, forward, init_params, load_checkpoint, save_checkpoint

__all__ = [
    "Jet",
    "jet_apply",
    "jet_seed",
    "mlp_forward_jet",
    "MlpSpec",
    "forward",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
    "__version__",
]
