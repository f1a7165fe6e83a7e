"""Human body recovery from silhouettes and 2D keypoints under inter-person occlusion.

Modules:

- :mod:`occbody.body_model`: skinned body model, forward kinematics, model files
- :mod:`occbody.geometry`: rotations, 6D encoding, cameras
- :mod:`occbody.renderer`: differentiable soft silhouettes
- :mod:`occbody.synth`: occlusion-aware synthetic samples and heatmaps
- :mod:`occbody.losses`: loss terms and their uncertainty-weighted combination
- :mod:`occbody.fitter`: gradient-based parameter fitting
- :mod:`occbody.metrics`: MPJPE-PA, PVE-PA, PVE-T-SC, mIOU
- :mod:`occbody.dataset`: parameter pools and dataset files
"""

from .body_model import BodyModel, BodyParams, Mesh, forward, load_model, make_test_body, save_model
from .fitter import FitConfig, FitResult, FitTarget, fit, gradient_check
from .geometry import PerspectiveCamera, WeakPerspectiveCamera
from .losses import LossWeights, combined_loss
from .metrics import miou, mpjpe_pa, procrustes_align, pve_pa, pve_t_sc
from .renderer import RasterSettings, render_silhouette
from .synth import SynthConfig, generate_sample

__all__ = [
    "BodyModel", "BodyParams", "Mesh", "forward", "load_model", "make_test_body", "save_model",
    "FitConfig", "FitResult", "FitTarget", "fit", "gradient_check",
    "PerspectiveCamera", "WeakPerspectiveCamera",
    "LossWeights", "combined_loss",
    "miou", "mpjpe_pa", "procrustes_align", "pve_pa", "pve_t_sc",
    "RasterSettings", "render_silhouette",
    "SynthConfig", "generate_sample",
]

__version__ = "0.1.0"
