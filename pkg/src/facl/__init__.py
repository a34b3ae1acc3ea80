"""Frequency-aware generative adversarial perturbations.

Submodules: :mod:`~facl.spectral` (DCT, band masks, randomization),
:mod:`~facl.generator`, :mod:`~facl.models`, :mod:`~facl.losses`,
:mod:`~facl.training`, :mod:`~facl.evaluation`, plus data, config and CLI
plumbing.
"""

from .config import AblationConfig, TrainConfig, load_config
from .errors import (ConfigurationError, FaclError, InvalidInputError,
                     InvalidThresholdError, TrainingError)
from .evaluation import AttackRunRecord, difference_map, evaluate_attack, image_quality, psnr, ssim
from .generator import Generator, GeneratorConfig, PerturbationBudget, project
from .losses import LossWeights, cosine_similarity, loss_facl, loss_orig, total_loss
from .spectral import (BandThresholds, RandomizationParams, band_decompose,
                       build_band_mask, dct2, fadr_transform, idct2)
from .training import make_ablation_config, train, train_step

__version__ = "0.1.0"
