"""DH-Mamba style MRI reconstruction from scratch on numpy.

Subpackages: ``tensor`` (autodiff), ``fourier``, ``scan``, ``ssm``, ``dhnet``
(the network), ``mrisim`` (masks, phantoms, metrics) and ``harness``
(training, evaluation, CLI).
"""

from .dhnet import PRESETS, DHMamba, ModelConfig

__version__ = "0.1.0"

__all__ = ["DHMamba", "ModelConfig", "PRESETS", "__version__"]
