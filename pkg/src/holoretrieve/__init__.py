"""Phase retrieval for inline holography: Fresnel physics, synthetic data,
classical baselines, metrics and cycle-consistent adversarial training."""

__version__ = "0.1.0"
