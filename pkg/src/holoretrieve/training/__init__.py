"""Neural phase retrieval: networks, losses, checkpoints and the training loop."""

from .checkpoint import Checkpoint, CheckpointError
from .data import DatasetModeError, TensorDataset, load_dataset
from .losses import ConfigurationError, LossWeights
from .networks import DiscriminatorSpec, GeneratorSpec, PatchDiscriminator, UNetGenerator
from .physics import FresnelPropagator
from .trainer import (
    NonFiniteLossError,
    TrainConfig,
    Trainer,
    evaluate_checkpoint,
    load_trainer,
    lr_schedule,
    reconstruct,
    train,
)
