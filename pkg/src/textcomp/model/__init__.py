from .network import Model, ModelConfig
from .training import TrainConfig, batch_at, evaluate, lr_at, train
from . import checkpoint
