from noiselab.numerics.gradcheck import gradient_check
from noiselab.numerics.losses import cross_entropy_per_example, log_softmax, softmax, softmax_cross_entropy
from noiselab.numerics.model import ModelSpec, backward, forward, init_params, predict, zero_params
from noiselab.numerics.optim import AdamState, adam_step
from noiselab.numerics.schedule import ScheduleSpec, lr_multiplier

__all__ = [
    "AdamState",
    "ModelSpec",
    "ScheduleSpec",
    "adam_step",
    "backward",
    "cross_entropy_per_example",
    "forward",
    "gradient_check",
    "init_params",
    "log_softmax",
    "lr_multiplier",
    "predict",
    "softmax",
    "softmax_cross_entropy",
    "zero_params",
]
