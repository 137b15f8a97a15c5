"""Model package: configuration, parameters, shared memory units, forward."""
from .config import ModelConfig, toy_config
from .forward import PairOutput, forward_pair
from .params import CkstnParams
from .units import CommonUnits, init_units, update_state

__all__ = [
    "ModelConfig", "toy_config", "PairOutput", "forward_pair",
    "CkstnParams", "CommonUnits", "init_units", "update_state",
]
