"""Sequence-based 6-DOF camera pose regression with a from-scratch peephole LSTM."""
from .geometry import Pose, Quaternion, angular_error_deg, median, normalize, position_error_m
from .synthdata import DataConfig, Dataset, generate_dataset, urban_config
from .trainer import EvalReport, TrainConfig, evaluate, train

__version__ = "0.1.0"
