"""Wafer-map defect classification from persistent homology features."""
from .classifier import MLPModel, TrainConfig, evaluate, init_model, train
from .diagram_metrics import bottleneck_distance, wasserstein_distance
from .errors import WaferTDAError
from .persistence_image import PIConfig, compute_pi, featurize_many, featurize_wafer
from .ph_engine import PersistenceDiagram, compute_persistence
from .wafer_sim import CLASSES, WaferMap, generate_dataset

__version__ = "0.1.0"
