"""Multimodal crisis-post classification on precomputed text and image embeddings."""
from .config import ModelConfig, TrainConfig
from .data import Corpus, PostRecord, load_manifest, save_corpus
from .errors import (CrisisSpotError, DataError, FormatError, LabelError, NumericError, ParameterError,
                     ResolutionError, ShapeError)
from .lexicons import Lexicons
from .model import Checkpoint, CrisisSpotModel, prepare_split
from .synthetic import SyntheticWorld, generate_synthetic
from .training import cohen_kappa, compute_metrics, evaluate, predict, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "Corpus", "CrisisSpotError", "CrisisSpotModel", "DataError", "FormatError", "LabelError",
    "Lexicons", "ModelConfig", "NumericError", "ParameterError", "PostRecord", "ResolutionError",
    "ShapeError", "SyntheticWorld", "TrainConfig", "cohen_kappa", "compute_metrics", "evaluate",
    "generate_synthetic", "load_manifest", "predict", "prepare_split", "save_corpus", "train",
]
