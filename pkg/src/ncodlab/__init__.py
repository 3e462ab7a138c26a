"""Noisy-label training with class-centroid soft labels and per-sample outlier discounting."""

from .centroids import ClassEmbeddings, compute_centroids, keep_fraction, soft_label
from .data import Dataset, SynthSpec, split, standardize, synth_clusters
from .kernels import get_backend
from .model import MlpModel, backward, forward, init_model, sgd_step
from .ncod_loss import UStore, init_u, update_u
from .noise import NoiseSpec, check_learnability, inject_asymmetric, inject_symmetric
from .numerics import Rng
from .trainer import TrainConfig, TrainReport, evaluate, predict, train

__version__ = "0.1.0"
