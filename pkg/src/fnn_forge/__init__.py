"""Attractor reconstruction from scalar time series with a false-nearest-neighbor latent regularizer."""

__version__ = "0.1.0"

from .autoencoder import TrainConfig, TrainedAutoencoder, init_model, train  # noqa: E402
from .baselines import etd_embed, kennel_fnn_dimension, lagged_embed, tica_embed  # noqa: E402
from .fnn import FnnConfig, false_neighbor_fractions, fnn_loss, fnn_loss_grad  # noqa: E402
from .metrics import MetricsReport, compare_all  # noqa: E402
from .timeseries import HankelMatrix, PointCloud, TimeSeries, build_hankel, standardize  # noqa: E402

__all__ = [
    "FnnConfig", "HankelMatrix", "MetricsReport", "PointCloud", "TimeSeries", "TrainConfig",
    "TrainedAutoencoder", "build_hankel", "compare_all", "etd_embed", "false_neighbor_fractions",
    "fnn_loss", "fnn_loss_grad", "init_model", "kennel_fnn_dimension", "lagged_embed",
    "standardize", "tica_embed", "train",
]
