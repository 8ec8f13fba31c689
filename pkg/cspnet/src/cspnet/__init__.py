"""Complex-valued precoder-design network.

Consumes the precoding core only through its public surfaces: the exported
dataset JSON, serialized precoder-state JSON, and the eval-state subcommand.
"""

from .config import CspNetConfig
from .data import DatasetError, Sample, load_dataset, preprocess
from .network import CspNet, postprocess
from .physics import batch_loss, sample_metrics

__all__ = ["CspNetConfig", "DatasetError", "Sample", "load_dataset",
           "preprocess", "CspNet", "postprocess", "batch_loss",
           "sample_metrics"]
