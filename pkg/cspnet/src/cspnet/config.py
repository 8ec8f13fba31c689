"""Training and architecture configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class CspNetConfig:
    """Architecture widths, training hyper-parameters, and data location.

    The feature-extractor layout in the source architecture is schematic, so
    the widths are exposed here; the defaults are sized for the desk-scale
    arrays (16 antennas, 8 subcarriers).
    """

    conv1: int = 16            # width of the first conv block
    conv2: int = 32            # width of the second conv block
    reduction: int = 4         # channel-attention bottleneck ratio
    hidden: int = 128          # fusion/head hidden width
    pool: int = 4              # spatial size after adaptive pooling
    batch_size: int = 16       # N_b
    epochs: int = 60
    lr: float = 2e-3
    dataset: str = "dataset.json"
    seed: int = 0
    complex_layers: bool = True   # ablation: False -> plain real-valued convs
    use_cbam: bool = True         # ablation: False -> skip the attention block

    def __post_init__(self):
        for name in ("conv1", "conv2", "reduction", "hidden", "pool",
                     "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
