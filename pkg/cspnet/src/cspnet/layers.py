"""Complex-valued building blocks and the attention module.

Complex layers follow the split construction: a complex weight W = A + jB
acts on z = x + jy as (Ax - By) + j(Ay + Bx), implemented with paired real
convolutions.  Feature-extractor blocks emit a real tensor (real and
imaginary parts stacked along channels) so the fusion stage and the
real-valued ablation variant share one downstream interface.
"""

from __future__ import annotations

import torch
from torch import nn


class ComplexConv2d(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3,
                 padding: int = 1):
        super().__init__()
        self.re = nn.Conv2d(in_ch, out_ch, kernel, padding=padding)
        self.im = nn.Conv2d(in_ch, out_ch, kernel, padding=padding)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x, y = z.real, z.imag
        return torch.complex(self.re(x) - self.im(y),
                             self.re(y) + self.im(x))


class CReLU(nn.Module):
    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return torch.complex(torch.relu(z.real), torch.relu(z.imag))


class ComplexBatchNorm2d(nn.Module):
    """Per-channel power normalization with a learnable complex affine."""

    def __init__(self, ch: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = nn.Parameter(torch.ones(ch))
        self.beta = nn.Parameter(torch.zeros(2, ch))
        self.register_buffer("running_power", torch.ones(ch))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if self.training:
            power = (z.real ** 2 + z.imag ** 2).mean(dim=(0, 2, 3))
            with torch.no_grad():
                self.running_power.lerp_(power.detach(), self.momentum)
        else:
            power = self.running_power
        scale = (self.gamma / torch.sqrt(power + self.eps))[None, :, None, None]
        b_re = self.beta[0][None, :, None, None]
        b_im = self.beta[1][None, :, None, None]
        return torch.complex(z.real * scale + b_re, z.imag * scale + b_im)


class Cbam(nn.Module):
    """Channel then spatial attention on a real feature tensor."""

    def __init__(self, ch: int, reduction: int = 4, spatial_kernel: int = 5):
        super().__init__()
        hidden = max(ch // reduction, 1)
        self.mlp = nn.Sequential(nn.Linear(ch, hidden), nn.ReLU(),
                                 nn.Linear(hidden, ch))
        self.spatial = nn.Conv2d(2, 1, spatial_kernel,
                                 padding=spatial_kernel // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mag = x.abs()
        ch_gate = torch.sigmoid(self.mlp(mag.mean(dim=(2, 3)))
                                + self.mlp(mag.amax(dim=(2, 3))))
        x = x * ch_gate[:, :, None, None]
        mag = mag * ch_gate[:, :, None, None]
        sp_in = torch.cat([mag.mean(dim=1, keepdim=True),
                           mag.amax(dim=1, keepdim=True)], dim=1)
        return x * torch.sigmoid(self.spatial(sp_in))


class ComplexBlock(nn.Module):
    """Complex conv -> norm -> CReLU twice, pooled; emits [re, im] channels."""

    def __init__(self, in_ch: int, c1: int, c2: int, pool: int):
        super().__init__()
        self.conv1 = ComplexConv2d(in_ch, c1)
        self.bn1 = ComplexBatchNorm2d(c1)
        self.conv2 = ComplexConv2d(c1, c2)
        self.bn2 = ComplexBatchNorm2d(c2)
        self.act = CReLU()
        self.pool = nn.AdaptiveAvgPool2d(pool)

    @staticmethod
    def out_channels(c2: int) -> int:
        return 2 * c2

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z = self.act(self.bn1(self.conv1(z)))
        z = self.act(self.bn2(self.conv2(z)))
        return torch.cat([self.pool(z.real), self.pool(z.imag)], dim=1)


class RealBlock(nn.Module):
    """Ablation variant: plain real-valued convolutions on real/imaginary
    parts stacked as input channels.  Channel widths are chosen so each
    conv layer has exactly the same weight count as its complex
    counterpart and the block emits the same output width, making the
    comparison a matched-parameter one."""

    def __init__(self, in_ch: int, c1: int, c2: int, pool: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(2 * in_ch, c1, 3, padding=1),
            nn.BatchNorm2d(c1), nn.ReLU(),
            nn.Conv2d(c1, 2 * c2, 3, padding=1),
            nn.BatchNorm2d(2 * c2), nn.ReLU(),
            nn.AdaptiveAvgPool2d(pool))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([z.real, z.imag], dim=1))
