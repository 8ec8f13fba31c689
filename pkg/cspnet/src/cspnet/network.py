"""The precoder-design network: two feature extractors, attention fusion,
and bounded parameter heads, plus the projection to hardware-feasible states.
"""

from __future__ import annotations

import json
import math

import numpy as np
import torch
from torch import nn

from .config import CspNetConfig
from .data import (SysParams, subarray_of_antenna, subcarrier_frequencies,
                   ttd_quantize)
from .layers import Cbam, ComplexBlock, RealBlock

TWO_PI = 2.0 * math.pi


class CspNet(nn.Module):
    """Maps (user outer products, target responses) to precoder parameters.

    Outputs are normalized: delays and phases are emitted as fractions in
    [0, 1] of the delay range and of 2 pi, powers as unconstrained logits
    projected onto the budget simplex.
    """

    def __init__(self, sp: SysParams, cfg: CspNetConfig):
        super().__init__()
        self.sp = sp
        self.cfg = cfg
        Block = ComplexBlock if cfg.complex_layers else RealBlock
        self.cfe = Block(sp.M, cfg.conv1, cfg.conv2, cfg.pool)
        self.sfe = Block(sp.M, cfg.conv1, cfg.conv2, cfg.pool)
        fused_ch = 2 * ComplexBlock.out_channels(cfg.conv2)
        self.cbam = Cbam(fused_ch, cfg.reduction) if cfg.use_cbam else None
        # skip path: the first column of the user outer product and the first
        # row of the target response keep per-antenna phase structure that
        # pooled conv features wash out
        skip = 4 * sp.M * sp.N_t
        flat = fused_ch * cfg.pool * cfg.pool + skip
        self.fl = nn.Sequential(nn.Linear(flat, cfg.hidden), nn.ReLU(),
                                nn.Linear(cfg.hidden, cfg.hidden), nn.ReLU())
        # the delay head is categorical over the 2^B_t hardware values
        # rather than a scalar regression: the loss oscillates in the
        # delays on a sub-femtosecond period (carrier phase 2 pi f t) while
        # the hardware grid step is picoseconds, so pathwise delay
        # gradients are noise; the head is trained with a score-function
        # (sampled level, advantage-weighted log-probability) estimator
        # that only ever scores utilities at actual grid points
        self.n_levels = 2 ** sp.B_t
        self.t_head = nn.Linear(cfg.hidden, sp.Q_t * self.n_levels)
        # start at the all-zero delay profile (a strong, beam-squint-free
        # baseline) so exploration over the delay grid only moves away from
        # it when the loss actually improves
        with torch.no_grad():
            self.t_head.weight.mul_(0.1)
            self.t_head.bias.view(sp.Q_t, self.n_levels)[:, 0] = 3.0
        # the phase head is structural: phases are the angle of a complex
        # combination of delay-compensated per-subcarrier channel features,
        # with learned per-subcarrier complex gates (4M reals: re/im gate
        # for the user branch, re/im gate for the target branch) plus a
        # small learned additive offset per antenna
        self.gate_head = nn.Linear(cfg.hidden, 4 * sp.M)
        with torch.no_grad():
            self.gate_head.weight.mul_(0.1)
            self.gate_head.bias[:sp.M] = 1.0       # user-branch gate ~ 1
            self.gate_head.bias[2 * sp.M:3 * sp.M] = 0.1
        self.phi_head = nn.Linear(cfg.hidden, sp.N_t)
        with torch.no_grad():
            self.phi_head.weight.mul_(0.1)
        self.p_head = nn.Linear(cfg.hidden, sp.M)
        step = sp.t_max / self.n_levels
        self.register_buffer("grid_frac",
                             torch.arange(self.n_levels) * step / sp.t_max)
        self.register_buffer("freqs", torch.from_numpy(
            subcarrier_frequencies(sp)).float())
        self.register_buffer("sub", torch.from_numpy(
            subarray_of_antenna(sp)).long())

    def forward(self, Hbar: torch.Tensor, Gbar: torch.Tensor):
        """Inputs (B, M, N_t, N_t) and (B, M, N_r, N_t) complex tensors.

        Returns (t_hat, phi_hat, p_raw, t_logp): delay fractions on the
        hardware grid (sampled in training mode, argmax in eval mode),
        phase fractions, power logits, and the log-probability of the
        selected delay levels used by the score-function update."""
        feat = torch.cat([self.cfe(Hbar), self.sfe(Gbar)], dim=1)
        if self.cbam is not None:
            feat = self.cbam(feat)
        skip_c = Hbar[:, :, :, 0]
        skip_s = Gbar[:, :, 0, :]
        skip = torch.cat([skip_c.real, skip_c.imag,
                          skip_s.real, skip_s.imag], dim=1).flatten(1)
        feat = self.fl(torch.cat([feat.flatten(1), skip], dim=1))
        logits = self.t_head(feat).view(-1, self.sp.Q_t, self.n_levels)
        log_prob = torch.log_softmax(logits, dim=-1)
        if self.training:
            levels = torch.multinomial(
                torch.softmax(logits, dim=-1).view(-1, self.n_levels),
                1).view(-1, self.sp.Q_t)
        else:
            levels = logits.argmax(dim=-1)
        t_hat = self.grid_frac[levels]
        t_logp = torch.gather(log_prob, 2,
                              levels[:, :, None]).squeeze(2).sum(dim=1)
        # delay-compensated channel features: dividing out the sub-array
        # profile e^{j 2 pi f T} leaves per-antenna residual phases that the
        # precoder phases should cancel
        delays = (self.sp.t_max * t_hat)[:, self.sub]       # (B, N_t)
        phase = TWO_PI * self.freqs[None, :, None] * delays[:, None, :]
        prof_conj = torch.polar(torch.ones_like(phase), -phase)
        gates = self.gate_head(feat)                        # (B, 4M)
        M = self.sp.M
        g_user = torch.complex(gates[:, :M], gates[:, M:2 * M])
        g_tgt = torch.complex(gates[:, 2 * M:3 * M], gates[:, 3 * M:])
        agg = torch.sum(
            g_user[:, :, None] * (prof_conj * skip_c)
            + g_tgt[:, :, None] * (prof_conj * Gbar.mean(dim=2).conj()),
            dim=1)                                          # (B, N_t)
        phi = torch.atan2(agg.imag, agg.real + 1e-20) + self.phi_head(feat)
        phi_hat = torch.remainder(phi, TWO_PI) / TWO_PI
        p_raw = self.p_head(feat)
        return t_hat, phi_hat, p_raw, t_logp


def project_power(p_raw: torch.Tensor, budget: float) -> torch.Tensor:
    """Softplus-then-scale projection onto {p >= 0, sum p = budget}."""
    p = torch.nn.functional.softplus(p_raw) + 1e-12
    return p * (budget / p.sum(dim=-1, keepdim=True))


def ste_quantize(t: torch.Tensor, sp: SysParams) -> torch.Tensor:
    """Delay quantizer with a straight-through gradient.

    Forward applies the hardware grid (nearest value, ties down, clamped)
    so the training loss scores exactly what will be emitted; backward
    treats the quantizer as the identity."""
    step = sp.t_max / 2 ** sp.B_t
    top = (2 ** sp.B_t - 1) * step
    tc = torch.clamp(t, 0.0, top)
    q = torch.clamp(torch.ceil(tc / step - 0.5), 0, 2 ** sp.B_t - 1) * step
    return t + (q - t).detach()


def continuous_state(t_hat, phi_hat, p_raw, sp: SysParams):
    """Differentiable (delays, phases, powers) used inside the loss; delays
    pass through the quantizer (an idempotent clamp for the categorical
    head, which already emits grid values) so the loss scores exactly the
    state that postprocess will emit."""
    return (ste_quantize(sp.t_max * t_hat, sp), TWO_PI * phi_hat,
            project_power(p_raw, sp.budget))


def postprocess(t_hat, phi_hat, p_raw, sp: SysParams) -> str:
    """Hardware-feasible precoder-state JSON: delays snapped to the
    quantizer grid, phases scaled to [0, 2 pi), powers on the budget."""
    t = np.asarray(t_hat.detach().cpu(), dtype=float).reshape(-1)
    phi = np.asarray(phi_hat.detach().cpu(), dtype=float).reshape(-1)
    # the simplex projection is redone in float64 so the emitted powers meet
    # the budget check at double precision
    raw = np.asarray(p_raw.detach().cpu(), dtype=float).reshape(-1)
    p = np.logaddexp(0.0, raw) + 1e-12
    p *= sp.budget / float(np.sum(p))
    T = ttd_quantize(sp.t_max * t, sp).reshape(sp.Q_th, sp.Q_tv)
    varphi = np.mod(TWO_PI * phi, TWO_PI)
    return json.dumps({"T": T.tolist(), "varphi": varphi.tolist(),
                       "p": p.tolist()})
