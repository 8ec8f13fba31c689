"""Differentiable rate / CRB / correlation used by the training loss.

These mirror the evaluation rules of the precoding core (including its
Fisher ridge and KL smoothing constants) so that the unsupervised loss
optimizes exactly what the core's eval-state subcommand scores; golden
cross-component tests pin the two implementations together.  Everything is
written in torch so gradients flow to the continuous delay, phase, and power
outputs of the network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .data import (Sample, SysParams, TWO_PI, beamspace_dictionary,
                   subarray_of_antenna, subcarrier_frequencies)

KL_FLOOR = 1e-6
KL_SMOOTHING = 1e-9
FISHER_RIDGE = 1e-10

_CDT = torch.complex128
_RDT = torch.float64


@dataclass
class PreparedSample:
    """Per-sample constant tensors consumed by the loss."""

    h: torch.Tensor         # (M, N_t) complex
    dG: torch.Tensor        # (M, 2K, N_r, N_t) complex
    W_c: torch.Tensor       # (M, N_t, G) communication beamspace projector
    B_r: torch.Tensor       # (M, G, K) receive-side sensing projector
    E: torch.Tensor         # (M, K, N_t, G) transmit-side sensing projector
    cor_star: float
    r_max: float
    crb_min: float


class Physics:
    """Shared constants plus the three differentiable functionals."""

    def __init__(self, sp: SysParams):
        self.sp = sp
        self.freqs = torch.from_numpy(subcarrier_frequencies(sp)).to(_RDT)
        self.sub = torch.from_numpy(subarray_of_antenna(sp)).long()
        self._D = beamspace_dictionary(sp)

    def prepare(self, sample: Sample) -> PreparedSample:
        sp, D = self.sp, self._D
        M, K, G = sp.M, sample.alpha.shape[0], D.shape[1]
        W_c = np.empty((M, sp.N_t, G), dtype=complex)
        B_r = np.empty((M, G, K), dtype=complex)
        E = np.empty((M, K, sp.N_t, G), dtype=complex)
        for m in range(M):
            W_c[m] = D.conj() * sample.h[m][:, None]
            A_r = sample.A_t[m]          # receive array equals transmit UPA
            B_r[m] = (D.conj().T @ A_r) * sample.alpha[:, m][None, :]
            for k in range(K):
                E[m, k] = sample.A_t[m][:, k][:, None] * D.conj()
        to = lambda a: torch.from_numpy(a).to(_CDT)
        return PreparedSample(h=to(sample.h), dG=to(sample.dG), W_c=to(W_c),
                              B_r=to(B_r), E=to(E),
                              cor_star=sample.cor_star, r_max=sample.r_max,
                              crb_min=sample.crb_min)

    def _profiles(self, T: torch.Tensor) -> torch.Tensor:
        """(M, N_t) complex delay profiles from the (Q_t,) delay vector."""
        phase = TWO_PI * self.freqs[:, None] * T.to(_RDT)[self.sub][None, :]
        return torch.polar(torch.ones_like(phase), phase)

    def rate(self, ps: PreparedSample, T, phi, p) -> torch.Tensor:
        f_eff = self._profiles(T) * torch.polar(
            torch.ones(self.sp.N_t, dtype=_RDT), phi.to(_RDT))[None, :]
        gain = torch.abs(torch.sum(ps.h.conj() * f_eff, dim=1)) ** 2
        snr = p.to(_RDT) * gain / self.sp.sigma_c2
        return torch.sum(torch.log2(1.0 + snr))

    def crb(self, ps: PreparedSample, T, phi, p) -> torch.Tensor:
        f_eff = self._profiles(T) * torch.polar(
            torch.ones(self.sp.N_t, dtype=_RDT), phi.to(_RDT))[None, :]
        x = torch.sqrt(p.to(_RDT)).to(_CDT)[:, None] * f_eff   # (M, N_t)
        cols = torch.einsum("munr,mr->mun", ps.dG, x)          # (M, 2K, N_r)
        J = (2.0 / self.sp.sigma_s2) * torch.sum(
            torch.einsum("mur,mvr->muv", cols.conj(), cols), dim=0).real
        n = J.shape[0]
        ridge = FISHER_RIDGE * torch.diagonal(J).sum() / n
        J_r = J + ridge * torch.eye(n, dtype=_RDT)
        return torch.diagonal(torch.linalg.inv(J_r)).sum()

    def correlation(self, ps: PreparedSample, T) -> torch.Tensor:
        prof = self._profiles(T)                               # (M, N_t)
        hc = torch.abs(torch.einsum("mn,mng->mg", prof.conj(), ps.W_c))
        t_rows = torch.einsum("mn,mkng->mkg", prof, ps.E)      # (M, K, G)
        s = torch.einsum("mgk,mkg->mg", ps.B_r, t_rows)
        acc_c = torch.sum(hc, dim=0)
        acc_s = torch.sum(torch.abs(s), dim=0)
        pdist = acc_c / torch.sum(acc_c)
        qdist = acc_s / torch.sum(acc_s)
        G = qdist.shape[0]
        qdist = (1.0 - KL_SMOOTHING) * qdist + KL_SMOOTHING / G
        kl = torch.sum(torch.where(pdist > 0,
                                   pdist * torch.log(pdist / qdist),
                                   torch.zeros_like(pdist)))
        return 1.0 / torch.clamp(kl, min=KL_FLOOR)

    def utility(self, ps: PreparedSample, T, phi, p) -> torch.Tensor:
        cor = self.correlation(ps, T)
        r = self.rate(ps, T, phi, p)
        c = self.crb(ps, T, phi, p)
        return (cor / ps.cor_star) * (r / ps.r_max + ps.crb_min / c)


def batch_utilities(phys: Physics, prepared, outputs) -> torch.Tensor:
    """Per-sample correlation-weighted dual-functional utilities."""
    return torch.stack([phys.utility(ps, T, phi, p)
                        for ps, (T, phi, p) in zip(prepared, outputs)])


def batch_loss(phys: Physics, prepared, outputs) -> torch.Tensor:
    """Negative mean correlation-weighted dual-functional utility."""
    return -batch_utilities(phys, prepared, outputs).mean()


def sample_metrics(phys: Physics, ps: PreparedSample, T, phi, p) -> dict:
    """Detached scalar diagnostics for one sample."""
    with torch.no_grad():
        return {
            "rate": float(phys.rate(ps, T, phi, p)),
            "crb": float(phys.crb(ps, T, phi, p)),
            "correlation": float(phys.correlation(ps, T)),
            "utility": float(phys.utility(ps, T, phi, p)),
        }
