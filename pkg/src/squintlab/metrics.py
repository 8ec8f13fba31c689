"""Performance functionals: rate, Fisher information / CRB, beamspace
channels, and the KL-based communication-sensing correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import (ChannelRealization, CommChannel, SensingScene, SystemConfig,
                    scene_factors, steering_derivatives, subcarrier_frequencies,
                    subcarrier_frequency)
from .precoder import PrecoderState, TtdGrid, ttd_phase_profile

KL_FLOOR = 1e-6           # divergence floor: caps the correlation at 1e6
KL_SMOOTHING = 1e-9       # mixed into the second argument before dividing
FISHER_RIDGE = 1e-10      # ridge scale, relative to mean eigenvalue
FISHER_COND_CAP = 1e12


class SingularFisher(Exception):
    """Raised when the Fisher matrix stays ill-conditioned after the ridge."""


@dataclass
class PerformancePoint:
    rate: float          # bits per OFDM symbol, summed over subcarriers
    crb: float           # rad^2
    correlation: float


@dataclass
class BeamspaceDictionary:
    """Steering-vector dictionaries on a uniform spatial-frequency grid at f_c."""

    D_t: np.ndarray      # (N_t, G_t)
    D_r: np.ndarray      # (N_r, G_t)
    u_grid: np.ndarray
    v_grid: np.ndarray

    @property
    def G_t(self) -> int:
        return self.D_t.shape[1]


@lru_cache(maxsize=8)
def build_dictionary(cfg: SystemConfig) -> BeamspaceDictionary:
    r = round(math.sqrt(cfg.dictionary_size / cfg.N_t))
    g_h, g_v = r * cfg.N_th, r * cfg.N_tv
    u = -1.0 + 2.0 * np.arange(g_h) / g_h
    v = -1.0 + 2.0 * np.arange(g_v) / g_v
    a_h = np.exp(1j * np.pi * np.outer(np.arange(cfg.N_th), u)) / math.sqrt(cfg.N_th)
    a_v = np.exp(1j * np.pi * np.outer(np.arange(cfg.N_tv), v)) / math.sqrt(cfg.N_tv)
    # column (i, j) -> kron(a_h[:, i], a_v[:, j]), flattened horizontal-major
    D = np.einsum("hi,vj->hvij", a_h, a_v).reshape(cfg.N_t, g_h * g_v)
    return BeamspaceDictionary(D_t=D, D_r=D.copy(),
                               u_grid=u, v_grid=v)


def dictionary_peak_index(dct: BeamspaceDictionary, vec: np.ndarray,
                          conjugate: bool = False) -> int:
    """Argmax of |D^H vec| (or |D^T vec| when conjugate) over the grid."""
    D = dct.D_t.conj() if not conjugate else dct.D_t
    return int(np.argmax(np.abs(D.T @ vec)))


def rate(comm: CommChannel, state: PrecoderState, cfg: SystemConfig) -> float:
    total = 0.0
    for m in range(1, cfg.M + 1):
        f_eff = ttd_phase_profile(state.ttd, subcarrier_frequency(cfg, m), cfg) \
            * state.ps.f_ps
        gain = abs(np.vdot(comm.h[m - 1], f_eff)) ** 2
        total += math.log2(1.0 + state.power.p[m - 1] * gain / cfg.sigma_c2)
    return total


def _derivative_factors(scene: SensingScene, m: int, cfg: SystemConfig):
    f = subcarrier_frequency(cfg, m)
    d_th, d_ph = [], []
    for k in range(scene.K):
        dth, dph = steering_derivatives(scene.theta[k], scene.phi[k], f, cfg)
        d_th.append(dth)
        d_ph.append(dph)
    return np.column_stack(d_th), np.column_stack(d_ph)


def fisher_matrix(scene: SensingScene, state: PrecoderState, m: int,
                  cfg: SystemConfig) -> np.ndarray:
    """Per-subcarrier 2K x 2K Fisher information of the target angles."""
    A_r, Sigma, A_t = scene_factors(scene, m, cfg)
    dA_th, dA_ph = _derivative_factors(scene, m, cfg)
    # receive array equals transmit array, so the derivatives coincide
    dAr_th, dAr_ph = dA_th, dA_ph

    f_eff = ttd_phase_profile(state.ttd, subcarrier_frequency(cfg, m), cfg) \
        * state.ps.f_ps
    x = math.sqrt(state.power.p[m - 1]) * f_eff
    alpha = np.diag(Sigma)

    # R_x^* = x^* x^T, so X^H R_x^* Y = conj(X^T x) outer (Y^T x)
    def tx(Z):
        return Z.T @ x

    z_a, z_th, z_ph = tx(A_t), tx(dA_th), tx(dA_ph)
    sc = alpha.conj()[:, None] * alpha[None, :]

    def block(dr_u, z_u, dr_v, z_v):
        return sc * (
            (dr_u.conj().T @ dr_v) * np.outer(z_a.conj(), z_a)
            + (dr_u.conj().T @ A_r) * np.outer(z_a.conj(), z_v)
            + (A_r.conj().T @ dr_v) * np.outer(z_u.conj(), z_a)
            + (A_r.conj().T @ A_r) * np.outer(z_u.conj(), z_v)
        )

    b_tt = block(dAr_th, z_th, dAr_th, z_th)
    b_tp = block(dAr_th, z_th, dAr_ph, z_ph)
    b_pp = block(dAr_ph, z_ph, dAr_ph, z_ph)
    top = np.hstack([b_tt, b_tp])
    bot = np.hstack([b_tp.conj().T, b_pp])
    return (2.0 / cfg.sigma_s2) * np.real(np.vstack([top, bot]))


def ridged_inverse_trace(J: np.ndarray, check_condition: bool = True) -> float:
    """Tr(J^-1) with a relative ridge; raises SingularFisher past the cap."""
    n = J.shape[0]
    ridge = FISHER_RIDGE * np.trace(J) / n
    if not np.isfinite(ridge) or ridge <= 0.0:
        raise SingularFisher("Fisher matrix has non-positive trace")
    if check_condition:
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > FISHER_COND_CAP:
            raise SingularFisher(
                "Fisher matrix ill-conditioned: unobservable geometry")
    J_r = J + ridge * np.eye(n)
    return float(np.trace(np.linalg.inv(J_r)))


def crb(scene: SensingScene, state: PrecoderState, cfg: SystemConfig) -> float:
    J = sum(fisher_matrix(scene, state, m, cfg) for m in range(1, cfg.M + 1))
    return ridged_inverse_trace(J)


class BeamspaceWorkspace:
    """Precomputed projections so TTD sweeps only pay a per-profile contraction.

    Communication entry g at subcarrier m:   conj(profile) @ W_c[m][:, g]
    Sensing entry g:  sum_k B_r[m][g, k] * (profile @ E[m][k][:, g])
    """

    def __init__(self, comm: CommChannel, scene: SensingScene,
                 dct: BeamspaceDictionary, cfg: SystemConfig):
        self.cfg = cfg
        self.freqs = subcarrier_frequencies(cfg)
        self.W_c = [dct.D_t.conj() * comm.h[i][:, None] for i in range(cfg.M)]
        self.B_r, self.E = [], []
        for m in range(1, cfg.M + 1):
            A_r, Sigma, A_t = scene_factors(scene, m, cfg)
            self.B_r.append((dct.D_r.conj().T @ A_r) @ Sigma)          # (G_t, K)
            # transmit dictionary enters the sensing projection conjugated so
            # that a target's signature peaks at the target's own grid cell
            self.E.append([A_t[:, k][:, None] * dct.D_t.conj()
                           for k in range(scene.K)])

    def channels(self, ttd: TtdGrid | None):
        cfg = self.cfg
        acc_c = 0.0
        acc_s = 0.0
        for i in range(cfg.M):
            if ttd is None:
                prof = None
                hc = np.abs(np.sum(self.W_c[i], axis=0))
            else:
                prof = ttd_phase_profile(ttd, self.freqs[i], cfg)
                hc = np.abs(prof.conj() @ self.W_c[i])
            s = 0.0j
            for k, E in enumerate(self.E[i]):
                t_row = np.sum(E, axis=0) if prof is None else prof @ E
                s = s + self.B_r[i][:, k] * t_row
            acc_c = acc_c + hc
            acc_s = acc_s + np.abs(s)
        return _l1_normalize(acc_c), _l1_normalize(acc_s)


def _l1_normalize(v: np.ndarray) -> np.ndarray:
    tot = float(np.sum(v))
    if tot <= 0.0:
        raise ValueError("all-zero beamspace channel")
    return v / tot


def beamspace_channels(comm: CommChannel, scene: SensingScene,
                       ttd: TtdGrid | None, dct: BeamspaceDictionary,
                       cfg: SystemConfig):
    """L1-normalized beamspace channel pair, with TTD-equivalent channels
    when a delay grid is supplied."""
    return BeamspaceWorkspace(comm, scene, dct, cfg).channels(ttd)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p, q) with the configured smoothing applied to q."""
    if p.shape != q.shape:
        raise ValueError("dimension mismatch")
    q = (1.0 - KL_SMOOTHING) * q + KL_SMOOTHING / len(q)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def cs_correlation(hb_c: np.ndarray, hb_s: np.ndarray) -> float:
    """Inverse KL divergence of the beamspace channel pair (floored)."""
    return 1.0 / max(kl_divergence(hb_c, hb_s), KL_FLOOR)


def evaluate(realization: ChannelRealization, state: PrecoderState,
             cfg: SystemConfig) -> PerformancePoint:
    dct = build_dictionary(cfg)
    hb_c, hb_s = beamspace_channels(realization.comm, realization.scene,
                                    state.ttd, dct, cfg)
    return PerformancePoint(rate=rate(realization.comm, state, cfg),
                            crb=crb(realization.scene, state, cfg),
                            correlation=cs_correlation(hb_c, hb_s))
