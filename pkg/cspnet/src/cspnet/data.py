"""Dataset ingestion and tensor preprocessing.

The dataset file is the JSON format emitted by the core's export subcommand.
Channel matrices are rebuilt here from the stored generative parameters
(angles, gains, delay) with a self-contained copy of the array geometry; a
cross-component test pins the reconstruction to the exporter to 1e-12.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import torch

SCHEMA_VERSION = 1
TWO_PI = 2.0 * math.pi


class DatasetError(Exception):
    """Unreadable dataset file or schema mismatch."""


@dataclass(frozen=True)
class SysParams:
    """Array geometry and radio parameters copied from the dataset header."""

    N_th: int
    N_tv: int
    N_r: int
    Q_th: int
    Q_tv: int
    M: int
    f_c: float
    B: float
    B_t: int
    t_max: float
    P_t: float
    sigma_c2: float
    sigma_s2: float
    K: int
    G_dict: int            # beamspace dictionary size (critically sampled: N_t)

    @property
    def N_t(self) -> int:
        return self.N_th * self.N_tv

    @property
    def Q_t(self) -> int:
        return self.Q_th * self.Q_tv

    @property
    def budget(self) -> float:
        return self.P_t / self.N_t

    @staticmethod
    def from_header(cfg: dict) -> "SysParams":
        g = int(cfg.get("G_t", 0))
        n_t = int(cfg["N_th"]) * int(cfg["N_tv"])
        return SysParams(
            N_th=int(cfg["N_th"]), N_tv=int(cfg["N_tv"]), N_r=int(cfg["N_r"]),
            Q_th=int(cfg["Q_th"]), Q_tv=int(cfg["Q_tv"]), M=int(cfg["M"]),
            f_c=float(cfg["f_c"]), B=float(cfg["B"]), B_t=int(cfg["B_t"]),
            t_max=float(cfg["t_max"]), P_t=float(cfg["P_t"]),
            sigma_c2=float(cfg["sigma_c2"]), sigma_s2=float(cfg["sigma_s2"]),
            K=int(cfg["K"]), G_dict=g if g else n_t)


def subcarrier_frequencies(sp: SysParams) -> np.ndarray:
    m = np.arange(1, sp.M + 1)
    return sp.f_c + (sp.B / sp.M) * (m - (sp.M + 1) / 2.0)


def steering_vector(theta: float, phi: float, f: float, sp: SysParams) -> np.ndarray:
    """Unit-norm UPA steering vector, horizontal-major flatten."""
    n_h = np.arange(sp.N_th)[:, None]
    n_v = np.arange(sp.N_tv)[None, :]
    ph = np.pi * (f / sp.f_c) * (math.sin(phi) * math.sin(theta) * n_h
                                 + math.cos(theta) * n_v)
    return np.exp(1j * ph).ravel() / math.sqrt(sp.N_t)


def steering_derivatives(theta: float, phi: float, f: float, sp: SysParams):
    """Analytic angle derivatives of the steering vector."""
    a = steering_vector(theta, phi, f, sp)
    n_h = np.arange(sp.N_th)[:, None]
    n_v = np.arange(sp.N_tv)[None, :]
    scale = np.pi * (f / sp.f_c)
    c_th = scale * (math.sin(phi) * math.cos(theta) * n_h
                    - math.sin(theta) * n_v)
    c_ph = scale * (math.cos(phi) * math.sin(theta) * n_h + 0.0 * n_v)
    return 1j * c_th.ravel() * a, 1j * c_ph.ravel() * a


def subarray_of_antenna(sp: SysParams) -> np.ndarray:
    """Flat sub-array index per antenna, horizontal-major."""
    l_h, l_v = sp.N_th // sp.Q_th, sp.N_tv // sp.Q_tv
    n_h = np.arange(sp.N_th)[:, None] // l_h
    n_v = np.arange(sp.N_tv)[None, :] // l_v
    return (n_h * sp.Q_tv + n_v).ravel()


def ttd_quantize(t: np.ndarray, sp: SysParams) -> np.ndarray:
    """Nearest grid delay, ties rounding down, clamped; matches the core."""
    step = sp.t_max / 2 ** sp.B_t
    top = (2 ** sp.B_t - 1) * step
    t = np.clip(t, 0.0, top)
    b = np.ceil(t / step - 0.5)
    return np.clip(b, 0, 2 ** sp.B_t - 1) * step


def beamspace_dictionary(sp: SysParams) -> np.ndarray:
    """Carrier-frequency steering dictionary on the uniform (u, v) grid."""
    r = round(math.sqrt(sp.G_dict / sp.N_t))
    g_h, g_v = r * sp.N_th, r * sp.N_tv
    u = -1.0 + 2.0 * np.arange(g_h) / g_h
    v = -1.0 + 2.0 * np.arange(g_v) / g_v
    a_h = np.exp(1j * np.pi * np.outer(np.arange(sp.N_th), u)) \
        / math.sqrt(sp.N_th)
    a_v = np.exp(1j * np.pi * np.outer(np.arange(sp.N_tv), v)) \
        / math.sqrt(sp.N_tv)
    return np.einsum("hi,vj->hvij", a_h, a_v).reshape(sp.N_t, g_h * g_v)


@dataclass
class Sample:
    """One realization: channel matrices plus the loss normalizers."""

    seed: int
    h: np.ndarray              # (M, N_t) complex user channel
    G: np.ndarray              # (M, N_r, N_t) complex target response
    A_t: np.ndarray            # (M, N_t, K) transmit steering per subcarrier
    alpha: np.ndarray          # (K, M) reflection gains
    dG: np.ndarray             # (M, 2K, N_r, N_t) response derivatives
    cor_star: float
    r_max: float
    crb_min: float


def _pairs2c(lst) -> np.ndarray:
    a = np.asarray(lst, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _build_sample(s: dict, sp: SysParams) -> Sample:
    theta_c, phi_c = (float(x) for x in s["comm"]["angles"])
    beta = _pairs2c(s["comm"]["beta"])
    tau = float(s["comm"]["tau"])
    ang = np.asarray(s["scene"]["angles"], dtype=float)
    alpha = _pairs2c(s["scene"]["alpha"])
    K = ang.shape[0]
    freqs = subcarrier_frequencies(sp)

    h = np.empty((sp.M, sp.N_t), dtype=complex)
    G = np.empty((sp.M, sp.N_r, sp.N_t), dtype=complex)
    A_t = np.empty((sp.M, sp.N_t, K), dtype=complex)
    dG = np.empty((sp.M, 2 * K, sp.N_r, sp.N_t), dtype=complex)
    for i, f in enumerate(freqs):
        h[i] = beta[i] * np.exp(-1j * TWO_PI * f * tau) \
            * steering_vector(theta_c, phi_c, f, sp)
        G[i] = 0.0
        for k in range(K):
            a = steering_vector(ang[k, 0], ang[k, 1], f, sp)
            d_th, d_ph = steering_derivatives(ang[k, 0], ang[k, 1], f, sp)
            A_t[i, :, k] = a
            G[i] += alpha[k, i] * np.outer(a, a)
            dG[i, k] = alpha[k, i] * (np.outer(d_th, a) + np.outer(a, d_th))
            dG[i, K + k] = alpha[k, i] * (np.outer(d_ph, a) + np.outer(a, d_ph))

    norm = s.get("normalizers")
    if norm is None:
        raise DatasetError("sample has no loss normalizers")
    return Sample(seed=int(s["seed"]), h=h, G=G, A_t=A_t, alpha=alpha, dG=dG,
                  cor_star=float(norm["cor_star"]),
                  r_max=float(norm["r_max"]),
                  crb_min=float(norm["crb_min"]))


def load_dataset(path):
    """Read an exported dataset; returns (SysParams, list of Samples)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset: {exc}") from exc
    header = doc.get("header", {})
    if header.get("version") != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema version "
                           f"{header.get('version')!r}")
    try:
        sp = SysParams.from_header(header["cfg"])
        samples = [_build_sample(s, sp) for s in doc["samples"]]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DatasetError(f"malformed dataset sample: {exc}") from exc
    return sp, samples


def preprocess(sample: Sample) -> tuple[torch.Tensor, torch.Tensor]:
    """Network inputs: per-subcarrier user outer products and target
    responses, each power-normalized to unit mean squared magnitude."""
    Hbar = np.einsum("mi,mj->mij", sample.h, sample.h.conj())
    Gbar = sample.G

    def norm(x):
        scale = math.sqrt(float(np.mean(np.abs(x) ** 2)))
        return torch.from_numpy((x / scale).astype(np.complex64))

    return norm(Hbar), norm(Gbar)
