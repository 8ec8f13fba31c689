"""System configuration, steering vectors, and random channel/scene generation.

All geometry follows a uniform planar array indexed horizontal-major:
antenna n = n_h * N_tv + n_v (0-based), matching the Kronecker product
a_h kron a_v.  The receive array is assumed identical to the transmit UPA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SystemConfig:
    """Transceiver, grid, hardware and channel-statistics parameters."""

    N_th: int = 4
    N_tv: int = 4
    N_r: int = 16
    Q_th: int = 2
    Q_tv: int = 2
    M: int = 8
    f_c: float = 100e9
    B: float = 8e9
    B_t: int = 4
    t_max: float = 100e-12
    P_t: float = 10.0
    sigma_c2: float = 1.0
    sigma_s2: float = 1.0
    sigma_beta: float = 1.0
    sigma_alpha: float = 0.6
    tau_max: float = 100e-9
    K: int = 2
    G_t: int = 0  # 0 -> critically sampled (N_t columns)

    def __post_init__(self):
        if self.N_th % self.Q_th or self.N_tv % self.Q_tv:
            raise ValueError("antenna counts must be divisible by TTD sub-array counts")
        for name in ("N_th", "N_tv", "N_r", "Q_th", "Q_tv", "M", "K"):
            if getattr(self, name) < (0 if name == "K" else 1):
                raise ValueError(f"{name} must be positive")
        for name in ("f_c", "B", "t_max", "P_t", "sigma_c2", "sigma_s2", "tau_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.B >= 2 * self.f_c:
            raise ValueError("bandwidth must satisfy B < 2 f_c")
        if self.N_r != self.N_th * self.N_tv:
            raise ValueError("receive array is assumed identical to the transmit UPA")
        if self.G_t:
            r = round(math.sqrt(self.G_t / self.N_t))
            if r < 1 or r * r * self.N_t != self.G_t:
                raise ValueError("G_t must equal N_t times a square oversampling factor")

    @property
    def N_t(self) -> int:
        return self.N_th * self.N_tv

    @property
    def L_h(self) -> int:
        return self.N_th // self.Q_th

    @property
    def L_v(self) -> int:
        return self.N_tv // self.Q_tv

    @property
    def Q_t(self) -> int:
        return self.Q_th * self.Q_tv

    @property
    def dictionary_size(self) -> int:
        return self.G_t if self.G_t else self.N_t

    def with_power(self, P_t: float) -> "SystemConfig":
        return replace(self, P_t=P_t)

    @staticmethod
    def desk_default() -> "SystemConfig":
        """Small configuration used by the test and acceptance suites.

        The bandwidth is scaled up fourfold as the aperture shrinks fourfold
        per axis, keeping the squint severity N_th * B / f_c of the
        full-scale profile so delay elements stay consequential."""
        return SystemConfig(B=32e9)

    @staticmethod
    def paper_default() -> "SystemConfig":
        """Full-scale simulation profile (256-antenna UPA, 32 subcarriers)."""
        return SystemConfig(N_th=16, N_tv=16, N_r=256, Q_th=8, Q_tv=8, M=32, K=3)


def subcarrier_frequency(cfg: SystemConfig, m: int) -> float:
    """Frequency of subcarrier m (1-based), symmetric about f_c."""
    if not 1 <= m <= cfg.M:
        raise IndexError(f"subcarrier index {m} outside [1, {cfg.M}]")
    return cfg.f_c + (cfg.B / cfg.M) * (m - (cfg.M + 1) / 2.0)


def subcarrier_frequencies(cfg: SystemConfig) -> np.ndarray:
    m = np.arange(1, cfg.M + 1)
    return cfg.f_c + (cfg.B / cfg.M) * (m - (cfg.M + 1) / 2.0)


def _check_angles(theta: float, phi: float) -> None:
    if not 0.0 <= theta <= np.pi:
        raise ValueError(f"elevation {theta} outside [0, pi]")
    if not -np.pi / 2 <= phi <= np.pi / 2:
        raise ValueError(f"azimuth {phi} outside [-pi/2, pi/2]")


def _phase_grid(theta, phi, f, cfg):
    n_h = np.arange(cfg.N_th)
    n_v = np.arange(cfg.N_tv)
    return np.pi * (f / cfg.f_c) * (
        np.sin(phi) * np.sin(theta) * n_h[:, None] + np.cos(theta) * n_v[None, :]
    )


def steering_vector(theta: float, phi: float, f: float, cfg: SystemConfig) -> np.ndarray:
    """Unit-norm UPA steering vector a_h kron a_v at frequency f."""
    _check_angles(theta, phi)
    ph = _phase_grid(theta, phi, f, cfg)
    return np.exp(1j * ph).ravel() / math.sqrt(cfg.N_t)


def steering_derivatives(theta: float, phi: float, f: float, cfg: SystemConfig):
    """Analytic (d a/d theta, d a/d phi) of the steering vector."""
    _check_angles(theta, phi)
    a = steering_vector(theta, phi, f, cfg)
    n_h = np.arange(cfg.N_th)[:, None]
    n_v = np.arange(cfg.N_tv)[None, :]
    scale = np.pi * (f / cfg.f_c)
    c_th = scale * (np.sin(phi) * np.cos(theta) * n_h - np.sin(theta) * n_v)
    c_ph = scale * (np.cos(phi) * np.sin(theta) * n_h + 0.0 * n_v)
    return 1j * c_th.ravel() * a, 1j * c_ph.ravel() * a


@dataclass
class CommChannel:
    """LoS downlink channel: per-subcarrier gains plus the materialized vectors."""

    beta: np.ndarray          # complex, shape (M,)
    tau_c: float
    theta_c: float
    phi_c: float
    h: np.ndarray             # complex, shape (M, N_t)

    def regenerate(self, cfg: SystemConfig) -> np.ndarray:
        freqs = subcarrier_frequencies(cfg)
        out = np.empty_like(self.h)
        for i, f in enumerate(freqs):
            out[i] = (
                self.beta[i]
                * np.exp(-1j * TWO_PI * f * self.tau_c)
                * steering_vector(self.theta_c, self.phi_c, f, cfg)
            )
        return out


@dataclass
class SensingScene:
    """K point targets: reflection coefficients, angles, and response matrices."""

    alpha: np.ndarray         # complex, shape (K, M)
    theta: np.ndarray         # shape (K,)
    phi: np.ndarray           # shape (K,)
    G: np.ndarray             # complex, shape (M, N_r, N_t)

    @property
    def K(self) -> int:
        return len(self.theta)


@dataclass
class ChannelRealization:
    comm: CommChannel
    scene: SensingScene
    seed: int
    msia: float


def msia(comm: CommChannel, scene: SensingScene) -> float:
    """Root mean squared angular interval between the targets and the user."""
    d2 = (scene.theta - comm.theta_c) ** 2 + (scene.phi - comm.phi_c) ** 2
    return math.sqrt(float(np.sum(d2)) / (2 * scene.K))


def _complex_normal(rng, sigma2, size):
    s = math.sqrt(sigma2 / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_comm_channel(rng: np.random.Generator, cfg: SystemConfig) -> CommChannel:
    theta = rng.uniform(0.0, np.pi)
    phi = rng.uniform(-np.pi / 2, np.pi / 2)
    # U(0, tau_max]: flip the half-open interval produced by uniform()
    tau = cfg.tau_max - rng.uniform(0.0, cfg.tau_max)
    beta = _complex_normal(rng, cfg.sigma_beta ** 2, cfg.M)
    ch = CommChannel(beta=beta, tau_c=tau, theta_c=theta, phi_c=phi,
                     h=np.zeros((cfg.M, cfg.N_t), dtype=complex))
    ch.h = ch.regenerate(cfg)
    return ch


def _clip_angles(theta, phi):
    return np.clip(theta, 0.0, np.pi), np.clip(phi, -np.pi / 2, np.pi / 2)


def _place_targets(rng, cfg, comm, msia_target):
    """Offset directions scaled to hit the requested MSIA, with clip-and-rescale."""
    if msia_target == 0.0:
        return np.full(cfg.K, comm.theta_c), np.full(cfg.K, comm.phi_c)
    for _ in range(200):
        ang = rng.uniform(0.0, TWO_PI, cfg.K)
        d_th, d_ph = np.cos(ang), np.sin(ang)
        scale = msia_target * math.sqrt(2.0)
        for _ in range(60):
            theta, phi = _clip_angles(comm.theta_c + scale * d_th,
                                      comm.phi_c + scale * d_ph)
            realized = math.sqrt(float(np.sum((theta - comm.theta_c) ** 2
                                              + (phi - comm.phi_c) ** 2)) / (2 * cfg.K))
            if realized == 0.0:
                break
            if abs(realized - msia_target) <= 0.01 * msia_target:
                return theta, phi
            scale *= msia_target / realized
            if scale > 4.0 * np.pi:
                break
    raise ValueError(f"cannot place {cfg.K} targets at MSIA {msia_target} "
                     "within the angle domains")


def sample_sensing_scene(rng: np.random.Generator, cfg: SystemConfig,
                         comm: CommChannel, msia_target: float) -> SensingScene:
    if msia_target < 0:
        raise ValueError("msia_target must be non-negative")
    theta, phi = _place_targets(rng, cfg, comm, msia_target)
    alpha = _complex_normal(rng, cfg.sigma_alpha ** 2, (cfg.K, cfg.M))
    scene = SensingScene(alpha=alpha, theta=theta, phi=phi,
                         G=np.zeros((cfg.M, cfg.N_r, cfg.N_t), dtype=complex))
    scene.G = target_response_all(scene, cfg)
    return scene


def scene_factors(scene: SensingScene, m: int, cfg: SystemConfig):
    """(A_r, Sigma, A_t) factors of the target response at subcarrier m (1-based)."""
    f = subcarrier_frequency(cfg, m)
    A_t = np.column_stack([steering_vector(scene.theta[k], scene.phi[k], f, cfg)
                           for k in range(scene.K)])
    A_r = A_t.copy()  # receive UPA identical to transmit
    Sigma = np.diag(scene.alpha[:, m - 1])
    return A_r, Sigma, A_t


def target_response(scene: SensingScene, m: int, cfg: SystemConfig) -> np.ndarray:
    A_r, Sigma, A_t = scene_factors(scene, m, cfg)
    return A_r @ Sigma @ A_t.T


def target_response_all(scene: SensingScene, cfg: SystemConfig) -> np.ndarray:
    return np.stack([target_response(scene, m, cfg) for m in range(1, cfg.M + 1)])


def sample_realization(seed: int, cfg: SystemConfig,
                       msia_target: float) -> ChannelRealization:
    """Deterministic (seed, cfg) -> one user channel plus one sensing scene."""
    rng = np.random.default_rng(seed)
    comm = sample_comm_channel(rng, cfg)
    scene = sample_sensing_scene(rng, cfg, comm, msia_target)
    return ChannelRealization(comm=comm, scene=scene, seed=int(seed),
                              msia=msia(comm, scene))
