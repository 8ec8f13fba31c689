"""TTD + phase-shifter + power-allocation hardware model."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import TWO_PI, SystemConfig, subcarrier_frequency


def ttd_grid_values(cfg: SystemConfig) -> np.ndarray:
    """The quantized delay set {b t_max / 2^B_t : b = 0..2^B_t - 1}."""
    return np.arange(2 ** cfg.B_t) * cfg.t_max / 2 ** cfg.B_t


def ttd_quantize(t, cfg: SystemConfig):
    """Nearest quantized delay; ties round down; out-of-range values clamp first."""
    step = cfg.t_max / 2 ** cfg.B_t
    top = (2 ** cfg.B_t - 1) * step
    t = np.clip(t, 0.0, top)
    b = np.ceil(t / step - 0.5)  # round-half-down
    return np.clip(b, 0, 2 ** cfg.B_t - 1) * step


@dataclass
class TtdGrid:
    """Per-sub-array true-time delays, seconds, shape (Q_th, Q_tv)."""

    T: np.ndarray

    @staticmethod
    def zeros(cfg: SystemConfig) -> "TtdGrid":
        return TtdGrid(np.zeros((cfg.Q_th, cfg.Q_tv)))

    def quantized(self, cfg: SystemConfig) -> "TtdGrid":
        return TtdGrid(ttd_quantize(self.T, cfg))

    def validate(self, cfg: SystemConfig) -> None:
        if self.T.shape != (cfg.Q_th, cfg.Q_tv):
            raise ValueError("TTD grid shape mismatch")
        if np.any(self.T < 0) or np.any(self.T > cfg.t_max):
            raise ValueError("TTD delays outside [0, t_max]")
        if not np.allclose(self.T, ttd_quantize(self.T, cfg), atol=1e-18):
            raise ValueError("TTD delays off the quantized grid")


@dataclass
class PhaseShifters:
    """Frequency-flat phases, radians in [0, 2 pi), shape (N_t,)."""

    varphi: np.ndarray

    @staticmethod
    def zeros(cfg: SystemConfig) -> "PhaseShifters":
        return PhaseShifters(np.zeros(cfg.N_t))

    @property
    def f_ps(self) -> np.ndarray:
        return np.exp(1j * self.varphi)

    def validate(self, cfg: SystemConfig) -> None:
        if self.varphi.shape != (cfg.N_t,):
            raise ValueError("phase-shifter vector shape mismatch")
        if np.any(self.varphi < 0) or np.any(self.varphi >= TWO_PI):
            raise ValueError("phases outside [0, 2 pi)")


@dataclass
class PowerAllocation:
    """Per-subcarrier linear powers; L1 norm bounded by P_t / N_t."""

    p: np.ndarray

    @staticmethod
    def uniform(cfg: SystemConfig) -> "PowerAllocation":
        return PowerAllocation(np.full(cfg.M, cfg.P_t / (cfg.N_t * cfg.M)))

    def validate(self, cfg: SystemConfig) -> None:
        if self.p.shape != (cfg.M,):
            raise ValueError("power vector shape mismatch")
        if np.any(self.p < -1e-15):
            raise ValueError("negative subcarrier power")
        budget = cfg.P_t / cfg.N_t
        if float(np.sum(self.p)) > budget * (1 + 1e-9):
            raise ValueError("power budget exceeded")


@dataclass
class PrecoderState:
    ttd: TtdGrid
    ps: PhaseShifters
    power: PowerAllocation

    def validate(self, cfg: SystemConfig) -> None:
        self.ttd.validate(cfg)
        self.ps.validate(cfg)
        self.power.validate(cfg)

    def to_json(self) -> str:
        return json.dumps({
            "T": self.ttd.T.tolist(),
            "varphi": self.ps.varphi.tolist(),
            "p": self.power.p.tolist(),
        })

    @staticmethod
    def from_json(text: str) -> "PrecoderState":
        d = json.loads(text)
        return PrecoderState(TtdGrid(np.asarray(d["T"], dtype=float)),
                             PhaseShifters(np.asarray(d["varphi"], dtype=float)),
                             PowerAllocation(np.asarray(d["p"], dtype=float)))


def subarray_of_antenna(cfg: SystemConfig) -> np.ndarray:
    """Flat (q_h, q_v) sub-array index per antenna, horizontal-major order."""
    n_h = np.arange(cfg.N_th)[:, None] // cfg.L_h
    n_v = np.arange(cfg.N_tv)[None, :] // cfg.L_v
    return (n_h * cfg.Q_tv + n_v).ravel()


def ttd_phase_profile(ttd: TtdGrid, f: float, cfg: SystemConfig) -> np.ndarray:
    """diag(F_TD) at frequency f: e^{j 2 pi f T} expanded over sub-arrays."""
    delays = ttd.T.ravel()[subarray_of_antenna(cfg)]
    return np.exp(1j * TWO_PI * f * delays)


def effective_precoder(state: PrecoderState, m: int, cfg: SystemConfig) -> np.ndarray:
    """F_TD,m f_PS; unit-modulus entries, power excluded."""
    f = subcarrier_frequency(cfg, m)
    return ttd_phase_profile(state.ttd, f, cfg) * state.ps.f_ps
