"""Versioned JSON dataset of channel realizations, with the per-sample
normalizers consumed by the learning component."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .model import (ChannelRealization, CommChannel, SensingScene, SystemConfig,
                    msia, target_response_all)

SCHEMA_VERSION = 1


class DatasetError(Exception):
    """Malformed dataset file or schema version mismatch."""


@dataclass
class Normalizers:
    cor_star: float
    r_max: float
    crb_min: float


def _c2pairs(arr: np.ndarray):
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _pairs2c(lst) -> np.ndarray:
    a = np.asarray(lst, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _sample_dict(r: ChannelRealization, norm: Normalizers | None):
    d = {
        "seed": r.seed,
        "comm": {
            "angles": [r.comm.theta_c, r.comm.phi_c],
            "tau": r.comm.tau_c,
            "beta": _c2pairs(r.comm.beta),
        },
        "scene": {
            "angles": np.column_stack([r.scene.theta, r.scene.phi]).tolist(),
            "alpha": _c2pairs(r.scene.alpha),
        },
        "msia": r.msia,
    }
    if norm is not None:
        d["normalizers"] = dataclasses.asdict(norm)
    return d


def export_dataset(realizations, path, cfg: SystemConfig, normalizers=None):
    """Write realizations (plus optional per-sample normalizers) as JSON."""
    if normalizers is None:
        normalizers = [None] * len(realizations)
    doc = {
        "header": {"version": SCHEMA_VERSION,
                   "cfg": dataclasses.asdict(cfg)},
        "samples": [_sample_dict(r, n) for r, n in zip(realizations, normalizers)],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def import_dataset(path):
    """Read a dataset file; returns (cfg, realizations, normalizers)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset: {exc}") from exc
    header = doc.get("header", {})
    if header.get("version") != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema version {header.get('version')!r}, "
                           f"expected {SCHEMA_VERSION}")
    try:
        cfg = SystemConfig(**header["cfg"])
        reals, norms = [], []
        for s in doc["samples"]:
            theta_c, phi_c = s["comm"]["angles"]
            comm = CommChannel(beta=_pairs2c(s["comm"]["beta"]),
                               tau_c=float(s["comm"]["tau"]),
                               theta_c=float(theta_c), phi_c=float(phi_c),
                               h=np.zeros((cfg.M, cfg.N_t), dtype=complex))
            comm.h = comm.regenerate(cfg)
            ang = np.asarray(s["scene"]["angles"], dtype=float)
            scene = SensingScene(alpha=_pairs2c(s["scene"]["alpha"]),
                                 theta=ang[:, 0], phi=ang[:, 1],
                                 G=np.zeros((cfg.M, cfg.N_r, cfg.N_t),
                                            dtype=complex))
            scene.G = target_response_all(scene, cfg)
            reals.append(ChannelRealization(comm=comm, scene=scene,
                                            seed=int(s["seed"]),
                                            msia=msia(comm, scene)))
            n = s.get("normalizers")
            norms.append(Normalizers(**n) if n else None)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DatasetError(f"malformed dataset sample: {exc}") from exc
    return cfg, reals, norms
