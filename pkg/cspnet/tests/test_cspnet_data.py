"""Dataset ingestion: schema handling, preprocessing, reconstruction."""

import json

import numpy as np
import pytest
import torch

from squintlab.dataset import import_dataset
from squintlab.model import SystemConfig
from squintlab.precoder import ttd_quantize as core_quantize

from cspnet.data import (DatasetError, SysParams, load_dataset, preprocess,
                         ttd_quantize)


def _desk_params():
    cfg = SystemConfig.desk_default()
    return SysParams(N_th=cfg.N_th, N_tv=cfg.N_tv, N_r=cfg.N_r,
                     Q_th=cfg.Q_th, Q_tv=cfg.Q_tv, M=cfg.M, f_c=cfg.f_c,
                     B=cfg.B, B_t=cfg.B_t, t_max=cfg.t_max, P_t=cfg.P_t,
                     sigma_c2=cfg.sigma_c2, sigma_s2=cfg.sigma_s2, K=cfg.K,
                     G_dict=cfg.N_th * cfg.N_tv)


def test_load_rejects_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "nope.json")


def test_load_rejects_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_load_rejects_wrong_schema_version(tmp_path, datasets):
    doc = json.loads(datasets["held"].read_text())
    doc["header"]["version"] = 99
    path = tmp_path / "v99.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_load_rejects_malformed_sample(tmp_path, datasets):
    doc = json.loads(datasets["held"].read_text())
    del doc["samples"][0]["comm"]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_reconstruction_matches_exporter(datasets):
    sp, samples = load_dataset(datasets["held"])
    _, reals, _ = import_dataset(datasets["held"])
    for sample, real in zip(samples, reals):
        assert np.max(np.abs(sample.h - real.comm.h)) < 1e-12
        assert np.max(np.abs(sample.G - real.scene.G)) < 1e-12


def test_preprocess_user_tensor_is_hermitian_rank_one(datasets):
    _, samples = load_dataset(datasets["held"])
    Hbar, _ = preprocess(samples[0])
    Hbar = np.asarray(Hbar.to(torch.complex128))
    for m in range(Hbar.shape[0]):
        assert np.max(np.abs(Hbar[m] - Hbar[m].conj().T)) < 1e-6
        s = np.linalg.svd(Hbar[m], compute_uv=False)
        assert s[1] < 1e-6 * s[0]


def test_preprocess_unit_average_power(datasets):
    _, samples = load_dataset(datasets["held"])
    Hbar, Gbar = preprocess(samples[0])
    for x in (Hbar, Gbar):
        assert abs(float(torch.mean(torch.abs(x) ** 2)) - 1.0) < 1e-6


def test_quantizer_matches_core_bit_exactly():
    sp = _desk_params()
    cfg = SystemConfig.desk_default()
    rng = np.random.default_rng(0)
    t = np.concatenate([rng.uniform(-0.2 * sp.t_max, 1.5 * sp.t_max, 200),
                        np.arange(2 ** sp.B_t) * sp.t_max / 2 ** sp.B_t])
    ours = ttd_quantize(t, sp)
    theirs = core_quantize(t, cfg)
    assert np.array_equal(ours, theirs)


def test_sys_params_derived_quantities():
    sp = _desk_params()
    assert sp.N_t == sp.N_th * sp.N_tv
    assert sp.Q_t == sp.Q_th * sp.Q_tv
    assert sp.budget == sp.P_t / sp.N_t
