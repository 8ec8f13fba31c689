"""Command-line orchestration: sweeps, tracing, export, and re-scoring."""

import csv
import json

import numpy as np
import pytest

import squintlab.cli as cli
from squintlab.cli import (EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK,
                           ExperimentSpec, cell_seed, eval_state, main)
from squintlab.model import SystemConfig, sample_realization
from squintlab.schemes import Infeasible, OptimizerConfig, sa_opt


def test_cell_seed_deterministic_and_order_free():
    a = cell_seed(7, 1, 2, 3)
    b = cell_seed(7, 1, 2, 3)
    assert a == b
    assert cell_seed(7, 2, 1, 3) != a


def test_spec_validation():
    spec = ExperimentSpec(schemes=("nope",))
    with pytest.raises(ValueError):
        spec.validate()
    with pytest.raises(ValueError):
        ExperimentSpec(snr_db=()).validate()


def test_parse_grid_forms():
    assert cli._parse_grid("0:10:5") == (0.0, 5.0, 10.0)
    assert cli._parse_grid("1.5,2.5") == (1.5, 2.5)


def test_sweep_single_cell(tmp_path):
    rc = main(["sweep", "--schemes", "com", "--seeds", "1",
               "--snr-db", "10", "--msia", "0.1", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert rows[0] == ["seed", "scheme", "snr_db", "msia",
                       "rate_bits", "crb", "correlation"]
    assert len(rows) == 2
    assert rows[1][1] == "com"


def test_sweep_rerun_byte_identical(tmp_path):
    args = ["sweep", "--schemes", "com,no-ttd", "--seeds", "2",
            "--snr-db", "5,10", "--msia", "0.1", "--base-seed", "3"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "sweep.csv").read_bytes() \
        == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_sweep_thread_count_invariant(tmp_path):
    args = ["sweep", "--schemes", "com,cbs", "--seeds", "2",
            "--snr-db", "10", "--msia", "0.1,0.2"]
    main(args + ["--out", str(tmp_path / "t1"), "--threads", "1"])
    main(args + ["--out", str(tmp_path / "t4"), "--threads", "4"])
    assert (tmp_path / "t1" / "sweep.csv").read_bytes() \
        == (tmp_path / "t4" / "sweep.csv").read_bytes()


def test_unknown_scheme_is_config_error(tmp_path):
    rc = main(["sweep", "--schemes", "bogus", "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_bad_config_file_is_config_error(tmp_path):
    bad = tmp_path / "cfg.json"
    bad.write_text("{broken")
    rc = main(["sweep", "--config", str(bad), "--out", str(tmp_path)])
    assert rc == EXIT_CONFIG


def test_config_file_round_trip(tmp_path):
    doc = {"cfg": {"M": 4}, "opt": {"N_AO": 2}, "schemes": ["com"],
           "snr_db": [10.0], "msia": [0.1], "n_seeds": 1, "base_seed": 5}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(doc))
    rc = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 2


def test_infeasible_everywhere_exit_code(tmp_path, monkeypatch):
    def boom(*a, **kw):
        raise Infeasible("forced")
    monkeypatch.setattr(cli, "run_pareto", boom)
    rc = main(["pareto", "--out", str(tmp_path)])
    assert rc == EXIT_INFEASIBLE


def test_pareto_outputs(tmp_path):
    rc = main(["pareto", "--schemes", "cbs", "--seeds", "2", "--base-seed",
               "1", "--snr-db", "10", "--msia", "0.1", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "boundary.csv")))
    assert rows[0] == ["seed", "scheme", "eta", "gamma_frac",
                       "rate_bits", "crb", "dominated_flag"]
    summaries = json.loads((tmp_path / "regions.json").read_text())
    assert len(summaries) == 2
    for s in summaries:
        assert 0.0 <= s["rho"] < 1.0
        assert set(s["endpoints"]) == {"sensing", "com"}


def test_verify_outputs(tmp_path):
    rc = main(["verify", "--trials", "2", "--offsets", "0.05,0.3",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    report = json.loads((tmp_path / "verify.json").read_text())
    assert len(report["offsets"]) == 2


def test_export_and_eval_state(tmp_path):
    rc = main(["export", "--seeds", "2", "--base-seed", "1", "--snr-db",
               "10", "--msia", "0.1", "--out", str(tmp_path),
               "--dataset", "ds.json"])
    assert rc == EXIT_OK
    ds = json.loads((tmp_path / "ds.json").read_text())
    assert len(ds["samples"]) == 2
    for s in ds["samples"]:
        n = s["normalizers"]
        assert n["cor_star"] > 0 and n["r_max"] > 0 and n["crb_min"] > 0

    cfg = SystemConfig.desk_default()
    seed = ds["samples"][0]["seed"]
    real = sample_realization(seed, cfg, 0.1)
    state = sa_opt(real, cfg, OptimizerConfig())
    state_path = tmp_path / "state.json"
    state_path.write_text(state.to_json())
    out = eval_state(tmp_path / "ds.json", 0, state_path)
    assert out["seed"] == seed
    assert out["rate_bits"] > 0 and out["crb"] > 0 and out["utility"] > 0
    rc = main(["eval-state", "--dataset", str(tmp_path / "ds.json"),
               "--index", "0", "--state", str(state_path),
               "--out", str(tmp_path)])
    assert rc == EXIT_OK


def test_export_normalizer_correlation_dominates_zero_grid(tmp_path):
    from squintlab.dataset import import_dataset
    from squintlab.metrics import beamspace_channels, build_dictionary, \
        cs_correlation
    main(["export", "--seeds", "2", "--base-seed", "1", "--snr-db", "10",
          "--msia", "0.1", "--out", str(tmp_path), "--dataset", "ds.json"])
    cfg, reals, norms = import_dataset(tmp_path / "ds.json")
    dct = build_dictionary(cfg)
    for real, norm in zip(reals, norms):
        zero = cs_correlation(*beamspace_channels(real.comm, real.scene,
                                                  None, dct, cfg))
        assert norm.cor_star >= zero - 1e-9
