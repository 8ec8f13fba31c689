"""Shared fixtures: exported datasets and one default training run."""

import pytest

from squintlab.cli import main as squintlab_main

from cspnet.config import CspNetConfig
from cspnet.train import train


@pytest.fixture(scope="session")
def datasets(tmp_path_factory):
    """A 64-sample training set and a disjoint 16-sample held-out set."""
    root = tmp_path_factory.mktemp("datasets")
    rc = squintlab_main(["export", "--base-seed", "1", "--seeds", "64",
                         "--out", str(root), "--dataset", "train.json"])
    assert rc == 0
    rc = squintlab_main(["export", "--base-seed", "9", "--seeds", "16",
                         "--out", str(root), "--dataset", "held.json"])
    assert rc == 0
    return {"train": root / "train.json", "held": root / "held.json"}


@pytest.fixture(scope="session")
def trained_run(datasets, tmp_path_factory):
    """Default-configuration training on the 64-sample set (seed 0)."""
    out = tmp_path_factory.mktemp("trained")
    cfg = CspNetConfig(dataset=str(datasets["train"]), seed=0)
    history = train(cfg, out)
    return cfg, history, out
