"""Training and inference loops."""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import torch

from .config import CspNetConfig
from .data import DatasetError, load_dataset, preprocess
from .network import CspNet, continuous_state, postprocess
from .physics import Physics, batch_loss, batch_utilities, sample_metrics


def _stacked_inputs(samples):
    pairs = [preprocess(s) for s in samples]
    H = torch.stack([h for h, _ in pairs])
    G = torch.stack([g for _, g in pairs])
    return H, G


def _epoch_metrics(net, phys, prepared, H, G, sp):
    net.eval()
    with torch.no_grad():
        t_hat, phi_hat, p_raw, _ = net(H, G)
        T, phi, p = continuous_state(t_hat, phi_hat, p_raw, sp)
        outputs = [(T[i], phi[i], p[i]) for i in range(len(prepared))]
        loss = float(batch_loss(phys, prepared, outputs))
        rows = [sample_metrics(phys, ps, *o)
                for ps, o in zip(prepared, outputs)]
    net.train()
    mean = lambda key: sum(r[key] for r in rows) / len(rows)
    return {"loss": loss, "mean_correlation": mean("correlation"),
            "mean_rate": mean("rate"), "mean_crb": mean("crb")}


def train(cfg: CspNetConfig, out_dir):
    """Unsupervised training on an exported dataset.

    Writes metrics.csv (epoch, loss, mean correlation, mean rate, mean CRB)
    and checkpoint.pt; returns the per-epoch metrics history."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    sp, samples = load_dataset(cfg.dataset)
    phys = Physics(sp)
    prepared = [phys.prepare(s) for s in samples]
    H, G = _stacked_inputs(samples)
    net = CspNet(sp, cfg)
    optim = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    # the loss surface is spiky (inverse Fisher divergences, quantized
    # delays); decaying the step size lets late epochs settle into a
    # minimum instead of bouncing between basins
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        optim, T_max=cfg.epochs, eta_min=cfg.lr / 20.0)
    gen = torch.Generator().manual_seed(cfg.seed)

    history = []
    n = len(samples)
    for epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=gen)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            t_hat, phi_hat, p_raw, t_logp = net(H[idx], G[idx])
            T, phi, p = continuous_state(t_hat, phi_hat, p_raw, sp)
            outputs = [(T[i], phi[i], p[i]) for i in range(len(idx))]
            utils = batch_utilities(phys, [prepared[j] for j in idx.tolist()],
                                    outputs)
            # pathwise gradients train the phase and power heads; the delay
            # head gets a score-function update with a batch-mean baseline
            adv = (utils - utils.mean()).detach()
            loss = -utils.mean() - (adv * t_logp).mean()
            optim.zero_grad()
            loss.backward()
            # the inverse-divergence factor in the loss can spike; clipping
            # keeps exploration steps from destabilizing the weights
            torch.nn.utils.clip_grad_norm_(net.parameters(), 1.0)
            optim.step()
        sched.step()
        history.append({"epoch": epoch,
                        **_epoch_metrics(net, phys, prepared, H, G, sp)})

    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "loss",
                                           "mean_correlation", "mean_rate",
                                           "mean_crb"])
        w.writeheader()
        w.writerows(history)
    torch.save({"model": net.state_dict(),
                "cfg": dataclasses.asdict(cfg),
                "sp": dataclasses.asdict(sp)},
               out_dir / "checkpoint.pt")
    return history


def infer(checkpoint_path, dataset_path, out_dir):
    """Emit one hardware-feasible precoder-state JSON file per sample."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = torch.load(checkpoint_path, weights_only=False)
    sp, samples = load_dataset(dataset_path)
    if dataclasses.asdict(sp) != ckpt["sp"]:
        raise DatasetError("dataset geometry differs from the checkpoint")
    cfg = CspNetConfig(**ckpt["cfg"])
    net = CspNet(sp, cfg)
    net.load_state_dict(ckpt["model"])
    net.eval()
    H, G = _stacked_inputs(samples)
    paths = []
    with torch.no_grad():
        t_hat, phi_hat, p_raw, _ = net(H, G)
    for i in range(len(samples)):
        path = out_dir / f"state_{i}.json"
        path.write_text(postprocess(t_hat[i], phi_hat[i], p_raw[i], sp))
        paths.append(path)
    return paths
