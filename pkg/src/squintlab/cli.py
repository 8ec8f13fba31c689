"""Experiment orchestration: seeded sweeps, Pareto tracing, closed-form
verification, dataset export, and re-scoring of serialized precoders."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Normalizers, export_dataset, import_dataset, DatasetError
from .metrics import (SingularFisher, beamspace_channels, build_dictionary,
                      cs_correlation, evaluate)
from .model import SystemConfig, sample_realization
from .pareto import trace_boundary, trace_region
from .precoder import PrecoderState
from .schemes import (Infeasible, OptimizerConfig, SCHEMES, com_dedicated,
                      optimize_ttd_correlation, sensing_dedicated)
from .theory import verify_proposition1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


@dataclass
class ExperimentSpec:
    cfg: SystemConfig = field(default_factory=SystemConfig.desk_default)
    opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    schemes: tuple = ("sa-opt", "cbs", "com", "sense", "no-ttd")
    snr_db: tuple = (10.0,)
    msia: tuple = (0.1,)
    n_seeds: int = 10
    base_seed: int = 0
    out: Path = Path(".")
    threads: int = 1

    def validate(self):
        if not self.snr_db or not self.msia:
            raise ValueError("snr_db and msia grids must be non-empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")


def cell_seed(base_seed: int, snr_i: int, msia_i: int, trial: int) -> int:
    """Deterministic per-cell seed, independent of execution order."""
    ss = np.random.SeedSequence([base_seed, snr_i, msia_i, trial])
    return int(ss.generate_state(1)[0])


def _cfg_at_snr(cfg: SystemConfig, snr_db: float) -> SystemConfig:
    return cfg.with_power(cfg.sigma_c2 * 10.0 ** (snr_db / 10.0))


def _fmt(x: float) -> str:
    return repr(float(x))


def run_sweep(spec: ExperimentSpec):
    """One CSV row per (snr, msia, seed, scheme) cell."""
    cells = []
    for si, snr in enumerate(spec.snr_db):
        for mi, ms in enumerate(spec.msia):
            for t in range(spec.n_seeds):
                for scheme in spec.schemes:
                    cells.append((si, mi, t, scheme, snr, ms))

    def work(cell):
        si, mi, t, scheme, snr, ms = cell
        cfg = _cfg_at_snr(spec.cfg, snr)
        seed = cell_seed(spec.base_seed, si, mi, t)
        real = sample_realization(seed, cfg, ms)
        try:
            state = SCHEMES[scheme](real, cfg, spec.opt)
            pt = evaluate(real, state, cfg)
            return (seed, scheme, snr, ms, pt.rate, pt.crb, pt.correlation)
        except (Infeasible, SingularFisher) as exc:
            return (seed, scheme, snr, ms, math.nan, math.nan, math.nan)

    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(c) for c in cells]
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "scheme", "snr_db", "msia",
                    "rate_bits", "crb", "correlation"])
        for seed, scheme, snr, ms, r, c, cor in rows:
            w.writerow([seed, scheme, _fmt(snr), _fmt(ms),
                        _fmt(r), _fmt(c), _fmt(cor)])


def run_pareto(spec: ExperimentSpec):
    """Boundary rows plus per-seed region summaries for each scheme."""
    rows, summaries = [], []
    n_feasible = 0
    cfg = _cfg_at_snr(spec.cfg, spec.snr_db[0])
    for t in range(spec.n_seeds):
        seed = cell_seed(spec.base_seed, 0, 0, t)
        real = sample_realization(seed, cfg, spec.msia[0])
        for scheme in spec.schemes:
            try:
                region = trace_region(real, scheme, cfg, spec.opt)
                _, raw = trace_boundary(real, scheme, cfg, spec.opt,
                                        collect_raw=True)
            except (Infeasible, SingularFisher):
                continue
            n_feasible += 1
            front = set(region.points)
            for eta, frac, r, c in raw:
                rows.append([seed, scheme, _fmt(eta), _fmt(frac), _fmt(r),
                             _fmt(c), int((r, c) not in front)])
            summaries.append({
                "seed": seed, "scheme": scheme, "rho": region.rho,
                "endpoints": {"sensing": list(region.endpoints[0]),
                              "com": list(region.endpoints[1])},
                "points": [list(p) for p in region.points],
            })
    if n_feasible == 0:
        raise Infeasible("no feasible pareto cell")
    return rows, summaries


def run_export(spec: ExperimentSpec, path):
    """Dataset of realizations with the loss normalizers for the learner."""
    cfg = _cfg_at_snr(spec.cfg, spec.snr_db[0])
    dct = build_dictionary(cfg)
    reals, norms = [], []
    trial = 0
    while len(reals) < spec.n_seeds and trial < 4 * spec.n_seeds + 16:
        seed = cell_seed(spec.base_seed, 0, 0, trial)
        trial += 1
        real = sample_realization(seed, cfg, spec.msia[0])
        ttd = optimize_ttd_correlation(real, cfg, spec.opt)
        cor_star = cs_correlation(
            *beamspace_channels(real.comm, real.scene, ttd, dct, cfg))
        try:
            r_max = evaluate(real, com_dedicated(real, cfg, spec.opt),
                             cfg).rate
            crb_min = evaluate(real, sensing_dedicated(real, cfg, spec.opt),
                               cfg).crb
        except (Infeasible, SingularFisher):
            continue  # unobservable geometry: not a usable training sample
        reals.append(real)
        norms.append(Normalizers(cor_star=cor_star, r_max=r_max,
                                 crb_min=crb_min))
    if len(reals) < spec.n_seeds:
        raise Infeasible("could not assemble the requested number of "
                         "observable samples")
    export_dataset(reals, path, cfg, norms)
    return reals, norms


def eval_state(dataset_path, index: int, state_path) -> dict:
    """Re-evaluate a serialized precoder against one dataset sample."""
    cfg, reals, norms = import_dataset(dataset_path)
    real = reals[index]
    state = PrecoderState.from_json(Path(state_path).read_text())
    state.validate(cfg)
    pt = evaluate(real, state, cfg)
    out = {"seed": real.seed, "rate_bits": pt.rate, "crb": pt.crb,
           "correlation": pt.correlation}
    n = norms[index]
    if n is not None:
        out["utility"] = (pt.correlation / n.cor_star) \
            * (pt.rate / n.r_max + n.crb_min / pt.crb)
    return out


def _parse_grid(text: str):
    """'lo:hi:step' range or comma-separated list."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return tuple(lo + i * step for i in range(n))
    return tuple(float(x) for x in text.split(","))


def load_spec(args) -> ExperimentSpec:
    spec = ExperimentSpec()
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        cfg = SystemConfig(**doc.get("cfg", {}))
        opt = OptimizerConfig(**doc.get("opt", {}))
        spec = ExperimentSpec(
            cfg=cfg, opt=opt,
            schemes=tuple(doc.get("schemes", spec.schemes)),
            snr_db=tuple(doc.get("snr_db", spec.snr_db)),
            msia=tuple(doc.get("msia", spec.msia)),
            n_seeds=int(doc.get("n_seeds", spec.n_seeds)),
            base_seed=int(doc.get("base_seed", spec.base_seed)),
        )
    if args.schemes:
        spec = replace(spec, schemes=tuple(args.schemes.split(",")))
    if args.snr_db:
        spec = replace(spec, snr_db=_parse_grid(args.snr_db))
    if args.msia:
        spec = replace(spec, msia=tuple(float(x) for x in args.msia.split(",")))
    if args.seeds is not None:
        spec = replace(spec, n_seeds=args.seeds)
    if args.base_seed is not None:
        spec = replace(spec, base_seed=args.base_seed)
    spec = replace(spec, out=Path(args.out), threads=args.threads)
    spec.validate()
    return spec


def build_parser():
    p = argparse.ArgumentParser(prog="squintlab")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None)
    common.add_argument("--seeds", type=int, default=None)
    common.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    common.add_argument("--out", default=".")
    common.add_argument("--schemes", default=None)
    common.add_argument("--snr-db", default=None, dest="snr_db")
    common.add_argument("--msia", default=None)
    common.add_argument("--threads", type=int, default=1)
    sub.add_parser("sweep", parents=[common])
    sub.add_parser("pareto", parents=[common])
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--offsets", default="0,0.05,0.1,0.2,0.4")
    v.add_argument("--trials", type=int, default=50)
    e = sub.add_parser("export", parents=[common])
    e.add_argument("--dataset", default="dataset.json")
    s = sub.add_parser("eval-state", parents=[common])
    s.add_argument("--dataset", required=True)
    s.add_argument("--index", type=int, required=True)
    s.add_argument("--state", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    spec.out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "sweep":
            rows = run_sweep(spec)
            write_sweep_csv(rows, spec.out / "sweep.csv")
        elif args.command == "pareto":
            rows, summaries = run_pareto(spec)
            with open(spec.out / "boundary.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["seed", "scheme", "eta", "gamma_frac",
                            "rate_bits", "crb", "dominated_flag"])
                w.writerows(rows)
            (spec.out / "regions.json").write_text(json.dumps(summaries))
        elif args.command == "verify":
            cfg = _cfg_at_snr(spec.cfg, spec.snr_db[0])
            report = verify_proposition1(
                cfg, args.trials, [float(x) for x in args.offsets.split(",")],
                base_seed=spec.base_seed)
            (spec.out / "verify.json").write_text(json.dumps(report))
            print(json.dumps(report["spearman"]))
        elif args.command == "export":
            run_export(spec, spec.out / args.dataset)
        elif args.command == "eval-state":
            print(json.dumps(eval_state(args.dataset, args.index, args.state)))
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DatasetError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
