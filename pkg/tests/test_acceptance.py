"""Acceptance suite: one test per headline criterion, each printing a single
PASS/FAIL line.  Every numeric threshold here is part of the public contract;
tests that fail do so because the implementation genuinely does not reach the
stated bar at desk scale (see the analysis notes shipped with the test run).
"""

import math

import numpy as np
import pytest

from squintlab.cli import _cfg_at_snr, main
from squintlab.metrics import (SingularFisher, crb, evaluate, fisher_matrix,
                               kl_divergence)
from squintlab.model import (SystemConfig, sample_realization,
                             steering_derivatives, steering_vector)
from squintlab.pareto import dual_gain, trace_region
from squintlab.precoder import (PhaseShifters, PowerAllocation, PrecoderState,
                                TtdGrid, ttd_grid_values, ttd_quantize)
from squintlab.schemes import (Infeasible, OptimizerConfig, SCHEMES,
                               allocate_power, choose_cbs_directions,
                               fit_ttd_ps, optimize_ttd_correlation)
from squintlab.theory import verify_proposition1

from .oracles import (exhaustive_ttd, fd_fisher, golden_section,
                      grid_search_power, phase_fit_objective_scalar)
from .test_metrics import _interior_scene, _state


def _criterion(name, ok, detail=""):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


def _desk_at_10db():
    return _cfg_at_snr(SystemConfig.desk_default(), 10.0)


def _points(real, cfg, opt, schemes):
    out = {}
    for s in schemes:
        out[s] = evaluate(real, SCHEMES[s](real, cfg, opt), cfg)
    return out


# --------------------------------------------------------- scheme ordering

def test_scheme_ordering_at_reference_operating_point():
    """At SNR 10 dB and angular separation 0.1, the dedicated schemes must
    bracket the two ISAC schemes in at least 70% of paired trials, on both
    metrics, with a strictly positive median gain of sa-opt over cbs."""
    cfg = _desk_at_10db()
    opt = OptimizerConfig()
    names = ("com", "sa-opt", "cbs", "sense")
    pts = []
    for seed in range(100):
        real = sample_realization(seed, cfg, 0.1)
        try:
            pts.append(_points(real, cfg, opt, names))
        except (Infeasible, SingularFisher):
            continue  # unobservable geometry for this draw
    n = len(pts)
    assert n >= 80

    def frac(fn):
        return sum(fn(p) for p in pts) / n

    rate_pairs = {
        "rate com>=sa": frac(lambda p: p["com"].rate >= p["sa-opt"].rate),
        "rate sa>=cbs": frac(lambda p: p["sa-opt"].rate >= p["cbs"].rate),
        "rate cbs>=sense": frac(lambda p: p["cbs"].rate >= p["sense"].rate),
    }
    crb_pairs = {
        "crb sense<=sa": frac(lambda p: p["sense"].crb <= p["sa-opt"].crb),
        "crb sa<=cbs": frac(lambda p: p["sa-opt"].crb <= p["cbs"].crb),
        "crb cbs<=com": frac(lambda p: p["cbs"].crb <= p["com"].crb),
    }
    med_rate_gain = float(np.median([p["sa-opt"].rate - p["cbs"].rate
                                     for p in pts]))
    med_crb_gain = float(np.median([p["cbs"].crb - p["sa-opt"].crb
                                    for p in pts]))
    fractions = {**rate_pairs, **crb_pairs}
    ok = (all(v >= 0.70 for v in fractions.values())
          and med_rate_gain > 0.0 and med_crb_gain > 0.0)
    detail = (f"(n={n}; " + "; ".join(f"{k}={v:.2f}"
                                      for k, v in fractions.items())
              + f"; median gains rate={med_rate_gain:+.3f}"
              + f" crb={med_crb_gain:+.3f})")
    _criterion("scheme-ordering", ok, detail)


# ----------------------------------------------- robustness to separation

def test_rate_robustness_across_angular_separation():
    """Shrinking the user-target angular separation from 0.4 to 0.05 must
    cost sa-opt a smaller median rate fraction than cbs (50 paired seeds)."""
    cfg = _desk_at_10db()
    opt = OptimizerConfig()
    degr = {"sa-opt": [], "cbs": []}
    for seed in range(50):
        rates = {}
        try:
            for scheme in degr:
                for ms in (0.05, 0.4):
                    real = sample_realization(seed, cfg, ms)
                    st = SCHEMES[scheme](real, cfg, opt)
                    rates[scheme, ms] = evaluate(real, st, cfg).rate
        except (Infeasible, SingularFisher):
            continue
        for scheme in degr:
            degr[scheme].append(1.0 - rates[scheme, 0.4]
                                / rates[scheme, 0.05])
    n = len(degr["sa-opt"])
    assert n >= 30
    med_sa = float(np.median(degr["sa-opt"]))
    med_cbs = float(np.median(degr["cbs"]))
    _criterion("separation-robustness", med_sa < med_cbs,
               f"(n={n}; median degradation sa-opt={med_sa:.3f}"
               f" cbs={med_cbs:.3f})")


# ------------------------------------------------------ dual-gain advantage

def test_dual_gain_advantage_over_fixed_delay_baseline():
    """The delay-equipped optimizer must beat the zero-delay baseline on the
    normalized trade-off gain in at least 70% of 50 seeds; every gain lies in
    [0, 1); a chord-only boundary scores exactly zero."""
    chord_pts = [(0.0, 1.0), (2.0, 3.0)]
    assert dual_gain(chord_pts, ((0.0, 1.0), (2.0, 3.0))) == 0.0

    cfg = _desk_at_10db()
    opt = OptimizerConfig()
    wins = total = 0
    for seed in range(50):
        real = sample_realization(seed, cfg, 0.1)
        try:
            r_sa = trace_region(real, "sa-opt", cfg, opt)
            r_no = trace_region(real, "no-ttd", cfg, opt)
        except (Infeasible, SingularFisher):
            continue
        for rho in (r_sa.rho, r_no.rho):
            assert 0.0 <= rho < 1.0
        total += 1
        wins += r_sa.rho > r_no.rho
    assert total >= 40
    frac = wins / total
    _criterion("dual-gain-advantage", frac >= 0.70,
               f"(wins {wins}/{total} = {frac:.2f})")


# ------------------------------------------------------ oracle equivalences

def test_solver_oracle_equivalences():
    """Each optimizer must match an independent brute-force or finite
    difference reference at its stated tolerance."""
    rng = np.random.default_rng(11)
    notes = []

    # power allocation vs dense simplex enumeration (M=4)
    cfg4 = SystemConfig(N_th=2, N_tv=2, N_r=4, Q_th=1, Q_tv=1, M=4, K=1,
                        B_t=2, B=32e9)
    budget = cfg4.P_t / cfg4.N_t
    worst_pow = 0.0
    for _ in range(10):
        q = rng.uniform(0.5, 2.0, 4)
        gains = rng.uniform(0.5, 2.0, 4)
        Gamma = 0.5 * budget / float(np.sum(1.0 / gains))
        p = allocate_power(q, np.sqrt(gains), Gamma, cfg4).p
        ref_val, _ = grid_search_power(q, Gamma / gains, budget)
        got_val = float(np.sum(q / p))
        worst_pow = max(worst_pow, abs(got_val - ref_val) / ref_val)
    notes.append(f"power {worst_pow:.1e}<=1e-3")

    # delay search vs exhaustive enumeration (two sub-arrays, 2 bits)
    cfg_t = SystemConfig(N_th=2, N_tv=2, N_r=4, Q_th=2, Q_tv=1, M=4, K=1,
                        B_t=2, B=32e9)
    opt = OptimizerConfig()
    worst_ttd = 1.0
    from squintlab.metrics import (BeamspaceWorkspace, build_dictionary,
                                   cs_correlation)
    for seed in range(50):
        real = sample_realization(seed, cfg_t, 0.15)
        best_val, _ = exhaustive_ttd(real, cfg_t)
        got = optimize_ttd_correlation(real, cfg_t, opt)
        ws = BeamspaceWorkspace(real.comm, real.scene,
                                build_dictionary(cfg_t), cfg_t)
        worst_ttd = min(worst_ttd, cs_correlation(*ws.channels(got))
                        / best_val)
    notes.append(f"ttd {worst_ttd:.4f}>=0.95")

    # Fisher information vs central differences (single target)
    cfg_f = SystemConfig(N_th=2, N_tv=2, N_r=4, Q_th=2, Q_tv=2, M=1, K=1)
    scene = _interior_scene(cfg_f)
    state = _state(cfg_f, np.random.default_rng(5))
    J = fisher_matrix(scene, state, 1, cfg_f)
    J_fd = fd_fisher(scene, state, 1, cfg_f)
    err_f = float(np.linalg.norm(J - J_fd) / np.linalg.norm(J_fd))
    notes.append(f"fisher {err_f:.1e}<=1e-4")

    # scalar analog fit vs golden-section line search
    worst_fit = 0.0
    for seed in (10, 12, 14):
        real = sample_realization(seed, cfg4, 0.2)
        dirs = choose_cbs_directions(real, cfg4)
        obj, _, _ = phase_fit_objective_scalar(dirs, cfg4)
        t_star = golden_section(obj, 0.0, cfg4.t_max, tol=1e-20)
        _, _, t_cont = fit_ttd_ps(dirs, cfg4, with_continuous=True)
        worst_fit = max(worst_fit, abs(t_cont[0] - t_star) / cfg4.t_max)
    notes.append(f"fit {worst_fit:.1e}<=1e-6")

    ok = (worst_pow <= 1e-3 and worst_ttd >= 0.95 and err_f <= 1e-4
          and worst_fit <= 1e-6)
    _criterion("oracle-equivalence", ok, "(" + "; ".join(notes) + ")")


# ------------------------------------------------------- invariant suite

def test_randomized_invariant_suite():
    """Structural invariants hold over 200 randomized instances each."""
    rng = np.random.default_rng(77)
    desk = SystemConfig.desk_default()
    tiny = SystemConfig(N_th=2, N_tv=2, N_r=4, Q_th=2, Q_tv=1, M=4, K=1,
                        B_t=2, B=32e9)
    opt = OptimizerConfig(N_iter=1)
    from squintlab.metrics import (BeamspaceWorkspace, build_dictionary,
                                   cs_correlation)
    eps = 1e-6

    # steering norms and analytic derivatives vs finite differences
    for _ in range(200):
        theta = rng.uniform(eps, math.pi - eps)
        phi = rng.uniform(-math.pi / 2 + eps, math.pi / 2 - eps)
        f = rng.uniform(96e9, 104e9)
        a = steering_vector(theta, phi, f, desk)
        assert np.max(np.abs(np.abs(a) - 1.0 / math.sqrt(desk.N_t))) < 1e-12
        assert abs(np.linalg.norm(a) - 1.0) < 1e-12
        d_th, d_ph = steering_derivatives(theta, phi, f, desk)
        fd_th = (steering_vector(theta + eps, phi, f, desk)
                 - steering_vector(theta - eps, phi, f, desk)) / (2 * eps)
        fd_ph = (steering_vector(theta, phi + eps, f, desk)
                 - steering_vector(theta, phi - eps, f, desk)) / (2 * eps)
        for ana, fd in ((d_th, fd_th), (d_ph, fd_ph)):
            assert np.linalg.norm(ana - fd) \
                < 1e-5 * max(np.linalg.norm(ana), 1e-12)

    # CRB power-scaling law CRB(c p) = CRB(p) / c.  The identity is exact in
    # arithmetic; resolving it to 1e-12 in floats needs conditioning headroom
    # (relative inversion error grows like cond * machine-eps), so draws with
    # a nearly unobservable aggregate Fisher matrix are redrawn.
    checked, seed = 0, 0
    while checked < 200:
        real = sample_realization(seed, tiny, 0.15)
        seed += 1
        state = _state(tiny, rng)
        c = rng.uniform(0.5, 20.0)
        J = sum(fisher_matrix(real.scene, state, m, tiny)
                for m in range(1, tiny.M + 1))
        if np.linalg.cond(J) > 1e6:
            continue
        try:
            base = crb(real.scene, state, tiny)
        except SingularFisher:
            continue
        scaled = PrecoderState(state.ttd, state.ps,
                               PowerAllocation(state.power.p * c))
        assert crb(real.scene, scaled, tiny) \
            == pytest.approx(base / c, rel=1e-12)
        checked += 1

    # KL non-negativity on random simplex pairs
    for _ in range(200):
        p = rng.dirichlet(np.ones(16))
        q = rng.dirichlet(np.ones(16))
        assert kl_divergence(p, q) >= 0.0

    # quantizer idempotence
    for _ in range(200):
        t = rng.uniform(-0.2 * desk.t_max, 2.0 * desk.t_max)
        once = float(ttd_quantize(t, desk))
        assert float(ttd_quantize(once, desk)) == once

    # coordinate-search monotonicity: never worse than its starting grid
    grid = ttd_grid_values(tiny)
    for s in range(200):
        real = sample_realization(1000 + s, tiny, 0.15)
        ws = BeamspaceWorkspace(real.comm, real.scene,
                                build_dictionary(tiny), tiny)
        init = TtdGrid(rng.choice(grid, size=(tiny.Q_th, tiny.Q_tv)))
        before = cs_correlation(*ws.channels(init))
        out = optimize_ttd_correlation(real, tiny, opt, init=init)
        assert cs_correlation(*ws.channels(out)) >= before - 1e-12

    # KKT residuals of the power allocation
    budget = tiny.P_t / tiny.N_t
    for _ in range(200):
        q = rng.uniform(0.2, 3.0, tiny.M)
        gains = rng.uniform(0.2, 3.0, tiny.M)
        Gamma = rng.uniform(0.0, 0.8) * budget / float(np.sum(1.0 / gains))
        p = allocate_power(q, np.sqrt(gains), Gamma, tiny).p
        floors = Gamma / gains if Gamma > 0 else np.zeros(tiny.M)
        assert abs(float(np.sum(p)) - budget) < 1e-7 * budget
        assert np.all(p >= floors - 1e-12 * budget)
        free = p > floors + 1e-9 * budget
        if np.any(free):
            nu = np.sqrt(q[free]) / p[free]
            assert float(np.ptp(nu)) < 1e-7 * float(np.mean(nu))

    _criterion("invariant-suite", True, "(all 7 families, 200 draws each)")


# ------------------------------------------- correlation monotonicity check

def test_correlation_monotonicity_verification():
    """Mean beamspace correlation must rank the closed-form optimal rate and
    inverse CRB across angular-offset groups (Spearman > 0.8 for both)."""
    cfg = _desk_at_10db()
    report = verify_proposition1(cfg, 50, [0.0, 0.05, 0.1, 0.2, 0.4],
                                 base_seed=0)
    s = report["spearman"]
    ok = s["cor_rate"] > 0.8 and s["cor_inv_crb"] > 0.8
    _criterion("correlation-monotonicity", ok,
               f"(spearman rate={s['cor_rate']:.2f}"
               f" inv-crb={s['cor_inv_crb']:.2f})")


# ---------------------------------------------------------- determinism

def test_sweep_determinism_across_thread_counts(tmp_path):
    """Identical base seeds must yield byte-identical sweep CSVs, for
    repeated runs and for different thread counts."""
    args = ["sweep", "--schemes", "sa-opt,cbs,com,sense,no-ttd",
            "--seeds", "3", "--base-seed", "1",
            "--snr-db", "10", "--msia", "0.1"]
    assert main(args + ["--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "c"), "--threads", "4"]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    ok = (a == (tmp_path / "b" / "sweep.csv").read_bytes()
          and a == (tmp_path / "c" / "sweep.csv").read_bytes())
    _criterion("sweep-determinism", ok,
               "(rerun and 1-vs-4 threads byte-identical)")
