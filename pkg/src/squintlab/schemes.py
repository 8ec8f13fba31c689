"""Precoder-design procedures: the squint-aware optimizer, the
controlled-beam-squint benchmark, and the dedicated/no-TTD baselines."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import (TWO_PI, ChannelRealization, SystemConfig,
                    steering_vector, subcarrier_frequencies, subcarrier_frequency)
from .metrics import (BeamspaceWorkspace, build_dictionary, cs_correlation,
                      fisher_matrix, ridged_inverse_trace)
from .precoder import (PhaseShifters, PowerAllocation, PrecoderState, TtdGrid,
                       subarray_of_antenna, ttd_grid_values, ttd_phase_profile,
                       ttd_quantize)


class Infeasible(Exception):
    """Rate-threshold floors exceed the power budget; lower Gamma."""


@dataclass(frozen=True)
class OptimizerConfig:
    eta: float = 1.0            # sensing weight in the phase-shifter objective
    Gamma: float | None = None  # absolute receive-SNR threshold; None -> fraction
    gamma_frac: float = 0.5     # fraction of the per-realization feasible maximum
    N_iter: int = 3             # TTD coordinate-search sweeps
    N_AO: int = 4               # alternating PS/power rounds
    fit_tol: float = 1e-8       # CBS phase-fit stationarity tolerance

    def __post_init__(self):
        if self.eta < 0 or (self.Gamma is not None and self.Gamma < 0):
            raise ValueError("eta and Gamma must be non-negative")
        if self.N_iter < 1 or self.N_AO < 0:
            raise ValueError("iteration counts out of range")


def optimize_ttd_correlation(realization: ChannelRealization, cfg: SystemConfig,
                             opt: OptimizerConfig,
                             init: TtdGrid | None = None) -> TtdGrid:
    """Element-wise exhaustive search of the delays maximizing the
    C-S channel correlation of the TTD-equivalent channels."""
    ws = BeamspaceWorkspace(realization.comm, realization.scene,
                            build_dictionary(cfg), cfg)
    grid = ttd_grid_values(cfg)

    def objective(T):
        return cs_correlation(*ws.channels(TtdGrid(T)))

    def sweep(T):
        best = objective(T)
        for _ in range(opt.N_iter):
            for qh in range(cfg.Q_th):
                for qv in range(cfg.Q_tv):
                    cur = T[qh, qv]
                    for t in grid:
                        if t == cur:
                            continue
                        T[qh, qv] = t
                        val = objective(T)
                        if val > best:
                            best, cur = val, t
                    T[qh, qv] = cur
        return best, T

    if init is not None:
        return TtdGrid(sweep(init.T.copy())[1])

    # The all-zero grid is a frequent local maximum: delaying a single
    # sub-array smears only part of the array and can lower the correlation
    # even when a joint move would raise it.  Restart from seeded random
    # grids and keep the best sweep outcome.
    starts = [np.zeros((cfg.Q_th, cfg.Q_tv))]
    rng = np.random.default_rng([realization.seed & 0xFFFFFFFF, 7])
    for _ in range(7):
        starts.append(rng.choice(grid, size=(cfg.Q_th, cfg.Q_tv)))
    best_val, best_T = -np.inf, starts[0]
    for T in starts:
        val, T = sweep(T)
        if val > best_val:
            best_val, best_T = val, T
    return TtdGrid(best_T)


def equivalent_channels(realization: ChannelRealization, ttd: TtdGrid,
                        cfg: SystemConfig):
    """(h_tilde, G_tilde) per subcarrier under the fixed TTD grid."""
    freqs = subcarrier_frequencies(cfg)
    h_t = np.empty_like(realization.comm.h)
    G_t = np.empty_like(realization.scene.G)
    for i in range(cfg.M):
        prof = ttd_phase_profile(ttd, freqs[i], cfg)
        h_t[i] = prof.conj() * realization.comm.h[i]
        G_t[i] = realization.scene.G[i] * prof[None, :]
    return h_t, G_t


def update_ps(realization: ChannelRealization, ttd: TtdGrid,
              power: PowerAllocation, eta: float, cfg: SystemConfig) -> PhaseShifters:
    """Closed-form phase-shifter update aligning to the power-weighted
    aggregate of the equivalent communication and sensing channels."""
    h_t, G_t = equivalent_channels(realization, ttd, cfg)
    agg = np.zeros(cfg.N_t, dtype=complex)
    for i in range(cfg.M):
        sens = G_t[i].conj().T @ np.ones(cfg.N_r)
        agg += math.sqrt(power.p[i]) * (h_t[i] + (eta / cfg.N_r) * sens)
    if not np.any(np.abs(agg) > 0):
        warnings.warn("all-zero phase aggregate; falling back to zero phases")
        return PhaseShifters.zeros(cfg)
    return PhaseShifters(np.mod(np.angle(agg), TWO_PI))


def allocate_power(q: np.ndarray, hbar: np.ndarray, Gamma: float,
                   cfg: SystemConfig) -> PowerAllocation:
    """KKT solution of min sum q_m / p_m subject to the per-subcarrier SNR
    floors and the L1 power budget; the budget always binds."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("CRB weights must be strictly positive")
    gains = np.abs(np.asarray(hbar)) ** 2
    budget = cfg.P_t / cfg.N_t
    if Gamma > 0:
        if np.any(gains <= 0):
            raise Infeasible("zero equivalent gain with a positive SNR threshold")
        floors = Gamma / gains
    else:
        floors = np.zeros(cfg.M)
    if float(np.sum(floors)) > budget * (1 + 1e-12):
        raise Infeasible(f"SNR floors need {np.sum(floors):.3e} > budget {budget:.3e}")

    active = np.zeros(cfg.M, dtype=bool)
    sq = np.sqrt(q)
    for _ in range(cfg.M + 1):
        rem = budget - float(np.sum(floors[active]))
        free_mass = float(np.sum(sq[~active]))
        if free_mass == 0.0 or rem <= 0.0:
            p = floors.copy()
            break
        nu = free_mass / rem
        p = np.where(active, floors, sq / nu)
        violated = (~active) & (p < floors)
        if not np.any(violated):
            break
        active |= violated
    return PowerAllocation(np.maximum(p, floors))


def water_fill(gains: np.ndarray, budget: float) -> np.ndarray:
    """Classic water-filling maximizing sum log(1 + p g) under an L1 budget."""
    gains = np.asarray(gains, dtype=float)
    p = np.zeros_like(gains)
    usable = gains > 0
    inv = np.sort(1.0 / gains[usable])
    level = 0.0
    for k in range(1, len(inv) + 1):
        cand = (budget + float(np.sum(inv[:k]))) / k
        if cand > inv[k - 1] and (k == len(inv) or cand <= inv[k]):
            level = cand
            break
    p[usable] = np.maximum(0.0, level - 1.0 / gains[usable])
    return p


def minimize_crb_power(J_unit, p0: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Power allocation minimizing the aggregate-Fisher CRB on the simplex.

    The objective Tr((sum_m p_m J_m)^-1) is convex in p, so a local solve
    started from the surrogate allocation finds the global optimum."""
    from scipy.optimize import minimize
    from .metrics import FISHER_RIDGE

    n = J_unit[0].shape[0]
    budget = float(np.sum(p0))
    eye = np.eye(n)
    tr_unit = np.array([np.trace(J).real for J in J_unit])

    def fun_grad(p):
        A = sum(pm * Jm for pm, Jm in zip(p, J_unit))
        A = A + (FISHER_RIDGE * np.trace(A).real / n) * eye
        Ainv = np.linalg.inv(A)
        val = float(np.trace(Ainv).real)
        Asq = Ainv @ Ainv
        grad = np.array([
            -float(np.trace(Asq @ (Jm + (FISHER_RIDGE * trm / n) * eye)).real)
            for Jm, trm in zip(J_unit, tr_unit)])
        return val, grad

    with warnings.catch_warnings():
        # SLSQP probes slightly outside the box during line search and clips
        warnings.filterwarnings("ignore",
                                message="Values in x were outside bounds")
        res = minimize(fun_grad, p0, jac=True, method="SLSQP",
                       bounds=[(0.0, budget)] * len(p0),
                       constraints=[{"type": "eq",
                                     "fun": lambda p: float(np.sum(p)) - budget,
                                     "jac": lambda p: np.ones_like(p)}],
                       options={"maxiter": 200, "ftol": 1e-12})
    p = np.maximum(res.x, 0.0)
    s = float(np.sum(p))
    p = p * (budget / s) if s > 0 else p0
    return p if fun_grad(p)[0] <= fun_grad(p0)[0] else p0


def feasible_gamma_cap(hbar: np.ndarray, cfg: SystemConfig) -> float:
    gains = np.abs(np.asarray(hbar)) ** 2
    if np.any(gains <= 0):
        return 0.0
    return (cfg.P_t / cfg.N_t) / float(np.sum(1.0 / gains))


def _resolve_gamma(opt: OptimizerConfig, hbar: np.ndarray, cfg: SystemConfig) -> float:
    if opt.Gamma is not None:
        return opt.Gamma
    return opt.gamma_frac * feasible_gamma_cap(hbar, cfg)


def _crb_weights(realization: ChannelRealization, ttd: TtdGrid,
                 ps: PhaseShifters, cfg: SystemConfig) -> np.ndarray:
    """Tr(J_m^-1) at unit subcarrier power (ridge-stabilized, never raises)."""
    unit = PrecoderState(ttd, ps, PowerAllocation(np.ones(cfg.M)))
    return np.array([
        ridged_inverse_trace(fisher_matrix(realization.scene, unit, m, cfg),
                             check_condition=False)
        for m in range(1, cfg.M + 1)
    ])


def _equivalent_digital(realization, ttd, ps, cfg) -> np.ndarray:
    h_t, _ = equivalent_channels(realization, ttd, cfg)
    return h_t.conj() @ ps.f_ps


def _default_rng(realization: ChannelRealization, salt: int) -> np.random.Generator:
    return np.random.default_rng([realization.seed & 0xFFFFFFFF, salt])


def sa_opt(realization: ChannelRealization, cfg: SystemConfig, opt: OptimizerConfig,
           rng: np.random.Generator | None = None,
           ttd: TtdGrid | None = None) -> PrecoderState:
    """Squint-aware pipeline: correlation-maximizing TTD sweep, then
    alternating closed-form PS updates and convex power allocation."""
    rng = rng or _default_rng(realization, 1)
    if ttd is None:
        ttd = optimize_ttd_correlation(realization, cfg, opt)
    ps = PhaseShifters(rng.uniform(0.0, TWO_PI, cfg.N_t))
    power = PowerAllocation.uniform(cfg)
    for _ in range(opt.N_AO):
        ps = update_ps(realization, ttd, power, opt.eta, cfg)
        hbar = _equivalent_digital(realization, ttd, ps, cfg)
        q = _crb_weights(realization, ttd, ps, cfg)
        power = allocate_power(q, hbar, _resolve_gamma(opt, hbar, cfg), cfg)
    return PrecoderState(ttd, ps, power)


def opt_without_ttd(realization: ChannelRealization, cfg: SystemConfig,
                    opt: OptimizerConfig,
                    rng: np.random.Generator | None = None) -> PrecoderState:
    """Alternating PS/power optimization with the delay grid pinned to zero."""
    rng = rng or _default_rng(realization, 2)
    ttd = TtdGrid.zeros(cfg)
    ps = PhaseShifters(rng.uniform(0.0, TWO_PI, cfg.N_t))
    power = PowerAllocation.uniform(cfg)
    for _ in range(opt.N_AO):
        ps = update_ps(realization, ttd, power, opt.eta, cfg)
        hbar = _equivalent_digital(realization, ttd, ps, cfg)
        q = _crb_weights(realization, ttd, ps, cfg)
        power = allocate_power(q, hbar, _resolve_gamma(opt, hbar, cfg), cfg)
    return PrecoderState(ttd, ps, power)


def _effective_frequency(d):
    """Sort key: spatial frequency of the beam the entry actually forms.

    Conjugate entries steer the mirrored direction, so their sign flips;
    sorting on the effective value keeps the fitted phase ramp as linear in
    frequency as the mixed list allows."""
    theta, phi, conj = d
    s = -1.0 if conj else 1.0
    return (s * math.sin(phi) * math.sin(theta), s * math.cos(theta))


def choose_cbs_directions(realization: ChannelRealization, cfg: SystemConfig):
    """Per-subcarrier (theta, phi, conjugate) targets for the beam sweep.

    Each target gets floor(M/(K+1)) subcarriers, split between a literal
    entry (beam toward the target's mirror, cheap to fit next to the user)
    and a conjugate entry (beam toward the target itself, which is what the
    transpose response rewards); the user takes the remainder.  Directions
    are ordered by effective spatial frequency and assigned to subcarriers
    in frequency order."""
    comm, scene = realization.comm, realization.scene
    base = cfg.M // (scene.K + 1)
    dirs = [(comm.theta_c, comm.phi_c, False)] * (cfg.M - scene.K * base)
    for k in range(scene.K):
        tgt = (float(scene.theta[k]), float(scene.phi[k]))
        dirs += [tgt + (False,)] * ((base + 1) // 2)
        dirs += [tgt + (True,)] * (base // 2)
    dirs.sort(key=_effective_frequency)
    return dirs


def _spread_directions(dirs, M):
    n = len(dirs)
    base, extra = divmod(M, n)
    out = []
    for i, d in enumerate(dirs):
        out.extend([d] * (base + (1 if i < extra else 0)))
    return out


def fit_ttd_ps(directions, cfg: SystemConfig, tol: float = 1e-8,
               with_continuous: bool = False):
    """Least-squares fit of continuous (phases, delays) to the per-subcarrier
    desired linear phase profiles, then clamp and quantize the delays.

    Alternates exact coordinate minimization: phases are per-antenna means of
    the residual targets, delays are clamped weighted means.  The objective is
    non-increasing per half-step (pre-quantization)."""
    freqs = subcarrier_frequencies(cfg)
    n_h = (np.arange(cfg.N_th)[:, None] + 0 * np.arange(cfg.N_tv)[None, :]).ravel()
    n_v = (0 * np.arange(cfg.N_th)[:, None] + np.arange(cfg.N_tv)[None, :]).ravel()
    sub = subarray_of_antenna(cfg)
    psi = np.empty((cfg.M, cfg.N_t))
    for i, (theta, phi, conj) in enumerate(directions):
        s = -1.0 if conj else 1.0
        psi[i] = s * np.pi * (freqs[i] / cfg.f_c) * (
            math.sin(phi) * math.sin(theta) * n_h + math.cos(theta) * n_v)

    w = TWO_PI * freqs  # delay-to-phase slopes
    varphi = np.zeros(cfg.N_t)

    # Warm start at the unconstrained joint optimum.  Eliminating the phases
    # (given T, each phase is a per-antenna mean) leaves an independent scalar
    # quadratic per sub-array whose minimizer regresses the target phases on
    # the centered slopes.  Starting here matters: the carrier-frequency
    # common mode makes plain alternation from zero contract by only ~B²/12f_c²
    # per round, far too slow to reach stationarity.
    cw = w - float(np.mean(w))
    T = np.empty(cfg.Q_t)
    den0 = float(np.sum(cw ** 2))
    for qi in range(cfg.Q_t):
        cols = sub == qi
        if den0 == 0.0:  # single subcarrier: delays are phase-absorbable
            T[qi] = 0.0
            continue
        num = float(cw @ np.sum(psi[:, cols], axis=1))
        den = den0 * int(np.count_nonzero(cols))
        T[qi] = min(max(num / den, 0.0), cfg.t_max)

    def objective():
        res = varphi[None, :] + np.outer(w, T[sub]) - psi
        return float(np.mean(np.sum(res ** 2, axis=1)))

    prev = objective()
    for _ in range(500):
        varphi = np.mean(psi - np.outer(w, T[sub]), axis=0)
        resid = psi - varphi[None, :]
        for qi in range(cfg.Q_t):
            cols = sub == qi
            num = float(np.sum(w[:, None] * resid[:, cols]))
            den = float(np.sum(w ** 2)) * int(np.count_nonzero(cols))
            T[qi] = min(max(num / den, 0.0), cfg.t_max)
        cur = objective()
        if prev - cur < tol * max(1.0, prev):
            break
        prev = cur

    Tq = ttd_quantize(T, cfg)
    varphi = np.mean(psi - np.outer(w, Tq[sub]), axis=0)
    out = (TtdGrid(Tq.reshape(cfg.Q_th, cfg.Q_tv)),
           PhaseShifters(np.mod(varphi, TWO_PI)))
    if with_continuous:
        return out + (T.copy(),)
    return out


def cbs_isac(realization: ChannelRealization, cfg: SystemConfig,
             opt: OptimizerConfig, rng=None, analog=None) -> PrecoderState:
    """Controlled-beam-squint benchmark: sweep beams over the user and the
    targets, then allocate power for CRB under the rate floors."""
    if analog is None:
        analog = fit_ttd_ps(choose_cbs_directions(realization, cfg), cfg,
                            tol=opt.fit_tol)
    ttd, ps = analog
    hbar = _equivalent_digital(realization, ttd, ps, cfg)
    q = _crb_weights(realization, ttd, ps, cfg)
    power = allocate_power(q, hbar, _resolve_gamma(opt, hbar, cfg), cfg)
    return PrecoderState(ttd, ps, power)


def com_dedicated(realization: ChannelRealization, cfg: SystemConfig,
                  opt: OptimizerConfig, rng=None) -> PrecoderState:
    """All beams on the user; water-filling power for maximum rate."""
    dirs = [(realization.comm.theta_c, realization.comm.phi_c, False)] * cfg.M
    ttd, ps = fit_ttd_ps(dirs, cfg, tol=opt.fit_tol)
    hbar = _equivalent_digital(realization, ttd, ps, cfg)
    p = water_fill(np.abs(hbar) ** 2 / cfg.sigma_c2, cfg.P_t / cfg.N_t)
    return PrecoderState(ttd, ps, PowerAllocation(p))


def sensing_dedicated(realization: ChannelRealization, cfg: SystemConfig,
                      opt: OptimizerConfig, rng=None) -> PrecoderState:
    """Beams spread over the targets only; pure CRB-minimizing power."""
    scene = realization.scene
    dirs = [(float(scene.theta[k]), float(scene.phi[k]), True)
            for k in range(scene.K)]
    dirs.sort(key=_effective_frequency)
    ttd, ps = fit_ttd_ps(_spread_directions(dirs, cfg.M), cfg, tol=opt.fit_tol)
    hbar = _equivalent_digital(realization, ttd, ps, cfg)
    q = _crb_weights(realization, ttd, ps, cfg)
    power = allocate_power(q, hbar, 0.0, cfg)
    unit = PrecoderState(ttd, ps, PowerAllocation(np.ones(cfg.M)))
    J_unit = [fisher_matrix(realization.scene, unit, m, cfg)
              for m in range(1, cfg.M + 1)]
    p = minimize_crb_power(J_unit, power.p, cfg)
    return PrecoderState(ttd, ps, PowerAllocation(p))


SCHEMES = {
    "sa-opt": sa_opt,
    "cbs": cbs_isac,
    "com": com_dedicated,
    "sense": sensing_dedicated,
    "no-ttd": opt_without_ttd,
}
