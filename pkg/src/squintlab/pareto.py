"""Rate-CRB trade-off boundaries and the dual-functional gain."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import ChannelRealization, SystemConfig
from .metrics import SingularFisher, evaluate
from .schemes import (Infeasible, OptimizerConfig, cbs_isac,
                      choose_cbs_directions, com_dedicated, fit_ttd_ps,
                      optimize_ttd_correlation, sensing_dedicated, SCHEMES)

DEFAULT_ETA_GRID = tuple(np.logspace(-2, 2, 9))
DEFAULT_GAMMA_FRACS = tuple(np.linspace(0.0, 0.875, 8))


@dataclass
class ParetoRegion:
    points: list            # non-dominated (rate, crb) pairs, sorted by rate
    endpoints: tuple        # ((R_sen, CRB_min), (R_max, CRB_com))
    rho: float


def nondominated(points):
    """Keep points not dominated by any other (higher rate and lower CRB)."""
    pts = sorted(set((float(r), float(c)) for r, c in points),
                 key=lambda p: (-p[0], p[1]))
    out, best_crb = [], np.inf
    for r, c in pts:
        if c < best_crb:
            out.append((r, c))
            best_crb = c
    out.reverse()
    return out


def trace_boundary(realization: ChannelRealization, scheme: str,
                   cfg: SystemConfig, opt: OptimizerConfig,
                   eta_grid=DEFAULT_ETA_GRID,
                   gamma_fracs=DEFAULT_GAMMA_FRACS,
                   collect_raw: bool = False):
    """Sweep the scheme's (eta, Gamma) dials and keep the non-dominated set.

    The analog stage is hoisted out of the sweep when it does not depend on
    the swept dials (the TTD search for sa-opt, the full phase fit for cbs)."""
    run = SCHEMES[scheme]
    kwargs = {}
    if scheme == "sa-opt":
        kwargs["ttd"] = optimize_ttd_correlation(realization, cfg, opt)
    elif scheme == "cbs":
        kwargs["analog"] = fit_ttd_ps(choose_cbs_directions(realization, cfg),
                                      cfg, tol=opt.fit_tol)
        eta_grid = eta_grid[:1]  # cbs exposes no sensing weight
    raw = []
    for eta in eta_grid:
        for frac in gamma_fracs:
            o = replace(opt, eta=float(eta), Gamma=None, gamma_frac=float(frac))
            try:
                state = run(realization, cfg, o, **kwargs)
                point = evaluate(realization, state, cfg)
            except (Infeasible, SingularFisher):
                continue
            raw.append((float(eta), float(frac), point.rate, point.crb))
    if not raw:
        raise Infeasible("every grid point was infeasible")
    front = nondominated([(r, c) for _, _, r, c in raw])
    return (front, raw) if collect_raw else front


def _lower_hull(points):
    """Lower convex hull of rate-sorted points (monotone-chain sweep)."""
    hull = []
    for p in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point when it lies on or above the new chord
            if (x2 - x1) * (p[1] - y1) - (p[0] - x1) * (y2 - y1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def dual_gain(boundary, endpoints) -> float:
    """Normalized area between the achievable frontier and the chord.

    Points are clipped to the endpoint rectangle; time-sharing between any
    two achieved operating points is achievable, so the frontier is the lower
    convex hull of the points, integrated against the chord by the trapezoid
    rule in rate."""
    (r_sen, crb_min), (r_max, crb_com) = endpoints
    if not (r_max > r_sen and crb_com > crb_min):
        raise ValueError("degenerate endpoint rectangle")
    pts = [(min(max(r, r_sen), r_max), min(max(c, crb_min), crb_com))
           for r, c in boundary]
    pts = nondominated(pts + [(r_sen, crb_min), (r_max, crb_com)])
    hull = _lower_hull(pts)
    xs = np.array([p[0] for p in hull])
    ys = np.array([p[1] for p in hull])

    grid = np.unique(np.concatenate([xs, [r_sen, r_max]]))
    slope = (crb_com - crb_min) / (r_max - r_sen)
    curve = np.interp(grid, xs, ys)
    chord = crb_min + slope * (grid - r_sen)
    gap = np.maximum(0.0, chord - curve)
    area = float(np.trapezoid(gap, grid))
    half_rect = (r_max - r_sen) * (crb_com - crb_min) / 2.0
    return min(max(area / half_rect, 0.0), np.nextafter(1.0, 0.0))


def trace_region(realization: ChannelRealization, scheme: str,
                 cfg: SystemConfig, opt: OptimizerConfig,
                 eta_grid=DEFAULT_ETA_GRID,
                 gamma_fracs=DEFAULT_GAMMA_FRACS) -> ParetoRegion:
    """Boundary plus dedicated-scheme endpoints and the gain for one seed."""
    sen = evaluate(realization, sensing_dedicated(realization, cfg, opt), cfg)
    com = evaluate(realization, com_dedicated(realization, cfg, opt), cfg)
    endpoints = ((sen.rate, sen.crb), (com.rate, com.crb))
    front = trace_boundary(realization, scheme, cfg, opt, eta_grid, gamma_fracs)
    return ParetoRegion(points=front, endpoints=endpoints,
                        rho=dual_gain(front, endpoints))
