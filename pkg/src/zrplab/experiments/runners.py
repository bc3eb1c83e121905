"""Config-driven experiment runners: desk-scale statistical checks of the
equilibrium/source currents, the hydrodynamic limit, creation of local
equilibrium, time-averaged marginals, long-time convergence and mass escape
at a slow site. Each runner returns a JSON-ready report and optionally
writes report.json plus CSV artifacts into an output directory."""

from __future__ import annotations

import math
import os
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..env import Environment
from ..hydro import GridProfile, evolve, riemann_exact
from ..measures import (
    MM1,
    build_flux,
    delta_law,
    marginal,
    mean_density,
    rbar_inverse,
    sample_marginal,
)
from ..sim import (
    Configuration,
    CoupledState,
    CurrentObserver,
    discrepancies,
    make_source,
    simulate,
    slope_path,
)
from .common import (
    ExperimentError,
    env_from_config,
    homogeneous_env,
    light_cone_check,
    mean_and_se,
    occ_str,
    rate_from_config,
    replica_rng,
    tv_to_marginal,
    write_csv,
    write_report,
)


def _map_replicas(fn, n_replicas: int, threads: int = 1):
    if threads <= 1:
        return [fn(r) for r in range(n_replicas)]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n_replicas)))


def _piecewise(breakpoints):
    xs = [float(b[0]) for b in breakpoints]
    rs = [float(b[1]) for b in breakpoints]

    def rho(u: float) -> float:
        i = bisect_right(xs, u) - 1
        return rs[max(0, min(i, len(rs) - 1))]

    return rho


def realize_profile(rho, window, N: int) -> np.ndarray:
    """Deterministic microscopic configuration with exact cumulative-rounded
    site counts, so every Cesaro block density matches the profile."""
    L, R = window
    dens = np.array([rho(x / N) for x in range(L, R + 1)])
    cum = np.concatenate([[0.0], np.cumsum(dens)])
    return np.diff(np.floor(cum + 1e-9)).astype(np.int64)


# ---------------------------------------------------------------- currents


class _EquilibriumReplica:
    """Exactly stationary open-network window: boundary rates beta, interior
    rates 1, so every interior marginal has fugacity beta and the edge
    current is (p-q)*beta at all times."""

    def __init__(self, cfg, seed):
        self.cfg, self.seed = cfg, seed

    def __call__(self, r):
        cfg, g = self.cfg, rate_from_config(self.cfg)
        beta, p, T = cfg["beta"], cfg["p"], cfg["T"]
        hw = int(cfg.get("half_width", 10))
        rng = replica_rng(self.seed, r)
        window = (-hw, hw)
        alpha = np.ones(2 * hw + 1)
        alpha[0] = alpha[-1] = beta
        env = Environment(window=window, alpha=alpha, c=beta)
        m = marginal(g, beta)
        occ = sample_marginal(m, rng, 2 * hw + 1)
        config = Configuration(window, occ, boundary_mode="reservoir")
        state = CoupledState([config], [env])
        _, obs = simulate(state, T, rng, g, p, observers=(CurrentObserver(start_site=0),))
        return float(obs.final_counts[0]) / T


class _SourceReplica:
    def __init__(self, cfg, seed):
        self.cfg, self.seed = cfg, seed

    def __call__(self, r):
        cfg, g = self.cfg, rate_from_config(self.cfg)
        p, T = cfg["p"], cfg["T"]
        pq = 2 * p - 1.0
        R = int(math.ceil(pq * T * 1.1)) + 50
        window = (0, R)
        rng = replica_rng(self.seed, 1000 + r)
        config = make_source(0, window)
        env = env_from_config(cfg, window, seed=self.seed)
        state = CoupledState([config], [env])
        state, _ = simulate(state, T, rng, g, p)
        if state.configs[0].occ[-1] != 0:
            raise ExperimentError("source front reached the window edge")
        mass_right = float(state.configs[0].occ[1:].sum())
        return mass_right / T


class _MovingObserverReplica:
    def __init__(self, cfg, seed):
        self.cfg, self.seed = cfg, seed

    def __call__(self, r):
        cfg, g = self.cfg, rate_from_config(self.cfg)
        beta, p, T, v = cfg["beta"], cfg["p"], cfg["T"], cfg["v"]
        rng = replica_rng(self.seed, 2000 + r)
        hw = int(cfg.get("half_width", 20))
        R = int(math.ceil(abs(v) * T)) + hw
        window = (-hw, R) if v >= 0 else (-R, hw)
        alpha = np.ones(window[1] - window[0] + 1)
        alpha[0] = alpha[-1] = beta
        env = Environment(window=window, alpha=alpha, c=beta)
        occ = sample_marginal(marginal(g, beta), rng, alpha.shape[0])
        config = Configuration(window, occ, boundary_mode="reservoir")
        state = CoupledState([config], [env])
        _, obs = simulate(state, T, rng, g, p,
                          observers=(slope_path(0, v, T),))
        return float(obs.final_counts[0]) / T


def run_current_checks(cfg: dict, seed: int = 0, out_dir=None, threads: int = 1) -> dict:
    """Equilibrium edge current, source-current growth rate, and optionally a
    moving-observer current, each over independent replicas."""
    cfg = {"g": [0.0, 1.0], "p": 1.0, "beta": 0.5, "T": 1.0e4,
           "replicas": 50, "checks": ["equilibrium", "source"], **cfg}
    p, beta = cfg["p"], cfg["beta"]
    pq = 2 * p - 1.0
    metrics: dict = {}
    rows = []
    if "equilibrium" in cfg["checks"]:
        vals = _map_replicas(_EquilibriumReplica(cfg, seed), int(cfg["replicas"]), threads)
        mean, se = mean_and_se(vals)
        target = pq * beta
        metrics["equilibrium"] = {
            "target": target, "mean": mean, "se": se, "bias": mean - target,
            "within_3se": abs(mean - target) <= 3 * se,
            "replicas": vals,
        }
        rows += [("equilibrium", r, v) for r, v in enumerate(vals)]
    if "source" in cfg["checks"]:
        n_rep = int(cfg.get("source_replicas", 3))
        vals = _map_replicas(_SourceReplica(cfg, seed), n_rep, threads)
        mean, se = mean_and_se(vals)
        c = float(cfg.get("env", {}).get("alpha", 1.0))
        metrics["source"] = {
            "target": pq * c, "mean": mean, "se": se,
            "rel_err": abs(mean - pq * c) / (pq * c),
            "replicas": vals,
        }
        rows += [("source", r, v) for r, v in enumerate(vals)]
    if "moving" in cfg["checks"]:
        mcfg = {**cfg, "T": float(cfg.get("moving_T", 2000.0)), "v": float(cfg.get("v", 0.5))}
        n_rep = int(cfg.get("moving_replicas", 10))
        vals = _map_replicas(_MovingObserverReplica(mcfg, seed), n_rep, threads)
        mean, se = mean_and_se(vals)
        g = rate_from_config(cfg)
        target = pq * beta - mcfg["v"] * mean_density(g, beta)
        metrics["moving"] = {"target": target, "mean": mean, "se": se, "replicas": vals}
        rows += [("moving", r, v) for r, v in enumerate(vals)]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(os.path.join(out_dir, "currents.csv"), "check,replica,rate", rows)
    return write_report(out_dir, "current_checks", cfg, seed, metrics)


# ------------------------------------------------------------------ hydro


class _HydroReplica:
    def __init__(self, cfg, seed, window, occ0, env, T):
        self.cfg, self.seed = cfg, seed
        self.window, self.occ0, self.env, self.T = window, occ0, env, T

    def __call__(self, r):
        rng = replica_rng(self.seed, r)
        g = rate_from_config(self.cfg)
        config = Configuration(self.window, self.occ0.copy())
        state = CoupledState([config], [self.env])
        state, _ = simulate(state, self.T, rng, g, self.cfg["p"])
        return state.configs[0].occ.copy()


def _box_average(occ: np.ndarray, window, N: int, edges: np.ndarray) -> np.ndarray:
    L, _ = window
    out = np.empty(len(edges) - 1)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        lo = int(math.ceil(a * N)) - L
        hi = int(math.ceil(b * N)) - L
        out[i] = occ[lo:hi].mean()
    return out


def run_hydro_compare(cfg: dict, seed: int = 0, out_dir=None, threads: int = 1) -> dict:
    """Compare box-averaged particle profiles at macroscopic time t with the
    entropy solution (self-similar two-state solution when the initial data
    is a single jump), and a Godunov solution with the exact one."""
    cfg = {"g": [0.0, 1.0], "p": 1.0, "N": 1000, "t": 1.0, "replicas": 20,
           "breakpoints": [[-3.0, 1.0], [0.0, 0.0]],
           "box": [-1.25, 1.25], "box_width": 0.25,
           "gamma": 1.0, "flux_points": 16384, "godunov_dx": 1.0 / 400,
           "v_margin": 1.1, **cfg}
    N, t, p = int(cfg["N"]), float(cfg["t"]), float(cfg["p"])
    g = rate_from_config(cfg)
    rho = _piecewise(cfg["breakpoints"])
    box_lo, box_hi = cfg["box"]
    T = N * t
    margin = cfg["v_margin"] * t
    macro_lo, macro_hi = box_lo - margin - 0.05, box_hi + margin + 0.05
    window = (int(math.floor(macro_lo * N)), int(math.ceil(macro_hi * N)))
    light_cone_check(window, (int(box_lo * N), int(box_hi * N)), T, cfg["v_margin"])
    env = env_from_config(cfg, window, seed)
    occ0 = realize_profile(rho, window, N)

    profiles = _map_replicas(_HydroReplica(cfg, seed, window, occ0, env, T),
                             int(cfg["replicas"]), threads)
    edges = np.arange(box_lo, box_hi + 1e-9, cfg["box_width"])
    boxed = np.stack([_box_average(o, window, N, edges) for o in profiles])
    emp = boxed.mean(axis=0)

    flux = build_flux(g, delta_law(1.0), gamma=cfg["gamma"], p=p,
                      n_points=int(cfg["flux_points"]))
    jumps = cfg["breakpoints"][1:]
    if len(jumps) != 1:
        raise ExperimentError("exact comparison needs single-jump (two-state) data")
    x_jump = float(jumps[0][0])
    rho_l, rho_r = float(cfg["breakpoints"][0][1]), float(jumps[0][1])

    def exact(u: float) -> float:
        return riemann_exact(flux, rho_l, rho_r, (u - x_jump) / t)[0]

    sub = 64
    exact_box = np.array([
        np.mean([exact(a + (b - a) * (j + 0.5) / sub) for j in range(sub)])
        for a, b in zip(edges[:-1], edges[1:])])
    l1_emp = float(np.abs(emp - exact_box).sum() * cfg["box_width"])
    per_rep = [float(np.abs(b - exact_box).sum() * cfg["box_width"]) for b in boxed]

    dx = float(cfg["godunov_dx"])
    n_cells = int(round((macro_hi - macro_lo) / dx))
    prof0 = GridProfile.from_breakpoints(macro_lo, macro_lo + n_cells * dx, n_cells,
                                         cfg["breakpoints"])
    prof_t = evolve(flux, prof0, t)
    centers = prof_t.centers()
    sel = (centers >= box_lo) & (centers <= box_hi)
    exact_fine = np.array([exact(u) for u in centers[sel]])
    l1_god = float(np.abs(prof_t.values[sel] - exact_fine).sum() * prof_t.dx)

    metrics = {
        "l1_empirical": l1_emp, "l1_empirical_per_replica": per_rep,
        "l1_godunov": l1_god,
        "box_edges": edges.tolist(), "empirical": emp.tolist(),
        "exact_box": exact_box.tolist(),
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        mids = (edges[:-1] + edges[1:]) / 2
        write_csv(os.path.join(out_dir, "profile.csv"), "x,rho_emp,rho_exact",
                  zip(mids, emp, exact_box))
        write_csv(os.path.join(out_dir, "godunov.csv"), "x,rho_godunov,rho_exact",
                  zip(centers[sel], prof_t.values[sel], exact_fine))
    return write_report(out_dir, "hydro_compare", cfg, seed, metrics)


# ------------------------------------------------------ local equilibrium


class _LocalEqReplica:
    def __init__(self, cfg, seed, window, occ0, env, T, probe_idx):
        self.cfg, self.seed = cfg, seed
        self.window, self.occ0, self.env = window, occ0, env
        self.T, self.probe_idx = T, probe_idx

    def __call__(self, r):
        rng = replica_rng(self.seed, r)
        g = rate_from_config(self.cfg)
        occ = self.occ0.copy() if self.occ0 is not None else None
        if occ is None:  # stationary mode: fresh product sample per replica
            from ..measures import sample_product
            occ = sample_product(self.env, self.cfg["pattern"]["beta"],
                                 self.window, rng, g)
        config = Configuration(self.window, occ)
        state = CoupledState([config], [self.env])
        state, _ = simulate(state, self.T, rng, g, self.cfg["p"])
        return state.configs[0].occ[self.probe_idx].copy()


def run_local_equilibrium(cfg: dict, seed: int = 0, out_dir=None, threads: int = 1) -> dict:
    """Empirical occupancy law at a macroscopic point after time Nt versus
    the equilibrium marginal at the hydrodynamic density there."""
    cfg = {"g": [0.0, 1.0], "p": 1.0, "N": 500, "t": 1.0, "replicas": 2000,
           "pattern": {"kind": "alternating", "density": 0.5},
           "u": 0.0, "box_offsets": [0], "v_margin": 1.3, **cfg}
    N, t, p = int(cfg["N"]), float(cfg["t"]), float(cfg["p"])
    g = rate_from_config(cfg)
    T = N * t
    x_u = int(math.floor(cfg["u"] * N))
    right_margin = int(math.ceil((0.3 if p == 1.0 else cfg["v_margin"]) * T))
    window = (x_u - int(math.ceil(cfg["v_margin"] * T)) - 5, x_u + right_margin + 5)
    env = env_from_config(cfg, window, seed)

    pat = cfg["pattern"]
    if pat["kind"] == "alternating":
        density = float(pat["density"])
        occ0 = realize_profile(lambda u: density, window, N)
    elif pat["kind"] == "product":
        density = mean_density(g, float(pat["beta"]))
        occ0 = None
    else:
        raise ExperimentError(f"unknown pattern {pat['kind']!r}")

    target_density = float(cfg.get("target_density", density))
    beta = rbar_inverse(g, delta_law(1.0), target_density)
    probe_idx = np.array([x_u + z - window[0] for z in cfg["box_offsets"]])

    samples = _map_replicas(
        _LocalEqReplica(cfg, seed, window, occ0, env, T, probe_idx),
        int(cfg["replicas"]), threads)
    pooled = np.concatenate(samples)
    m = marginal(g, beta)
    tv = tv_to_marginal(pooled, m)

    metrics = {"beta_target": beta, "tv": tv,
               "n_samples": int(pooled.size),
               "empirical_mean": float(pooled.mean()), "target_mean": m.mean}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        top = int(pooled.max())
        pmf = np.bincount(pooled, minlength=top + 1) / pooled.size
        write_csv(os.path.join(out_dir, "marginal.csv"), "n,empirical,theta",
                  ((n, pmf[n], m.prob(n)) for n in range(top + 1)))
    return write_report(out_dir, "local_equilibrium", cfg, seed, metrics)


# -------------------------------------------------------- cesaro marginal


class _CesaroReplica:
    def __init__(self, cfg, seed, window, occ0, env, T, snap_times, probe_idx):
        self.cfg, self.seed = cfg, seed
        self.window, self.occ0, self.env, self.T = window, occ0, env, T
        self.snap_times, self.probe_idx = snap_times, probe_idx

    def __call__(self, r):
        rng = replica_rng(self.seed, r)
        g = rate_from_config(self.cfg)
        config = Configuration(self.window, self.occ0.copy())
        state = CoupledState([config], [self.env])
        _, obs = simulate(state, self.T, rng, g, self.cfg["p"],
                          snapshots=tuple(self.snap_times))
        # (n_snap, n_probe) occupancies
        return obs.snap_occ[:, 0, self.probe_idx].copy()


def run_cesaro_marginal(cfg: dict, seed: int = 0, out_dir=None, threads: int = 1) -> dict:
    """Time-averaged occupancy law over (N(t-delta), Nt] at downstream fast
    sites in the slow-site setup, versus the critical marginal; the TV
    distance should not increase as delta shrinks."""
    cfg = {"g": [0.0, 1.0], "p": 1.0, "N": 200, "t": 0.35, "replicas": 400,
           "deltas": [0.2, 0.1, 0.05], "rho_init": 3.0,
           "env": {"kind": "slow_site", "alpha_slow": 0.5, "alpha_fast": 1.0},
           "probe_sites": [3, 4, 5, 6, 7, 8], "snaps_per_delta": 8, **cfg}
    N, t = int(cfg["N"]), float(cfg["t"])
    g = rate_from_config(cfg)
    T = N * t
    deltas = sorted(cfg["deltas"], reverse=True)
    window = (-int(math.ceil(0.8 * T)) - 20, max(cfg["probe_sites"]) + int(math.ceil(0.3 * T)) + 20)
    env = env_from_config(cfg, window, seed)
    occ0 = realize_profile(lambda u: float(cfg["rho_init"]), window, N)
    probe_idx = np.array([s - window[0] for s in cfg["probe_sites"]])

    # nested snapshot grids: each delta uses the times inside its own window
    snap_times = sorted({T - N * d * (j + 0.5) / cfg["snaps_per_delta"]
                         for d in deltas for j in range(cfg["snaps_per_delta"])})
    snaps = _map_replicas(
        _CesaroReplica(cfg, seed, window, occ0, env, T, snap_times, probe_idx),
        int(cfg["replicas"]), threads)
    stacked = np.stack(snaps)  # (rep, n_snap, n_probe)
    times = np.array(snap_times)

    c = env.c
    alpha_fast = float(cfg["env"].get("alpha_fast", 1.0))
    m = marginal(g, c / alpha_fast)
    tvs = {}
    for d in deltas:
        sel = times > T - N * d - 1e-9
        pool = stacked[:, sel, :].ravel()
        tvs[str(d)] = tv_to_marginal(pool, m)
    vals = [tvs[str(d)] for d in deltas]  # largest delta first
    metrics = {"tv_by_delta": tvs, "deltas_desc": deltas,
               "nonincreasing": all(a >= b - 1e-12 for a, b in zip(vals, vals[1:])),
               "critical_fugacity": c / alpha_fast}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(os.path.join(out_dir, "cesaro.csv"), "delta,tv",
                  ((d, tvs[str(d)]) for d in deltas))
    return write_report(out_dir, "cesaro_marginal", cfg, seed, metrics)


# ------------------------------------------------------------ convergence


class _ConvergenceReplica:
    def __init__(self, cfg, seed, window, occ0, env, times, probe_idx):
        self.cfg, self.seed = cfg, seed
        self.window, self.occ0, self.env = window, occ0, env
        self.times, self.probe_idx = times, probe_idx

    def __call__(self, r):
        rng = replica_rng(self.seed, r)
        g = rate_from_config(self.cfg)
        config = Configuration(self.window, self.occ0.copy())
        state = CoupledState([config], [self.env])
        _, obs = simulate(state, self.times[-1], rng, g, self.cfg["p"],
                          snapshots=tuple(self.times))
        return obs.snap_occ[:, 0, self.probe_idx].copy()


class _GammaDriftReplica:
    def __init__(self, cfg, seed, window, occ0, extra, env, times):
        self.cfg, self.seed = cfg, seed
        self.window, self.occ0, self.extra, self.env = window, occ0, extra, env
        self.times = times

    def __call__(self, r):
        rng = replica_rng(self.seed, 5000 + r)
        g = rate_from_config(self.cfg)
        base = Configuration(self.window, self.occ0.copy())
        upper = Configuration(self.window, self.occ0 + self.extra)
        state = CoupledState([base, upper], [self.env])
        _, obs = simulate(state, self.times[-1], rng, g, self.cfg["p"],
                          snapshots=tuple(self.times))
        fracs = []
        origin = -self.window[0]
        for k in range(len(self.times)):
            gamma = (obs.snap_occ[k, 1] - obs.snap_occ[k, 0]).clip(min=0)
            tot = gamma.sum()
            fracs.append(float(gamma[origin + 1:].sum() / tot) if tot > 0 else 1.0)
        return fracs


def run_convergence(cfg: dict, seed: int = 0, out_dir=None, threads: int = 1) -> dict:
    """Marginals at fixed sites over dyadic times, versus the equilibrium
    marginal at the left Cesaro density; optionally tracks the rightward
    drift of surplus (second-class) mass."""
    cfg = {"g": [0.0, 1.0], "p": 1.0, "rho": 0.5, "T": 100.0,
           "replicas": 600, "probe_sites": [-2, -1, 0, 1, 2],
           "gamma_drift": False, **cfg}
    g = rate_from_config(cfg)
    rho, T = float(cfg["rho"]), float(cfg["T"])
    times = [T, 2 * T, 4 * T]
    window = (-int(math.ceil(1.3 * times[-1])) - 20, int(math.ceil(0.3 * times[-1])) + 20)
    env = env_from_config(cfg, window, seed)
    occ0 = realize_profile(lambda u: rho if u <= 0 else 0.0, window, 1)
    probe_idx = np.array([s - window[0] for s in cfg["probe_sites"]])
    beta = rbar_inverse(g, delta_law(1.0), rho)
    m = marginal(g, beta)

    snaps = _map_replicas(
        _ConvergenceReplica(cfg, seed, window, occ0, env, times, probe_idx),
        int(cfg["replicas"]), threads)
    stacked = np.stack(snaps)  # (rep, 3, n_probe)
    tvs = [tv_to_marginal(stacked[:, k, :].ravel(), m) for k in range(len(times))]
    metrics = {"times": times, "tv_by_time": tvs, "beta_target": beta,
               "nonincreasing": all(a >= b - 1e-12 for a, b in zip(tvs, tvs[1:])),
               "final_tv": tvs[-1]}

    if cfg["gamma_drift"]:
        extra = np.zeros_like(occ0)
        lo, hi = -10 - window[0], 10 - window[0]
        extra[lo:hi] = 1
        fracs = _map_replicas(
            _GammaDriftReplica(cfg, seed, window, occ0, extra, env, times),
            int(cfg.get("gamma_replicas", 100)), threads)
        mean_fracs = np.stack(fracs).mean(axis=0)
        metrics["gamma_right_fraction"] = mean_fracs.tolist()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(os.path.join(out_dir, "convergence.csv"), "time,tv", zip(times, tvs))
    return write_report(out_dir, "convergence", cfg, seed, metrics)


# ------------------------------------------------------------ condensation


class _CondensationReplica:
    def __init__(self, cfg, seed, window, occ0, env, T, snap_times, shift):
        self.cfg, self.seed = cfg, seed
        self.window, self.occ0, self.env, self.T = window, occ0, env, T
        self.snap_times, self.shift = snap_times, shift

    def __call__(self, r):
        rng = replica_rng(self.seed, self.shift + r)
        g = rate_from_config(self.cfg)
        config = Configuration(self.window, self.occ0.copy())
        state = CoupledState([config], [self.env])
        obs_down = CurrentObserver(start_site=int(self.cfg["observer_site"]))
        obs_up = CurrentObserver(start_site=-int(self.cfg["observer_site"]))
        _, obs = simulate(state, self.T, rng, g, self.cfg["p"],
                          observers=(obs_down, obs_up),
                          snapshots=tuple(self.snap_times))
        return obs.snap_occ[:, 0, :], obs.snap_counts, obs.final_counts


def _condensation_pass(cfg, seed, threads, supercritical: bool):
    g = rate_from_config(cfg)
    T = float(cfg["T"])
    window = (-int(cfg["upstream"]), int(cfg["downstream"]))
    env = env_from_config(cfg, window, seed)
    rho0 = float(cfg["rho_init"]) if supercritical else float(cfg["rho_control"])
    occ0 = realize_profile(lambda u: rho0, window, 1)
    n_snap = 10
    snap_times = [T * (k + 1) / n_snap for k in range(n_snap)]
    shift = 0 if supercritical else 9000
    results = _map_replicas(
        _CondensationReplica(cfg, seed, window, occ0, env, T, snap_times, shift),
        int(cfg["replicas"]), threads)

    origin = -window[0]
    slow_occ = np.stack([r[0][:, origin] for r in results]).astype(np.float64)
    slopes = [float(np.polyfit(snap_times, s, 1)[0]) for s in slow_occ]
    slope_mean, slope_se = mean_and_se(slopes)

    half = n_snap // 2 - 1  # snapshot at T/2
    cur_down = [(r[2][0] - r[1][half, 0]) / (T - snap_times[half]) for r in results]
    cur_up = [(r[2][1] - r[1][half, 1]) / (T - snap_times[half]) for r in results]
    down_mean, down_se = mean_and_se(cur_down)
    up_mean, up_se = mean_and_se(cur_up)

    probe = [s for s in cfg["fast_sites"]]
    fast = np.concatenate([r[0][-1, [s - window[0] for s in probe]] for r in results])
    c = env.c
    m = marginal(g, c / 1.0)
    tv_fast = tv_to_marginal(fast, m)
    return {
        "slow_slope_mean": slope_mean, "slow_slope_se": slope_se,
        "current_down_mean": down_mean, "current_down_se": down_se,
        "current_up_mean": up_mean, "current_up_se": up_se,
        "mass_balance_gap": abs(slope_mean - (up_mean - down_mean)),
        "tv_fast_sites": tv_fast,
        "slow_occ_mean_path": slow_occ.mean(axis=0).tolist(),
        "snap_times": snap_times,
    }


def run_condensation(cfg: dict, seed: int = 0, out_dir=None, threads: int = 1) -> dict:
    """Mass escape at a slow site from supercritical data: linear slow-site
    growth, downstream current pinned at (p-q)c, fast-site marginals near the
    critical equilibrium; plus a subcritical no-growth control."""
    cfg = {"g": [0.0, 1.0], "p": 1.0, "rho_init": 3.0, "rho_control": 0.5,
           "T": 2000.0, "replicas": 150, "downstream": 60,
           "observer_site": 10, "fast_sites": list(range(4, 15)),
           "env": {"kind": "slow_site", "alpha_slow": 0.5, "alpha_fast": 1.0},
           "control": True, **cfg}
    # the vacuum front from the closed left edge eats the supply at speed
    # f(rho_init)/rho_init; keep it away from the slow site until T
    cfg.setdefault("upstream", int(math.ceil(0.3 * float(cfg["T"]))) + 100)
    p = float(cfg["p"])
    pq = 2 * p - 1.0
    main = _condensation_pass(cfg, seed, threads, supercritical=True)
    c = float(cfg["env"]["alpha_slow"])
    main["target_current"] = pq * c
    main["current_rel_err"] = abs(main["current_down_mean"] - pq * c) / (pq * c)
    metrics = {"supercritical": main}
    if cfg["control"]:
        ctrl = _condensation_pass(cfg, seed, threads, supercritical=False)
        ctrl["no_growth"] = abs(ctrl["slow_slope_mean"]) <= 3 * ctrl["slow_slope_se"] + 0.005
        metrics["subcritical_control"] = ctrl
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(os.path.join(out_dir, "slow_site.csv"), "time,occ_mean",
                  zip(main["snap_times"], main["slow_occ_mean_path"]))
    return write_report(out_dir, "condensation", cfg, seed, metrics)
