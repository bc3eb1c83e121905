"""Event-driven simulation of one or several coupled zero-range processes
sharing a single marked Poisson stream, with current observers, snapshots,
particle classes and discrepancy accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..env import Environment
from ..measures import RateFunction
from .kernels import draw_event_chunk, get_process_chunk

INF = -1  # occupancy sentinel


class SimError(ValueError):
    pass


@dataclass
class Configuration:
    """Occupancies on an inclusive window [L, R]; -1 encodes an infinite pile.

    boundary_mode "closed" rejects off-window jumps (reflecting); "reservoir"
    pins both boundary sites to infinite piles acting as source/sink.
    """

    window: tuple[int, int]
    occ: np.ndarray
    boundary_mode: str = "closed"

    def __post_init__(self):
        L, R = self.window
        occ = np.asarray(self.occ, dtype=np.int64)
        if occ.shape != (R - L + 1,):
            raise SimError("occupancy length does not match window")
        if np.any(occ < INF):
            raise SimError("occupancies must be nonnegative or the inf sentinel")
        if self.boundary_mode == "reservoir":
            occ[0] = INF
            occ[-1] = INF
        elif self.boundary_mode != "closed":
            raise SimError(f"unknown boundary mode {self.boundary_mode!r}")
        self.occ = occ

    @property
    def n_sites(self) -> int:
        return self.occ.shape[0]

    def site(self, x: int) -> int:
        L, R = self.window
        if not (L <= x <= R):
            raise SimError(f"site {x} outside window")
        return int(self.occ[x - L])

    def index(self, x: int) -> int:
        L, R = self.window
        if not (L <= x <= R):
            raise SimError(f"site {x} outside window")
        return x - L

    def total_particles(self, finite_only: bool = False) -> float:
        finite = self.occ[self.occ >= 0].sum()
        if not finite_only and np.any(self.occ == INF):
            return math.inf
        return float(finite)

    def copy(self) -> "Configuration":
        return Configuration(self.window, self.occ.copy(), self.boundary_mode)


def empty_configuration(window, boundary_mode="closed") -> Configuration:
    L, R = window
    return Configuration(window, np.zeros(R - L + 1, dtype=np.int64), boundary_mode)


def make_source(y: int, window: tuple[int, int]) -> Configuration:
    """Infinite piles on (-inf, y] (truncated to the window), empty to the
    right; closed boundary, as sites left of y are saturated anyway."""
    L, R = window
    if not (L <= y <= R):
        raise SimError(f"source site {y} outside window {window}")
    occ = np.zeros(R - L + 1, dtype=np.int64)
    occ[: y - L + 1] = INF
    return Configuration(window, occ, "closed")


@dataclass(frozen=True)
class HarrisEvent:
    """One potential jump event: time, site, uniform mark, direction."""

    t: float
    x: int
    u: float
    z: int


@dataclass
class CurrentObserver:
    """Space-time path tracking the signed particle crossing count.

    The path starts at `start_site` (crossings counted over the edge
    (site, site+1)) and may move by +-1 at the given times. `config` selects
    which coupled configuration is observed.
    """

    start_site: int
    moves: tuple[tuple[float, int], ...] = ()
    config: int = 0

    def sorted_moves(self):
        ms = sorted(self.moves)
        for _, d in ms:
            if d not in (-1, 1):
                raise SimError("path moves must be +-1")
        return ms


def slope_path(start_site: int, v: float, T: float, config: int = 0) -> CurrentObserver:
    """Observer moving at asymptotic speed v by unit steps."""
    moves = []
    k = 1
    while v != 0.0 and abs(k / v) <= T:
        moves.append((abs(k / v), 1 if v > 0 else -1))
        k += 1
    return CurrentObserver(start_site=start_site, moves=tuple(moves), config=config)


@dataclass
class CoupledState:
    """Ordered stack of configurations driven by one shared event stream.

    `envs` holds one environment per configuration (usually identical).
    With `classes=k`, the first k configurations are read as the nested
    class partial sums of a single process, and the last configuration as
    the coupled reference process for the matching bookkeeping.
    """

    configs: list[Configuration]
    envs: list[Environment]
    classes: int = 0
    time: float = 0.0

    def __post_init__(self):
        if not self.configs:
            raise SimError("need at least one configuration")
        w = self.configs[0].window
        bm = self.configs[0].boundary_mode
        for cfg in self.configs:
            if cfg.window != w or cfg.boundary_mode != bm:
                raise SimError("all coupled configurations must share window and boundary mode")
        if len(self.envs) == 1 and len(self.configs) > 1:
            self.envs = self.envs * len(self.configs)
        if len(self.envs) != len(self.configs):
            raise SimError("need one environment per configuration")
        L, R = w
        for e in self.envs:
            eL, eR = e.window
            if eL > L or eR < R:
                raise SimError("environment window must cover the configuration window")
        if self.classes:
            self._check_nesting()

    @property
    def window(self):
        return self.configs[0].window

    @property
    def n_sites(self):
        return self.configs[0].n_sites

    def occ_matrix(self) -> np.ndarray:
        return np.stack([c.occ for c in self.configs])

    def alpha_matrix(self) -> np.ndarray:
        L, R = self.window
        return np.stack([e.values(L, R) for e in self.envs])

    def _check_nesting(self):
        for a, b in zip(self.configs[: self.classes - 1], self.configs[1: self.classes]):
            if not occ_leq(a.occ, b.occ):
                raise SimError("class configurations must be nested")

    def copy(self) -> "CoupledState":
        return CoupledState([c.copy() for c in self.configs], list(self.envs),
                           classes=self.classes, time=self.time)


def occ_leq(a: np.ndarray, b: np.ndarray) -> bool:
    """Pointwise partial order, treating the sentinel as +infinity."""
    bi = np.where(b == INF, np.iinfo(np.int64).max, b)
    ai = np.where(a == INF, np.iinfo(np.int64).max, a)
    return bool(np.all(ai <= bi))


def apply_event(state: CoupledState, e: HarrisEvent, g: RateFunction) -> CoupledState:
    """Apply one potential jump event to every coupled configuration using
    the shared uniform mark: a configuration jumps iff the mark falls below
    its local rate. Mutates and returns `state`."""
    L, R = state.window
    if not (L <= e.x <= R):
        raise SimError(f"event site {e.x} outside window")
    xi = e.x - L
    xj = xi + e.z
    for cfg, envc in zip(state.configs, state.envs):
        ov = cfg.occ[xi]
        if ov == 0:
            continue
        rate = envc.value(e.x) * g(ov if ov >= 0 else math.inf)
        if e.u <= rate:
            if 0 <= xj < cfg.n_sites:
                if ov > 0:
                    cfg.occ[xi] = ov - 1
                if cfg.occ[xj] >= 0:
                    cfg.occ[xj] += 1
    state.time = max(state.time, e.t)
    return state


@dataclass
class Observations:
    """Results of a run: snapshot times/occupancies, observer counts at each
    snapshot and at the final time."""

    snap_times: np.ndarray       # (n_snap,)
    snap_occ: np.ndarray         # (n_snap, m, W)
    snap_counts: np.ndarray      # (n_snap, n_obs)
    final_counts: np.ndarray     # (n_obs,)
    final_obs_sites: np.ndarray  # (n_obs,) path position at T (site values)
    T: float


def simulate(state: CoupledState, T: float, rng: np.random.Generator, g: RateFunction,
             p: float,
             observers: tuple[CurrentObserver, ...] = (),
             snapshots: tuple[float, ...] = (),
             chunk: int = 1 << 17) -> tuple[CoupledState, Observations]:
    """Run the coupled stack for time T under a fresh marked Poisson stream
    of intensity one per site, updating observers and capturing snapshots."""
    if T <= 0:
        raise SimError("horizon must be positive")
    if not (0.5 < p <= 1.0):
        raise SimError(f"p must lie in (1/2, 1], got {p}")
    L, R = state.window
    occ = state.occ_matrix()
    alpha = state.alpha_matrix()
    g_tab = g.table()
    n_sat = g.n_sat
    W = occ.shape[1]

    n_obs = len(observers)
    obs_cfg = np.array([o.config for o in observers], dtype=np.int64)
    obs_pos = np.empty(n_obs, dtype=np.int64)
    path_t_list, path_d_list, path_off = [], [], [0]
    for j, o in enumerate(observers):
        if not (L <= o.start_site <= R - 1):
            raise SimError("observer start site must have its right edge inside the window")
        obs_pos[j] = o.start_site - L
        ms = o.sorted_moves()
        pos = o.start_site
        for _, d in ms:
            pos += d
            if not (L <= pos <= R - 1):
                raise SimError("observer path leaves the window")
        path_t_list.extend(t for t, _ in ms)
        path_d_list.extend(d for _, d in ms)
        path_off.append(len(path_t_list))
    path_t = np.array(path_t_list, dtype=np.float64)
    path_d = np.array(path_d_list, dtype=np.int64)
    path_off = np.array(path_off, dtype=np.int64)
    path_ptr = path_off[:-1].copy()
    obs_count = np.zeros(n_obs, dtype=np.int64)

    snap_t = np.array(sorted(snapshots), dtype=np.float64)
    if np.any(snap_t > T) or np.any(snap_t < 0):
        raise SimError("snapshot times must lie in [0, T]")
    n_snap = snap_t.shape[0]
    snap_occ = np.zeros((n_snap, occ.shape[0], W), dtype=np.int64)
    snap_obs = np.zeros((n_snap, n_obs), dtype=np.int64)
    snap_ptr = np.zeros(1, dtype=np.int64)

    process = get_process_chunk()
    t0 = 0.0
    while True:
        ts, xs, us, zs = draw_event_chunk(rng, t0, W, p, chunk)
        _, done = process(occ, alpha, g_tab, n_sat, ts, xs, us, zs, T,
                          obs_cfg, obs_pos, obs_count,
                          path_t, path_d, path_off, path_ptr,
                          snap_t, snap_ptr, snap_occ, snap_obs)
        if done:
            break
        t0 = float(ts[-1])

    for i, cfg in enumerate(state.configs):
        cfg.occ[:] = occ[i]
    state.time += T
    obs = Observations(snap_times=snap_t, snap_occ=snap_occ, snap_counts=snap_obs,
                       final_counts=obs_count.copy(),
                       final_obs_sites=obs_pos + L, T=T)
    return state, obs


def discrepancies(state: CoupledState, i: int = 0, j: int = 1):
    """Site-wise positive parts of the two designated configurations and the
    total surplus count of the second over the first."""
    a = state.configs[i].occ.astype(np.float64)
    b = state.configs[j].occ.astype(np.float64)
    a[state.configs[i].occ == INF] = math.inf
    b[state.configs[j].occ == INF] = math.inf
    with np.errstate(invalid="ignore"):
        diff = a - b
        diff[np.isnan(diff)] = 0.0  # inf at both ends: no discrepancy
    beta = np.maximum(diff, 0.0)
    gamma = np.maximum(-diff, 0.0)
    D = float(gamma.sum())
    return beta, gamma, D


def cumulative_F(x0: int, x: int, config: Configuration) -> float:
    """Signed cumulative occupancy between a reference site and x: the sum
    over (x0, x] for x > x0, minus the sum over [x, x0] otherwise."""
    L, R = config.window
    for s in (x0, x):
        if not (L <= s <= R):
            raise SimError(f"site {s} outside window")
    occ = config.occ.astype(np.float64)
    occ[config.occ == INF] = math.inf
    if x > x0:
        return float(occ[x0 - L + 1: x - L + 1].sum())
    return float(-occ[x - L: x0 - L + 1].sum())


def class_matching(state: CoupledState):
    """Per-site matching bookkeeping for class mode: the reference-process
    particles are matched to the lowest available classes. Returns
    (matched[k, site] counts per class, unmatched reference counts per site)."""
    if state.classes < 1 or len(state.configs) != state.classes + 1:
        raise SimError("class mode needs nested classes plus a reference configuration")
    stack = [c.occ for c in state.configs[: state.classes]]
    xi = state.configs[-1].occ
    n = state.classes
    W = xi.shape[0]
    matched = np.zeros((n, W), dtype=np.int64)
    unmatched_ref = np.zeros(W, dtype=np.int64)
    for w in range(W):
        remaining = int(xi[w]) if xi[w] >= 0 else np.iinfo(np.int64).max
        prev = 0
        for k in range(n):
            level = int(stack[k][w]) if stack[k][w] >= 0 else np.iinfo(np.int64).max
            size = level - prev
            take = min(size, remaining)
            matched[k, w] = take
            remaining -= take
            prev = level
        unmatched_ref[w] = remaining if remaining < np.iinfo(np.int64).max else INF
    return matched, unmatched_ref


def label_positions(class_occ: np.ndarray, window: tuple[int, int]) -> np.ndarray:
    """Left-to-right label decoding: the particle with label i sits at the
    i-th position of the sorted multiset of occupied sites."""
    L, _ = window
    sites = []
    for w, k in enumerate(class_occ):
        if k == INF:
            raise SimError("cannot label an infinite pile")
        sites.extend([w + L] * int(k))
    return np.array(sites, dtype=np.int64)
