"""Hot event loop for the graphical (Harris) construction.

The same implementation is compiled with numba when available and also kept
as a pure-Python/numpy fallback; set ZRPLAB_NO_NUMBA=1 to force the fallback.
Both paths consume an identical random stream, so results are bit-identical.
"""

from __future__ import annotations

import os

import numpy as np

_BIG = 1e300


def _process_chunk_impl(occ, alpha, g_tab, n_sat,
                        t_arr, x_arr, u_arr, z_arr, T,
                        obs_cfg, obs_pos, obs_count,
                        path_t, path_d, path_off, path_ptr,
                        snap_t, snap_ptr, snap_occ, snap_obs):
    """Apply one chunk of potential jump events to all coupled configurations.

    occ: (m, W) int64 occupancies, -1 encodes an infinite pile.
    Observer paths and snapshot captures are interleaved in time order.
    Returns (events consumed, finished flag); finished once an event time
    exceeds the horizon T (auxiliary work is flushed up to T first).
    """
    m = occ.shape[0]
    W = occ.shape[1]
    n = t_arr.shape[0]
    n_obs = obs_cfg.shape[0]
    n_snap = snap_t.shape[0]
    i = 0
    while i < n:
        te = t_arr[i]
        tl = te if te <= T else T
        # flush snapshots / path moves scheduled before this event (or T)
        while True:
            ts = snap_t[snap_ptr[0]] if snap_ptr[0] < n_snap else _BIG
            tp = _BIG
            jmin = -1
            for j in range(n_obs):
                if path_ptr[j] < path_off[j + 1]:
                    tt = path_t[path_ptr[j]]
                    if tt < tp:
                        tp = tt
                        jmin = j
            tm = ts if ts <= tp else tp
            if tm > tl:
                break
            if ts <= tp:
                k = snap_ptr[0]
                for c in range(m):
                    for w in range(W):
                        snap_occ[k, c, w] = occ[c, w]
                for j in range(n_obs):
                    snap_obs[k, j] = obs_count[j]
                snap_ptr[0] += 1
            else:
                j = jmin
                d = path_d[path_ptr[j]]
                c = obs_cfg[j]
                if d > 0:
                    obs_count[j] -= occ[c, obs_pos[j] + 1]
                    obs_pos[j] += 1
                else:
                    obs_count[j] += occ[c, obs_pos[j]]
                    obs_pos[j] -= 1
                path_ptr[j] += 1
        if te > T:
            return i, True
        xi = x_arr[i]
        u = u_arr[i]
        z = z_arr[i]
        xj = xi + z
        for c in range(m):
            ov = occ[c, xi]
            if ov == 0:
                continue
            gv = g_tab[n_sat] if (ov < 0 or ov > n_sat) else g_tab[ov]
            if u <= alpha[c, xi] * gv:
                if 0 <= xj < W:
                    if ov > 0:
                        occ[c, xi] = ov - 1
                    if occ[c, xj] >= 0:
                        occ[c, xj] += 1
                    for j in range(n_obs):
                        if obs_cfg[j] == c:
                            if z == 1 and xi == obs_pos[j]:
                                obs_count[j] += 1
                            elif z == -1 and xi == obs_pos[j] + 1:
                                obs_count[j] -= 1
        i += 1
    return n, False


process_chunk_py = _process_chunk_impl

try:
    from numba import njit

    process_chunk_jit = njit(cache=True)(_process_chunk_impl)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    process_chunk_jit = None
    HAVE_NUMBA = False


def use_numba() -> bool:
    return HAVE_NUMBA and os.environ.get("ZRPLAB_NO_NUMBA", "") not in ("1", "true", "yes")


def get_process_chunk():
    return process_chunk_jit if use_numba() else process_chunk_py


def draw_event_chunk(rng: np.random.Generator, t0: float, n_sites: int, p: float,
                     size: int):
    """One chunk of the rate-(1 per site) marked Poisson stream."""
    dts = rng.exponential(1.0 / n_sites, size)
    ts = t0 + np.cumsum(dts)
    xs = rng.integers(0, n_sites, size, dtype=np.int64)
    us = rng.random(size)
    zs = np.where(rng.random(size) < p, 1, -1).astype(np.int64)
    return ts, xs, us, zs
