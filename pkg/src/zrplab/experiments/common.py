"""Shared experiment plumbing: replica RNG streams, light-cone window sizing,
report serialization with config hashes, CSV writers."""

from __future__ import annotations

import hashlib
import json
import math
import os

import numpy as np

from .. import __version__
from ..env import Environment, build_environment
from ..measures import INF_OCC, RateFunction


class ExperimentError(ValueError):
    pass


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream: replica r is seeded independently of all others,
    so replicas can run in any order or in parallel."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(master_seed), int(replica)])))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def light_cone_check(window, interest, T: float, v: float) -> None:
    """The region of interest plus a v*T margin must fit inside the window,
    so closed-boundary distortion cannot reach it."""
    L, R = window
    lo, hi = interest
    margin = int(math.ceil(v * T))
    if lo - margin < L or hi + margin > R:
        raise ExperimentError(
            f"window {window} too small: interest {interest} needs margin {margin}")


def homogeneous_env(window, alpha: float = 1.0) -> Environment:
    L, R = window
    return Environment(window=window, alpha=np.full(R - L + 1, alpha), c=alpha)


def env_from_config(cfg: dict, window, seed: int) -> Environment:
    spec = cfg.get("env", {"kind": "explicit", "values": [1.0] * (window[1] - window[0] + 1)})
    if spec.get("kind") == "homogeneous":
        return homogeneous_env(window, float(spec.get("alpha", 1.0)))
    if spec.get("kind") == "slow_site":
        L, R = window
        vals = np.full(R - L + 1, float(spec.get("alpha_fast", 1.0)))
        vals[-L] = float(spec.get("alpha_slow", 0.5))
        return Environment(window=window, alpha=vals, c=float(spec.get("alpha_slow", 0.5)))
    return build_environment(spec, window, seed=seed)


def rate_from_config(cfg: dict) -> RateFunction:
    return RateFunction(values=tuple(cfg.get("g", [0.0, 1.0])))


def occ_str(n: int) -> str:
    return "inf" if n == INF_OCC else str(int(n))


def write_csv(path, header: str, rows) -> None:
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")


def write_report(out_dir, experiment: str, cfg: dict, seed: int, metrics: dict) -> dict:
    report = {
        "experiment": experiment,
        "version": __version__,
        "master_seed": int(seed),
        "config": cfg,
        "config_hash": config_hash(cfg),
        "metrics": metrics,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as f:
            json.dump(report, f, indent=1, sort_keys=True, default=float)
    return report


def empirical_pmf(samples: np.ndarray, n_max: int | None = None) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.int64)
    if np.any(samples < 0):
        raise ExperimentError("cannot histogram infinite occupancies")
    top = int(samples.max()) if n_max is None else n_max
    return np.bincount(samples, minlength=top + 1) / samples.size


def tv_to_marginal(samples: np.ndarray, m) -> float:
    """Total-variation distance between an empirical occupancy sample and a
    ThetaMarginal, the tail handled through the marginal's geometric form."""
    pmf = empirical_pmf(samples)
    ref = np.array([m.prob(n) for n in range(len(pmf))])
    return 0.5 * (float(np.abs(pmf - ref).sum()) + max(0.0, 1.0 - ref.sum()))


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se
