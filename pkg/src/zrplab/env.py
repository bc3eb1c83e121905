"""Disorder environments: per-site rate multipliers on a finite lattice window.

Supports i.i.d. sampling from a disorder law, the deterministic quantile
construction with power-spaced defect sites, and explicit user lists.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class EnvironmentError_(ValueError):
    """Invalid environment specification."""


@dataclass(frozen=True)
class DisorderLaw:
    """Law of the per-site disorder value, either purely atomic or given by a
    density on a sub-interval of (0, 1].

    atoms: list of (value, weight) pairs, weights summing to 1.
    density: callable a -> density value, with `support` = (lo, hi) and
        `nodes` quadrature panels per unit used by downstream integrals.
        A polynomial density can be given as a coefficient list (low order
        first), which is what the JSON form uses.
    """

    kind: str  # "atoms" | "density"
    atoms: tuple[tuple[float, float], ...] = ()
    density: Callable[[float], float] | None = None
    poly: tuple[float, ...] | None = None
    support: tuple[float, float] = (0.0, 1.0)
    nodes: int = 512

    def __post_init__(self):
        if self.kind == "atoms":
            if not self.atoms:
                raise EnvironmentError_("atomic law needs at least one atom")
            w = sum(wt for _, wt in self.atoms)
            if abs(w - 1.0) > 1e-12:
                raise EnvironmentError_(f"atom weights sum to {w}, expected 1")
            for a, wt in self.atoms:
                if not (0.0 < a <= 1.0):
                    raise EnvironmentError_(f"atom value {a} outside (0,1]")
                if wt < 0:
                    raise EnvironmentError_(f"negative atom weight {wt}")
        elif self.kind == "density":
            lo, hi = self.support
            if not (0.0 < lo < hi <= 1.0):
                raise EnvironmentError_(f"density support {self.support} invalid")
            if self.density is None and self.poly is None:
                raise EnvironmentError_("density law needs a callable or poly coefficients")
            if self.density is None:
                coeffs = tuple(self.poly)
                object.__setattr__(
                    self, "density",
                    lambda a, _c=coeffs: float(sum(c * a ** k for k, c in enumerate(_c))),
                )
            for a in np.linspace(lo, hi, 33):
                if self.density(float(a)) < -1e-12:
                    raise EnvironmentError_(f"density negative at a={a}")
        else:
            raise EnvironmentError_(f"unknown law kind {self.kind!r}")

    @property
    def inf_support(self) -> float:
        if self.kind == "atoms":
            return min(a for a, _ in self.atoms)
        return self.support[0]

    def cdf(self, u: float) -> float:
        if self.kind == "atoms":
            return sum(wt for a, wt in self.atoms if a <= u)
        lo, hi = self.support
        if u <= lo:
            return 0.0
        if u >= hi:
            return 1.0
        xs = np.linspace(lo, u, 257)
        ys = np.array([self.density(float(x)) for x in xs])
        total = self._norm()
        return float(np.trapezoid(ys, xs) / total)

    def _norm(self) -> float:
        lo, hi = self.support
        xs = np.linspace(lo, hi, 2049)
        ys = np.array([self.density(float(x)) for x in xs])
        return float(np.trapezoid(ys, xs))

    def quantile(self, u: float) -> float:
        """Right-continuous generalized inverse of the CDF; plateaus of an
        atomic law map onto the atom value. quantile(0) is the support inf."""
        if not (0.0 <= u <= 1.0):
            raise EnvironmentError_(f"quantile argument {u} outside [0,1]")
        if u == 0.0:
            return self.inf_support
        if self.kind == "atoms":
            vals = sorted(self.atoms)
            acc = 0.0
            for a, wt in vals:
                acc += wt
                if acc >= u - 1e-15:
                    return a
            return vals[-1][0]
        lo, hi = self.support
        xs = np.linspace(lo, hi, 4097)
        ys = np.array([self.density(float(x)) for x in xs])
        cum = np.concatenate([[0.0], np.cumsum((ys[1:] + ys[:-1]) / 2 * np.diff(xs))])
        cum /= cum[-1]
        i = int(np.searchsorted(cum, u))
        if i >= len(xs):
            return hi
        if i == 0:
            return lo
        # linear inversion inside the bracketing panel
        c0, c1 = cum[i - 1], cum[i]
        t = 0.0 if c1 == c0 else (u - c0) / (c1 - c0)
        return float(xs[i - 1] + t * (xs[i] - xs[i - 1]))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "atoms":
            vals = np.array([a for a, _ in self.atoms])
            wts = np.array([w for _, w in self.atoms])
            return rng.choice(vals, size=n, p=wts / wts.sum())
        u = rng.random(n)
        return np.array([self.quantile(float(x)) for x in u])

    def to_json(self) -> dict:
        if self.kind == "atoms":
            return {"kind": "atoms", "atoms": [[a, w] for a, w in self.atoms]}
        if self.poly is None:
            raise EnvironmentError_("only polynomial densities are JSON-serializable")
        return {"kind": "density", "poly": list(self.poly),
                "support": list(self.support), "nodes": self.nodes}

    @staticmethod
    def from_json(d: dict) -> "DisorderLaw":
        if d["kind"] == "atoms":
            return DisorderLaw(kind="atoms", atoms=tuple((float(a), float(w)) for a, w in d["atoms"]))
        return DisorderLaw(kind="density", poly=tuple(d["poly"]),
                           support=tuple(d["support"]), nodes=int(d.get("nodes", 512)))


@dataclass(frozen=True)
class Environment:
    """Finite window of disorder values together with the declared infimum
    `c` of the full (possibly infinite) environment.

    `c` is metadata, not recomputed from the window: the true infimum may
    not be achieved inside the window.
    """

    window: tuple[int, int]  # inclusive [L, R]
    alpha: np.ndarray  # float64, length R - L + 1
    c: float
    law: DisorderLaw | None = None
    construction: str = "explicit"

    def __post_init__(self):
        L, R = self.window
        if R < L:
            raise EnvironmentError_("empty window")
        a = np.asarray(self.alpha, dtype=np.float64)
        if a.shape != (R - L + 1,):
            raise EnvironmentError_("alpha length does not match window")
        if np.any(a <= 0.0) or np.any(a > 1.0):
            raise EnvironmentError_("alpha values must lie in (0,1]")
        if self.c > a.min() + 1e-12:
            raise EnvironmentError_("declared infimum exceeds window minimum")
        object.__setattr__(self, "alpha", a)

    def value(self, x: int) -> float:
        L, R = self.window
        if not (L <= x <= R):
            raise EnvironmentError_(f"site {x} outside window {self.window}")
        return float(self.alpha[x - L])

    def values(self, lo: int, hi: int) -> np.ndarray:
        """Disorder values on [lo, hi] inclusive."""
        L, _ = self.window
        self.value(lo), self.value(hi)
        return self.alpha[lo - L: hi - L + 1]

    def to_json(self) -> dict:
        L, R = self.window
        return {
            "window": [L, R],
            "c": self.c,
            "construction": self.construction,
            "law": self.law.to_json() if self.law is not None else None,
            "alpha": {str(L + i): float(v) for i, v in enumerate(self.alpha)},
        }

    def dump(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)

    @staticmethod
    def from_json(d: dict) -> "Environment":
        L, R = d["window"]
        alpha = np.array([d["alpha"][str(x)] for x in range(L, R + 1)])
        law = DisorderLaw.from_json(d["law"]) if d.get("law") else None
        return Environment(window=(L, R), alpha=alpha, c=float(d["c"]),
                           law=law, construction=d.get("construction", "explicit"))

    @staticmethod
    def load(path) -> "Environment":
        with open(path) as f:
            return Environment.from_json(json.load(f))


@dataclass(frozen=True)
class DefectBounds:
    """Nearest near-infimum sites around the origin: A_eps on the left
    (sup of {x <= 0 : alpha(x) <= c+eps}), a_eps on the right (inf of
    {x >= 0 : ...}); -inf / +inf when the set is empty within the window."""

    A_eps: float  # integer or -inf
    a_eps: float  # integer or +inf
    eps: float


def build_environment(spec: dict, window: tuple[int, int], seed: int = 0) -> Environment:
    """Construct an environment on `window` from a JSON-style descriptor.

    kinds: "iid" (per-site samples from q0, driven by `seed`),
    "deterministic" (defect sites at sgn(n)*floor(|n|^kappa), other sites by
    quantile inversion of the interpolated uniform), "explicit" (value list).
    """
    L, R = window
    if R < L:
        raise EnvironmentError_("empty window")
    kind = spec["kind"]
    if kind == "explicit":
        vals = np.asarray(spec["values"], dtype=np.float64)
        c = float(spec.get("c", vals.min()))
        return Environment(window=window, alpha=vals, c=c, construction="explicit")
    law = spec["q0"] if isinstance(spec.get("q0"), DisorderLaw) else DisorderLaw.from_json(spec["q0"])
    if kind == "iid":
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence([int(seed), L + 2 ** 31, R + 2 ** 31])))
        vals = law.sample(rng, R - L + 1)
        return Environment(window=window, alpha=vals, c=float(spec.get("c", law.inf_support)),
                           law=law, construction=f"iid seed={seed}")
    if kind == "deterministic":
        kappa = float(spec["kappa"])
        if kappa <= 1.0:
            raise EnvironmentError_(f"kappa must exceed 1, got {kappa}")
        c = float(spec.get("c", law.inf_support))
        defect_value = spec.get("defect_values")  # optional n -> value rule
        vals = _deterministic_alpha(law, kappa, c, L, R, defect_value)
        return Environment(window=window, alpha=vals, c=c, law=law,
                           construction=f"deterministic kappa={kappa}")
    raise EnvironmentError_(f"unknown construction kind {kind!r}")


def deterministic_defect_sites(kappa: float, L: int, R: int) -> dict[int, int]:
    """Map defect site -> index n, for sites sgn(n)*floor(|n|^kappa) in [L, R]."""
    sites: dict[int, int] = {0: 0}
    n = 1
    while True:
        x = int(math.floor(n ** kappa))
        if x > R and -x < L:
            break
        if L <= x <= R:
            sites[x] = n
        if L <= -x <= R:
            sites[-x] = -n
        n += 1
        if n > 10 ** 7:
            break
    return {x: n for x, n in sites.items() if L <= x <= R}


def _deterministic_alpha(law: DisorderLaw, kappa: float, c: float,
                         L: int, R: int, defect_value) -> np.ndarray:
    # all defect sites bracketing the window, so interpolation is defined at the edges
    pad = max(abs(L), abs(R)) + 2
    n_max = int(math.ceil((pad + 1) ** (1.0 / kappa))) + 2
    xs = [0]
    for n in range(1, n_max + 1):
        x = int(math.floor(n ** kappa))
        xs.extend([x, -x])
    xs = sorted(set(xs))
    in_window = deterministic_defect_sites(kappa, L, R)

    def dval(n: int) -> float:
        if defect_value is not None:
            return float(defect_value(n)) if callable(defect_value) else float(defect_value[n])
        return min(1.0, c + 1.0 / (abs(n) + 2))

    vals = np.empty(R - L + 1)
    strict = c < law.inf_support - 1e-15
    for x in range(L, R + 1):
        if x in in_window and strict:
            vals[x - L] = dval(in_window[x])
        else:
            i = int(np.searchsorted(xs, x, side="right")) - 1
            x0, x1 = xs[i], xs[i + 1]
            u = (x - x0) / (x1 - x0)
            vals[x - L] = law.quantile(u)
    return vals


def empirical_disorder(env: Environment, n: int, side: str = "right"):
    """Uniform average of point masses over [0, n] (right) or [-n, 0] (left).

    Returns (values, weights) of the resulting discrete distribution.
    """
    if side not in ("left", "right"):
        raise EnvironmentError_(f"side must be left/right, got {side!r}")
    lo, hi = (0, n) if side == "right" else (-n, 0)
    L, R = env.window
    if lo < L or hi > R:
        raise EnvironmentError_(f"half-window [{lo},{hi}] exceeds window {env.window}")
    vals = env.values(lo, hi)
    uniq, counts = np.unique(vals, return_counts=True)
    return uniq, counts / counts.sum()


def tv_to_law(values: np.ndarray, weights: np.ndarray, law: DisorderLaw) -> float:
    """Total-variation distance between a discrete distribution and an atomic law."""
    if law.kind != "atoms":
        raise EnvironmentError_("TV comparison only defined against atomic laws")
    support = sorted(set(values.tolist()) | {a for a, _ in law.atoms})
    emp = {float(v): float(w) for v, w in zip(values, weights)}
    ref = {}
    for a, w in law.atoms:
        ref[float(a)] = ref.get(float(a), 0.0) + w
    return 0.5 * sum(abs(emp.get(s, 0.0) - ref.get(s, 0.0)) for s in support)


def defect_bounds(env: Environment, eps: float) -> DefectBounds:
    """Nearest sites around the origin where the disorder is within eps of the
    declared infimum; window-truncated, with -inf/+inf sentinels."""
    if eps <= 0:
        raise EnvironmentError_(f"eps must be positive, got {eps}")
    L, R = env.window
    thr = env.c + eps
    A = -math.inf
    for x in range(min(0, R), L - 1, -1):
        if env.value(x) <= thr:
            A = x
            break
    a = math.inf
    for x in range(max(0, L), R + 1):
        if env.value(x) <= thr:
            a = x
            break
    return DefectBounds(A_eps=A, a_eps=a, eps=eps)
