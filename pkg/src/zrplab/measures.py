"""Exact single-site marginals, product invariant measures, the disorder-
averaged density map with its inverse, critical density and the homogenized
flux function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import DisorderLaw, Environment

INF_OCC = -1  # sentinel occupancy for an infinite pile


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class RateFunction:
    """Service rates g(0..n_sat); constant at g(n_sat) beyond saturation.

    g(0) = 0 < g(1), nondecreasing, g(n_sat) <= 1; the rate of an infinite
    pile equals the saturation value.
    """

    values: tuple[float, ...]

    def __post_init__(self):
        v = self.values
        if len(v) < 2:
            raise MeasureError("rate function needs at least g(0), g(1)")
        if v[0] != 0.0:
            raise MeasureError("g(0) must be 0")
        if v[1] <= 0.0:
            raise MeasureError("g(1) must be positive")
        if any(b < a - 1e-15 for a, b in zip(v, v[1:])):
            raise MeasureError("g must be nondecreasing")
        if v[-1] > 1.0 + 1e-15:
            raise MeasureError("g must be bounded by 1 after normalization")

    @property
    def n_sat(self) -> int:
        return len(self.values) - 1

    @property
    def g_inf(self) -> float:
        return self.values[-1]

    def __call__(self, n) -> float:
        if n == INF_OCC or n == math.inf:
            return self.values[-1]
        if n < 0:
            raise MeasureError(f"negative occupancy {n}")
        return self.values[min(int(n), self.n_sat)]

    def factorial(self, n: int) -> float:
        """g(1)*g(2)*...*g(n), with the empty product at n=0."""
        out = 1.0
        for k in range(1, n + 1):
            out *= self(k)
        return out

    def table(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


MM1 = RateFunction(values=(0.0, 1.0))  # unit service rate above an empty site


@dataclass(frozen=True)
class ThetaMarginal:
    """Single-site equilibrium marginal at fugacity beta: pmf(n) proportional
    to beta^n / (g(1)...g(n))."""

    beta: float
    Z: float
    pmf: np.ndarray  # pmf[0..tail_cut]
    mean: float
    tail_cut: int
    g: RateFunction

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    def prob(self, n: int) -> float:
        if n <= self.tail_cut:
            return float(self.pmf[n])
        # geometric tail beyond the stored table
        r = self.beta / self.g.g_inf
        return float(self.pmf[self.tail_cut] * r ** (n - self.tail_cut))


def marginal(g: RateFunction, beta: float, tail_eps: float = 1e-12) -> ThetaMarginal:
    """Build the fugacity-beta marginal by summing the series until the
    geometric tail bound (ratio beta/g(n_sat)) drops below 1e-15."""
    if beta < 0:
        raise MeasureError(f"beta must be nonnegative, got {beta}")
    if beta >= 1.0 or beta >= g.g_inf:
        raise MeasureError(f"beta={beta} out of domain (series diverges); "
                           "the boundary case is a point mass at infinity")
    terms = [1.0]
    fact = 1.0
    n = 0
    ratio = beta / g.g_inf
    while True:
        n += 1
        fact *= g(n)
        t = beta ** n / fact
        terms.append(t)
        if n >= g.n_sat and t / (1.0 - ratio) < 1e-15:
            break
        if n > 10 ** 6:
            raise MeasureError("series truncation failed")
    arr = np.array(terms)
    Z = float(arr.sum())
    pmf = arr / Z
    mean = float(np.dot(np.arange(len(pmf)), pmf))
    return ThetaMarginal(beta=beta, Z=Z, pmf=pmf, mean=mean, tail_cut=len(pmf) - 1, g=g)


def mean_density(g: RateFunction, beta: float) -> float:
    """Mean occupancy under the fugacity-beta marginal; +inf at beta = g_inf.

    Beyond saturation the series is geometric, so the tail is summed in
    closed form; this stays exact arbitrarily close to the radius.
    """
    if beta < 0:
        raise MeasureError(f"beta must be nonnegative, got {beta}")
    if beta >= g.g_inf or beta >= 1.0:
        return math.inf
    if beta == 0.0:
        return 0.0
    ns = g.n_sat
    t = 1.0
    z0, m0 = 1.0, 0.0
    for n in range(1, ns + 1):
        t *= beta / g(n)
        z0 += t
        m0 += n * t
    r = beta / g.g_inf
    z_tail = t * r / (1.0 - r)
    m_tail = t * (ns * r / (1.0 - r) + r / (1.0 - r) ** 2)
    return (m0 + m_tail) / (z0 + z_tail)


def sample_marginal(m: ThetaMarginal, rng: np.random.Generator, size: int | None = None):
    """Exact inverse-CDF sampling."""
    cdf = m.cdf()
    u = rng.random(size if size is not None else 1)
    idx = np.searchsorted(cdf, u, side="right")
    # extend into the geometric tail for the (< 1e-12 mass) overflow draws
    over = idx >= len(cdf)
    if np.any(over):
        r = m.beta / m.g.g_inf
        for j in np.nonzero(over)[0]:
            acc = cdf[-1]
            n = len(cdf) - 1
            while acc < u[j] and n < 10 ** 7:
                n += 1
                acc += m.pmf[m.tail_cut] * r ** (n - m.tail_cut)
            idx[j] = n
    return int(idx[0]) if size is None else idx.astype(np.int64)


def _gauss_legendre_panels(lo: float, hi: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre grid on [lo, hi] with logarithmic panel
    refinement toward lo, where the integrand may blow up."""
    n_panels = 32
    # geometric panel edges accumulating at lo
    edges = lo + (hi - lo) * np.concatenate([[0.0], 2.0 ** np.arange(-(n_panels - 1), 1, 1.0)])
    per = max(4, nodes // n_panels)
    xg, wg = np.polynomial.legendre.leggauss(per)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        h = (b - a) / 2
        xs.append(a + h * (xg + 1.0))
        ws.append(wg * h)
    return np.concatenate(xs), np.concatenate(ws)


def rbar(g: RateFunction, q0: DisorderLaw, beta: float) -> float:
    """Disorder-averaged mean density: integral of the mean occupancy at
    fugacity beta/a over the disorder law. +inf when divergent."""
    c0 = q0.inf_support
    if beta < 0 or beta > c0 + 1e-15:
        raise MeasureError(f"beta={beta} outside [0, inf supp Q0={c0}]")
    beta = min(beta, c0)
    if beta == 0.0:
        return 0.0
    if q0.kind == "atoms":
        total = 0.0
        for a, w in q0.atoms:
            if w == 0.0:
                continue
            r = mean_density(g, beta / a)
            if math.isinf(r):
                return math.inf
            total += w * r
        return total
    lo, hi = q0.support
    xs, ws = _gauss_legendre_panels(lo, hi, q0.nodes)
    norm = q0._norm()
    total = 0.0
    for x, w in zip(xs, ws):
        b = beta / x
        if b >= min(1.0, g.g_inf):
            return math.inf
        total += w * q0.density(float(x)) / norm * mean_density(g, b)
        if total > 1e12:
            return math.inf
    return total


def rho_critical(g: RateFunction, q0: DisorderLaw) -> float:
    """Largest mean density attainable by product invariant measures."""
    return rbar(g, q0, q0.inf_support)


def rbar_inverse(g: RateFunction, q0: DisorderLaw, rho: float, tol: float = 1e-10) -> float:
    """Fugacity with disorder-averaged density rho, by bisection."""
    if rho < 0:
        raise MeasureError(f"rho must be nonnegative, got {rho}")
    if rho == 0.0:
        return 0.0
    c0 = q0.inf_support
    rc = rho_critical(g, q0)
    if rho > rc:
        raise MeasureError(f"rho={rho} exceeds critical density {rc}")
    lo, hi = 0.0, c0
    for _ in range(200):
        mid = (lo + hi) / 2
        v = rbar(g, q0, mid)
        if v < rho:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 or (not math.isinf(v) and abs(v - rho) < tol):
            return mid
    return (lo + hi) / 2


@dataclass(frozen=True)
class FluxFunction:
    """Tabulated macroscopic flux: strictly increasing up to the cutoff
    density, constant at (p-q)*gamma beyond it."""

    rho_c: float  # critical density (may be +inf)
    gamma: float  # cutoff fugacity
    rho_grid: np.ndarray
    f_vals: np.ndarray
    p_minus_q: float
    rho_cut: float  # density above which the flux is flat

    def __call__(self, rho):
        return np.interp(rho, self.rho_grid, self.f_vals)

    @property
    def rho_max(self) -> float:
        return float(self.rho_grid[-1])

    def max_slope(self) -> float:
        d = np.diff(self.f_vals) / np.diff(self.rho_grid)
        return float(d.max())

    def export_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("rho,f\n")
            for r, v in zip(self.rho_grid, self.f_vals):
                f.write(f"{r:.12g},{v:.12g}\n")


def build_flux(g: RateFunction, q0: DisorderLaw, gamma: float, p: float,
               n_points: int = 4096, rho_max: float | None = None) -> FluxFunction:
    """Tabulate the homogenized flux on a uniform density grid."""
    if not (0.5 < p <= 1.0):
        raise MeasureError(f"p must lie in (1/2, 1], got {p}")
    c0 = q0.inf_support
    if not (0.0 <= gamma <= c0 + 1e-15):
        raise MeasureError(f"gamma={gamma} outside [0, {c0}]")
    pq = 2 * p - 1.0
    rc = rho_critical(g, q0)
    rho_cut = rbar(g, q0, gamma)
    if rho_max is None:
        rho_max = max(2 * rc, 10.0) if math.isfinite(rc) else max(3 * rho_cut, 10.0)
        if math.isinf(rho_max):
            rho_max = 10.0
    # parametrize the increasing branch by fugacity, then resample in density
    betas = gamma * (1.0 - (1.0 - np.linspace(0.0, 1.0, 2048)) ** 2)  # refined near gamma
    rhos, fs = [0.0], [0.0]
    for b in betas[1:]:
        r = rbar(g, q0, b)
        if not math.isfinite(r) or r >= rho_cut - 1e-13 and b < gamma:
            continue
        if r > rhos[-1] + 1e-13:
            rhos.append(r)
            fs.append(pq * b)
    if math.isfinite(rho_cut) and rho_cut > rhos[-1]:
        rhos.append(rho_cut)
        fs.append(pq * gamma)
    grid = np.linspace(0.0, rho_max, n_points)
    vals = np.interp(grid, np.array(rhos), np.array(fs),
                     right=pq * gamma if math.isfinite(rho_cut) else None)
    if not math.isfinite(rho_cut):
        rho_cut = math.inf
    vals = np.maximum.accumulate(vals)  # guard monotonicity against roundoff
    return FluxFunction(rho_c=rc, gamma=gamma, rho_grid=grid, f_vals=vals,
                        p_minus_q=pq, rho_cut=float(rho_cut))


def flux_eval(g: RateFunction, q0: DisorderLaw, gamma: float, p: float, rho: float) -> float:
    """Point evaluation of the homogenized flux: (p-q) * inverse-density-map
    below the cutoff, (p-q)*gamma above."""
    if not (0.5 < p <= 1.0):
        raise MeasureError(f"p must lie in (1/2, 1], got {p}")
    c0 = q0.inf_support
    if not (0.0 <= gamma <= c0 + 1e-15):
        raise MeasureError(f"gamma={gamma} outside [0, {c0}]")
    pq = 2 * p - 1.0
    rho_cut = rbar(g, q0, gamma)
    if rho >= rho_cut:
        return pq * gamma
    return pq * rbar_inverse(g, q0, rho)


def sample_product(env: Environment, beta: float, window: tuple[int, int],
                   rng: np.random.Generator, g: RateFunction) -> np.ndarray:
    """Independent per-site draws from the invariant product measure at
    fugacity beta; sites where beta equals the local rate get the infinite
    sentinel. Returns an int64 occupancy array over `window`."""
    lo, hi = window
    alphas = env.values(lo, hi)
    if beta > alphas.min() + 1e-15:
        raise MeasureError(f"beta={beta} exceeds min alpha on window")
    occ = np.zeros(hi - lo + 1, dtype=np.int64)
    if beta == 0.0:
        return occ
    cache: dict[float, ThetaMarginal] = {}
    for i, a in enumerate(alphas):
        b = beta / a
        if b >= 1.0 - 1e-15:
            occ[i] = INF_OCC
            continue
        key = round(b, 15)
        if key not in cache:
            cache[key] = marginal(g, b)
        occ[i] = sample_marginal(cache[key], rng)
    return occ


def delta_law(a: float = 1.0) -> DisorderLaw:
    """Homogeneous disorder concentrated at a single value."""
    return DisorderLaw(kind="atoms", atoms=((a, 1.0),))
