import itertools
import math

import numpy as np
import pytest
from scipy import stats

from zrplab.env import Environment
from zrplab.measures import MM1, marginal, sample_marginal
from zrplab.sim import (
    INF,
    Configuration,
    CoupledState,
    CurrentObserver,
    HarrisEvent,
    SimError,
    apply_event,
    class_matching,
    cumulative_F,
    discrepancies,
    empty_configuration,
    label_positions,
    make_source,
    occ_leq,
    simulate,
    slope_path,
)
from zrplab.sim.kernels import draw_event_chunk


def homog(window):
    L, R = window
    return Environment(window=window, alpha=np.ones(R - L + 1), c=1.0)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def test_configuration_validation():
    with pytest.raises(SimError):
        Configuration((0, 4), np.array([0, 1, -2, 0, 0]))
    with pytest.raises(SimError):
        Configuration((0, 4), np.zeros(3, dtype=np.int64))


def test_reservoir_pins_boundaries():
    c = Configuration((0, 4), np.zeros(5, dtype=np.int64), boundary_mode="reservoir")
    assert c.occ[0] == INF and c.occ[-1] == INF
    assert c.total_particles() == math.inf
    assert c.total_particles(finite_only=True) == 0.0


def test_make_source_shape():
    c = make_source(0, (-5, 5))
    assert list(c.occ[:6]) == [INF] * 6
    assert list(c.occ[6:]) == [0] * 5
    with pytest.raises(SimError):
        make_source(7, (-5, 5))


def test_empty_run_no_change():
    st = CoupledState([empty_configuration((-5, 5))], [homog((-5, 5))])
    st, obs = simulate(st, 5.0, rng_for(0), MM1, 1.0,
                       observers=(CurrentObserver(start_site=0),))
    assert st.configs[0].total_particles() == 0.0
    assert obs.final_counts[0] == 0


def test_closed_mode_conserves_particles():
    rng = rng_for(1)
    occ = rng.integers(0, 4, 31)
    st = CoupledState([Configuration((-15, 15), occ)], [homog((-15, 15))])
    total = st.configs[0].total_particles()
    st, _ = simulate(st, 50.0, rng, MM1, 0.7)
    assert st.configs[0].total_particles() == total


def test_apply_event_j2_and_j3():
    # eta(x)=1, xi(x)=2: mark between g-levels moves only the higher config
    window = (0, 1)
    eta = Configuration(window, np.array([1, 0], dtype=np.int64))
    xi = Configuration(window, np.array([2, 0], dtype=np.int64))
    st = CoupledState([eta, xi], [homog(window)])
    g2 = type(MM1)(values=(0.0, 0.5, 1.0))
    apply_event(st, HarrisEvent(t=0.1, x=0, u=0.75, z=1), g2)
    assert list(st.configs[0].occ) == [1, 0]  # u > g(1)*alpha: no jump
    assert list(st.configs[1].occ) == [1, 1]  # u <= g(2)*alpha: jumps
    # mark above both rates: nothing moves
    apply_event(st, HarrisEvent(t=0.2, x=0, u=0.99, z=1), g2)
    assert list(st.configs[0].occ) == [1, 0]
    assert list(st.configs[1].occ) == [1, 1]


def test_apply_event_infinite_pile():
    st = CoupledState([make_source(0, (0, 2))], [homog((0, 2))])
    apply_event(st, HarrisEvent(t=0.1, x=0, u=0.5, z=1), MM1)
    assert st.configs[0].occ[0] == INF  # infinity minus one
    assert st.configs[0].occ[1] == 1


def test_coalescence_two_site_exhaustive():
    """On every two-site state pair with occupancies <= 3 and every mark
    level, one shared event never increases the discrepancy count."""
    window = (0, 1)
    env = homog(window)
    marks = [0.25, 0.75, 0.99]
    for ea, eb, xa, xb in itertools.product(range(4), repeat=4):
        for u, z, x in itertools.product(marks, (1, -1), (0, 1)):
            eta = Configuration(window, np.array([ea, eb], dtype=np.int64))
            xi = Configuration(window, np.array([xa, xb], dtype=np.int64))
            st = CoupledState([eta, xi], [env])
            _, _, d0 = discrepancies(st)
            apply_event(st, HarrisEvent(t=0.1, x=x, u=u, z=z), MM1)
            _, _, d1 = discrepancies(st)
            assert d1 <= d0


def test_attractiveness_pathwise():
    window = (-20, 20)
    env = homog(window)
    for seed in range(20):
        rng = rng_for(seed)
        base = rng.integers(0, 3, 41)
        extra = rng.integers(0, 2, 41)
        st = CoupledState([Configuration(window, base.copy()),
                           Configuration(window, base + extra)], [env])
        st, obs = simulate(st, 20.0, rng, MM1, 0.8, snapshots=(5.0, 10.0, 20.0))
        for k in range(len(obs.snap_times)):
            assert occ_leq(obs.snap_occ[k, 0], obs.snap_occ[k, 1])


def test_discrepancy_nonincreasing():
    window = (-20, 20)
    env = homog(window)
    for seed in range(10):
        rng = rng_for(100 + seed)
        a = rng.integers(0, 3, 41)
        b = rng.integers(0, 3, 41)
        st = CoupledState([Configuration(window, a), Configuration(window, b)], [env])
        snaps = tuple(np.linspace(0.5, 50.0, 100))
        st, obs = simulate(st, 50.0, rng, MM1, 0.9, snapshots=snaps)
        ds = []
        for k in range(len(snaps)):
            diff = obs.snap_occ[k, 1] - obs.snap_occ[k, 0]
            ds.append(diff.clip(min=0).sum())
        assert all(x >= y for x, y in zip(ds, ds[1:]))


def test_discrepancies_examples():
    window = (0, 1)
    st = CoupledState([Configuration(window, np.array([2, 0], dtype=np.int64)),
                       Configuration(window, np.array([0, 1], dtype=np.int64))],
                      [homog(window)])
    beta, gamma, D = discrepancies(st)
    assert list(beta) == [2, 0] and list(gamma) == [0, 1] and D == 1
    st2 = CoupledState([Configuration(window, np.array([1, 1], dtype=np.int64)),
                        Configuration(window, np.array([1, 1], dtype=np.int64))],
                       [homog(window)])
    assert discrepancies(st2)[2] == 0


def test_current_identity_exact():
    window = (-30, 30)
    env = homog(window)
    for seed in range(10):
        rng = rng_for(200 + seed)
        occ0 = rng.integers(0, 3, 61)
        st = CoupledState([Configuration(window, occ0.copy())], [env])
        a, b = -7, 9
        st, obs = simulate(st, 25.0, rng, MM1, 0.75,
                           observers=(CurrentObserver(start_site=a),
                                      CurrentObserver(start_site=b)))
        occ_t = st.configs[0].occ
        lhs = obs.final_counts[1] - obs.final_counts[0]
        rhs = (occ0[a + 31:b + 31] - occ_t[a + 31:b + 31]).sum()
        assert lhs == rhs  # integer-exact


def test_cumulative_F():
    c = Configuration((0, 5), np.array([2, 1, 1, 1, 1, 1], dtype=np.int64))
    assert cumulative_F(0, 0, c) == -2.0
    assert cumulative_F(0, 5, c) == 5.0
    assert cumulative_F(3, 1, c) == -(1 + 1 + 1)
    src = make_source(2, (0, 5))
    assert cumulative_F(2, 1, src) == -math.inf
    vals = [cumulative_F(0, x, c) for x in range(0, 6)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_slope_path_and_bounds():
    o = slope_path(0, 1.0, 5.0)
    assert [t for t, _ in o.moves] == [1.0, 2.0, 3.0, 4.0, 5.0]
    st = CoupledState([empty_configuration((-2, 2))], [homog((-2, 2))])
    with pytest.raises(SimError):
        simulate(st, 5.0, rng_for(0), MM1, 1.0, observers=(slope_path(0, 1.0, 5.0),))


def test_stationarity_gof():
    """Product measure on an exactly stationary reservoir window: occupancy
    law at a fixed interior site is theta throughout."""
    beta, hw = 0.5, 8
    window = (-hw, hw)
    alpha = np.ones(2 * hw + 1)
    alpha[0] = alpha[-1] = beta
    env = Environment(window=window, alpha=alpha, c=beta)
    m = marginal(MM1, beta)
    samples = []
    for seed in range(400):
        rng = rng_for(300 + seed)
        occ = sample_marginal(m, rng, 2 * hw + 1)
        st = CoupledState([Configuration(window, occ, boundary_mode="reservoir")], [env])
        st, _ = simulate(st, 25.0, rng, MM1, 0.8)
        samples.append(st.configs[0].occ[hw])
    s = np.array(samples)
    top = 6
    obs_counts = np.bincount(np.minimum(s, top), minlength=top + 1)
    exp = np.array([m.prob(n) for n in range(top)] + [1.0 - sum(m.prob(n) for n in range(top))])
    _, pval = stats.chisquare(obs_counts, exp * s.size)
    assert pval > 0.001


def test_finite_propagation():
    """Copies agreeing on an interval keep agreeing inside the shrunk
    light-cone interval, with rare exceptions."""
    window = (-80, 80)
    env = homog(window)
    V, T = 3.0, 20.0
    fails = 0
    runs = 100
    for seed in range(runs):
        rng = rng_for(500 + seed)
        a = rng.integers(0, 3, 161)
        b = a.copy()
        b[:30] = rng.integers(0, 3, 30)   # differ far left
        b[-30:] = rng.integers(0, 3, 30)  # differ far right
        shared = rng_for(900 + seed)
        st1 = CoupledState([Configuration(window, a.copy())], [env])
        st2 = CoupledState([Configuration(window, b.copy())], [env])
        st1, _ = simulate(st1, T, rng_for(1000 + seed), MM1, 0.8)
        st2, _ = simulate(st2, T, rng_for(1000 + seed), MM1, 0.8)
        lo = -50 + int(V * T)
        hi = 50 - int(V * T)
        sl = slice(lo + 80, hi + 81)
        if not np.array_equal(st1.configs[0].occ[sl], st2.configs[0].occ[sl]):
            fails += 1
    assert fails / runs < 0.05


def test_event_stream_ks():
    rng = rng_for(7)
    n_sites = 37
    ts, xs, us, zs = draw_event_chunk(rng, 0.0, n_sites, 0.8, 10 ** 5)
    dts = np.diff(np.concatenate([[0.0], ts]))
    _, pval = stats.kstest(dts * n_sites, "expon")
    assert pval > 0.001
    assert abs((zs == 1).mean() - 0.8) < 0.01
    assert xs.min() >= 0 and xs.max() < n_sites


def test_kernel_fallback_bit_identical(monkeypatch):
    window = (-15, 15)
    env = homog(window)

    def run():
        rng = rng_for(42)
        occ = rng.integers(0, 3, 31)
        st = CoupledState([Configuration(window, occ)], [env])
        return simulate(st, 30.0, rng, MM1, 0.8,
                        observers=(CurrentObserver(start_site=0),),
                        snapshots=(10.0, 20.0))

    monkeypatch.delenv("ZRPLAB_NO_NUMBA", raising=False)
    st_jit, obs_jit = run()
    monkeypatch.setenv("ZRPLAB_NO_NUMBA", "1")
    st_py, obs_py = run()
    assert np.array_equal(st_jit.configs[0].occ, st_py.configs[0].occ)
    assert np.array_equal(obs_jit.final_counts, obs_py.final_counts)
    assert np.array_equal(obs_jit.snap_occ, obs_py.snap_occ)
    assert np.array_equal(obs_jit.snap_counts, obs_py.snap_counts)


def test_class_matching_and_labels():
    window = (0, 2)
    c1 = Configuration(window, np.array([1, 0, 1], dtype=np.int64))
    c2 = Configuration(window, np.array([2, 1, 1], dtype=np.int64))
    ref = Configuration(window, np.array([1, 1, 0], dtype=np.int64))
    st = CoupledState([c1, c2, ref], [homog(window)], classes=2)
    matched, unmatched = class_matching(st)
    assert list(matched[0]) == [1, 0, 0]   # class 1 takes the lowest slots
    assert list(matched[1]) == [0, 1, 0]
    assert list(unmatched) == [0, 0, 0]
    assert list(label_positions(np.array([2, 0, 1]), window)) == [0, 0, 2]


def test_class_nesting_enforced():
    window = (0, 1)
    hi = Configuration(window, np.array([0, 1], dtype=np.int64))
    lo = Configuration(window, np.array([1, 1], dtype=np.int64))
    with pytest.raises(SimError):
        CoupledState([lo, hi, hi], [homog(window)], classes=2)
