import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zrplab.env import (
    DisorderLaw,
    Environment,
    EnvironmentError_,
    build_environment,
    defect_bounds,
    deterministic_defect_sites,
    empirical_disorder,
    tv_to_law,
)

TWO_ATOM = DisorderLaw(kind="atoms", atoms=((0.6, 0.5), (1.0, 0.5)))
DENSITY = DisorderLaw(kind="density", poly=(-4.0, 8.0), support=(0.5, 1.0))


def test_atom_weights_must_sum_to_one():
    with pytest.raises(EnvironmentError_):
        DisorderLaw(kind="atoms", atoms=((0.5, 0.4), (1.0, 0.4)))


def test_atom_values_in_unit_interval():
    with pytest.raises(EnvironmentError_):
        DisorderLaw(kind="atoms", atoms=((1.5, 1.0),))


def test_inf_support():
    assert TWO_ATOM.inf_support == 0.6
    assert DENSITY.inf_support == 0.5


def test_quantile_atoms():
    assert TWO_ATOM.quantile(0.0) == 0.6
    assert TWO_ATOM.quantile(0.3) == 0.6
    assert TWO_ATOM.quantile(0.5) == 0.6
    assert TWO_ATOM.quantile(0.7) == 1.0
    assert TWO_ATOM.quantile(1.0) == 1.0


def test_quantile_density_roundtrip():
    for u in (0.1, 0.4, 0.9):
        a = DENSITY.quantile(u)
        assert abs(DENSITY.cdf(a) - u) < 1e-3


def test_law_json_roundtrip():
    for law in (TWO_ATOM, DENSITY):
        back = DisorderLaw.from_json(json.loads(json.dumps(law.to_json())))
        assert back.inf_support == law.inf_support
        assert abs(back.quantile(0.37) - law.quantile(0.37)) < 1e-12


def test_explicit_homogeneous():
    env = build_environment({"kind": "explicit", "values": [1.0] * 21}, (-10, 10))
    assert env.c == 1.0
    assert all(env.value(x) == 1.0 for x in range(-10, 11))


def test_environment_rejects_bad_alpha():
    with pytest.raises(EnvironmentError_):
        Environment(window=(0, 1), alpha=np.array([0.0, 1.0]), c=0.0)
    with pytest.raises(EnvironmentError_):
        Environment(window=(0, 1), alpha=np.array([0.5, 1.0]), c=0.9)


def test_deterministic_defect_sites_kappa2():
    sites = deterministic_defect_sites(2.0, -10, 10)
    assert set(sites) == {-9, -4, -1, 0, 1, 4, 9}
    assert sites[4] == 2 and sites[-4] == -2 and sites[0] == 0


def test_iid_frequency():
    env = build_environment({"kind": "iid", "q0": TWO_ATOM.to_json()},
                            (0, 10 ** 5 - 1), seed=3)
    freq = float(np.mean(env.alpha == 0.6))
    assert abs(freq - 0.5) < 0.01


def test_iid_deterministic_in_seed():
    spec = {"kind": "iid", "q0": TWO_ATOM.to_json()}
    a = build_environment(spec, (-50, 50), seed=9)
    b = build_environment(spec, (-50, 50), seed=9)
    c = build_environment(spec, (-50, 50), seed=10)
    assert np.array_equal(a.alpha, b.alpha)
    assert not np.array_equal(a.alpha, c.alpha)


def test_environment_json_roundtrip(tmp_path):
    env = build_environment({"kind": "iid", "q0": TWO_ATOM.to_json()}, (-5, 5), seed=1)
    path = tmp_path / "env.json"
    env.dump(path)
    back = Environment.load(path)
    assert back.window == env.window
    assert np.array_equal(back.alpha, env.alpha)
    assert back.c == env.c


def test_empirical_disorder_trivial():
    env = build_environment({"kind": "explicit", "values": [1.0] * 201}, (-100, 100))
    vals, wts = empirical_disorder(env, 100, "right")
    assert list(vals) == [1.0] and list(wts) == [1.0]


def test_empirical_disorder_converges_iid():
    env = build_environment({"kind": "iid", "q0": TWO_ATOM.to_json()},
                            (0, 10 ** 5), seed=5)
    vals, wts = empirical_disorder(env, 10 ** 5, "right")
    assert tv_to_law(vals, wts, TWO_ATOM) <= 0.02


def test_empirical_disorder_deterministic_trend():
    law = DisorderLaw(kind="atoms", atoms=((0.6, 0.25), (0.8, 0.25), (0.9, 0.25), (1.0, 0.25)))
    env = build_environment({"kind": "deterministic", "q0": law.to_json(),
                             "kappa": 2.0, "c": 0.5}, (0, 10 ** 5), seed=0)
    tvs = []
    for n in (10 ** 3, 10 ** 4, 10 ** 5):
        vals, wts = empirical_disorder(env, n, "right")
        # defect sites carry off-law values; fold them in as-is
        tvs.append(tv_to_law(vals, wts, law))
    assert tvs[0] >= tvs[1] >= tvs[2]
    assert tvs[2] < 0.02


def test_deterministic_defects_get_defect_values():
    law = TWO_ATOM
    env = build_environment({"kind": "deterministic", "q0": law.to_json(),
                             "kappa": 2.0, "c": 0.5}, (-10, 10), seed=0)
    for x, n in deterministic_defect_sites(2.0, -10, 10).items():
        assert env.value(x) == pytest.approx(min(1.0, 0.5 + 1.0 / (abs(n) + 2)))
    # non-defect sites take law values
    assert env.value(2) in (0.6, 1.0)


def test_defect_bounds_trivial():
    env = build_environment({"kind": "explicit", "values": [1.0] * 21}, (-10, 10))
    db = defect_bounds(env, 0.1)
    assert db.A_eps == 0 and db.a_eps == 0


def test_defect_bounds_slow_site():
    vals = [1.0] * 21
    vals[10] = 0.5
    env = build_environment({"kind": "explicit", "values": vals, "c": 0.5}, (-10, 10))
    db = defect_bounds(env, 0.1)
    assert db.A_eps == 0 and db.a_eps == 0


def test_defect_bounds_sentinels():
    env = build_environment({"kind": "explicit", "values": [1.0] * 21, "c": 0.4}, (-10, 10))
    db = defect_bounds(env, 0.1)
    assert db.A_eps == -math.inf and db.a_eps == math.inf


@given(st.floats(min_value=0.01, max_value=0.2), st.floats(min_value=0.2, max_value=0.6))
@settings(max_examples=30, deadline=None)
def test_defect_bounds_monotone_in_eps(e1, e2):
    law = TWO_ATOM
    env = build_environment({"kind": "deterministic", "q0": law.to_json(),
                             "kappa": 1.8, "c": 0.5}, (-200, 200), seed=0)
    lo, hi = sorted([e1, e2])
    d_lo, d_hi = defect_bounds(env, lo), defect_bounds(env, hi)
    assert d_lo.A_eps <= d_hi.A_eps
    assert d_lo.a_eps >= d_hi.a_eps
