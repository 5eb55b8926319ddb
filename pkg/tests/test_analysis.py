import functools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import disc
from convcool.analysis import (RateTable, SweepPoint, compute_rates, divergence_norm,
                               rate_invariance_check, scale_solution, sweep_point)
from convcool.assembly import interpolate_vector
from convcool.optimizer import AlgorithmConfig, cost, optimality_residual, run_algorithm
from convcool.sources import example_source

GAMMA = 8.5e-7


@functools.lru_cache(maxsize=None)
def solve(kappa, gamma, n=16):
    r = run_algorithm(disc(n), AlgorithmConfig(kappa=kappa, gamma=gamma, n1=5), example_source(1))
    assert r.converged
    return r


def test_scale_identity_and_errors():
    s = solve(1.0, GAMMA).state
    t = scale_solution(s, 1.0)
    for k in "Tqvp":
        assert np.array_equal(getattr(s, k), getattr(t, k))
    for bad in (0.0, -2.0):
        with pytest.raises(ValueError):
            scale_solution(s, bad)


@pytest.mark.parametrize("kappa", [0.5, 2.0])
def test_scaled_solution_satisfies_system(kappa):
    d = disc(16)
    s = scale_solution(solve(1.0, GAMMA).state, kappa)
    assert (s.kappa, s.gamma) == (kappa, GAMMA / kappa**4)
    f = example_source(1)
    scale = np.linalg.norm(d.load(f))
    assert max(optimality_residual(d, s, f)) <= 1e-8 * scale


@pytest.mark.parametrize("kappa", [0.5, 2.0])
def test_scaling_matches_direct_solve(kappa):
    base = solve(1.0, GAMMA)
    direct = solve(kappa, GAMMA / kappa**4)
    s = scale_solution(base.state, kappa)
    for k in "Tqvp":
        a, b = getattr(s, k), getattr(direct.state, k)
        assert np.linalg.norm(a - b) <= 1e-7 * np.linalg.norm(b), k
    assert direct.J / base.J == pytest.approx(kappa**-2, rel=1e-9)
    assert cost(disc(16), s)[0] / base.J == pytest.approx(kappa**-2, rel=1e-12)


def test_rates_power_law_and_constant():
    g = np.geomspace(1e-7, 1e-5, 5)
    t = compute_rates([(gi, 3 * gi, 2 * gi, gi) for gi in g])
    assert np.allclose(t.column("r_J")[:-1], 1.0, atol=1e-12)
    assert t.rows[-1].r_J is None and t.rows[-1].r_T is None and t.rows[-1].r_v is None
    t = compute_rates([(gi, 0.04, 0.1, 1e-3) for gi in g])
    assert np.allclose(t.r_J, 0.0, atol=1e-12)


def test_rates_sorted_and_left_attached():
    t = compute_rates([(4.0, 16.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0), (2.0, 4.0, 1.0, 1.0)])
    assert [r.gamma for r in t.rows] == [1.0, 2.0, 4.0]
    assert t.rows[0].r_J == pytest.approx(2.0)


def test_rates_input_errors():
    with pytest.raises(ValueError):
        compute_rates([])
    with pytest.raises(ValueError):
        compute_rates([(1.0, 0.0, 1.0, 1.0), (2.0, 1.0, 1.0, 1.0)])
    with pytest.raises(ValueError):
        compute_rates([(1.0, 1.0, -1.0, 1.0), (2.0, 1.0, 1.0, 1.0)])
    with pytest.raises(ValueError):
        compute_rates([(-1.0, 1.0, 1.0, 1.0), (2.0, 1.0, 1.0, 1.0)])
    with pytest.raises(ValueError):
        compute_rates([(1.0, 1.0, 1.0, 1.0), (1.0, 2.0, 1.0, 1.0)])


def test_zero_control_energy_gives_nan_rate():
    t = compute_rates([(1.0, 1.0, 1.0, 0.0), (2.0, 1.0, 1.0, 1.0)])
    assert math.isnan(t.rows[0].r_v)


positive = st.floats(1e-3, 1e3)


@given(st.lists(st.tuples(positive, positive, positive), min_size=2, max_size=6),
       st.floats(0.25, 4.0))
def test_rates_invariant_under_kappa_rescaling(vals, kappa):
    gam = np.cumsum([1.0 + i for i in range(len(vals))]) * 1e-7
    ref = [(g, J, t, e) for g, (J, t, e) in zip(gam, vals)]
    sca = [(g / kappa**4, J / kappa**2, t / kappa, e / kappa**2) for g, J, t, e in ref]
    a, b = compute_rates(ref), compute_rates(sca)
    for name in ("r_J", "r_T", "r_v"):
        assert np.allclose(a.column(name)[:-1], b.column(name)[:-1], atol=1e-9)
    assert rate_invariance_check(ref, sca, kappa)


def test_rate_invariance_check_examples():
    ref = [(1e-6, 0.03, 0.2, 1e-3), (2e-6, 0.035, 0.22, 8e-4), (4e-6, 0.04, 0.25, 5e-4)]
    assert rate_invariance_check(ref, ref, 1.0)
    bumped = [list(r) for r in ref]
    bumped[1][1] *= 1.01
    assert not rate_invariance_check(ref, bumped, 1.0)
    with pytest.raises(ValueError):
        rate_invariance_check(ref, ref, 2.0)  # grid not rescaled
    with pytest.raises(ValueError):
        rate_invariance_check(ref, ref[:2], 1.0)


def test_rate_invariance_from_direct_solves():
    d = disc(16)
    kappa = 2.0
    gammas = (GAMMA, 2 * GAMMA)
    ref = [sweep_point(d, solve(1.0, g).state) for g in gammas]
    sca = [sweep_point(d, solve(kappa, g / kappa**4).state) for g in gammas]
    assert rate_invariance_check(ref, sca, kappa)


def test_sweep_point_consistent_with_cost():
    d = disc(16)
    r = solve(1.0, GAMMA)
    p = sweep_point(d, r.state)
    J, var, ctl = cost(d, r.state)
    assert p.J == pytest.approx(J, rel=1e-14)
    assert p.variance_norm == pytest.approx(math.sqrt(2 * var), rel=1e-14)
    assert p.control_energy == pytest.approx(2 * ctl, rel=1e-14)
    assert isinstance(compute_rates([p, SweepPoint(2 * p.gamma, p.J, p.variance_norm, 1.0)]),
                      RateTable)


def test_divergence_norm_examples():
    d = disc(8)
    assert divergence_norm(d, d.zeros_velocity()) == 0.0
    rot = interpolate_vector(d.dofmap, lambda x, y: (y, -x))
    assert divergence_norm(d, rot) <= 1e-12
    radial = interpolate_vector(d.dofmap, lambda x, y: (x, y))
    assert divergence_norm(d, radial) == pytest.approx(2.0, rel=1e-12)  # |div| = 2 on the unit square
    v = solve(1.0, GAMMA).state.v
    assert divergence_norm(disc(16), v) <= 1e-9
