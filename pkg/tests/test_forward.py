import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import disc
from convcool.assembly import SourceTerm, interpolate
from convcool.forward import (initial_guess, solve_adjoint, solve_linearized_state,
                              solve_state, solve_stokes)
from convcool.optimizer import random_divfree_direction
from convcool.sources import example_source

PI = np.pi
ZERO = SourceTerm("zero", lambda x, y: 0 * x)


def residual(A, x, b, free):
    r = (A @ x - b)[free]
    return np.linalg.norm(r) / max(np.linalg.norm(b[free]), 1e-300)


def test_state_zero_source():
    d = disc(8)
    assert not np.any(solve_state(d, d.zeros_velocity(), ZERO))


def test_state_residual_and_boundary(rng):
    d = disc(16)
    v = 20 * random_divfree_direction(d, rng)
    f = example_source(3)
    T = solve_state(d, v, f, kappa=0.7)
    A = 0.7 * d.stiffness + d.convection(v)
    assert residual(A, T, d.load(f), d.free_p2) <= 1e-10
    assert not np.any(T[d.dofmap.dirichlet_p2])


def test_state_max_example1():
    d = disc(64)
    T = solve_state(d, d.zeros_velocity(), example_source(1))
    assert T[: d.dofmap.p1_count].max() == pytest.approx(1.0, abs=0.01)


def test_state_max_example3():
    d = disc(64)
    T = solve_state(d, d.zeros_velocity(), example_source(3))
    assert T[: d.dofmap.p1_count].max() == pytest.approx(0.77, abs=0.005)


def test_state_warns_for_non_divfree_velocity():
    d = disc(8)
    v = interpolate(d.dofmap, lambda x, y: x * (1 - x) * y * (1 - y))
    w = np.column_stack([v, 0 * v]).ravel()  # (b, 0) with b not constant in x
    with pytest.warns(RuntimeWarning):
        solve_state(d, w, example_source(1))


def test_state_rejects_bad_kappa():
    d = disc(4)
    with pytest.raises(ValueError):
        solve_state(d, d.zeros_velocity(), example_source(1), kappa=0)


def test_maximum_principle_sanity():
    # P2 has no discrete maximum principle; the undershoot is pinned on n=32
    d = disc(32)
    T = solve_state(d, d.zeros_velocity(), example_source(1))
    assert T.min() >= -1e-8


def test_adjoint_constant_temperature():
    d = disc(8)
    q = solve_adjoint(d, d.zeros_velocity(), np.full(d.dofmap.p2_count, 2.0))
    assert np.abs(q).max() <= 1e-14


def test_adjoint_residual(rng):
    d = disc(16)
    v = 20 * random_divfree_direction(d, rng)
    T = solve_state(d, v, example_source(2))
    q = solve_adjoint(d, v, T)
    rhs = d.mass @ d.deviation(T)
    assert residual(d.stiffness - d.convection(v), q, rhs, d.free_p2) <= 1e-10


def test_adjoint_manufactured():
    # T = 2 pi^2 sin sin has mean 8, so -lap q = T - 8 gives q = sin sin - 8 w
    # with -lap w = 1; w comes from an independent state solve
    d = disc(32)
    T = interpolate(d.dofmap, lambda x, y: 2 * PI**2 * np.sin(PI * x) * np.sin(PI * y))
    q = solve_adjoint(d, d.zeros_velocity(), T)
    one = SourceTerm("one", lambda x, y: 1 + 0 * x)
    w = solve_state(d, d.zeros_velocity(), one)
    exact = interpolate(d.dofmap, lambda x, y: np.sin(PI * x) * np.sin(PI * y)) - 8 * w
    assert np.abs(q - exact).max() <= 2e-5


def test_adjoint_symmetric_under_swap():
    d = disc(16)
    T = solve_state(d, d.zeros_velocity(), example_source(1))
    q = solve_adjoint(d, d.zeros_velocity(), T)
    nodes = d.dofmap.p2_nodes
    key = {tuple(np.round(p * 32).astype(int)): i for i, p in enumerate(nodes)}
    swap = np.array([key[(b, a)] for a, b in np.round(nodes * 32).astype(int)])
    assert np.abs(q - q[swap]).max() <= 1e-10


def test_linearized_state_trivial_cases(rng):
    d = disc(8)
    v = random_divfree_direction(d, rng)
    h = random_divfree_direction(d, rng)
    T = solve_state(d, v, example_source(1))
    assert not np.any(solve_linearized_state(d, v, T, np.zeros_like(h)))
    z = solve_linearized_state(d, v, np.full(d.dofmap.p2_count, 1.0), h)
    assert np.abs(z).max() <= 1e-13


def test_linearized_state_matches_central_difference(rng):
    d = disc(16)
    f = example_source(1)
    v = 20 * random_divfree_direction(d, rng)
    h = random_divfree_direction(d, rng)
    T = solve_state(d, v, f)
    z = solve_linearized_state(d, v, T, h)
    eps = 1e-4
    fd = (solve_state(d, v + eps * h, f) - solve_state(d, v - eps * h, f)) / (2 * eps)
    err = np.sqrt((z - fd) @ d.mass @ (z - fd))
    assert err <= 1e-5 * np.sqrt(z @ d.mass @ z)


def test_stokes_zero_adjoint():
    d = disc(8)
    T = solve_state(d, d.zeros_velocity(), example_source(1))
    v, p = solve_stokes(d, np.zeros_like(T), T, 1e-6)
    assert not np.any(v) and not np.any(p)


def test_stokes_gamma_scaling():
    d = disc(16)
    st0 = initial_guess(d, example_source(2))
    v1, p1 = solve_stokes(d, st0.q, st0.T, 1e-6)
    v2, p2 = solve_stokes(d, st0.q, st0.T, 2e-6)
    assert np.abs(2 * v2 - v1).max() <= 1e-12 * np.abs(v1).max()
    assert np.abs(p2 - p1).max() <= 1e-10 * np.abs(p1).max()
    assert d.divergence_norm(v1) <= 1e-9 * np.abs(v1).max()


@pytest.mark.parametrize("gamma", [1e-10, 1e-3, 1e4])
def test_stokes_residual_across_gamma_range(gamma):
    d = disc(16)
    st0 = initial_guess(d, example_source(1))
    v, p = solve_stokes(d, st0.q, st0.T, gamma)
    g = d.coupling(st0.q, st0.T)
    fv = d.free_velocity
    r = (gamma * (d.laplacian @ v) - d.divergence.T @ p - g)[fv]
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(g[fv])
    assert abs(d.mass_row_p1 @ p) <= 1e-12 * max(np.abs(p).max(), 1.0)


@pytest.mark.parametrize("gamma", [0.0, -1.0, float("nan")])
def test_stokes_rejects_bad_gamma(gamma):
    d = disc(4)
    with pytest.raises(ValueError):
        solve_stokes(d, d.zeros_scalar(), d.zeros_scalar(), gamma)


def test_stokes_first_picard_velocity_consistent_across_meshes():
    # first Picard velocity for Example 1 (four-cell circulation), n=32 vs n=64
    vmax = []
    for n in (32, 64):
        d = disc(n)
        s = initial_guess(d, example_source(1))
        T = solve_state(d, s.v, example_source(1))
        q = solve_adjoint(d, s.v, T)
        v, _ = solve_stokes(d, q, T, 8.5e-7)
        vmax.append(np.abs(v).max())
        vel = v.reshape(-1, 2)
        nodes = d.dofmap.p2_nodes
        # mirror symmetry across the diagonal, shared by the data and the mesh
        key = {tuple(np.round(p * 2 * n).astype(int)): i for i, p in enumerate(nodes)}
        swap = np.array([key[(b, a)] for a, b in np.round(nodes * 2 * n).astype(int)])
        assert np.abs(vel[swap][:, ::-1] - vel).max() <= 1e-8 * vmax[-1]
        # four cells: the horizontal velocity changes sign across y = 1/2 and x = 1/2
        i = int(np.argmin(np.abs(nodes - (0.5, 0.25)).sum(axis=1)))
        j = int(np.argmin(np.abs(nodes - (0.5, 0.75)).sum(axis=1)))
        assert vel[i, 0] * vel[j, 0] < 0
    assert vmax[0] == pytest.approx(vmax[1], rel=0.01)


def test_initial_guess():
    d = disc(8)
    s = initial_guess(d, ZERO)
    assert not any(np.any(getattr(s, k)) for k in "Tqvp")
    d = disc(64)
    for ex, target in [(1, 4.287e-2), (4, 1.29e-1)]:
        s = initial_guess(d, example_source(ex))
        DT = d.deviation(s.T)
        assert 0.5 * DT @ d.mass @ DT == pytest.approx(target, rel=0.01)


def test_skew_and_standard_state_agree_for_divfree_velocity(rng):
    # the two convection forms differ only through the residual divergence of v
    d, ds = disc(16), disc(16, skew=True)
    v = 20 * random_divfree_direction(d, rng)
    f = example_source(1)
    T, Ts = solve_state(d, v, f), solve_state(ds, v, f)
    assert np.abs(T - Ts).max() <= 1e-4 * np.abs(T).max()
    # inflate the divergence: the gap grows with it
    bump = interpolate(d.dofmap, lambda x, y: (x * (1 - x) * y * (1 - y)) ** 2)
    w = v + 5 * np.column_stack([bump, 0 * bump]).ravel()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        gap_w = np.abs(solve_state(d, w, f) - solve_state(ds, w, f)).max()
    assert gap_w > np.abs(T - Ts).max()


@given(st.integers(0, 2**32 - 1))
def test_transpose_identity(seed):
    # (A + C) and (A - C) are exact transposes under the skew option
    d = disc(4, skew=True)
    r = np.random.default_rng(seed)
    v = r.normal(size=d.dofmap.velocity_count)
    a, b = r.normal(size=(2, d.dofmap.p2_count))
    C = d.convection(v)
    lhs = b @ ((d.stiffness + C) @ a)
    rhs = a @ ((d.stiffness - C) @ b)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
