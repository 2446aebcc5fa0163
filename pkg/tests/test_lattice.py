import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticewave.lattice import (
    DIRICHLET,
    PERIODIC,
    ChainState,
    InitialData,
    Piece,
    Profile,
    build_boundary_riemann,
    build_riemann,
    bump,
    delta_gap_state,
    discretize,
    gap_sum_defect,
    smooth_ramp,
)


def test_build_riemann_step():
    d = build_riemann(1, 2)
    assert d.phi0_x(-0.5) == 1 and d.phi0_x(0.0) == 2 and d.phi0_x(0.5) == 2
    assert d.phi_r - d.phi_l == 3
    assert not d.whole_line_emulation


def test_build_riemann_constant_and_velocity_flag():
    d = build_riemann(1.5, 1.5)
    assert d.gap_hull() == (1.5, 1.5)
    assert build_riemann(0, 1, 0, 1.0).whole_line_emulation
    with pytest.raises(ValueError):
        build_riemann(np.inf, 1)


def test_boundary_riemann_default_ramp_compatible():
    d = build_boundary_riemann(1, 2)
    assert d.phi0_x.integral() == pytest.approx(d.phi_r - d.phi_l, abs=1e-12)
    assert d.phi0_x(-0.75) == 1 and d.phi0_x(0.75) == 2
    assert d.phi0_x(0.0) == pytest.approx(1.5)


def test_boundary_riemann_smooth_ramp():
    d = build_boundary_riemann(0, 1, smooth_ramp(0, 1))
    assert d.phi0_tau(-1.0) == 0 and d.phi0_tau(1.0) == 0
    assert max(d.compatibility_defects().values()) < 1e-10
    xs = np.linspace(-0.5, 0.5, 101)
    assert np.all(np.diff(d.phi0_x(xs)) >= 0)


def test_boundary_riemann_velocity_bump():
    d = build_boundary_riemann(1, 1, interior_tau=bump(0.3))
    assert d.phi0_x.integral() == pytest.approx(2.0)
    assert d.phi_r - d.phi_l == pytest.approx(2.0)
    assert d.phi0_tau(0.0) == pytest.approx(0.3)


def test_boundary_riemann_rejects_outside_pieces():
    pc = Piece(-0.7, 0.5, lambda x: 1.0 + 0 * np.asarray(x))
    with pytest.raises(ValueError):
        build_boundary_riemann(1, 1, [pc])


def test_incompatible_dirichlet_rejected():
    with pytest.raises(ValueError, match="compatibility"):
        InitialData(Profile.constant(1.0), Profile.constant(0.0), 0.0, 5.0)
    with pytest.raises(ValueError):
        InitialData(Profile.constant(1.0), Profile.constant(1.0), 0.0, 2.0, PERIODIC)


def test_profile_partition_checks():
    with pytest.raises(ValueError):
        Profile.from_pieces([Piece(-1.0, 0.5, lambda x: x)])
    with pytest.raises(ValueError):
        Profile.from_pieces([Piece(-1.0, 0.0, lambda x: x), Piece(0.1, 1.0, lambda x: x)])


def test_profile_from_config_kinds():
    prof = Profile.from_config([
        {"interval": [-1, -0.5], "kind": "constant", "params": 1.0},
        {"interval": [-0.5, 0.0], "kind": "linear", "params": [2.0, 2.0]},
        {"interval": [0.0, 0.5], "kind": "polynomial", "params": [1.0, 0.0, 4.0]},
        {"interval": [0.5, 1.0], "kind": "expression", "params": "2 + sin(pi*x)"},
    ])
    assert prof(-0.75) == 1.0
    assert prof(0.25) == pytest.approx(1.25)
    assert prof(0.75) == pytest.approx(2 + np.sin(np.pi * 0.75))
    assert prof.primitive(1.0) == pytest.approx(prof.integral())


def test_expression_rejects_unsafe_names():
    with pytest.raises(ValueError):
        Profile.from_config([{"interval": [-1, 1], "kind": "expression", "params": "__import__('os')"}])


def test_discretize_riemann_small():
    s = discretize(build_riemann(1, 2), 2)
    assert list(s.U) == [1, 1, 2, 2]
    assert list(s.V) == [0, 0, 0, 0, 0]
    assert s.t == 0
    assert s.positions()[0] == 2 * -1 and s.positions()[-1] == 2 * 2


def test_discretize_constant():
    s = discretize(build_riemann(0.7, 0.7), 16)
    assert np.all(s.U == 0.7) and np.all(s.V == 0)


def test_delta_gap_state():
    s = delta_gap_state(4)
    assert s.boundary == PERIODIC and s.U[4] == 1 and s.U.sum() == 1
    assert s.V.size == 8


def test_chainstate_shape_checks_and_immutability():
    with pytest.raises(ValueError):
        ChainState(N=2, t=0, boundary=DIRICHLET, U=np.zeros(4), V=np.zeros(4))
    s = ChainState(N=2, t=0, boundary=PERIODIC, U=np.ones(4), V=np.zeros(4))
    with pytest.raises(ValueError):
        s.U[0] = 3.0
    assert np.allclose(s.Z(), 0)


@settings(max_examples=50, deadline=None)
@given(ul=st.floats(0.1, 5), ur=st.floats(0.1, 5), N=st.integers(2, 300))
def test_riemann_gap_sum_exact(ul, ur, N):
    d = build_riemann(ul, ur)
    s = discretize(d, N)
    assert gap_sum_defect(s, d) == pytest.approx(0.0, abs=1e-9 * N * (ul + ur))


@settings(max_examples=30, deadline=None)
@given(N=st.integers(2, 200), a=st.floats(0.1, 2.0))
def test_periodic_antisymmetric_velocity_sums_to_zero(N, a):
    pt = Profile.from_config([{"interval": [-1, 1], "kind": "expression", "params": f"{a}*sin(pi*x)"}])
    d = InitialData(Profile.constant(1.0), pt, 0.0, 2.0, PERIODIC)
    s = discretize(d, N)
    assert abs(s.V.sum()) < 1e-12 * N


def test_discretize_rejects_small_N():
    with pytest.raises(ValueError):
        discretize(build_riemann(1, 2), 1)
