import math

import numpy as np
import pytest

from latticewave.analysis import (
    DiagnosticsReport,
    FanField,
    TrajectoryField,
    bound_monitor,
    d_compatibility,
    gronwall_u_bound,
    gronwall_v_bound,
    histogram_of,
    identity_sides,
    integral_identity_residual,
    light_cone_experiment,
    norms,
    oscillation_amplitude,
    sample_field,
    sup_comparison,
    tv_distance,
    young_histogram,
)
from latticewave.continuum import solve_riemann
from latticewave.integrator import IntegratorParams, run
from latticewave.lattice import DIRICHLET, PERIODIC, ChainState, build_riemann, discretize
from latticewave.potentials import PowerLaw, Quadratic
from latticewave.spectral import evolve_periodic_gaps

SEXTIC = PowerLaw(6)


def _dir_state(N, U, V):
    return ChainState(N=N, t=0.0, boundary=DIRICHLET, U=np.asarray(U, float), V=np.asarray(V, float))


def test_sample_field_uniform():
    s = discretize(build_riemann(1.4, 1.4), 8)
    xs = np.linspace(-1, 1, 33)
    assert np.allclose(sample_field(s, "dx_phiN", xs), 1.4)
    assert np.allclose(sample_field(s, "phiN", xs), 1.4 * xs, atol=1e-14)
    assert np.all(sample_field(s, "zetaN", xs) == 0)
    assert sample_field(s, "phiN", 2.0) == pytest.approx(1.4)


def test_sample_field_linear_velocity():
    N = 8
    j = np.arange(-N, N + 1)
    V = j / N
    V[0] = V[-1] = 0.0
    s = _dir_state(N, np.ones(2 * N), V)
    xs = np.linspace(-0.8, 0.8, 41)
    # zeta interpolates linearly, xi is the left-cell staircase
    assert np.allclose(sample_field(s, "zetaN", xs), xs, atol=1e-14)
    xi = sample_field(s, "xiN", xs)
    assert np.allclose(xi, np.floor(N * xs) / N)
    assert np.max(np.abs(xi - xs)) <= 1 / N
    with pytest.raises(ValueError):
        sample_field(s, "bogus", 0.0)


def test_sample_field_periodic_wraps():
    s = ChainState(N=4, t=0, boundary=PERIODIC, U=np.ones(8), V=np.arange(8.0))
    assert sample_field(s, "zetaN", 1.0) == 0.0  # V wraps to V_{-N}
    assert sample_field(s, "phiN", 1.0) - sample_field(s, "phiN", -1.0) == pytest.approx(2.0)


def test_sup_comparison_initial_and_norms_self():
    d = build_riemann(1, 2)
    s = discretize(d, 32)
    tr = run(s, SEXTIC, IntegratorParams(dt=1e-3, snapshot_times=[0.0, 0.05]), 0.05)
    f = solve_riemann(SEXTIC, 1, 2)
    a, b = sup_comparison(tr, f, 0.0)
    assert a <= 1e-14 and b == 0.0
    tf = TrajectoryField(tr)
    assert norms(tf, tf, [0.0, 0.05], 32) == {"L2": 0.0, "H1": 0.0, "L2_dx": 0.0}
    ff = FanField(f, -1.0)
    n = norms(tf, ff, [0.05], 32)
    assert 0 < n["L2"] <= n["H1"]


def test_sup_comparison_improves_with_N_linear():
    from latticewave.continuum import LinearWaveSolution
    from latticewave.lattice import build_boundary_riemann, smooth_ramp

    d = build_boundary_riemann(1, 2, smooth_ramp(1, 2))
    lin = LinearWaveSolution(d)
    errs = []
    for N in (32, 128):
        tr = run(discretize(d, N), Quadratic(), IntegratorParams(dt=1e-2, snapshot_times=[0.2]), 0.2)
        errs.append(sup_comparison(tr, lin, 0.2, d.phi_l))
    assert errs[1][0] < errs[0][0] and errs[1][1] < errs[0][1]


def test_gronwall_bounds():
    assert gronwall_u_bound(2.0, 1.0, 0, 0.0) == 2.0
    assert gronwall_u_bound(1.0, 1.0, 3, 0.0) == 0.0
    # j = 1: M a^2 / 2 e^a with a = 2 t sqrt K
    a = 2 * 0.5 * 2.0
    assert float(gronwall_u_bound(1.0, 4.0, 1, 0.5)) == pytest.approx(a * a / 2 * math.exp(a))
    big = gronwall_u_bound(1.0, 1.0, 400, 1.0)
    assert 0 < big < np.longdouble("1e-600")
    assert gronwall_v_bound(1.0, 1.0, 1, 0.0) == 0.0


def test_light_cone_identical_chains():
    N = 16
    s = discretize(build_riemann(1, 1), N)
    r = light_cone_experiment(SEXTIC, s, s, 0.5, 0.1, IntegratorParams(dt=1e-2), origin=0, t_max=1.0)
    assert r.sup_NU_gap == 0 and r.sup_V_gap == 0 and r.M == 0.0
    assert r.min_margin_U == 0.0 and r.K == pytest.approx(5.0)
    assert r.c == pytest.approx(math.exp(2) * math.sqrt(5.0))


def test_light_cone_small_outside_and_bounded():
    N = 64
    s = discretize(build_riemann(1, 1), N)
    U = np.array(s.U)
    U[N] += 1e-3
    U[N - 1] -= 1e-3
    p = _dir_state(N, U, s.V)
    r = light_cone_experiment(SEXTIC, s, p, 0.5, 0.01, IntegratorParams(dt=1e-3), origin=0, j_max=10, t_max=2.0)
    assert 0 < r.sup_NU_gap < 1e-12
    assert r.min_margin_U >= 0 and r.min_margin_V >= 0
    assert 0 < r.max_ratio_U <= 1


def test_light_cone_rejects_support_in_region():
    N = 16
    s = discretize(build_riemann(1, 1), N)
    U = np.array(s.U)
    U[-1] += 0.1
    with pytest.raises(ValueError):
        light_cone_experiment(SEXTIC, s, _dir_state(N, U, s.V), 0.5, 0.1, IntegratorParams(dt=1e-2))
    per = ChainState(N=N, t=0, boundary=PERIODIC, U=np.ones(2 * N), V=np.zeros(2 * N))
    with pytest.raises(ValueError):
        light_cone_experiment(SEXTIC, per, per, 0.5, 0.1, IntegratorParams(dt=1e-2))


def test_oscillation_amplitude():
    s = discretize(build_riemann(1.2, 1.2), 32)
    out = oscillation_amplitude(s, (-0.5, 0.5))
    assert out["peak_to_peak"] == 0.0 and out["cells"] == 32
    U = 1 + 0.1 * (-1.0) ** np.arange(64)
    out = oscillation_amplitude(_dir_state(32, U, np.zeros(65)), (-0.5, 0.5))
    assert out["peak_to_peak"] == pytest.approx(0.2) and out["dominant_wavelength_cells"] == pytest.approx(2.0, rel=0.05)
    with pytest.raises(ValueError):
        oscillation_amplitude(s, (0.0, 0.1))


def test_histogram_constant_and_tv():
    h = histogram_of(np.full(200, 0.7), bins=10)
    assert h.occupied_bins() == 1 and h.iqr == 0.0
    assert tv_distance(h, h) == 0.0
    rng = np.random.default_rng(0)
    a = histogram_of(0.5 * rng.random(1000), 10, (0, 1))
    b = histogram_of(0.5 + 0.5 * rng.random(1000), 10, (0, 1))
    assert tv_distance(a, b) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        tv_distance(a, histogram_of(rng.random(500), 5, (0, 1)))
    with pytest.raises(ValueError):
        histogram_of(np.ones(10))


def test_young_histogram_spectral_vs_verlet():
    # quadratic periodic chain: Verlet and exact evolution give matching gap statistics
    N = 256
    rng = np.random.default_rng(4)
    U0 = 1 + 0.2 * rng.standard_normal(2 * N)
    V0 = 0.2 * rng.standard_normal(2 * N)
    U0 -= U0.mean() - 1
    V0 -= V0.mean()
    s = ChainState(N=N, t=0.0, boundary=PERIODIC, U=U0, V=V0)
    taus = np.linspace(0.01, 0.04, 7)
    tr = run(s, Quadratic(), IntegratorParams(dt=5e-3, snapshot_times=list(taus)), taus[-1])
    h_v = young_histogram(tr, (0.01, 0.04, -1, 1), bins=30, value_range=(0, 2))
    exact = np.concatenate([evolve_periodic_gaps(U0, V0, N * t)[0] for t in taus])
    h_e = histogram_of(exact, 30, (0, 2))
    assert tv_distance(h_v, h_e) <= 0.05


def test_bound_monitor_constant():
    s = discretize(build_riemann(0.9, 0.9), 8)
    tr = run(s, SEXTIC, IntegratorParams(dt=1e-2), 0.1)
    b = bound_monitor(tr)
    assert b.u_min == pytest.approx(0.9) and b.u_max == pytest.approx(0.9) and b.width == pytest.approx(0.0)


def test_identity_constant_and_validation():
    s = discretize(build_riemann(1.1, 1.1), 16)
    tr = run(s, SEXTIC, IntegratorParams(dt=1e-2, snapshot_times=list(np.linspace(0, 0.2, 9))), 0.2)
    assert identity_sides(tr, SEXTIC, 0.2) == (0.0, 0.0)
    assert integral_identity_residual(tr, SEXTIC, 0.2) == 0.0
    short = run(s, SEXTIC, IntegratorParams(dt=1e-2, snapshot_times=[0.1, 0.2]), 0.2)
    with pytest.raises(ValueError):
        identity_sides(short, SEXTIC, 0.2)


def test_identity_holds_for_riemann_run():
    s = discretize(build_riemann(1, 2), 32)
    ts = list(np.linspace(0, 0.1, 201))
    tr = run(s, SEXTIC, IntegratorParams(dt=1e-3, snapshot_times=ts), 0.1)
    a, b = identity_sides(tr, SEXTIC, 0.1)
    assert abs(a) > 1e-3 and abs(a - b) <= 1e-3 * abs(a)


def test_d_compatibility_riemann():
    d = build_riemann(1, 2)
    s = discretize(d, 32)
    tr = run(s, SEXTIC, IntegratorParams(dt=1e-3, snapshot_times=[0.01]), 0.01)
    out = d_compatibility(tr, d, 0.1)
    assert out["sup_dx"] <= 1e-12 and out["sup_dtau"] <= 1e-12


def test_diagnostics_report_csv(tmp_path):
    r = DiagnosticsReport("demo")
    r.add(8, "x", 0.1)
    r.add(None, "flag", True)
    r.add(16, "n", np.int64(3))
    r.add(16, "big", np.longdouble("1e-400"))
    r.summary = {"a": np.float64(1.5), "b": [np.int64(1)]}
    r.write_csv(tmp_path / "s.csv")
    r.write_json(tmp_path / "s.json")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "experiment,N,quantity,value"
    assert lines[1] == "demo,8,x,0.10000000000000001"
    assert lines[2] == "demo,,flag,true" and lines[3] == "demo,16,n,3"
    assert "e-400" in lines[4]
    assert '"a": 1.5' in (tmp_path / "s.json").read_text()
