import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parawave.errors import CflViolation, TaylorSignViolation
from parawave.spectral import Field, Grid
from parawave.wavedyn import (
    TRAJECTORY_COLUMNS,
    WaveParams,
    WaveState,
    cfl_dt,
    compute_traces,
    good_unknowns,
    hamiltonian,
    linear_wave,
    mollify,
    rough_data,
    run_trajectory,
    step_rk4,
    steepness,
    symmetrized_energy,
    taylor_pressure,
    taylor_shape_derivative,
    taylor_symbols,
    write_trajectory_csv,
    zakharov_rhs,
)

KINDS = ("flat_bottom", "infinite_depth_truncation")


def wave(grid, k):
    return grid.from_function(lambda x, *r: np.cos(k * x)), grid.from_function(lambda x, *r: np.sin(k * x))


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 64)


@pytest.fixture(scope="module")
def state(grid):
    p = WaveParams(tol=1e-12)
    return WaveState(rough_data(grid, 3.0, 0.05, 11, 0), rough_data(grid, 3.0, 0.1, 11, 1), 0.0, p)


# --- rest and traces ---------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_rest_is_equilibrium(grid, kind):
    st_ = WaveState.rest(grid, WaveParams(bottom_kind=kind, g=9.81))
    deta, dpsi = zakharov_rhs(st_)
    assert deta.max_abs() == 0.0 and dpsi.max_abs() == 0.0
    tr = compute_traces(st_)
    assert tr.B.max_abs() == 0.0 and tr.V[0].max_abs() == 0.0
    assert np.abs(taylor_pressure(st_).values - 9.81).max() < 1e-12
    assert hamiltonian(st_) == 0.0


@pytest.mark.parametrize("kind", KINDS)
def test_traces_flat_surface(grid, kind):
    c, s = wave(grid, 3)
    st_ = WaveState(grid.zeros(), c, 0.0, WaveParams(bottom_kind=kind, tol=1e-12))
    tr = compute_traces(st_)
    lam = 3 * math.tanh(3.0) if kind == "flat_bottom" else 3.0
    assert np.abs(tr.B.values - lam * c.values).max() < 1e-8
    assert np.abs(tr.V[0].values + 3 * s.values).max() < 1e-12


def test_trace_identity(state):
    assert compute_traces(state).identity_residual(state) <= 1e-10


def test_trace_identity_2d():
    g = Grid(2, 32)
    st_ = WaveState(rough_data(g, 3.0, 0.05, 2, 0), rough_data(g, 3.0, 0.1, 2, 1))
    assert compute_traces(st_).identity_residual(st_) <= 1e-10


# --- Taylor coefficient ----------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_taylor_routes_agree(grid, kind):
    st_ = WaveState(rough_data(grid, 3.0, 0.05, 4, 0), rough_data(grid, 3.0, 0.1, 4, 1), 0.0, WaveParams(bottom_kind=kind, nz=48, tol=1e-12))
    a1, a2 = taylor_pressure(st_), taylor_shape_derivative(st_)
    assert np.abs(a1.values - a2.values).max() <= 1e-6
    assert a1.values.min() > 0.5


@pytest.mark.parametrize("kind", KINDS)
def test_taylor_quadratic_in_velocity(grid, kind):
    # eta = 0, psi = e cos x: a - g = O(e^2)
    c, _ = wave(grid, 2)
    eps = np.array([4e-2, 2e-2, 1e-2])
    dev = [np.abs(taylor_pressure(WaveState(grid.zeros(), c * e, 0.0, WaveParams(bottom_kind=kind))).values - 1).max() for e in eps]
    assert np.polyfit(np.log(eps), np.log(dev), 1)[0] == pytest.approx(2.0, abs=0.05)


# --- right-hand side ---------------------------------------------------------------------


def test_rhs_in_trace_form(state):
    # with the filter off: d_t psi = -g eta - |V|^2/2 - B V.grad eta + B^2/2, d_t eta = B - V.grad eta
    raw = WaveState(state.eta, state.psi, 0.0, WaveParams(dealias=False, tol=1e-12))
    deta, dpsi = zakharov_rhs(raw)
    tr = compute_traces(raw)
    B, V, ge = tr.B.values, tr.V[0].values, raw.eta.grad()[0].values
    assert np.abs(dpsi.values - (-raw.eta.values - 0.5 * V**2 - B * V * ge + 0.5 * B**2)).max() <= 1e-10
    e = B - V * ge
    assert np.abs(deta.values - (e - e.mean())).max() <= 1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_linearised_rhs(grid, kind):
    c, s = wave(grid, 2)
    A = 1e-6
    st_ = WaveState(c * A, s * A, 0.0, WaveParams(bottom_kind=kind, tol=1e-12))
    deta, dpsi = zakharov_rhs(st_)
    lam = 2 * math.tanh(2.0) if kind == "flat_bottom" else 2.0
    assert np.abs(deta.values - lam * A * s.values).max() <= 1e-3 * A
    assert np.abs(dpsi.values + A * c.values).max() <= 1e-3 * A


def test_rhs_mean_free_and_dealiased(state):
    deta, dpsi = zakharov_rhs(state)
    assert abs(deta.mean()) < 1e-15
    outside = ~state.grid.dealias_mask
    assert np.abs(deta.spectrum[outside]).max() < 1e-15 and np.abs(dpsi.spectrum[outside]).max() < 1e-15


def test_eps_laplacian_term(state):
    p = WaveParams(tol=1e-12)
    pe = WaveParams(tol=1e-12, eps=1e-2)
    d0 = zakharov_rhs(WaveState(state.eta, state.psi, 0.0, p))
    d1 = zakharov_rhs(WaveState(state.eta, state.psi, 0.0, pe))
    assert np.abs((d1[1] - d0[1]).values - 1e-2 * state.psi.laplacian().dealiased().values).max() < 1e-12


# --- stepping --------------------------------------------------------------------------------


def test_cfl(grid):
    dt = cfl_dt(grid, 1.0, 0.5)
    assert dt == pytest.approx(0.5 * math.sqrt(grid.dx / math.pi))
    with pytest.raises(CflViolation):
        step_rk4(WaveState.rest(grid), 1.01 * dt)


def test_taylor_monitor(grid):
    st_, _ = linear_wave(grid, 1, 0.01, WaveParams())
    step_rk4(st_, 0.01, taylor_floor=0.5)
    with pytest.raises(TaylorSignViolation) as exc:
        step_rk4(st_, 0.01, taylor_floor=2.0)
    assert exc.value.min_a < 2.0


def test_mean_conserved(state):
    new = step_rk4(state, cfl_dt(state.grid, 1.0))
    assert abs(new.eta.mean() - state.eta.mean()) < 1e-15


def test_linear_wave_energy_small_step(grid):
    st_, om = linear_wave(grid, 2, 1e-3, WaveParams(tol=1e-12))
    H0 = hamiltonian(st_)
    assert H0 == pytest.approx(0.5 * 1e-6 / 2 * 2, rel=1e-6)
    new, rows = run_trajectory(st_, cfl_dt(grid, 1.0), 10, with_energy=False)
    assert abs(rows[-1]["H"] - H0) <= 1e-6 * H0


def test_eps_damps_energy(grid):
    st0, _ = linear_wave(grid, 4, 1e-3, WaveParams())
    st1, _ = linear_wave(grid, 4, 1e-3, WaveParams(eps=1e-2))
    dt = cfl_dt(grid, 1.0)
    _, r0 = run_trajectory(st0, dt, 10, with_energy=False)
    _, r1 = run_trajectory(st1, dt, 10, with_energy=False)
    assert r1[-1]["H"] < r0[-1]["H"]
    assert r1[-1]["H"] < r1[0]["H"]


# --- good unknowns and energies ------------------------------------------------------------------


def test_good_unknowns_rest(grid):
    U, theta, zeta = good_unknowns(WaveState.rest(grid), 1.6)
    assert U[0].max_abs() == 0.0 and theta[0].max_abs() == 0.0 and zeta[0].max_abs() == 0.0


def test_good_unknowns_homogeneity(state):
    a = taylor_pressure(state)
    U1, T1, _ = good_unknowns(state, 1.6, a)
    U2, T2, _ = good_unknowns(WaveState(state.eta, state.psi * 2.0, 0.0, state.params), 1.6, a)
    assert np.abs(U2[0].values - 2 * U1[0].values).max() <= 1e-9 * U1[0].max_abs()
    assert np.abs(T2[0].values - T1[0].values).max() == 0.0
    e1 = symmetrized_energy(state, 1.6, a, parts=True)
    e2 = symmetrized_energy(WaveState(state.eta, state.psi * 2.0, 0.0, state.params), 1.6, a, parts=True)
    assert e2[0] == pytest.approx(4 * e1[0], rel=1e-8) and e2[1] == e1[1]


def test_taylor_symbol_relations(state):
    a = taylor_pressure(state)
    lam, gamma, q = taylor_symbols(state.eta, a)
    xi = np.array([[-7.0], [2.0], [13.0]])
    lv, gv, qv = lam.evaluate(xi), gamma.evaluate(xi), q.evaluate(xi)
    assert np.abs(gv * qv - a.values[None]).max() <= 1e-12
    assert np.abs(qv * lv - gv).max() <= 1e-12


def test_taylor_symbols_need_positive_a(grid):
    with pytest.raises(TaylorSignViolation):
        taylor_symbols(grid.zeros(), grid.constant(-1.0))


@pytest.mark.parametrize("kind,lam", [("flat_bottom", 3 * math.tanh(3.0)), ("infinite_depth_truncation", 3.0)])
def test_hamiltonian_closed_form(grid, kind, lam):
    c, s = wave(grid, 3)
    st_ = WaveState(grid.zeros(), s, 0.0, WaveParams(bottom_kind=kind, tol=1e-12))
    assert hamiltonian(st_) == pytest.approx(0.5 * lam * 0.5, rel=1e-8)
    st_ = WaveState(c * 0.01, grid.zeros(), 0.0, WaveParams(g=2.0))
    assert hamiltonian(st_) == pytest.approx(0.5 * 2.0 * 0.5e-4, rel=1e-12)


# --- data ------------------------------------------------------------------------------------------


def test_mollifier(grid):
    f = rough_data(grid, 0.5, 1.0, 1)
    eps = 0.1
    m = mollify(f, eps)
    k = grid.kabs
    assert np.abs(m.spectrum[k >= 1 / eps]).max() < 1e-15
    low = k <= 1.1 / (1.9 * eps)
    assert np.abs(m.spectrum[low] - f.spectrum[low]).max() < 1e-15
    with pytest.raises(ValueError):
        mollify(f, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.5), st.sampled_from([1, 2]))
def test_rough_data_properties(seed, steep, dim):
    g = Grid(dim, 64 if dim == 1 else 32)
    f = rough_data(g, 2.0, steep, seed)
    assert steepness(f) == pytest.approx(steep, rel=1e-12)
    assert abs(f.mean()) < 1e-15
    kk = np.sqrt(sum(i.astype(float) ** 2 for i in g.index))
    assert np.abs(f.spectrum[kk >= g.n / 3]).max() < 1e-15
    assert np.array_equal(f.values, rough_data(g, 2.0, steep, seed).values)


def test_rough_data_decay():
    g = Grid(1, 256)
    f = rough_data(g, 2.0, 0.1, 0)
    k = np.arange(1, 80)
    slope = np.polyfit(np.log(k), np.log(np.abs(f.spectrum[k])), 1)[0]
    assert slope == pytest.approx(-3.0, abs=1e-9)


def test_trajectory_csv(tmp_path, grid):
    st_, _ = linear_wave(grid, 1, 0.01, WaveParams())
    _, rows = run_trajectory(st_, 0.01, 4, log_every=2)
    assert [r["t"] for r in rows] == pytest.approx([0.0, 0.02, 0.04])
    p = tmp_path / "traj.csv"
    write_trajectory_csv(rows, p)
    with open(p) as fh:
        data = list(csv.reader(fh))
    assert tuple(data[0]) == TRAJECTORY_COLUMNS and len(data) == 4
    assert all(float(v) == float(v) for v in data[1])


# --- further oracles ----------------------------------------------------------------------


def test_psi_vb_identity_literal(state):
    raw = WaveState(state.eta, state.psi, 0.0, WaveParams(dealias=False, tol=1e-12))
    _, dpsi = zakharov_rhs(raw)
    tr = compute_traces(raw)
    B, V = tr.B.values, tr.V[0].values
    res = dpsi.values + V * raw.psi.grad()[0].values + raw.eta.values - 0.5 * V**2 - 0.5 * B**2
    assert np.abs(res).max() <= 1e-10


def test_taylor_against_time_finite_difference(grid):
    # standing wave at t = 0: V = B = 0, so a - g = d_t B, evaluated along the RK4 flow
    eta0 = grid.from_function(lambda x: 0.02 * np.cos(2 * x))
    st0 = WaveState(eta0, grid.zeros(), 0.0, WaveParams(nz=40, tol=1e-12))
    h = 1e-3
    Bp = compute_traces(step_rk4(st0, h)).B
    Bm = compute_traces(step_rk4(st0, -h)).B
    fd = (Bp - Bm) * (1 / (2 * h))
    dev = taylor_pressure(st0) - 1.0
    assert dev.max_abs() > 1e-2
    assert (fd - dev).max_abs() <= 1e-4 * dev.max_abs()


def test_regularized_linear_wave_is_damped_oscillator(grid):
    k, A, eps = 4, 1e-6, 1e-2
    st_, om = linear_wave(grid, k, A, WaveParams(eps=eps, tol=1e-12), travelling=False)
    dt = cfl_dt(grid, 1.0)
    for _ in range(40):
        st_ = step_rk4(st_, dt)
    exact = A * math.exp(-eps * k * k * st_.t) * math.cos(om * st_.t) * np.cos(k * grid.coords[0])
    assert np.abs(st_.eta.values - exact).max() <= 1e-4 * A


def test_theta_constant_coefficient_reduction(grid):
    # a = g constant: theta_s = sqrt(g) <D>^s |D|^(-1/2) d_x eta
    g = 2.0
    eta = rough_data(grid, 2.0, 0.05, 3)
    st_ = WaveState(eta, grid.zeros(), 0.0, WaveParams(g=g))
    _, theta, _ = good_unknowns(st_, 1.6, a=grid.constant(g))
    k = grid.ks[0]
    ak = np.where(k == 0, 1.0, np.abs(k))
    mult = np.where(k == 0, 0.0, math.sqrt(g) * (1 + k**2) ** 0.8 / np.sqrt(ak) * 1j * k)
    expect = Field.from_spectrum(grid, mult * eta.spectrum)
    assert np.abs(theta[0].values - expect.values).max() <= 1e-10 * expect.max_abs()


def test_zeta_remainder(grid):
    from parawave.wavedyn import zeta_remainder

    eta, psi = rough_data(grid, 3.0, 0.05, 0, 0), rough_data(grid, 3.0, 0.05, 0, 1)
    deep = WaveState(eta, psi, 0.0, WaveParams(bottom_kind="infinite_depth_truncation", tol=1e-12))
    assert max(f.max_abs() for f in zeta_remainder(deep)) <= 1e-8
    # with a bottom the remainder is genuinely present and grows as the layer thins
    mags = [max(f.max_abs() for f in zeta_remainder(WaveState(eta, psi, 0.0, WaveParams(h=h, tol=1e-12)))) for h in (3.0, 1.0, 0.3)]
    assert mags[0] < mags[1] < mags[2] and mags[0] > 1e-7
    assert max(f.max_abs() for f in zeta_remainder(WaveState.rest(grid))) == 0.0
