"""
Water-wave dynamics in Zakharov form: traces, Taylor coefficient, time stepping,
good unknowns and conserved/controlled quantities.

Units: lengths in the grid's units, time in units where gravity is ``g``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dirichlet_neumann import BOTTOM_KINDS, DirichletNeumann, DNParams, _fft, _ifft
from .errors import CflViolation, TaylorSignViolation
from .paradiff import SymbolRep, paradiff_apply
from .rng import stream
from .spectral import Field, Grid, kappa, multiplier_apply, sobolev_norm

__all__ = [
    "WaveParams",
    "WaveState",
    "DerivedTraces",
    "compute_traces",
    "taylor_pressure",
    "taylor_shape_derivative",
    "zakharov_rhs",
    "cfl_dt",
    "step_rk4",
    "good_unknowns",
    "zeta_remainder",
    "taylor_symbols",
    "symmetrized_energy",
    "hamiltonian",
    "mollify",
    "rough_data",
    "linear_wave",
    "steepness",
    "TRAJECTORY_COLUMNS",
    "run_trajectory",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class WaveParams:
    g: float = 1.0
    h: float = 1.0
    bottom_kind: str = "flat_bottom"
    eps: float = 0.0
    nz: int = 32
    tol: float = 1e-10
    delta: object = "auto"
    dealias: bool = True

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.bottom_kind not in BOTTOM_KINDS:
            raise ValueError(f"bottom_kind must be one of {BOTTOM_KINDS}")

    @property
    def dn(self) -> DNParams:
        return DNParams(h=self.h, bottom_kind=self.bottom_kind, delta=self.delta, nz=self.nz, tol=self.tol)


@dataclass(frozen=True)
class WaveState:
    eta: Field
    psi: Field
    t: float = 0.0
    params: WaveParams = WaveParams()

    def __post_init__(self):
        self.eta.grid.check_same(self.psi.grid)
        # building the operator checks the flattening
        object.__setattr__(self, "_dn", DirichletNeumann(self.eta, self.params.dn))

    @property
    def grid(self) -> Grid:
        return self.eta.grid

    @property
    def dn(self) -> DirichletNeumann:
        return self._dn

    @classmethod
    def rest(cls, grid: Grid, params: WaveParams = WaveParams()) -> "WaveState":
        return cls(grid.zeros(), grid.zeros(), 0.0, params)

    def with_fields(self, eta: Field, psi: Field, t: float) -> "WaveState":
        return WaveState(eta, psi, t, self.params)


@dataclass
class DerivedTraces:
    B: Field
    V: list
    G: Field
    a: Optional[Field] = None
    method_gap: Optional[float] = None

    def identity_residual(self, state: WaveState) -> float:
        """max |grad psi - V - B grad eta|."""
        err = 0.0
        for gp, v, ge in zip(state.psi.grad(), self.V, state.eta.grad()):
            err = max(err, float(np.abs(gp.values - v.values - self.B.values * ge.values).max()))
        return err


def _dot(a: list, b: list) -> np.ndarray:
    return sum(x.values * y.values for x, y in zip(a, b))


def _traces_from(state: WaveState, G: Field) -> DerivedTraces:
    ge, gp = state.eta.grad(), state.psi.grad()
    den = 1.0 + _dot(ge, ge)
    B = (_dot(ge, gp) + G.values) / den
    V = [Field(state.grid, p.values - B * e.values) for p, e in zip(gp, ge)]
    return DerivedTraces(Field(state.grid, B), V, G)


def compute_traces(state: WaveState) -> DerivedTraces:
    """B and V from one Dirichlet-Neumann solve."""
    return _traces_from(state, state.dn.apply(state.psi))


# ---------------------------------------------------------------------------
# Taylor coefficient: two independent routes
# ---------------------------------------------------------------------------


def _hessian_sq(dn: DirichletNeumann, phi: np.ndarray) -> np.ndarray:
    """|grad^2_{x,y} phi|^2 on the flattened grid, via the Lambda derivatives."""
    l1, l2 = dn.lambda_derivatives(phi)
    total = np.zeros_like(phi)
    for first in [l1] + l2:
        s1, s2 = dn.lambda_derivatives(first)
        for sec in [s1] + s2:
            total += sec**2
    return total


def taylor_pressure(state: WaveState) -> Field:
    """a = -d_y P at the surface, from an elliptic solve for P + g y.

    q = P + g y satisfies Lap q = -|grad^2 phi|^2 in the fluid and q = g eta on
    the surface.  On a flat bottom d_y q = 0; for infinite depth the exact
    transparent condition for the harmonic part -d_t phi is used.
    """
    dn = state.dn
    p = state.params
    grid = state.grid
    phi = dn.solve(state.psi).phi
    F0 = -dn.coeffs.alpha * _hessian_sq(dn, phi)
    bottom = None
    if p.bottom_kind == "infinite_depth_truncation":
        k = grid.kabs
        kodd = [np.where(i == -grid.n // 2, 0.0, kk) for i, kk in zip(grid.index, grid.ks)]
        ph = _fft(phi[0], grid)
        phx = [_ifft(1j * kk * ph, grid) for kk in kodd]
        phy_h = k * ph
        phy = _ifft(phy_h, grid)
        phxy = [_ifft(1j * kk * phy_h, grid) for kk in kodd]
        phyy = _ifft(k**2 * ph, grid)
        Q = 0.5 * (sum(v**2 for v in phx) + phy**2)
        r = _ifft(k * _fft(Q, grid), grid) - (sum(a * b for a, b in zip(phx, phxy)) + phy * phyy)
        bottom = dn.dom.dz_rho[0] * r
    sol = dn.solve(Field(grid, p.g * state.eta.values), F0=F0, bottom_data=bottom)
    a = p.g - sol.trace_dz.values / dn.dom.dz_rho[-1]
    if not np.all(np.isfinite(a)):
        raise TaylorSignViolation("Taylor coefficient is not finite", float("nan"))
    return Field(grid, a)


def _rhs_raw(state: WaveState, G: Field):
    p = state.params
    ge, gp = state.eta.grad(), state.psi.grad()
    deta = G.values
    num = _dot(ge, gp) + G.values
    dpsi = -p.g * state.eta.values - 0.5 * _dot(gp, gp) + 0.5 * num**2 / (1.0 + _dot(ge, ge))
    return deta, dpsi


def taylor_shape_derivative(state: WaveState) -> Field:
    """a = g + (d_t + V.grad) B with d_t G(eta) psi from the shape derivative."""
    grid = state.grid
    p = state.params
    dn = state.dn
    G = dn.apply(state.psi)
    tr = _traces_from(state, G)
    deta, dpsi = _rhs_raw(state, G)
    deta, dpsi = Field(grid, deta), Field(grid, dpsi)
    B = tr.B
    # d_t(G psi) = G(eta)(d_t psi - B d_t eta) - div(V d_t eta)
    dG = dn.apply(dpsi - B * deta)
    for i, v in enumerate(tr.V):
        dG = dG - (v * deta).derivative(i)
    ge, gp = state.eta.grad(), state.psi.grad()
    gde, gdp = deta.grad(), dpsi.grad()
    den = 1.0 + _dot(ge, ge)
    dB = (_dot(gde, gp) + _dot(ge, gdp) + dG.values) / den - 2.0 * _dot(gde, ge) * B.values / den
    adv = _dot(tr.V, B.grad())
    return Field(grid, p.g + dB + adv)


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def zakharov_rhs(state: WaveState, G: Optional[Field] = None):
    """(d_t eta, d_t psi); dealiased by the 2/3 rule unless params.dealias is off."""
    p = state.params
    grid = state.grid
    if G is None:
        G = state.dn.apply(state.psi)
    deta, dpsi = _rhs_raw(state, G)
    if p.eps:
        deta = deta + p.eps * state.eta.laplacian().values
        dpsi = dpsi + p.eps * state.psi.laplacian().values
    deta, dpsi = Field(grid, deta), Field(grid, dpsi)
    if p.dealias:
        deta, dpsi = deta.dealiased(), dpsi.dealiased()
    # G psi integrates to zero; drop the discretisation residue of its mean
    deta = deta - deta.mean()
    return deta, dpsi


def cfl_dt(grid: Grid, g: float, cfl: float = 0.5) -> float:
    """Largest admissible step c * sqrt(dx / (g pi))."""
    return cfl * math.sqrt(grid.dx / (g * math.pi))


def _exp_filter(grid: Grid, order: int = 36, strength: float = 36.0):
    kmax = grid.n / (2 * grid.L)
    return lambda *ks: np.exp(-strength * (np.sqrt(sum(k**2 for k in ks)) / kmax) ** order)


def step_rk4(
    state: WaveState,
    dt: float,
    cfl: float = 0.5,
    spectral_filter: bool = False,
    taylor_floor: Optional[float] = None,
) -> WaveState:
    """One classical RK4 step.

    ``taylor_floor`` enables the Taylor-sign monitor on the new state.
    """
    limit = cfl_dt(state.grid, state.params.g, cfl)
    if dt > limit * (1 + 1e-12):
        raise CflViolation(f"dt = {dt:.4g} exceeds CFL limit {limit:.4g}")
    e0, p0 = state.eta, state.psi
    k1 = zakharov_rhs(state)
    s2 = state.with_fields(e0 + k1[0] * (dt / 2), p0 + k1[1] * (dt / 2), state.t + dt / 2)
    k2 = zakharov_rhs(s2)
    s3 = state.with_fields(e0 + k2[0] * (dt / 2), p0 + k2[1] * (dt / 2), state.t + dt / 2)
    k3 = zakharov_rhs(s3)
    s4 = state.with_fields(e0 + k3[0] * dt, p0 + k3[1] * dt, state.t + dt)
    k4 = zakharov_rhs(s4)
    eta = e0 + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (dt / 6)
    psi = p0 + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (dt / 6)
    if spectral_filter:
        filt = _exp_filter(state.grid)
        eta, psi = multiplier_apply(eta, filt), multiplier_apply(psi, filt)
    new = state.with_fields(eta, psi, state.t + dt)
    if taylor_floor is not None:
        a = taylor_pressure(new)
        amin = float(a.values.min())
        if amin < taylor_floor:
            raise TaylorSignViolation(f"min a = {amin:.4g} below floor {taylor_floor:.4g} at t = {new.t:.4g}", amin)
    return new


# ---------------------------------------------------------------------------
# Good unknowns and energies
# ---------------------------------------------------------------------------


def _bracket_pow(s: float):
    return lambda *ks: (1.0 + sum(k**2 for k in ks)) ** (s / 2)


def taylor_symbols(eta: Field, a: Field):
    """(lambda, gamma = sqrt(a lambda), q = sqrt(a / lambda)) as symbols."""
    from .dirichlet_neumann import dn_symbol

    if float(a.values.min()) <= 0:
        raise TaylorSignViolation(f"min a = {float(a.values.min()):.4g} is not positive", float(a.values.min()))
    grid = eta.grid
    lam = dn_symbol(eta)
    sa = Field(grid, np.sqrt(a.values))
    if grid.dim == 1:

        def root(k):
            return np.sqrt(np.abs(k))

        def invroot(k):
            ak = np.abs(k)
            return np.where(ak > 0, 1.0 / np.sqrt(np.where(ak > 0, ak, 1.0)), 0.0)

        gamma = SymbolRep(grid, [(sa, root)], order=0.5)
        q = SymbolRep(grid, [(sa, invroot)], order=-0.5)
        return lam, gamma, q
    av = a.values

    def gamma_pw(xi):
        return np.sqrt(av[None] * lam.pointwise(xi))

    def q_pw(xi):
        lv = lam.pointwise(xi)
        return np.where(lv > 0, np.sqrt(av[None] / np.where(lv > 0, lv, 1.0)), 0.0)

    return lam, SymbolRep(grid, [], order=0.5, pointwise=gamma_pw), SymbolRep(grid, [], order=-0.5, pointwise=q_pw)


def good_unknowns(state: WaveState, s: float, a: Optional[Field] = None, traces: Optional[DerivedTraces] = None):
    """(U_s, theta_s, zeta_s) as lists of d Fields."""
    if a is None:
        a = taylor_pressure(state)
    if traces is None:
        traces = compute_traces(state)
    lift = _bracket_pow(s)
    zeta = state.eta.grad()
    Bs = multiplier_apply(traces.B, lift)
    U = [multiplier_apply(v, lift) + paradiff_apply(SymbolRep.function(z), Bs) for v, z in zip(traces.V, zeta)]
    zeta_s = [multiplier_apply(z, lift) for z in zeta]
    _, _, q = taylor_symbols(state.eta, a)
    theta = [paradiff_apply(q, z) for z in zeta_s]
    return U, theta, zeta_s


def zeta_remainder(state: WaveState, traces: Optional[DerivedTraces] = None) -> list:
    """gamma = (d_t + V.grad) zeta - G(eta) V - zeta G(eta) B with zeta = grad eta.

    Vanishes up to discretisation without a bottom; reported, never asserted.
    """
    if traces is None:
        traces = compute_traces(state)
    dn = state.dn
    deta = traces.G
    zeta = state.eta.grad()
    GB = dn.apply(traces.B)
    out = []
    for i, z in enumerate(zeta):
        lhs = deta.derivative(i) + sum((v * z.derivative(j) for j, v in enumerate(traces.V)), state.grid.zeros())
        out.append(lhs - dn.apply(traces.V[i]) - z * GB)
    return out


def symmetrized_energy(state: WaveState, s: float, a: Optional[Field] = None, parts: bool = False):
    U, theta, _ = good_unknowns(state, s, a)
    eu = sum(u.l2() ** 2 for u in U)
    et = sum(t.l2() ** 2 for t in theta)
    return (eu, et) if parts else eu + et


def hamiltonian(state: WaveState, G: Optional[Field] = None) -> float:
    """0.5 <psi, G psi> + 0.5 g <eta, eta> (mean-normalised inner products)."""
    if G is None:
        G = state.dn.apply(state.psi)
    return 0.5 * state.psi.inner(G) + 0.5 * state.params.g * state.eta.inner(state.eta)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


def steepness(eta: Field) -> float:
    """max |grad eta|."""
    return max(g.max_abs() for g in eta.grad())


def mollify(f: Field, eps: float) -> Field:
    """J_eps: smooth spectral truncation vanishing for |xi| >= 1/eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    c = (1.0 + 0.9) * eps
    return multiplier_apply(f, lambda *ks: kappa(c * np.sqrt(sum(k**2 for k in ks))))


def rough_data(grid: Grid, s: float, steep: float, seed: int = 0, index: int = 0) -> Field:
    """Random-phase field with |hat eta(k)| ~ |k|^(-(s+1/2)-d/2), cut at N/3, scaled to max slope ``steep``."""
    rng = stream(seed, index)
    kk = np.sqrt(sum(i.astype(float) ** 2 for i in grid.index))
    keep = (kk >= 1) & (kk < grid.n / 3)
    amp = np.where(keep, np.where(kk > 0, kk, 1.0) ** (-(s + 0.5) - grid.dim / 2), 0.0)
    phase = rng.uniform(0.0, 2 * np.pi, size=grid.shape)
    # antisymmetric phases keep |hat eta(k)| exactly on the power law
    axes = tuple(range(grid.dim))
    phase = 0.5 * (phase - np.roll(np.flip(phase, axes), 1, axes))
    f = Field.from_spectrum(grid, amp * np.exp(1j * phase))
    f = f - f.mean()
    return f * (steep / steepness(f))


def linear_wave(grid: Grid, k: int, amplitude: float, params: WaveParams, travelling: bool = True):
    """Linear gravity wave eta = A cos(k x / L); psi chosen so it travels (or stands still)."""
    x = grid.coords[0]
    kw = k / grid.L
    om2 = params.g * kw * (math.tanh(kw * params.h) if params.bottom_kind == "flat_bottom" else 1.0)
    om = math.sqrt(om2)
    eta = Field(grid, amplitude * np.cos(kw * x))
    psi = Field(grid, (params.g * amplitude / om) * np.sin(kw * x)) if travelling else grid.zeros()
    return WaveState(eta, psi, 0.0, params), om


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "H", "E_s", "min_a", "max_abs_eta", "sobolev_eta", "sobolev_psi")


def _diagnostics(state: WaveState, s: float, with_energy: bool) -> dict:
    G = state.dn.apply(state.psi)
    row = {"t": state.t, "H": hamiltonian(state, G)}
    if with_energy:
        a = taylor_pressure(state)
        row["E_s"] = symmetrized_energy(state, s, a)
        row["min_a"] = float(a.values.min())
    else:
        row["E_s"] = float("nan")
        row["min_a"] = float("nan")
    row["max_abs_eta"] = state.eta.max_abs()
    row["sobolev_eta"] = sobolev_norm(state.eta, s + 0.5)
    row["sobolev_psi"] = sobolev_norm(state.psi, s + 0.5)
    return row


def run_trajectory(
    state: WaveState,
    dt: float,
    nsteps: int,
    s: float = 1.6,
    log_every: int = 1,
    with_energy: bool = True,
    taylor_floor: Optional[float] = None,
    cfl: float = 0.5,
    spectral_filter: bool = False,
    on_step: Optional[Callable[[WaveState], None]] = None,
):
    """Step ``nsteps`` times; returns (final state, list of diagnostic rows)."""
    rows = [_diagnostics(state, s, with_energy)]
    for i in range(1, nsteps + 1):
        state = step_rk4(state, dt, cfl, spectral_filter, taylor_floor)
        if on_step is not None:
            on_step(state)
        if i % log_every == 0 or i == nsteps:
            rows.append(_diagnostics(state, s, with_energy))
    return state, rows


def write_trajectory_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for r in rows:
            w.writerow([repr(float(r[c])) for c in TRAJECTORY_COLUMNS])
