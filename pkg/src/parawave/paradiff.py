"""
Bony paradifferential calculus on the periodic grid.

Quantization used throughout::

    T_p u = sum_{j >= 0} Op[(S_{j-3} p)(x, .)] Delta_j u

where the low-pass ``S_{j-3}`` acts on the x-dependence of the symbol.  For a
symbol that depends on x only this is the paraproduct
``sum_j S_{j-3}(a) Delta_j u``, and ``T_1`` is the identity.  Products inside
the dyadic sum are computed alias-free (3/2 padding) and projected onto the
grid modes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EllipticityViolation, SymbolUndefined
from .spectral import (
    Field,
    Grid,
    block_weight,
    exact_product,
    lp_weight,
    multiplier_array,
    product_spectrum,
    sobolev_norm,
)

__all__ = [
    "SymbolRep",
    "OrderFitReport",
    "paraproduct",
    "bony_remainder",
    "paradiff_apply",
    "paradiff_adjoint",
    "compose_error_fit",
    "adjoint_error_fit",
    "boundedness_fit",
    "commutator_norm_probe",
    "parabolic_evolve",
    "fit_order",
    "default_probes",
    "probe",
]

Profile = Callable[..., np.ndarray]

_CHUNK_ELEMS = 2_000_000


def _nyquist_hermitian(grid: Grid, marr: np.ndarray) -> np.ndarray:
    """Symmetrise a multiplier on the Nyquist modes so real input stays real."""
    marr = np.asarray(marr)
    if not np.iscomplexobj(marr):
        return marr
    refl = np.roll(np.flip(marr, axis=grid.axes), 1, axis=grid.axes)
    herm = 0.5 * (marr + np.conj(refl))
    return np.where(grid.nyquist_mask, herm, marr)


@dataclass
class SymbolRep:
    """A symbol p(x, xi) of order ``order``.

    ``terms`` holds separable pieces ``(coef, profile)`` meaning
    ``sum coef(x) * profile(xi)``; profiles are callables of the wavenumber
    components.  Non-separable symbols supply ``pointwise`` instead, mapping
    an ``(M, d)`` array of wavenumbers to an ``(M, *grid.shape)`` array of
    symbol values.  When both are present they must agree and the separable
    form is used for application.
    """

    grid: Grid
    terms: list = field(default_factory=list)
    order: float = 0.0
    regularity: float = 1.0
    pointwise: Optional[Callable[[np.ndarray], np.ndarray]] = None
    homogeneous: bool = True

    def __post_init__(self):
        if not self.terms and self.pointwise is None:
            raise ValueError("symbol needs separable terms or a pointwise evaluator")
        for coef, _ in self.terms:
            self.grid.check_same(coef.grid)

    # constructors ---------------------------------------------------------
    @classmethod
    def multiplier(cls, grid: Grid, profile: Profile, order: float = 0.0) -> "SymbolRep":
        return cls(grid, [(grid.constant(1.0), profile)], order=order, regularity=math.inf)

    @classmethod
    def function(cls, a: Field, regularity: float = 1.0) -> "SymbolRep":
        return cls(a.grid, [(a, lambda *ks: np.ones_like(ks[0]))], order=0.0, regularity=regularity)

    # evaluation -----------------------------------------------------------
    @property
    def separable(self) -> bool:
        return bool(self.terms)

    def profile_arrays(self) -> list:
        return [_nyquist_hermitian(self.grid, multiplier_array(self.grid, prof)) for _, prof in self.terms]

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """Symbol values at wavenumbers ``xi`` (shape (M, d)) -> (M, *grid.shape)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if not self.separable:
            return np.asarray(self.pointwise(xi))
        comps = [xi[:, i] for i in range(self.grid.dim)]
        out = 0
        for coef, prof in self.terms:
            pv = np.broadcast_to(np.asarray(prof(*comps)), (xi.shape[0],))
            out = out + pv.reshape((-1,) + (1,) * self.grid.dim) * coef.values[None]
        return np.asarray(out) * np.ones((1,) + self.grid.shape)

    def lattice(self) -> np.ndarray:
        """All grid wavenumbers as an (M, d) array in flattened FFT order."""
        return np.stack([k.ravel() for k in self.grid.ks], axis=1)

    def _chunks(self):
        xi = self.lattice()
        step = max(1, _CHUNK_ELEMS // self.grid.size)
        for i in range(0, xi.shape[0], step):
            yield i, xi[i : i + step]

    def mean_symbol(self) -> np.ndarray:
        """x-average of p on the lattice, shape grid.shape."""
        if self.separable:
            out = 0
            for (coef, _), marr in zip(self.terms, self.profile_arrays()):
                out = out + coef.mean() * marr
            return np.asarray(out) * np.ones(self.grid.shape)
        vals = np.empty(self.grid.size, dtype=complex)
        axes = tuple(range(1, self.grid.dim + 1))
        for i, chunk in self._chunks():
            vals[i : i + len(chunk)] = self.evaluate(chunk).mean(axis=axes)
        return vals.reshape(self.grid.shape)

    def min_real_ratio(self) -> float:
        """min over x and xi != 0 of Re p(x, xi) / |xi|."""
        axes = tuple(range(1, self.grid.dim + 1))
        best = math.inf
        for _, chunk in self._chunks():
            kn = np.sqrt(np.sum(chunk**2, axis=1))
            keep = kn > 0
            if not keep.any():
                continue
            vals = self.evaluate(chunk[keep]).real.min(axis=axes)
            best = min(best, float(np.min(vals / kn[keep])))
        return best

    def max_abs(self) -> float:
        axes = tuple(range(1, self.grid.dim + 1))
        best = 0.0
        for _, chunk in self._chunks():
            best = max(best, float(np.abs(self.evaluate(chunk)).max(axis=axes).max()))
        return best

    # algebra --------------------------------------------------------------
    def conj(self) -> "SymbolRep":
        terms = [(c, (lambda prof: lambda *ks: np.conj(prof(*ks)))(p)) for c, p in self.terms]
        pw = None
        if self.pointwise is not None:
            pw = (lambda f: lambda xi: np.conj(f(xi)))(self.pointwise)
        return SymbolRep(self.grid, terms, self.order, self.regularity, pw, self.homogeneous)

    def __mul__(self, other: "SymbolRep") -> "SymbolRep":
        order = self.order + other.order
        reg = min(self.regularity, other.regularity)
        if self.separable and other.separable:
            terms = []
            for ca, pa in self.terms:
                for cb, pb in other.terms:
                    prof = (lambda f, g: lambda *ks: f(*ks) * g(*ks))(pa, pb)
                    terms.append((ca * cb, prof))
            return SymbolRep(self.grid, terms, order, reg)
        a, b = self, other
        return SymbolRep(self.grid, [], order, reg, pointwise=lambda xi: a.evaluate(xi) * b.evaluate(xi))

    def minus_mean(self) -> "SymbolRep":
        """p - pbar with pbar the x-average; zero in the constant-coefficient case."""
        if self.separable:
            terms = [(c - c.mean(), p) for c, p in self.terms]
            return SymbolRep(self.grid, terms, self.order, self.regularity)
        p = self
        axes = tuple(range(1, self.grid.dim + 1))

        def resid(xi):
            v = p.evaluate(xi)
            return v - v.mean(axis=axes, keepdims=True)

        return SymbolRep(self.grid, [], self.order, self.regularity, pointwise=resid)


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


def _lowpass_stack(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """[S_{j-3} f for j = 0..K] as a spectral stack."""
    return np.stack([spec * lp_weight(grid, j - 3) for j in range(grid.lp_top + 1)])


def _block_stack(grid: Grid, spec: np.ndarray) -> np.ndarray:
    return np.stack([spec * block_weight(grid, j) for j in range(grid.lp_top + 1)])


def _separable_spectrum(p: SymbolRep, uhat: np.ndarray) -> np.ndarray:
    grid = p.grid
    blocks = _block_stack(grid, uhat)
    out = np.zeros(grid.shape, dtype=complex)
    for (coef, _), marr in zip(p.terms, p.profile_arrays()):
        low = _lowpass_stack(grid, coef.spectrum)
        out += product_spectrum(low, blocks * marr, grid.dim).sum(axis=0)
    return out


def _separable_adjoint_spectrum(p: SymbolRep, vhat: np.ndarray) -> np.ndarray:
    grid = p.grid
    K = grid.lp_top
    out = np.zeros(grid.shape, dtype=complex)
    vstack = np.broadcast_to(vhat, (K + 1,) + grid.shape)
    phis = np.stack([block_weight(grid, j) for j in range(K + 1)])
    for (coef, _), marr in zip(p.terms, p.profile_arrays()):
        # coefficients are real, so S_{j-3} c is its own conjugate
        low = _lowpass_stack(grid, coef.spectrum)
        prods = product_spectrum(low, vstack, grid.dim)
        out += np.conj(marr) * (phis * prods).sum(axis=0)
    return out


def _pointwise_spectrum(p: SymbolRep, uhat: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Dense per-mode evaluation for non-separable symbols.

    Each input mode xi_m contributes ``Phat_m(theta) * chi(theta, xi_m) * u_hat(xi_m)``
    to the output mode ``xi_m + theta``; contributions outside the grid's
    mode range are dropped (same projection as the separable path).
    """
    grid = p.grid
    n, d = grid.n, grid.dim
    K = grid.lp_top
    axes = tuple(range(1, d + 1))
    phis = np.stack([block_weight(grid, j).ravel() for j in range(K + 1)])  # (K+1, size)
    kaps = np.stack([lp_weight(grid, j - 3) for j in range(K + 1)])  # (K+1, *shape)
    idx_all = np.stack([i.ravel() for i in grid.index], axis=1)
    theta_idx = [i[None] for i in grid.index]
    src = uhat.ravel()
    out = np.zeros(grid.size, dtype=complex)
    xi_all = p.lattice()
    step = max(1, _CHUNK_ELEMS // grid.size)
    for start in range(0, grid.size, step):
        sel = np.arange(start, min(start + step, grid.size))
        if not adjoint:
            sel = sel[np.abs(src[sel]) > 0]
        if sel.size == 0:
            continue
        vals = p.evaluate(xi_all[sel])
        if not np.all(np.isfinite(vals)):
            raise SymbolUndefined("symbol is not finite at a required wavenumber")
        khat = np.fft.fftn(vals, axes=axes) / grid.size
        weight = np.tensordot(phis[:, sel].T, kaps, axes=(1, 0))  # (M, *shape)
        kern = khat * weight
        tgt = [idx_all[sel, i].reshape((-1,) + (1,) * d) + theta_idx[i] for i in range(d)]
        valid = np.all([(t >= -n // 2) & (t <= n // 2) for t in tgt], axis=0)
        lin = np.zeros(valid.shape, dtype=np.int64)
        for t in tgt:
            lin = lin * n + np.mod(t, n)
        if adjoint:
            vals_out = np.where(valid, np.conj(kern) * src[lin], 0.0)
            out[sel] += vals_out.reshape(len(sel), -1).sum(axis=1)
        else:
            contrib = kern * src[sel].reshape((-1,) + (1,) * d)
            np.add.at(out, lin[valid], contrib[valid])
    return out.reshape(grid.shape)


def paradiff_spectrum(p: SymbolRep, uhat: np.ndarray) -> np.ndarray:
    return _separable_spectrum(p, uhat) if p.separable else _pointwise_spectrum(p, uhat)


def paradiff_apply(p: SymbolRep, u: Field) -> Field:
    """T_p u."""
    p.grid.check_same(u.grid)
    return Field.from_spectrum(u.grid, paradiff_spectrum(p, u.spectrum))


def paradiff_adjoint(p: SymbolRep, v: Field) -> Field:
    """(T_p)^* v with respect to the grid L^2 inner product."""
    p.grid.check_same(v.grid)
    if p.separable:
        spec = _separable_adjoint_spectrum(p, v.spectrum)
    else:
        spec = _pointwise_spectrum(p, v.spectrum, adjoint=True)
    return Field.from_spectrum(v.grid, spec)


def paraproduct(a: Field, u: Field) -> Field:
    """T_a u = sum_j S_{j-3}(a) Delta_j u."""
    a.grid.check_same(u.grid)
    grid = a.grid
    low = _lowpass_stack(grid, a.spectrum)
    blocks = _block_stack(grid, u.spectrum)
    return Field.from_spectrum(grid, product_spectrum(low, blocks, grid.dim).sum(axis=0))


def bony_remainder(a: Field, u: Field) -> Field:
    """R(a, u) = a u - T_a u - T_u a, with the alias-free grid product."""
    return exact_product(a, u) - paraproduct(a, u) - paraproduct(u, a)


# ---------------------------------------------------------------------------
# Order fits
# ---------------------------------------------------------------------------


@dataclass
class OrderFitReport:
    probe_frequencies: list
    response_norms: list
    fitted_slope: float
    slope_ci: float
    exact_zero: bool = False

    def to_dict(self) -> dict:
        return {
            "probes": [int(k) for k in self.probe_frequencies],
            "norms": [float(v) for v in self.response_norms],
            "slope": None if self.exact_zero else float(self.fitted_slope),
            "residual": float(self.slope_ci),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


ZERO_FLOOR = 1e-13


def fit_order(probes: Sequence[int], norms: Sequence[float]) -> OrderFitReport:
    """Least-squares slope of log(norm) against log(k)."""
    probes = [int(k) for k in probes]
    if len(probes) < 3 or any(b <= a for a, b in zip(probes, probes[1:])):
        raise ValueError("probe frequencies must be strictly increasing with at least 3 entries")
    norms = [float(v) for v in norms]
    if max(norms) <= ZERO_FLOOR:
        return OrderFitReport(probes, norms, float("nan"), 0.0, exact_zero=True)
    x = np.log(probes)
    y = np.log(np.maximum(norms, 1e-300))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = y - np.polyval(coef, x)
    return OrderFitReport(probes, norms, float(coef[0]), float(np.max(np.abs(resid))))


def default_probes(grid: Grid, kmin: int = 8) -> list:
    kmax = grid.n // 4
    octaves = math.log2(kmax / kmin)
    num = max(3, int(round(2 * octaves)) + 1)
    return sorted({int(round(k)) for k in np.geomspace(kmin, kmax, num)})


def probe(grid: Grid, k: int) -> Field:
    """Unit-L^2 oscillation sqrt(2) cos(k x_1 / L)."""
    return grid.from_function(lambda x, *rest: math.sqrt(2.0) * np.cos(k * x / grid.L))


def _probe_norms(op: Callable[[Field], Field], grid: Grid, probes, s: float) -> list:
    out = []
    for k in probes:
        e = probe(grid, k)
        out.append(sobolev_norm(op(e), s) / sobolev_norm(e, s))
    return out


def compose_error_fit(a: SymbolRep, b: SymbolRep, s: float = 0.0, probes=None) -> OrderFitReport:
    """Order of T_a T_b - T_{ab} measured on oscillatory probes."""
    grid = a.grid
    probes = probes or default_probes(grid)
    ab = a * b

    def op(e):
        return paradiff_apply(a, paradiff_apply(b, e)) - paradiff_apply(ab, e)

    return fit_order(probes, _probe_norms(op, grid, probes, s))


def adjoint_error_fit(a: SymbolRep, s: float = 0.0, probes=None) -> OrderFitReport:
    """Order of (T_a)^* - T_{conj a}."""
    grid = a.grid
    probes = probes or default_probes(grid)
    abar = a.conj()

    def op(e):
        return paradiff_adjoint(a, e) - paradiff_apply(abar, e)

    return fit_order(probes, _probe_norms(op, grid, probes, s))


def boundedness_fit(a: SymbolRep, mu: float = 0.0, probes=None) -> OrderFitReport:
    """Growth of ||T_a e_k||_{H^{mu-m}} / ||e_k||_{H^mu}; bounded means slope ~ 0."""
    grid = a.grid
    probes = probes or default_probes(grid)
    norms = []
    for k in probes:
        e = probe(grid, k)
        norms.append(sobolev_norm(paradiff_apply(a, e), mu - a.order) / sobolev_norm(e, mu))
    return fit_order(probes, norms)


def commutator_norm_probe(V: Field, sigma: float, probes=None) -> OrderFitReport:
    """Order of the commutator [<D>^sigma, V] on oscillatory probes."""
    grid = V.grid
    probes = probes or default_probes(grid)
    w = grid.kbracket**sigma

    def op(e):
        left = Field.from_spectrum(grid, exact_product(V, e).spectrum * w)
        right = exact_product(V, Field.from_spectrum(grid, e.spectrum * w))
        return left - right

    return fit_order(probes, _probe_norms(op, grid, probes, 0.0))


# ---------------------------------------------------------------------------
# Parabolic evolution
# ---------------------------------------------------------------------------

EXPLICIT_LIMIT = 0.5


def check_ellipticity(p: SymbolRep) -> float:
    c = p.min_real_ratio()
    if not c > 0:
        raise EllipticityViolation(f"min Re p(x, xi)/|xi| = {c:.3e} is not positive")
    return c


def parabolic_evolve(
    p: SymbolRep,
    w0: Field,
    forcing: Optional[Callable[[float], Field]] = None,
    z_span=(0.0, 1.0),
    nz: int = 64,
) -> list:
    """Solve d_z w + T_p w = f on z_span, returning w at nz+1 equispaced levels.

    First-order IMEX: the x-averaged symbol is integrated exactly
    (exponential factor), the variable part ``T_{p - pbar}`` explicitly.  Each
    output interval is subdivided so that ``dz * max|p - pbar| <= 0.5``.
    """
    z0, z1 = map(float, z_span)
    if not z0 < z1:
        raise ValueError("z_span must be increasing")
    p.grid.check_same(w0.grid)
    check_ellipticity(p)
    grid = p.grid
    pbar = _nyquist_hermitian(grid, p.mean_symbol())
    resid = p.minus_mean()
    rmax = resid.max_abs()
    dz = (z1 - z0) / nz
    nsub = max(1, math.ceil(dz * rmax / EXPLICIT_LIMIT - 1e-12))
    h = dz / nsub
    decay = np.exp(-h * pbar)
    constant = rmax == 0.0

    w = w0.spectrum.copy()
    out = [w0]
    z = z0
    for _ in range(nz):
        for _ in range(nsub):
            rhs = np.zeros_like(w)
            if forcing is not None:
                rhs += forcing(z).spectrum
            if not constant:
                rhs -= paradiff_spectrum(resid, w)
            w = decay * (w + h * rhs)
            z += h
        out.append(Field.from_spectrum(grid, w))
    return out
