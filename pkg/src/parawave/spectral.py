"""
Periodic grids, Fourier multipliers, dealiased products, Littlewood-Paley
blocks and Sobolev/Zygmund norms.

Conventions
-----------
The domain is the torus ``[0, 2*pi*L)^d`` sampled on ``n`` points per
dimension.  Wavenumbers are ``index / L`` with ``index`` in numpy's FFT
ordering.  Spectra are normalised so that the forward transform carries the
``1/n^d`` factor: a constant field ``c`` has spectrum ``c`` at the zero mode,
and ``sum |f_hat|^2`` equals the mean of ``f^2`` (Parseval).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import GridMismatch, NonHermitianMultiplier

__all__ = [
    "Grid",
    "Field",
    "smooth_step",
    "kappa",
    "lp_weight",
    "block_weight",
    "multiplier_apply",
    "dealias_product",
    "exact_product",
    "sobolev_norm",
    "zygmund_norm",
    "lp_block",
    "lp_lowpass",
    "lp_blocks",
]

Multiplier = Union[Callable[..., np.ndarray], np.ndarray, complex, float]

# kappa(theta) = 1 for |theta| <= KAPPA_INNER, 0 for |theta| >= KAPPA_OUTER
KAPPA_INNER = 1.1
KAPPA_OUTER = 1.9


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, 2*pi*L)^dim`` with ``n`` points per axis."""

    dim: int = 1
    n: int = 64
    L: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def axes(self) -> tuple:
        return tuple(range(-self.dim, 0))

    @property
    def dx(self) -> float:
        return 2 * math.pi * self.L / self.n

    @cached_property
    def coords(self) -> tuple:
        x1 = self.dx * np.arange(self.n)
        return tuple(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    @cached_property
    def index(self) -> tuple:
        i1 = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)
        return tuple(np.meshgrid(*([i1] * self.dim), indexing="ij"))

    @cached_property
    def ks(self) -> tuple:
        """Physical wavenumbers, one array of grid shape per dimension."""
        return tuple(i / self.L for i in self.index)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.ks))

    @cached_property
    def kbracket(self) -> np.ndarray:
        """Japanese bracket <xi> = sqrt(1 + |xi|^2)."""
        return np.sqrt(1.0 + self.kabs**2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        return np.any([i == -self.n // 2 for i in self.index], axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep modes with 3|index| < n in every dimension."""
        return np.all([3 * np.abs(i) < self.n for i in self.index], axis=0)

    @cached_property
    def lp_top(self) -> int:
        """Smallest K with S_K = identity on every grid wavenumber."""
        kmax = float(self.kabs.max())
        k = 0
        while KAPPA_INNER * 2.0**k < kmax:
            k += 1
        return k

    def check_same(self, *others: "Grid"):
        for o in others:
            if o != self:
                raise GridMismatch(f"grid mismatch: {self} vs {o}")

    def field(self, values) -> "Field":
        return Field(self, values)

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.shape, float(c)))

    def from_function(self, func: Callable[..., np.ndarray]) -> "Field":
        return Field(self, np.broadcast_to(func(*self.coords), self.shape))


class Field:
    """Real scalar field on a periodic grid, immutable, with a cached spectrum."""

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            raise GridMismatch(f"values of shape {arr.shape} do not fit grid shape {grid.shape}")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    @cached_property
    def spectrum(self) -> np.ndarray:
        spec = np.fft.fftn(self.values) / self.grid.size
        spec.flags.writeable = False
        return spec

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> "Field":
        vals = np.fft.ifftn(spectrum) * grid.size
        return cls(grid, vals.real)

    # arithmetic -----------------------------------------------------------
    def _other(self, other):
        if isinstance(other, Field):
            self.grid.check_same(other.grid)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __repr__(self):
        return f"Field(grid={self.grid}, max|f|={self.max_abs():.3e})"

    # reductions -----------------------------------------------------------
    def mean(self) -> float:
        return float(self.values.mean())

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def l2(self) -> float:
        """Root-mean-square norm (equals the s=0 Sobolev norm)."""
        return float(np.sqrt(np.mean(self.values**2)))

    def inner(self, other: "Field") -> float:
        self.grid.check_same(other.grid)
        return float(np.mean(self.values * other.values))

    # calculus -------------------------------------------------------------
    def derivative(self, axis: int = 0, order: int = 1) -> "Field":
        k = self.grid.ks[axis]
        return multiplier_apply(self, (1j * k) ** order)

    def grad(self) -> list:
        return [self.derivative(i) for i in range(self.grid.dim)]

    def laplacian(self) -> "Field":
        return multiplier_apply(self, -self.grid.kabs**2)

    def dealiased(self) -> "Field":
        return Field.from_spectrum(self.grid, self.spectrum * self.grid.dealias_mask)

    # snapshots ------------------------------------------------------------
    def to_csv(self, path):
        names = ["x", "y"][: self.grid.dim]
        coords = [c.ravel() for c in self.grid.coords]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["value"])
            for row in zip(*coords, self.values.ravel()):
                w.writerow([repr(float(v)) for v in row])

    def spectrum_to_csv(self, path):
        names = ["kx", "ky"][: self.grid.dim]
        ks = [k.ravel() for k in self.grid.ks]
        spec = self.spectrum.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["re", "im"])
            for i in range(spec.size):
                w.writerow([repr(float(k[i])) for k in ks] + [repr(float(spec[i].real)), repr(float(spec[i].imag))])

    @classmethod
    def from_csv(cls, path, grid: Grid = None) -> "Field":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        dim = len(header) - 1
        data = np.array(body, dtype=float)
        n = int(round(len(body) ** (1.0 / dim)))
        if grid is None:
            x1 = np.unique(data[:, 0])
            L = x1[1] * n / (2 * math.pi) if len(x1) > 1 else 1.0
            grid = Grid(dim=dim, n=n, L=float(L))
        return cls(grid, data[:, -1].reshape(grid.shape))


# ---------------------------------------------------------------------------
# Littlewood-Paley cutoffs
# ---------------------------------------------------------------------------


def smooth_step(t):
    """C-infinity transition: 1 for t <= 0, 0 for t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 0, 1.0, 0.0)
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    a = np.exp(-1.0 / (1.0 - tm))
    b = np.exp(-1.0 / tm)
    out[mid] = a / (a + b)
    return out


def kappa(theta):
    """Radial cutoff equal to 1 on |theta| <= 1.1 and 0 on |theta| >= 1.9."""
    return smooth_step((np.abs(theta) - KAPPA_INNER) / (KAPPA_OUTER - KAPPA_INNER))


def lp_weight(grid: Grid, k: int) -> np.ndarray:
    """Multiplier of S_k, i.e. kappa(2^-k |xi|); any integer k is allowed."""
    return kappa(grid.kabs * 2.0 ** (-k))


def block_weight(grid: Grid, k: int) -> np.ndarray:
    """Multiplier of Delta_k (Delta_0 = S_0)."""
    if k < 0:
        return np.zeros(grid.shape)
    if k == 0:
        return lp_weight(grid, 0)
    return lp_weight(grid, k) - lp_weight(grid, k - 1)


# ---------------------------------------------------------------------------
# Multipliers and products
# ---------------------------------------------------------------------------


def _reflect(arr: np.ndarray, axes) -> np.ndarray:
    """arr evaluated at -xi (FFT ordering)."""
    out = np.flip(arr, axis=axes)
    return np.roll(out, 1, axis=axes)


def multiplier_array(grid: Grid, m: Multiplier) -> np.ndarray:
    if callable(m):
        m = m(*grid.ks)
    return np.broadcast_to(np.asarray(m), grid.shape)


def multiplier_apply(f: Field, m: Multiplier, real: bool = True, rtol: float = 1e-12) -> Field:
    """Apply the Fourier multiplier m(D) to f.

    Nyquist modes are symmetrised so that they stay real; anywhere else the
    multiplier must be Hermitian (m(-xi) = conj m(xi)) when a real output is
    requested.
    """
    grid = f.grid
    marr = multiplier_array(grid, m)
    if real and np.iscomplexobj(marr):
        herm = 0.5 * (marr + np.conj(_reflect(marr, grid.axes)))
        off = np.abs(marr - herm)
        scale = max(float(np.abs(marr).max()), 1.0)
        bad = (~grid.nyquist_mask) & (off > rtol * scale)
        if bad.any():
            raise NonHermitianMultiplier(
                f"multiplier is not Hermitian-symmetric at {int(bad.sum())} modes "
                f"(max asymmetry {float(off[bad].max()):.3e})"
            )
        marr = np.where(grid.nyquist_mask, herm, marr)
    return Field.from_spectrum(grid, f.spectrum * marr)


def _resize_axis(spec: np.ndarray, axis: int, m: int) -> np.ndarray:
    """Zero-pad (m > n) or fold-truncate (m < n) one spectral axis.

    Padding splits the Nyquist coefficient between +-n/2; truncation merges
    the two coefficients that alias onto the new Nyquist mode.
    """
    n = spec.shape[axis]
    if m == n:
        return spec
    shape = list(spec.shape)
    shape[axis] = m
    out = np.zeros(shape, dtype=complex)

    def sl(a, b):
        s = [slice(None)] * spec.ndim
        s[axis] = slice(a, b)
        return tuple(s)

    if m > n:
        h = n // 2
        out[sl(0, h)] = spec[sl(0, h)]
        out[sl(m - h + 1, m)] = spec[sl(h + 1, n)]
        out[sl(h, h + 1)] = 0.5 * spec[sl(h, h + 1)]
        out[sl(m - h, m - h + 1)] = 0.5 * spec[sl(h, h + 1)]
    else:
        h = m // 2
        out[sl(0, h)] = spec[sl(0, h)]
        out[sl(h + 1, m)] = spec[sl(n - h + 1, n)]
        out[sl(h, h + 1)] = spec[sl(h, h + 1)] + spec[sl(n - h, n - h + 1)]
    return out


def resize_spectrum(spec: np.ndarray, dim: int, m: int) -> np.ndarray:
    for ax in range(spec.ndim - dim, spec.ndim):
        spec = _resize_axis(spec, ax, m)
    return spec


def product_spectrum(fhat: np.ndarray, ghat: np.ndarray, dim: int) -> np.ndarray:
    """Alias-free product of two (batched) normalised spectra via 3/2 padding.

    The exact product is projected onto the grid's mode set, so every retained
    mode is free of aliasing.
    """
    n = fhat.shape[-1]
    m = 3 * n // 2
    axes = tuple(range(-dim, 0))
    fp = np.fft.ifftn(resize_spectrum(fhat, dim, m), axes=axes).real * m**dim
    gp = np.fft.ifftn(resize_spectrum(ghat, dim, m), axes=axes).real * m**dim
    prod = np.fft.fftn(fp * gp, axes=axes) / m**dim
    return resize_spectrum(prod, dim, n)


def exact_product(f: Field, g: Field) -> Field:
    """f*g projected onto the grid modes without aliasing."""
    f.grid.check_same(g.grid)
    return Field.from_spectrum(f.grid, product_spectrum(f.spectrum, g.spectrum, f.grid.dim))


def dealias_product(f: Field, g: Field) -> Field:
    """Pointwise product under the 2/3 rule.

    Both factors and the result are restricted to modes with 3|index| < n,
    which makes every retained output mode alias-free.
    """
    f.grid.check_same(g.grid)
    mask = f.grid.dealias_mask
    fv = Field.from_spectrum(f.grid, f.spectrum * mask).values
    gv = Field.from_spectrum(g.grid, g.spectrum * mask).values
    prod = Field(f.grid, fv * gv)
    return Field.from_spectrum(f.grid, prod.spectrum * mask)


# ---------------------------------------------------------------------------
# Norms and dyadic blocks
# ---------------------------------------------------------------------------


def sobolev_norm(f: Field, s: float) -> float:
    """sqrt(sum (1 + |xi|^2)^s |f_hat(xi)|^2) with the 1/n^d normalisation."""
    w = (1.0 + f.grid.kabs**2) ** s
    return float(np.sqrt(np.sum(w * np.abs(f.spectrum) ** 2)))


def lp_lowpass(f: Field, k: int) -> Field:
    """S_k f = kappa_k(D) f."""
    return Field.from_spectrum(f.grid, f.spectrum * lp_weight(f.grid, k))


def lp_block(f: Field, k: int) -> Field:
    """Delta_k f; zero for k < 0 and for k above the grid's dyadic range."""
    return Field.from_spectrum(f.grid, f.spectrum * block_weight(f.grid, k))


def lp_blocks(f: Field) -> list:
    """[Delta_0 f, ..., Delta_K f] with K = grid.lp_top; they sum to f."""
    return [lp_block(f, k) for k in range(f.grid.lp_top + 1)]


def zygmund_norm(f: Field, s: float) -> float:
    """sup_q 2^{qs} max |Delta_q f| over the grid's dyadic blocks."""
    return max(2.0 ** (q * s) * b.max_abs() for q, b in enumerate(lp_blocks(f)))


def stack_values(fields: Sequence[Field]) -> np.ndarray:
    return np.stack([f.values for f in fields])
