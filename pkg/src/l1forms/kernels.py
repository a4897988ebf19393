"""Homogeneous kernels and free-space convolution on a grid.

Every kernel here is a finite sum of power terms ``c x^a |x|^b`` with a
common homogeneity degree, so derivatives, reflections and homogeneity are
exact symbolic operations.  Matrix-valued kernels between form degrees store
one scalar block per axis plus a sparse sign pattern.

Free-space convolution zero-pads to ``2N`` points per axis, so the result on
the original box is the exact linear (non-periodic) discrete convolution.  The
sampled kernel needs a correction near the singularity; the default
``"lattice"`` scheme uses Epstein zeta values, which makes the quadrature
error of ``c |x|^b`` and ``c x_j |x|^b`` fourth order for smooth data.  The
``"cell_average"`` scheme replaces the origin sample by the exact mean of the
kernel over the origin cell.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy import integrate, special

from . import _jit
from .diffops import d_spectrum, wavenumbers
from .exterior import DegreeError, basis, raising_table
from .grid import Ball, GridForm, Grid, build_cutoff, lp_norm, sphere_area, weak_norm

SCHEMES = ("lattice", "cell_average", "none")


class SupportError(ValueError):
    """Input is not compactly supported well inside the grid box."""


# ---------------------------------------------------------------------------
# scalar power-term kernels


@dataclass(frozen=True, order=True)
class PowerTerm:
    """``coeff * prod_i x_i^alpha_i * |x|^beta``."""

    alpha: tuple[int, ...]
    beta: float
    coeff: float

    @property
    def degree(self) -> float:
        return sum(self.alpha) + self.beta

    def __call__(self, x: np.ndarray) -> np.ndarray:
        r2 = np.einsum("i...,i...->...", x, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.coeff * r2 ** (self.beta / 2)
        for i, a in enumerate(self.alpha):
            if a:
                out = out * x[i] ** a
        return out


@dataclass(frozen=True)
class ScalarKernel:
    n: int
    terms: tuple[PowerTerm, ...]

    def __post_init__(self):
        merged: dict[tuple, float] = {}
        for t in self.terms:
            if len(t.alpha) != self.n:
                raise DegreeError("power term dimension mismatch")
            key = (t.alpha, float(t.beta))
            merged[key] = merged.get(key, 0.0) + t.coeff
        terms = tuple(sorted(PowerTerm(a, b, c) for (a, b), c in merged.items() if c != 0))
        degrees = {round(t.degree, 12) for t in terms}
        if len(degrees) > 1:
            raise ValueError(f"terms of different homogeneity {sorted(degrees)}")
        object.__setattr__(self, "terms", terms)

    @property
    def degree(self) -> float:
        return self.terms[0].degree if self.terms else 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[1:])
        for t in self.terms:
            out = out + t(x)
        return out

    def derivative(self, j: int) -> "ScalarKernel":
        """Exact ``d/dx_j``, ``j`` 0-based."""
        out = []
        for t in self.terms:
            a = list(t.alpha)
            if a[j]:
                lower = a.copy()
                lower[j] -= 1
                out.append(PowerTerm(tuple(lower), t.beta, t.coeff * a[j]))
            if t.beta:
                upper = a.copy()
                upper[j] += 1
                out.append(PowerTerm(tuple(upper), t.beta - 2, t.coeff * t.beta))
        return ScalarKernel(self.n, tuple(out))

    def reflected(self) -> "ScalarKernel":
        """``x -> K(-x)``."""
        return ScalarKernel(self.n, tuple(PowerTerm(t.alpha, t.beta, t.coeff * (-1) ** sum(t.alpha))
                                          for t in self.terms))

    def scaled(self, c: float) -> "ScalarKernel":
        return ScalarKernel(self.n, tuple(PowerTerm(t.alpha, t.beta, c * t.coeff) for t in self.terms))


@dataclass(frozen=True)
class HomogeneousKernel:
    """Kernel of type ``mu`` on R^n, homogeneous of degree ``mu - n``.

    A scalar kernel (``entries is None``) convolves every component of a form
    of any degree.  A matrix kernel maps ``in_degree`` forms to
    ``out_degree`` forms; ``entries`` lists ``(out_pos, in_pos, sign, block)``
    and the (out, in) entry is ``sign * blocks[block]``.
    """

    n: int
    mu: float
    label: str
    blocks: tuple[ScalarKernel, ...]
    entries: tuple[tuple[int, int, int, int], ...] | None = None
    in_degree: int | None = None
    out_degree: int | None = None

    def __post_init__(self):
        for b in self.blocks:
            if b.terms and abs(b.degree - (self.mu - self.n)) > 1e-12:
                raise ValueError(f"block of degree {b.degree} in a kernel of type {self.mu}")

    @property
    def homogeneity(self) -> float:
        return self.mu - self.n

    @property
    def is_scalar(self) -> bool:
        return self.entries is None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Value at points ``x`` of shape ``(n, ...)``; shape ``(C_out, C_in, ...)`` for matrix kernels."""
        x = np.asarray(x, dtype=float)
        if self.is_scalar:
            return self.blocks[0](x)
        vals = [b(x) for b in self.blocks]
        out = np.zeros((len(basis(self.n, self.out_degree)), len(basis(self.n, self.in_degree))) + x.shape[1:])
        for o, i, s, b in self.entries:
            out[o, i] += s * vals[b]
        return out

    def _with(self, blocks, label, mu=None, transpose=False) -> "HomogeneousKernel":
        entries, din, dout = self.entries, self.in_degree, self.out_degree
        if transpose and entries is not None:
            entries = tuple((i, o, s, b) for o, i, s, b in entries)
            din, dout = dout, din
        return HomogeneousKernel(self.n, self.mu if mu is None else mu, label, tuple(blocks), entries, din, dout)

    def reflected(self) -> "HomogeneousKernel":
        return self._with([b.reflected() for b in self.blocks], f"reflect({self.label})")

    def adjoint(self) -> "HomogeneousKernel":
        """Reflected transpose: ``<K * u, v> = <u, K.adjoint() * v>``."""
        return self._with([b.reflected() for b in self.blocks], f"adjoint({self.label})", transpose=True)

    def derivative(self, j: int) -> "HomogeneousKernel":
        """Entry-wise ``d/dx_j`` (``j`` 0-based); a kernel of type ``mu - 1``."""
        return self._with([b.derivative(j) for b in self.blocks], f"D{j + 1}({self.label})", mu=self.mu - 1)


def _check_dimension(n: int):
    if n < 3:
        raise ValueError(f"the Newtonian kernel is used for n >= 3, got n = {n}")


def newtonian(n: int) -> HomogeneousKernel:
    """``G = c_n |x|^(2-n)`` with ``-Delta G = delta``; type 2."""
    _check_dimension(n)
    c = 1.0 / ((n - 2) * sphere_area(n))
    return HomogeneousKernel(n, 2.0, f"newtonian{n}", (ScalarKernel(n, (PowerTerm((0,) * n, 2.0 - n, c),)),))


def _gradient_block(n: int, j: int) -> ScalarKernel:
    alpha = tuple(1 if i == j else 0 for i in range(n))
    return ScalarKernel(n, (PowerTerm(alpha, -float(n), -1.0 / sphere_area(n)),))


def newtonian_gradient(n: int, j: int) -> HomogeneousKernel:
    """``d_j G = -x_j / (sigma_{n-1} |x|^n)`` (``j`` 1-based); type 1."""
    _check_dimension(n)
    if not 1 <= j <= n:
        raise ValueError(f"axis {j} outside 1..{n}")
    return HomogeneousKernel(n, 1.0, f"dG{j}_{n}", (_gradient_block(n, j - 1),))


def riesz(n: int, alpha: float) -> HomogeneousKernel:
    """Riesz potential kernel ``I_alpha``, normalised so that its symbol is ``|k|^-alpha``."""
    if not 0 < alpha < n:
        raise ValueError(f"Riesz order {alpha} outside (0, {n})")
    c = math.gamma((n - alpha) / 2) / (math.pi ** (n / 2) * 2 ** alpha * math.gamma(alpha / 2))
    return HomogeneousKernel(n, float(alpha), f"riesz{alpha:g}_{n}",
                             (ScalarKernel(n, (PowerTerm((0,) * n, alpha - n, c),)),))


def dstar_green_kernel(n: int, h: int) -> HomogeneousKernel:
    """Matrix kernel of ``d* Delta^-1`` from h-forms to (h-1)-forms; type 1.

    ``(K u)_J = sum -s (d_j G) * u_I`` over ``dx_j ^ dx^J = s dx^I``; that is
    ``K u(x) = sigma^-1 int i_{x-y} u(y) |x-y|^-n dy``.
    """
    _check_dimension(n)
    if not 1 <= h <= n:
        raise DegreeError(f"d* Delta^-1 needs 1 <= h <= n, got h = {h}")
    blocks = tuple(_gradient_block(n, j) for j in range(n))
    entries = tuple((lo, up, -sign, j) for up, lo, j, sign in raising_table(n, h - 1))
    return HomogeneousKernel(n, 1.0, f"dstarG{n}_{h}", blocks, entries, in_degree=h, out_degree=h - 1)


def homogeneity_error(K: HomogeneousKernel, samples: int = 200, seed: int = 0) -> float:
    """Max of ``|K(s x) - s^(mu-n) K(x)| / |K(x)|`` over random ``(s, x)``."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(K.n, samples))
    s = np.exp(rng.uniform(-2, 2, size=samples))
    a = K(x * s)
    b = s ** K.homogeneity * K(x)
    scale = np.maximum(np.abs(K(x)), 1e-300)
    mask = np.abs(K(x)) > 1e-12 * np.abs(K(x)).max()
    return float(np.max(np.where(mask, np.abs(a - b) / scale, 0.0)))


# ---------------------------------------------------------------------------
# singular corrections


@lru_cache(maxsize=None)
def epstein_zeta(n: int, s: float) -> float:
    """``Z_n(s) = sum_{m in Z^n, m != 0} |m|^(-2s)``, analytically continued.

    Uses the theta-function representation
    ``pi^-s Gamma(s) Z(s) = -1/s - 1/(n/2 - s) + int_1^inf (t^(s-1) + t^(n/2-s-1)) (theta(t)^n - 1) dt``.
    """
    if s == 0:
        return -1.0
    if abs(s - n / 2) < 1e-14:
        raise ValueError("Epstein zeta has a pole at s = n/2")
    if s < 0 and s == int(s):
        return 0.0
    k = np.arange(1, 12)

    def integrand(t):
        theta = 1.0 + 2.0 * np.sum(np.exp(-np.pi * k * k * t))
        return (t ** (s - 1) + t ** (n / 2 - s - 1)) * (theta ** n - 1.0)

    tail, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)
    return float(math.pi ** s * special.rgamma(s) * (-1.0 / s - 1.0 / (n / 2 - s) + tail))


@lru_cache(maxsize=None)
def unit_cube_integral(n: int, alpha: tuple[int, ...], beta: float, nodes: int = 48) -> float:
    """``int_{[-1/2,1/2]^n} x^alpha |x|^beta dx`` for ``|alpha| + beta > -n``.

    With ``f`` homogeneous of degree ``d``, ``div(x f) = (n + d) f`` and the
    integral reduces to face integrals, which are smooth.
    """
    d = sum(alpha) + beta
    if d <= -n:
        raise ValueError("integrand is not locally integrable")
    g, w = np.polynomial.legendre.leggauss(nodes)
    g, w = g / 2, w / 2
    total = 0.0
    if n == 1:
        face_pts = np.zeros((0, 1))
        face_w = np.ones(1)
    else:
        face_pts = np.stack(np.meshgrid(*([g] * (n - 1)), indexing="ij")).reshape(n - 1, -1)
        face_w = np.prod(np.stack(np.meshgrid(*([w] * (n - 1)), indexing="ij")).reshape(n - 1, -1), axis=0)
    term = PowerTerm(alpha, beta, 1.0)
    for axis in range(n):
        for side in (-0.5, 0.5):
            x = np.insert(face_pts, axis, side, axis=0) if n > 1 else np.array([[side]])
            total += 0.5 * np.sum(face_w * term(x))
    return total / (n + d)


def _correction_stencil(block: ScalarKernel, spacing: float, scheme: str) -> list[tuple[tuple[int, ...], float]]:
    """Additive kernel weights at small lattice offsets."""
    n = block.n
    out: dict[tuple[int, ...], float] = {}
    origin = (0,) * n

    def add(m, v):
        out[m] = out.get(m, 0.0) + v

    for t in block.terms:
        order = sum(t.alpha)
        if scheme == "none":
            continue
        if scheme == "lattice" and order == 0:
            add(origin, -t.coeff * epstein_zeta(n, -t.beta / 2) * spacing ** t.beta)
        elif scheme == "lattice" and order == 1:
            j = t.alpha.index(1)
            w = -t.coeff * epstein_zeta(n, -(t.beta + 2) / 2) * spacing ** (t.beta + 1) / (2 * n)
            e = tuple(1 if i == j else 0 for i in range(n))
            add(e, w)
            add(tuple(-i for i in e), -w)
        elif order % 2 == 0:
            add(origin, t.coeff * unit_cube_integral(n, t.alpha, t.beta) * spacing ** t.degree)
    return list(out.items())


# ---------------------------------------------------------------------------
# sampling on the padded lattice


def padded_offsets(N: int, n: int, spacing: float) -> np.ndarray:
    """Offsets ``m h`` with ``m in [-N, N)`` in FFT order, shape ``(n, 2N, ..., 2N)``."""
    m = sfft.fftfreq(2 * N, 1.0 / (2 * N))
    return np.stack(np.meshgrid(*([m * spacing] * n), indexing="ij"))


def _window_values(x: np.ndarray, window) -> np.ndarray | None:
    if window is None:
        return None
    kind, R = window
    n = x.shape[0]
    psi = build_cutoff(Ball((0.0,) * n, R), Ball((0.0,) * n, 2 * R))(x)
    if kind == "near":
        return psi
    if kind == "far":
        return 1.0 - psi
    raise ValueError(f"unknown window {kind!r}")


def sample_block(block: ScalarKernel, N: int, spacing: float, scheme: str = "lattice", window=None) -> np.ndarray:
    """Kernel weights on the padded ``(2N)^n`` lattice in FFT order."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown correction scheme {scheme!r}; choose from {SCHEMES}")
    n = block.n
    x = padded_offsets(N, n, spacing)
    origin = (0,) * n
    with np.errstate(divide="ignore", invalid="ignore"):
        w = block(x)
    w[origin] = 0.0
    win = _window_values(x, window)
    if win is not None:
        w *= win
    if window is None or window[0] == "near":
        for m, v in _correction_stencil(block, spacing, scheme):
            w[m] += v
    return w


class _SpectrumCache:
    """Bounded LRU cache of padded kernel spectra, safe across threads."""

    def __init__(self, maxsize: int = 24):
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize

    def get(self, key, build):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        value = build()
        with self._lock:
            self._data[key] = value
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return value

    def clear(self):
        with self._lock:
            self._data.clear()


SPECTRUM_CACHE = _SpectrumCache()


def _axes(n):
    return tuple(range(-n, 0))


@dataclass(frozen=True)
class FreeSpaceOperator:
    """Convolution with ``kernel`` on ``grid`` as an operator on compactly supported forms.

    ``window`` is ``None``, ``("near", R)`` or ``("far", R)`` for the
    truncated pieces ``psi_R k`` and ``(1 - psi_R) k``.  Singular corrections
    go to the near piece only.
    """

    kernel: HomogeneousKernel
    grid: Grid
    scheme: str = "lattice"
    window: tuple[str, float] | None = None
    guard_cells: int = 1
    support_tol: float = 1e-8

    def __post_init__(self):
        if self.kernel.n != self.grid.n:
            raise DegreeError("kernel and grid dimensions differ")
        if not 0 < self.kernel.mu < self.grid.n:
            raise ValueError(f"kernel type {self.kernel.mu} outside (0, {self.grid.n})")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown correction scheme {self.scheme!r}")

    # -- plumbing --------------------------------------------------------

    def _spectrum(self, b: int) -> np.ndarray:
        block = self.kernel.blocks[b]
        g = self.grid
        key = (block, g.N, g.spacing, self.scheme, self.window)
        return SPECTRUM_CACHE.get(key, lambda: g.cell_volume * sfft.rfftn(
            sample_block(block, g.N, g.spacing, self.scheme, self.window)))

    def samples(self) -> list[np.ndarray]:
        g = self.grid
        return [sample_block(b, g.N, g.spacing, self.scheme, self.window) for b in self.kernel.blocks]

    def _padded_ks(self):
        return wavenumbers(2 * self.grid.N, self.grid.spacing, self.grid.n)

    def check_support(self, u: GridForm):
        """Raise unless ``u`` is negligible within ``guard_cells`` of the box boundary."""
        a = u.pointwise_norm()
        top = a.max(initial=0.0)
        if top == 0 or self.guard_cells <= 0:
            return
        gc = self.guard_cells
        edge = a.copy()
        edge[(slice(gc, -gc),) * u.n] = 0.0
        if edge.max() > self.support_tol * top:
            raise SupportError("input is not supported inside the grid box; enlarge the box")

    def _forward(self, u: GridForm) -> np.ndarray:
        if u.grid != self.grid:
            raise ValueError("form lives on a different grid")
        self.check_support(u)
        N, n = self.grid.N, self.grid.n
        return sfft.rfftn(u.data, s=(2 * N,) * n, axes=_axes(n))

    def _convolve_spectrum(self, U: np.ndarray, degree: int) -> tuple[np.ndarray, int]:
        K = self.kernel
        if K.is_scalar:
            return U * self._spectrum(0), degree
        if degree != K.in_degree:
            raise DegreeError(f"kernel {K.label} acts on {K.in_degree}-forms, got degree {degree}")
        out = np.zeros((len(basis(K.n, K.out_degree)),) + U.shape[1:], dtype=complex)
        for o, i, s, b in K.entries:
            out[o] += s * self._spectrum(b) * U[i]
        return out, K.out_degree

    def _back(self, spec: np.ndarray, degree: int) -> GridForm:
        N, n = self.grid.N, self.grid.n
        full = sfft.irfftn(spec, s=(2 * N,) * n, axes=_axes(n))
        return GridForm(self.grid, degree, full[(slice(None),) + (slice(0, N),) * n])

    # -- operators -------------------------------------------------------

    def apply(self, u: GridForm) -> GridForm:
        """``K * u`` on the grid box."""
        spec, deg = self._convolve_spectrum(self._forward(u), u.degree)
        return self._back(spec, deg)

    def apply_d(self, u: GridForm) -> GridForm:
        """``d (K * u)``, differentiating on the padded lattice."""
        spec, deg = self._convolve_spectrum(self._forward(u), u.degree)
        return self._back(d_spectrum(spec, self._padded_ks(), self.grid.n, deg), deg + 1)

    def apply_to_d(self, u: GridForm) -> GridForm:
        """``K * (d u)``, differentiating on the padded lattice."""
        U = d_spectrum(self._forward(u), self._padded_ks(), self.grid.n, u.degree)
        spec, deg = self._convolve_spectrum(U, u.degree + 1)
        return self._back(spec, deg)

    def apply_laplacian(self, u: GridForm) -> GridForm:
        """``Delta (K * u)`` with ``Delta = -sum_j d_j^2``, on the padded lattice."""
        spec, deg = self._convolve_spectrum(self._forward(u), u.degree)
        ks = self._padded_ks()
        ksq = sum(k * k for k in ks)
        return self._back(spec * ksq, deg)

    def apply_gradient(self, u: GridForm) -> np.ndarray:
        """All first partials of every component of ``K * u``, shape ``(C, n, N, ..., N)``."""
        spec, _ = self._convolve_spectrum(self._forward(u), u.degree)
        ks = self._padded_ks()
        N, n = self.grid.N, self.grid.n
        out = []
        for j in range(n):
            full = sfft.irfftn(1j * ks[j] * spec, s=(2 * N,) * n, axes=_axes(n))
            out.append(full[(slice(None),) + (slice(0, N),) * n])
        return np.stack(out, axis=1)


def freespace_convolve(K: HomogeneousKernel, u: GridForm, scheme: str = "lattice") -> GridForm:
    """R^n convolution ``K * u`` for ``u`` supported inside the grid box."""
    return FreeSpaceOperator(K, u.grid, scheme).apply(u)


def direct_convolve(K: HomogeneousKernel, u: GridForm, scheme: str = "lattice") -> GridForm:
    """The same discrete convolution by brute-force summation (test oracle)."""
    op = FreeSpaceOperator(K, u.grid, scheme)
    W = op.samples()
    cv = u.grid.cell_volume
    if K.is_scalar:
        out = np.stack([_jit.direct_convolve(W[0], c) for c in u.data]) * cv
        return GridForm(u.grid, u.degree, out)
    if u.degree != K.in_degree:
        raise DegreeError(f"kernel {K.label} acts on {K.in_degree}-forms")
    out = np.zeros((len(basis(K.n, K.out_degree)),) + u.grid.shape)
    for o, i, s, b in K.entries:
        out[o] += s * _jit.direct_convolve(W[b], u.data[i]) * cv
    return GridForm(u.grid, K.out_degree, out)


# ---------------------------------------------------------------------------
# truncation


@dataclass(frozen=True)
class TruncatedKernelPair:
    """``k = psi_R k + (1 - psi_R) k`` with ``psi_R`` = 1 on ``|x| <= R``, 0 on ``|x| >= 2R``."""

    kernel: HomogeneousKernel
    grid: Grid
    R: float
    near: FreeSpaceOperator
    far: FreeSpaceOperator
    full: FreeSpaceOperator

    def near_samples(self) -> list[np.ndarray]:
        return self.near.samples()

    def far_samples(self) -> list[np.ndarray]:
        return self.far.samples()


def truncate_split(K: HomogeneousKernel, grid: Grid, R: float, scheme: str = "lattice",
                   guard_cells: int = 1) -> TruncatedKernelPair:
    if not 0 < R < grid.L / 4:
        raise ValueError(f"truncation radius {R} outside (0, L/4 = {grid.L / 4})")
    return TruncatedKernelPair(
        K, grid, R,
        near=FreeSpaceOperator(K, grid, scheme, ("near", R), guard_cells),
        far=FreeSpaceOperator(K, grid, scheme, ("far", R), guard_cells),
        full=FreeSpaceOperator(K, grid, scheme, None, guard_cells),
    )


# ---------------------------------------------------------------------------
# diagnostics


def _shell_mean(values: np.ndarray, r: np.ndarray, radius: float, width: float) -> float:
    mask = np.abs(r - radius) < width / 2
    return float(values[mask].mean()) if mask.any() else float("nan")


def fit_exponent(radii: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log value`` against ``log radius``."""
    lr, lv = np.log(np.asarray(radii, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(lr, lv, 1)[0])


@dataclass
class DecayReport:
    rows: list[tuple[float, float, float]]
    exponent: float
    expected: float

    @property
    def within(self) -> bool:
        return abs(self.exponent - self.expected) <= 0.3

    @property
    def bounded(self) -> bool:
        return self.exponent <= self.expected + 0.3


def far_field_decay_check(psi: GridForm, K: HomogeneousKernel, radii: Iterable[float],
                          derivative_order: int = 0, scheme: str = "lattice") -> DecayReport:
    """Shell means of ``|D^l (psi * K)|`` at the given radii, with a power-law fit."""
    radii = [float(r) for r in radii]
    grid = psi.grid
    limit = grid.L / 2 - grid.spacing
    if any(r <= 0 or r > limit for r in radii):
        raise ValueError(f"radii must lie in (0, {limit:g}] to stay inside the grid box")
    if derivative_order not in (0, 1):
        raise ValueError("derivative order must be 0 or 1")
    op = FreeSpaceOperator(K, grid, scheme)
    if derivative_order == 0:
        mag = op.apply(psi).pointwise_norm()
    else:
        g = op.apply_gradient(psi)
        mag = np.sqrt(np.sum(g * g, axis=(0, 1)))
    r = grid.radius()
    expected = K.mu - K.n - derivative_order
    rows = [(p, _shell_mean(mag, r, p, grid.spacing), p ** expected) for p in radii]
    return DecayReport(rows, fit_exponent(radii, [v for _, v, _ in rows]), expected)


def annulus_decay_profile(K: HomogeneousKernel, f: GridForm, R_list: Iterable[float],
                          scheme: str = "lattice", tol: float = 1e-8) -> list[float]:
    """``R^-mu int_{R < |x| < 2R} |K * f|`` for each R."""
    R_list = [float(R) for R in R_list]
    grid = f.grid
    scale = lp_norm(f, 1)
    if scale > 0 and np.any(np.abs(f.integral()) > tol * scale):
        raise ValueError("annulus decay needs a mean-zero input")
    if any(2 * R > grid.L / 2 for R in R_list):
        raise ValueError("annulus leaves the grid box")
    if scale == 0:
        return [0.0] * len(R_list)
    mag = FreeSpaceOperator(K, grid, scheme).apply(f).pointwise_norm()
    r = grid.radius()
    return [float(R ** -K.mu * mag[(r > R) & (r < 2 * R)].sum() * grid.cell_volume) for R in R_list]


@dataclass
class WeakTypeReport:
    ratios: list[float]
    notes: list[str] = field(default_factory=list)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else float("nan")


def weak_type_bound_check(K: HomogeneousKernel, family: Iterable[GridForm], scheme: str = "lattice") -> WeakTypeReport:
    """``||f * K||_{M^p} / ||f||_1`` with ``p = n / (n - mu)`` over a family."""
    p = K.n / (K.n - K.mu)
    report = WeakTypeReport([])
    for k, f in enumerate(family):
        mass = lp_norm(f, 1)
        if mass == 0:
            report.notes.append(f"member {k} is zero; skipped")
            continue
        v = FreeSpaceOperator(K, f.grid, scheme).apply(f)
        report.ratios.append(weak_norm(v, p).m_norm / mass)
    return report
