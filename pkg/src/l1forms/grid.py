"""Grid-sampled differential forms and their measurement.

A :class:`GridForm` stores one real field per increasing multi-index on a
uniform cell-centred grid covering ``[-L/2, L/2)^n``.  Norms are midpoint
Riemann sums; the pointwise norm of a form is the Euclidean norm of its
coefficient vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .exterior import (
    ConstantForm,
    DegreeError,
    MultiIndex,
    basis,
    basis_position,
    permutation_sign,
)


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    L: float
    periodic: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.N < 2 or self.N % 2:
            raise ValueError(f"points per axis must be even, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"side length must be positive, got {self.L}")

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    def axis(self) -> np.ndarray:
        return -self.L / 2 + (np.arange(self.N) + 0.5) * self.spacing

    def coords(self) -> np.ndarray:
        """Cell centres, shape ``(n, N, ..., N)``."""
        return np.stack(np.meshgrid(*([self.axis()] * self.n), indexing="ij"))

    def radius(self, center=None) -> np.ndarray:
        x = self.coords()
        if center is not None:
            x = x - np.asarray(center, dtype=float).reshape((self.n,) + (1,) * self.n)
        return np.sqrt(np.einsum("i...,i...->...", x, x))

    def scaled(self, factor: float) -> "Grid":
        return Grid(self.n, self.N, self.L * factor, self.periodic)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def n(self):
        return len(self.center)

    def _offset(self, x):
        return x - np.asarray(self.center).reshape((-1,) + (1,) * (x.ndim - 1))

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Distance from the closed region (0 inside); ``x`` has shape (n, ...)."""
        d = self._offset(x)
        return np.maximum(np.sqrt(np.einsum("i...,i...->...", d, d)) - self.radius, 0.0)

    def contains(self, x: np.ndarray) -> np.ndarray:
        d = self._offset(x)
        return np.einsum("i...,i...->...", d, d) < self.radius ** 2

    def enlarged(self, r: float) -> "Ball":
        return Ball(self.center, self.radius + r)

    def extent(self) -> np.ndarray:
        return np.full(self.n, self.radius)

    def volume(self) -> float:
        n = self.n
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius ** n


@dataclass(frozen=True)
class Box:
    center: tuple[float, ...]
    half_widths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        hw = self.half_widths
        if np.isscalar(hw):
            hw = (hw,) * len(self.center)
        object.__setattr__(self, "half_widths", tuple(float(a) for a in hw))
        if len(self.half_widths) != len(self.center) or min(self.half_widths) <= 0:
            raise ValueError("box needs one positive half-width per axis")

    @property
    def n(self):
        return len(self.center)

    def _excess(self, x):
        c = np.asarray(self.center).reshape((-1,) + (1,) * (x.ndim - 1))
        a = np.asarray(self.half_widths).reshape(c.shape)
        return np.abs(x - c) - a

    def distance(self, x: np.ndarray) -> np.ndarray:
        e = np.maximum(self._excess(x), 0.0)
        return np.sqrt(np.einsum("i...,i...->...", e, e))

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.all(self._excess(x) < 0, axis=0)

    def enlarged(self, r: float) -> "Box":
        return Box(self.center, tuple(a + r for a in self.half_widths))

    def extent(self) -> np.ndarray:
        return np.asarray(self.half_widths)

    def volume(self) -> float:
        return float(np.prod(2 * np.asarray(self.half_widths)))


Region = Ball | Box


def inset_margin(inner: Region, outer: Region) -> float:
    """Smallest gap between ``inner`` and the boundary of ``outer`` (negative if not nested)."""
    ci, co = np.asarray(inner.center), np.asarray(outer.center)
    if isinstance(outer, Ball):
        if isinstance(inner, Ball):
            return outer.radius - inner.radius - float(np.linalg.norm(ci - co))
        corner = np.abs(ci - co) + np.asarray(inner.half_widths)
        return outer.radius - float(np.linalg.norm(corner))
    lo_o, hi_o = co - outer.half_widths, co + outer.half_widths
    ext = inner.extent()
    return float(min(np.min(hi_o - (ci + ext)), np.min((ci - ext) - lo_o)))


def region_mask(grid: Grid, region) -> np.ndarray:
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(region, np.ndarray):
        if region.shape != grid.shape:
            raise ValueError(f"mask shape {region.shape} != grid shape {grid.shape}")
        return region.astype(bool)
    return region.contains(grid.coords())


# ---------------------------------------------------------------------------
# grid forms


@dataclass(frozen=True, eq=False)
class GridForm:
    """Degree-``degree`` form on ``grid``; ``data[k]`` is the coefficient of ``basis(n, degree)[k]``."""

    grid: Grid
    degree: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid.n
        if not 0 <= self.degree <= n:
            raise DegreeError(f"degree {self.degree} outside [0, {n}]")
        data = np.array(self.data, dtype=float)
        expected = (len(basis(n, self.degree)),) + self.grid.shape
        if data.shape != expected:
            raise ValueError(f"data shape {data.shape} != {expected}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: Grid, degree: int) -> "GridForm":
        return cls(grid, degree, np.zeros((len(basis(grid.n, degree)),) + grid.shape))

    @classmethod
    def scalar(cls, grid: Grid, values) -> "GridForm":
        return cls(grid, 0, np.broadcast_to(values, grid.shape)[None])

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return basis(self.n, self.degree)

    @property
    def components(self) -> dict[MultiIndex, np.ndarray]:
        return dict(zip(self.indices, self.data))

    def component(self, key) -> np.ndarray:
        if not isinstance(key, MultiIndex):
            key = MultiIndex(tuple(key) if not isinstance(key, int) else (key,), self.n)
        return self.data[basis_position(self.n, self.degree)[key]]

    def _compatible(self, other: "GridForm"):
        if other.grid != self.grid or other.degree != self.degree:
            raise DegreeError("grid forms live on different grids or degrees")

    def __add__(self, other: "GridForm") -> "GridForm":
        self._compatible(other)
        return GridForm(self.grid, self.degree, self.data + other.data)

    def __sub__(self, other: "GridForm") -> "GridForm":
        self._compatible(other)
        return GridForm(self.grid, self.degree, self.data - other.data)

    def __neg__(self) -> "GridForm":
        return GridForm(self.grid, self.degree, -self.data)

    def __mul__(self, c) -> "GridForm":
        """Scalar multiple; ``c`` may be a number, a field, or a 0-form."""
        if isinstance(c, GridForm):
            if c.degree != 0 or c.grid != self.grid:
                raise DegreeError("only 0-forms act by multiplication")
            c = c.data[0]
        return GridForm(self.grid, self.degree, self.data * c)

    __rmul__ = __mul__

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.einsum("k...,k...->...", self.data, self.data))

    def restrict(self, region) -> "GridForm":
        """Zero outside ``region`` (a Ball, Box or boolean mask)."""
        return GridForm(self.grid, self.degree, self.data * region_mask(self.grid, region))

    def mean(self) -> np.ndarray:
        return self.data.reshape(self.data.shape[0], -1).mean(axis=1)

    def integral(self) -> np.ndarray:
        return self.data.reshape(self.data.shape[0], -1).sum(axis=1) * self.grid.cell_volume

    def wedge(self, other: "GridForm") -> "GridForm":
        if other.grid != self.grid:
            raise DegreeError("grid forms live on different grids")
        k = self.degree + other.degree
        if k > self.n:
            raise DegreeError(f"degree {self.degree} + {other.degree} exceeds dimension {self.n}")
        pos = basis_position(self.n, k)
        out = np.zeros((len(basis(self.n, k)),) + self.grid.shape)
        for a, I in enumerate(self.indices):
            for b, J in enumerate(other.indices):
                sign, K = MultiIndex.from_unsorted(I.entries + J.entries, self.n)
                if sign:
                    out[pos[K]] += sign * self.data[a] * other.data[b]
        return GridForm(self.grid, k, out)

    def wedge_constant(self, beta: ConstantForm) -> "GridForm":
        if beta.n != self.n:
            raise DegreeError("dimension mismatch")
        return self.wedge(GridForm(self.grid, beta.h, beta.vector().reshape((-1,) + (1,) * self.n)
                                   * np.ones(self.grid.shape)))

    def allclose(self, other: "GridForm", rtol: float = 1e-10) -> bool:
        self._compatible(other)
        scale = max(np.abs(self.data).max(initial=0.0), np.abs(other.data).max(initial=0.0), 1e-300)
        return bool(np.abs(self.data - other.data).max(initial=0.0) <= rtol * scale)


def sample(expr, grid: Grid, degree: int | None = None) -> GridForm:
    """Evaluate ``expr`` at the cell centres.

    ``expr`` is a ConstantForm, or a callable taking the coordinate array of
    shape ``(n, N, ..., N)`` and returning an array (a 0-form), a
    ConstantForm, or a mapping from index tuples to arrays or numbers.
    """
    if isinstance(expr, ConstantForm):
        value = expr
    else:
        value = expr(grid.coords())
    if isinstance(value, ConstantForm):
        if degree is not None and degree != value.h:
            raise DegreeError(f"expression has degree {value.h}, expected {degree}")
        data = value.vector().reshape((-1,) + (1,) * grid.n) * np.ones(grid.shape)
        return GridForm(grid, value.h, data)
    if isinstance(value, Mapping):
        if degree is None:
            raise ValueError("degree is required for mapping-valued expressions")
        out = np.zeros((len(basis(grid.n, degree)),) + grid.shape)
        pos = basis_position(grid.n, degree)
        for key, comp in value.items():
            entries = (key,) if isinstance(key, int) else tuple(getattr(key, "entries", key))
            sign, I = MultiIndex.from_unsorted(entries, grid.n)
            if I is None or I.degree != degree:
                raise DegreeError(f"component {entries} does not have degree {degree}")
            out[pos[I]] += sign * np.broadcast_to(comp, grid.shape)
        return GridForm(grid, degree, out)
    if degree not in (None, 0):
        raise DegreeError("array-valued expressions are 0-forms")
    return GridForm.scalar(grid, np.asarray(value, dtype=float))


# ---------------------------------------------------------------------------
# norms and level sets


def lp_norm(u: GridForm, p: float, region=None) -> float:
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = u.pointwise_norm()[region_mask(u.grid, region)]
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * u.grid.cell_volume) ** (1.0 / p))


def distribution_function(u: GridForm, t: float, region=None) -> float:
    """Measure of ``{|u| > t}``."""
    if not t > 0:
        raise ValueError(f"threshold must be positive, got {t}")
    a = u.pointwise_norm()[region_mask(u.grid, region)]
    return float(np.count_nonzero(a > t) * u.grid.cell_volume)


@dataclass(frozen=True)
class WeakNorm:
    m_norm: float
    weak_sup: float
    p: float

    @property
    def sandwich_constant(self) -> float:
        p = self.p
        return (p - 1) ** p / p ** (p + 1)


def weak_norm(u: GridForm, p: float, region=None) -> WeakNorm:
    """M^p norm and ``sup_t t^p lambda_u(t)`` of the sampled step function.

    The sup in the M^p norm runs over super-level sets, including the
    fractional cell at each level, which is exact for a piecewise constant
    field.  Both quantities are computed from one descending sort.
    """
    if not p > 1:
        raise ValueError(f"M^p norm needs p > 1, got {p}")
    a = u.pointwise_norm()[region_mask(u.grid, region)]
    a = np.sort(a[a > 0])[::-1]
    if a.size == 0:
        return WeakNorm(0.0, 0.0, p)
    v = u.grid.cell_volume
    inv_pp = 1.0 - 1.0 / p  # 1/p'
    k = np.arange(a.size)
    prefix = np.concatenate(([0.0], np.cumsum(a)[:-1]))  # sum of the k largest
    ends = (prefix + a) * v / (((k + 1) * v) ** inv_pp)
    # interior stationary point of (v*prefix + (m - k v) a) / m^(1/p') on [k v, (k+1) v]
    m_star = v * (prefix - k * a) * (p - 1) / a
    inside = (m_star > k * v) & (m_star < (k + 1) * v)
    interior = np.where(inside, (v * prefix + (m_star - k * v) * a) / np.where(inside, m_star, 1.0) ** inv_pp, 0.0)
    m_norm = float(max(ends.max(), interior.max()))
    weak_sup = float(np.max(a ** p * (k + 1) * v))
    return WeakNorm(m_norm, weak_sup, p)


def local_ls_bound(u: GridForm, p: float, s: float, window) -> tuple[float, float]:
    """``(int_W |u|^s, bound)`` where the bound uses only the weak L^p size of u.

    With ``lambda_u(t) <= A t^-p`` one gets
    ``int_W |u|^s <= p/(p-s) * A^(s/p) * |W|^(1-s/p)`` for ``1 <= s < p``.
    """
    if not 1 <= s < p:
        raise ValueError("need 1 <= s < p")
    mask = region_mask(u.grid, window)
    A = weak_norm(u, p).weak_sup
    volume = np.count_nonzero(mask) * u.grid.cell_volume
    value = float(np.sum(u.pointwise_norm()[mask] ** s) * u.grid.cell_volume)
    return value, p / (p - s) * A ** (s / p) * volume ** (1 - s / p)


# ---------------------------------------------------------------------------
# cutoffs


def smooth_step(t) -> np.ndarray:
    """C^infinity step: 0 for t <= 0, 1 for t >= 1, ``s(1/2) = 1/2``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        e1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return e0 / (e0 + e1)


def smooth_step_derivative(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tt = np.where(inside, t, 0.5)
    e0, e1 = np.exp(-1.0 / tt), np.exp(-1.0 / (1.0 - tt))
    ds = e0 * e1 * (1.0 / tt ** 2 + 1.0 / (1.0 - tt) ** 2) / (e0 + e1) ** 2
    return np.where(inside, ds, 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Smooth function equal to 1 on ``inner`` and 0 outside ``outer``."""

    inner: Region
    outer: Region

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape ``(n, ...)``."""
        inner, outer = self.inner, self.outer
        if isinstance(inner, Ball):
            width = inset_margin(inner, outer)
            d = inner.distance(x)
            return 1.0 - smooth_step(d / width)
        # tensor product of one-dimensional profiles
        c = np.asarray(inner.center).reshape((-1,) + (1,) * (x.ndim - 1))
        a = np.asarray(inner.half_widths).reshape(c.shape)
        co = np.asarray(outer.center).reshape(c.shape)
        ao = np.asarray(outer.half_widths).reshape(c.shape)
        lo = smooth_step((x - (co - ao)) / ((c - a) - (co - ao)))
        hi = smooth_step(((co + ao) - x) / ((co + ao) - (c + a)))
        return np.prod(lo * hi, axis=0)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Analytic gradient at points of shape ``(n, ...)``, same shape."""
        inner, outer = self.inner, self.outer
        if isinstance(inner, Ball):
            width = inset_margin(inner, outer)
            off = inner._offset(x)
            r = np.sqrt(np.einsum("i...,i...->...", off, off))
            ds = smooth_step_derivative(np.maximum(r - inner.radius, 0.0) / width)
            return -off * (ds / (width * np.where(r > 0, r, 1.0)))
        c = np.asarray(inner.center).reshape((-1,) + (1,) * (x.ndim - 1))
        a = np.asarray(inner.half_widths).reshape(c.shape)
        co = np.asarray(outer.center).reshape(c.shape)
        ao = np.asarray(outer.half_widths).reshape(c.shape)
        wl, wh = (c - a) - (co - ao), (co + ao) - (c + a)
        tl, th = (x - (co - ao)) / wl, ((co + ao) - x) / wh
        f = smooth_step(tl) * smooth_step(th)
        df = smooth_step_derivative(tl) / wl * smooth_step(th) - smooth_step(tl) * smooth_step_derivative(th) / wh
        out = np.empty_like(x, dtype=float)
        for i in range(x.shape[0]):
            others = np.prod(np.delete(f, i, axis=0), axis=0)
            out[i] = df[i] * others
        return out

    def sample(self, grid: Grid) -> GridForm:
        return GridForm.scalar(grid, self(grid.coords()))

    def sample_gradient(self, grid: Grid) -> GridForm:
        """``d`` of the cutoff as a 1-form, evaluated analytically."""
        return GridForm(grid, 1, self.gradient(grid.coords()))


def build_cutoff(inner: Region, outer: Region, grid: Grid | None = None):
    """Cutoff between nested regions; with ``grid`` also return its sampled 0-form."""
    if inset_margin(inner, outer) <= 0:
        raise ValueError("cutoff regions are not strictly nested")
    if isinstance(inner, Box) and isinstance(outer, Ball):
        raise ValueError("a box inside a ball has no smooth tensor cutoff; use a ball or an outer box")
    cut = Cutoff(inner, outer)
    if grid is None:
        return cut
    return cut, cut.sample(grid)


@dataclass(frozen=True)
class DomainChain:
    """Nested regions ``B c B0 c B1 c B'``."""

    B: Region
    B0: Region
    B1: Region
    Bp: Region

    def __post_init__(self):
        if min(self.margins) <= 0:
            raise ValueError(f"domain chain is not strictly nested: margins {self.margins}")

    @classmethod
    def from_ratios(cls, center: Sequence[float], size: float,
                    ratios: Sequence[float] = (1.0, 1.15, 1.3, 1.5), shape: str = "ball") -> "DomainChain":
        if len(ratios) != 4 or list(ratios) != sorted(ratios) or len(set(ratios)) != 4:
            raise ValueError("need four strictly increasing ratios")
        make = (lambda r: Ball(center, r)) if shape == "ball" else (lambda r: Box(center, (r,) * len(center)))
        return cls(*(make(size * q) for q in ratios))

    @property
    def regions(self) -> tuple[Region, Region, Region, Region]:
        return (self.B, self.B0, self.B1, self.Bp)

    @property
    def margins(self) -> tuple[float, float, float]:
        return (inset_margin(self.B, self.B0), inset_margin(self.B0, self.B1), inset_margin(self.B1, self.Bp))

    def validate(self, grid: Grid):
        ext = np.abs(np.asarray(self.Bp.center)) + self.Bp.extent()
        if np.any(ext >= grid.L / 2):
            raise ValueError("outer region of the domain chain leaves the grid box")


@dataclass(frozen=True)
class ParabolicCutoff:
    R: float
    chi: GridForm
    dchi: GridForm
    energy: float  # int |d chi|^n


def _parabolic_gradient_norm(r, logR, R):
    shell = (r > R) & (r < R * R)
    return np.where(shell, 1.0 / (np.where(shell, r, 1.0) * logR), 0.0)


def build_parabolic_cutoff(grid: Grid, R: float, subsamples: int = 4) -> ParabolicCutoff:
    """``chi_R`` = 1 on B(R), ``log(R^2/r)/log R`` on the shell, 0 beyond ``R^2``.

    The gradient ``-x/(r^2 log R)`` is evaluated analytically on the shell.
    The reported n-energy integrates ``|d chi|^n`` with ``subsamples^n``
    midpoint nodes per cell on the cells meeting the shell.
    """
    if not R > 1:
        raise ValueError("parabolic cutoff needs R > 1")
    if R * R > grid.L / 2:
        raise ValueError(f"shell radius R^2 = {R * R:g} exceeds half the box {grid.L / 2:g}")
    n, hgrid = grid.n, grid.spacing
    logR = math.log(R)
    x = grid.coords()
    r = np.sqrt(np.einsum("i...,i...->...", x, x))
    chi = np.clip(np.log(R * R / np.maximum(r, 1e-300)) / logR, 0.0, 1.0)
    g = _parabolic_gradient_norm(r, logR, R)
    dchi = -x * (g / np.maximum(r, 1e-300))

    half_diag = 0.5 * hgrid * math.sqrt(n)
    near = (r > R - half_diag) & (r < R * R + half_diag)
    centers = x[:, near]
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    energy = 0.0
    for shift in np.stack(np.meshgrid(*([offs] * n), indexing="ij")).reshape(n, -1).T:
        pts = centers + (shift * hgrid)[:, None]
        energy += np.sum(_parabolic_gradient_norm(np.sqrt(np.sum(pts * pts, axis=0)), logR, R) ** n)
    energy *= grid.cell_volume / subsamples ** n
    return ParabolicCutoff(R, GridForm.scalar(grid, chi), GridForm(grid, 1, dchi), float(energy))


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


# ---------------------------------------------------------------------------
# pairings and supports


def moment_pairing(omega: GridForm, beta: ConstantForm) -> float:
    """Riemann sum of ``omega ^ beta`` against the volume form."""
    if beta.n != omega.n or omega.degree + beta.h != omega.n:
        raise DegreeError(f"degrees {omega.degree} and {beta.h} are not complementary in dimension {omega.n}")
    total = 0.0
    integrals = omega.integral()
    for k, I in enumerate(omega.indices):
        c = beta[I.complement()]
        if c:
            total += permutation_sign(I.entries + I.complement().entries) * c * integrals[k]
    return float(total)


def check_vanishing_average(u: GridForm, tol: float = 1e-10) -> tuple[bool, dict[MultiIndex, float]]:
    """Whether every component integral vanishes relative to ``||u||_1``.

    Equivalent to ``int u ^ beta = 0`` for every constant form beta of
    complementary degree.
    """
    integrals = u.integral()
    scale = lp_norm(u, 1)
    means = dict(zip(u.indices, integrals / (u.grid.L ** u.n)))
    ok = bool(np.all(np.abs(integrals) <= tol * max(scale, 1e-300))) if scale > 0 else True
    return ok, means


def measured_support(u: GridForm, rel_tol: float = 1e-6) -> np.ndarray:
    a = u.pointwise_norm()
    top = a.max(initial=0.0)
    if top == 0:
        return np.zeros(u.grid.shape, dtype=bool)
    return a > rel_tol * top


def support_excess(u: GridForm, region: Region, rel_tol: float = 1e-6) -> float:
    """Largest distance from ``region`` of a cell in the measured support of ``u``."""
    mask = measured_support(u, rel_tol)
    if not mask.any():
        return 0.0
    return float(region.distance(u.grid.coords()[:, mask]).max())


def support_extent(u: GridForm, rel_tol: float = 1e-9) -> np.ndarray:
    """Per-axis width of the bounding box of the measured support."""
    mask = measured_support(u, rel_tol)
    if not mask.any():
        return np.zeros(u.n)
    idx = np.nonzero(mask)
    return np.array([(i.max() - i.min() + 1) * u.grid.spacing for i in idx])


# ---------------------------------------------------------------------------
# serialization


def save_gform(u: GridForm, path) -> Path:
    path = Path(path)
    header = {
        "n": u.n,
        "N": u.grid.N,
        "L": u.grid.L,
        "periodic": u.grid.periodic,
        "degree": u.degree,
        "multi_indices": [list(I.entries) for I in u.indices],
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(u.data, dtype="<f8").tobytes())
    return path


def load_gform(path) -> GridForm:
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path} is not a .gform file") from exc
        raw = fh.read()
    grid = Grid(header["n"], header["N"], header["L"], header.get("periodic", True))
    expected = [list(I.entries) for I in basis(grid.n, header["degree"])]
    if header["multi_indices"] != expected:
        raise ValueError("multi-index list does not match the canonical basis")
    data = np.frombuffer(raw, dtype="<f8").reshape((len(expected),) + grid.shape)
    return GridForm(grid, header["degree"], data)
