"""Primitives of closed forms.

Three constructions:

* :func:`global_primitive`: ``phi = d* Delta^-1 alpha``, spectrally on the
  periodic grid or as a free-space convolution with the matrix kernel of
  ``d* Delta^-1``.
* :func:`local_homotopy`: ``alpha = d T alpha + S alpha`` on a ball B, with
  ``T`` built from the truncated kernel ``psi_R k`` and ``S`` from its smooth
  remainder ``(1 - psi_R) k``.
* :func:`il_homotopy`: the averaged cone operator on a convex region,
  ``K alpha(x) = int rho(y) int_0^1 t^(h-1) i_{x-y} alpha(y + t(x-y)) dt dy``.

:func:`interior_primitive` chains the last two: ``phi = T alpha + K(S alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _jit
from .diffops import codifferential, exterior_derivative, inverse_laplacian, local_exterior_derivative
from .exterior import DegreeError, basis, raising_table
from .grid import (
    Ball,
    Box,
    Cutoff,
    DomainChain,
    GridForm,
    build_cutoff,
    check_vanishing_average,
    lp_norm,
    region_mask,
    support_excess,
)
from .kernels import FreeSpaceOperator, dstar_green_kernel, truncate_split


def relative_l1(a: GridForm, b: GridForm, region=None, reference: GridForm | None = None) -> float:
    """``||a - b||_1 / ||reference||_1`` on ``region`` (reference defaults to ``b``)."""
    ref = lp_norm(b if reference is None else reference, 1, region)
    err = lp_norm(a - b, 1, region)
    if ref == 0:
        return 0.0 if err == 0 else math.inf
    return err / ref


def closedness(alpha: GridForm, region=None) -> float:
    """``||d alpha||_1 / ||alpha||_1`` (0 for top-degree forms)."""
    if alpha.degree == alpha.n:
        return 0.0
    scale = lp_norm(alpha, 1, region)
    if scale == 0:
        return 0.0
    return lp_norm(exterior_derivative(alpha), 1, region) / scale


# ---------------------------------------------------------------------------
# global primitive


@dataclass
class PrimitiveResult:
    phi: GridForm
    residual: float  # ||d phi - alpha||_1 / ||alpha||_1
    ratio: float  # ||phi||_q / ||alpha||_1, q = n / (n - 1)
    mode: str


def global_primitive(alpha: GridForm, mode: str = "periodic", closed_tol: float = 1e-8,
                     average_tol: float = 1e-8) -> PrimitiveResult:
    """``phi = d* Delta^-1 alpha`` for a closed form with vanishing averages."""
    n, h = alpha.n, alpha.degree
    if mode not in ("periodic", "freespace"):
        raise ValueError(f"mode must be 'periodic' or 'freespace', got {mode!r}")
    if not 1 <= h <= n - 1:
        if h == n:
            raise DegreeError("top-degree forms with nonzero integral have no L^q primitive; "
                              "the vanishing-average hypothesis is required and h must be at most n - 1")
        raise DegreeError(f"primitive of a degree-{h} form")
    if closedness(alpha) > closed_tol:
        raise ValueError(f"input is not closed: ||d alpha|| / ||alpha|| = {closedness(alpha):.3g}")
    ok, _ = check_vanishing_average(alpha, average_tol)
    if not ok:
        raise ValueError("input has nonzero averages; it cannot be the differential of an L^q form")
    q = n / (n - 1)
    if mode == "periodic":
        phi = codifferential(inverse_laplacian(alpha))
        dphi = exterior_derivative(phi)
    else:
        op = FreeSpaceOperator(dstar_green_kernel(n, h), alpha.grid)
        phi = op.apply(alpha)
        dphi = op.apply_d(alpha)
    scale = lp_norm(alpha, 1)
    if scale == 0:
        return PrimitiveResult(phi, 0.0, 0.0, mode)
    return PrimitiveResult(phi, relative_l1(dphi, alpha), lp_norm(phi, q) / scale, mode)


def homotopy_identity_check(chi: GridForm, beta: GridForm | None = None, scheme: str = "lattice") -> float:
    """Relative L^1 size of ``chi - d K chi - K d chi`` with ``K = d* Delta^-1``.

    For a 0-form only ``K d chi`` is present; for an n-form only ``d K chi``.
    With ``beta`` the larger of the two residuals is returned.
    """
    def residual(u: GridForm) -> float:
        n, h = u.n, u.degree
        total = GridForm.zeros(u.grid, h)
        if h >= 1:
            total = total + FreeSpaceOperator(dstar_green_kernel(n, h), u.grid, scheme).apply_d(u)
        if h <= n - 1:
            total = total + FreeSpaceOperator(dstar_green_kernel(n, h + 1), u.grid, scheme).apply_to_d(u)
        return relative_l1(total, u)

    out = residual(chi)
    if beta is not None:
        out = max(out, residual(beta))
    return out


# ---------------------------------------------------------------------------
# local homotopy with controlled support


@dataclass
class LocalHomotopyResult:
    T_alpha: GridForm  # (h-1)-form, valid on B
    S_alpha: GridForm  # h-form, valid on B
    residual: float  # ||alpha - d T alpha - S alpha||_{1,B} / ||alpha||_{1,B}
    support_report: dict = field(default_factory=dict)
    dT_alpha: GridForm | None = None
    R: float = 0.0
    chain: DomainChain | None = None


def _default_R(chain: DomainChain) -> float:
    return 0.5 * min(chain.margins)


def local_homotopy(alpha: GridForm, chain: DomainChain, R: float | None = None, closed_tol: float = 1e-6,
                   support_tol: float = 1e-3, scheme: str = "lattice") -> LocalHomotopyResult:
    """``alpha = d T alpha + S alpha`` on ``chain.B``.

    Steps: ``alpha_0 = chi alpha`` with ``chi`` = 1 on B0 and supported in B1;
    ``phi = K_R alpha_0``, ``S_1 alpha = S alpha_0``; ``omega = d(zeta phi)``
    with ``zeta`` = 1 near B and supported in B0; then
    ``T alpha = K_R omega`` and ``S alpha = S_1 alpha + S omega``, where
    ``S u = d((1 - psi_R) k * u) + (1 - psi_R) k * d u``.  The residual folds
    in every term, including ``K d`` terms that vanish only in the continuum.
    """
    n, h = alpha.n, alpha.degree
    grid = alpha.grid
    if not 1 <= h <= n:
        raise DegreeError(f"local homotopy of a degree-{h} form")
    chain.validate(grid)
    if R is None:
        R = _default_R(chain)
    margins = chain.margins
    if not 0 < R or 2 * R > margins[0] + 1e-12 or R > margins[2] + 1e-12:
        raise ValueError(f"R = {R:g} too large for margins {tuple(round(m, 6) for m in margins)}")
    if closedness(alpha, chain.Bp) > closed_tol:
        raise ValueError("input is not closed on B'")

    K = dstar_green_kernel(n, h)
    # intermediates carry spectral round-off up to the box edge; only the input is checked
    pair = truncate_split(K, grid, R, scheme, guard_cells=0)
    chi = build_cutoff(chain.B0, chain.B1, grid)[1]
    alpha0 = alpha * chi
    FreeSpaceOperator(K, grid, scheme).check_support(alpha0)
    far_up = FreeSpaceOperator(dstar_green_kernel(n, h + 1), grid, scheme, ("far", R), 0) if h < n else None

    phi = pair.near.apply(alpha0)
    S1 = pair.far.apply_d(alpha0)
    if h < n:
        S1 = S1 + far_up.apply_to_d(alpha0)

    # omega = d(zeta phi) by the product rule with the analytic gradient of
    # zeta, so omega equals d phi exactly where zeta is identically 1
    zeta_cut, zeta = build_cutoff(chain.B.enlarged(R / 4), chain.B0, grid)
    omega = pair.near.apply_d(alpha0) * zeta + zeta_cut.sample_gradient(grid).wedge(phi)
    T = pair.near.apply(omega)
    dT = pair.near.apply_d(omega)
    S_omega = pair.far.apply_d(omega)
    if h < n:
        S_omega = S_omega + far_up.apply_to_d(omega)
    S = S1 + S_omega

    B = chain.B
    scale = lp_norm(alpha, 1, B)
    residual = 0.0 if scale == 0 else lp_norm(alpha - dT - S, 1, B) / scale

    # supports are measured at a relative threshold; alpha's own measured
    # support may poke out of B, so excesses are compared with it
    a_excess = support_excess(alpha, B, support_tol)
    report = {
        "R": R,
        "threshold": support_tol,
        "alpha_excess": a_excess,
        "T1_excess": support_excess(phi, B, support_tol),
        "S1_excess": support_excess(S1, B, support_tol),
        "T_excess": support_excess(T, B, support_tol),
        "S_closedness_B": closedness(S, B),
    }
    allowance = a_excess + 2 * R + grid.spacing
    report["first_stage_inside_2R"] = bool(max(report["T1_excess"], report["S1_excess"]) <= allowance)
    report["T_inside_4R"] = bool(report["T_excess"] <= a_excess + 4 * R + grid.spacing)
    report["T_inside_Bprime"] = bool(support_excess(T, chain.Bp, support_tol) == 0.0)
    return LocalHomotopyResult(T, S, residual, report, dT, R, chain)


# ---------------------------------------------------------------------------
# averaged cone homotopy on a convex region


@dataclass
class ConvexHomotopyConfig:
    """Averaging weight and quadrature for the cone homotopy on ``region``.

    ``rho`` is either a 0-form with unit integral supported in ``region``,
    sampled cell by cell, or a :class:`~l1forms.grid.Cutoff`-like callable
    used as an (unnormalised) density and sampled by rejection in continuous
    coordinates, so the points do not depend on the grid.  The default is a
    smooth bump on the inner three quarters of the region.  ``cone_point``
    replaces the average by the single cone at that point.
    """

    region: Ball | Box
    rho: GridForm | Cutoff | None = None
    samples: int = 64
    nodes: int = 16
    seed: int = 0
    cone_point: tuple[float, ...] | None = None
    margin: float | None = None
    budget: float = 1e11

    def density(self):
        if self.rho is not None:
            return self.rho
        r = self.region
        size = float(min(r.extent()))
        return build_cutoff(Ball(r.center, 0.25 * size), Ball(r.center, 0.75 * size))

    def validate(self, grid, tol: float = 1e-8):
        if not isinstance(self.region, (Ball, Box)):
            raise ValueError("cone homotopy needs a convex region (ball or box)")
        if self.samples < 1 or self.nodes < 1:
            raise ValueError("quadrature sizes must be positive")
        if self.cone_point is not None:
            if not self.region.contains(np.asarray(self.cone_point, float).reshape(-1, 1))[0]:
                raise ValueError("cone point outside the region")
            return
        rho = self.density()
        if not isinstance(rho, GridForm):
            return
        if rho.degree != 0 or rho.grid != grid:
            raise ValueError("rho must be a 0-form on the same grid")
        if np.any(rho.data < 0):
            raise ValueError("rho must be nonnegative")
        if abs(rho.integral()[0] - 1.0) > tol:
            raise ValueError(f"rho must have unit integral, got {rho.integral()[0]:.12g}")
        if np.any((rho.data[0] != 0) & ~region_mask(grid, self.region)):
            raise ValueError("rho is not supported in the region")

    def points(self) -> np.ndarray:
        """Cone vertices ``y_k`` (shape (M, n)), each carrying weight ``1/M``."""
        if self.cone_point is not None:
            return np.asarray(self.cone_point, float).reshape(1, -1)
        rho = self.density()
        rng = np.random.default_rng(self.seed)
        if isinstance(rho, GridForm):
            p = rho.data[0].reshape(-1)
            cells = rng.choice(p.size, size=self.samples, p=p / p.sum())
            idx = np.stack(np.unravel_index(cells, rho.grid.shape), axis=1)
            g = rho.grid
            return -g.L / 2 + (idx + rng.uniform(0, 1, size=idx.shape)) * g.spacing
        r = self.region
        lo = np.asarray(r.center) - r.extent()
        hi = np.asarray(r.center) + r.extent()
        out = []
        while len(out) < self.samples:
            y = rng.uniform(lo, hi, size=(4 * self.samples, lo.size))
            accept = rng.uniform(size=y.shape[0]) < rho(y.T)
            out.extend(y[accept & r.contains(y.T)])
        return np.asarray(out[: self.samples])


def il_homotopy(alpha: GridForm, cfg: ConvexHomotopyConfig) -> GridForm:
    """Averaged cone primitive of ``alpha`` on the convex region of ``cfg``.

    Each cone operator satisfies ``d K_y alpha + K_y d alpha = alpha``; an
    average with weights summing to one keeps that identity, so for closed
    alpha the error comes only from the segment quadrature and interpolation.
    """
    grid = alpha.grid
    n, h = alpha.n, alpha.degree
    if h < 1:
        raise DegreeError("cone homotopy lowers degree; got a 0-form")
    cfg.validate(grid)
    region = cfg.region
    margin = cfg.margin if cfg.margin is not None else 6 * grid.spacing
    if margin < 5 * grid.spacing:
        raise ValueError("cone homotopy margin must cover at least five grid cells")
    outer = region.enlarged(margin)
    ext = np.abs(np.asarray(outer.center)) + outer.extent()
    if np.any(ext >= grid.L / 2):
        raise ValueError("cone homotopy evaluation region leaves the grid box")

    x = grid.coords()
    mask = outer.contains(x)
    points = x[:, mask].T
    ys = cfg.points()
    yw = np.full(ys.shape[0], 1.0 / ys.shape[0])
    cost = points.shape[0] * ys.shape[0] * cfg.nodes * 4 ** n * len(basis(n, h))
    if cost > cfg.budget:
        raise ValueError(f"quadrature budget exceeded ({cost:.3g} > {cfg.budget:.3g}); reduce samples or nodes")
    tn, tw = np.polynomial.legendre.leggauss(cfg.nodes)
    tn, tw = (tn + 1) / 2, tw / 2
    table = np.array(raising_table(n, h - 1), dtype=np.int64).reshape(-1, 4)
    x0 = -grid.L / 2 + grid.spacing / 2
    vals = _jit.cone_quadrature(alpha.data, x0, grid.spacing, points, ys, yw, tn, tw, table,
                                len(basis(n, h - 1)), h)
    out = np.zeros((len(basis(n, h - 1)),) + grid.shape)
    out[:, mask] = vals
    return GridForm(grid, h - 1, out)


# ---------------------------------------------------------------------------
# interior primitive


@dataclass
class InteriorPrimitiveResult:
    phi: GridForm  # T alpha + gamma, valid on B
    residual: float  # ||d phi - alpha||_{1,B} / ||alpha||_{1,B}
    ratio: float  # ||phi||_{q,B} / ||alpha||_{1,B'}
    local: LocalHomotopyResult
    gamma: GridForm
    support_excess_Bprime: float


def interior_primitive(alpha: GridForm, chain: DomainChain, R: float | None = None,
                       cone: ConvexHomotopyConfig | None = None, **local_kwargs) -> InteriorPrimitiveResult:
    """``phi = T alpha + gamma`` with ``d gamma = S alpha`` from the cone homotopy on B."""
    n, h = alpha.n, alpha.degree
    grid = alpha.grid
    if not isinstance(chain.B, (Ball, Box)):
        raise ValueError("B must be convex")
    local = local_homotopy(alpha, chain, R, **local_kwargs)
    if cone is None:
        cone = ConvexHomotopyConfig(chain.B)
    gamma = il_homotopy(local.S_alpha, cone)
    phi = local.T_alpha + gamma
    dphi = local.dT_alpha + local_exterior_derivative(gamma)
    B = chain.B
    scale = lp_norm(alpha, 1, B)
    q = n / (n - 1)
    residual = 0.0 if scale == 0 else lp_norm(dphi - alpha, 1, B) / scale
    total = lp_norm(alpha, 1, chain.Bp)
    ratio = 0.0 if total == 0 else lp_norm(phi, q, B) / total
    excess = support_excess(phi, chain.Bp, local.support_report["threshold"])
    return InteriorPrimitiveResult(phi, residual, ratio, local, gamma, excess)
