"""Experiment runner: closed test families, inequality sweeps and lemma checks.

Every runner returns a report whose ``checks`` list holds named pass/fail
entries against the tolerances in :data:`DEFAULT_TOLERANCES`; the CLI turns
these into exit codes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import diffops, kernels
from .exterior import ConstantForm, basis
from .grid import (
    DomainChain,
    Grid,
    GridForm,
    build_parabolic_cutoff,
    check_vanishing_average,
    lp_norm,
    moment_pairing,
    save_gform,
    sphere_area,
    weak_norm,
)
from .homotopy import global_primitive, interior_primitive

log = logging.getLogger(__name__)

FAMILIES = ("bump-differential", "projected-random", "dipole", "top-degree-bump")

DEFAULT_TOLERANCES: dict[str, float] = {
    "algebra": 1e-10,
    "closed_family": 1e-10,
    "periodic_residual": 1e-8,
    "freespace_residual": 1e-3,
    "interior_residual": 1e-2,
    "local_residual": 1e-2,
    "ratio_stability": 0.10,
    "scale_invariance": 0.02,
    "top_degree_r2": 0.99,
    "pairing": 1e-10,
    "holder_slack": 1e-6,
    "parabolic_energy": 0.05,
    "homogeneity": 1e-12,
    "annulus_low": 0.4,
    "annulus_high": 0.6,
    "far_field_exponent": 0.3,
    "weak_type_stability": 0.10,
}


class ConfigError(ValueError):
    """The experiment configuration is invalid (exit code 2)."""


@dataclass
class ExperimentConfig:
    n: int = 3
    h: int = 1
    N: int = 64
    L: float = 3.4
    mode: str = "freespace"  # periodic | freespace
    construction: str = "global"  # global | interior
    family: str = "bump-differential"
    centers: tuple = ((0.05, -0.05, 0.0), (-0.1, 0.05, 0.05), (0.0, 0.1, -0.1))
    scales: tuple = (0.22, 0.25, 0.28)
    chain_radius: float = 1.0
    chain_ratios: tuple = (1.0, 1.2, 1.4, 1.6)
    R: float | None = None
    seed: int = 0
    dilations: tuple = (1.0, 2.0, 4.0)
    exponent_shift: float = 0.2
    radii: tuple = ()
    log_radii: tuple = (1.0, 2.0)
    grids: tuple = (48, 64, 96)
    workers: int = 1
    dump_forms: bool = False
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tolerances = {**DEFAULT_TOLERANCES, **dict(self.tolerances)}
        for name in ("centers", "scales", "chain_ratios", "dilations", "radii", "log_radii", "grids"):
            value = getattr(self, name)
            setattr(self, name, tuple(tuple(v) if isinstance(v, list) else v for v in value))
        self.validate()

    @property
    def q(self) -> float:
        return self.n / (self.n - 1)

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.N, self.L, periodic=self.mode == "periodic")

    def validate(self):
        if self.n < 2:
            raise ConfigError("dimension must be at least 2")
        if not 1 <= self.h <= self.n:
            raise ConfigError(f"degree h = {self.h} outside 1..{self.n}")
        if self.mode not in ("periodic", "freespace"):
            raise ConfigError(f"mode must be periodic or freespace, got {self.mode!r}")
        if self.construction not in ("global", "interior"):
            raise ConfigError(f"construction must be global or interior, got {self.construction!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.N < 4 or self.N % 2:
            raise ConfigError("grid size must be even and at least 4")
        if not self.L > 0:
            raise ConfigError("box side must be positive")
        if any(len(c) != self.n for c in self.centers):
            raise ConfigError("every center needs n coordinates")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# test families


def gaussian(grid: Grid, center, scale: float) -> np.ndarray:
    """Unit-mass Gaussian profile on the grid."""
    x = grid.coords() - np.asarray(center, float).reshape((grid.n,) + (1,) * grid.n)
    r2 = np.einsum("i...,i...->...", x, x)
    return np.exp(-r2 / (2 * scale * scale)) / ((2 * np.pi) ** (grid.n / 2) * scale ** grid.n)


def _coefficients(n: int, degree: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    c = rng.normal(size=len(basis(n, degree)))
    return c / np.linalg.norm(c)


def bump_potential(grid: Grid, degree: int, center, scale: float, seed: int) -> GridForm:
    """Gaussian-profile form ``g(x) * sum_I c_I dx^I`` with seeded unit coefficients."""
    g = gaussian(grid, center, scale) * scale  # keeps alpha = d psi of order one
    c = _coefficients(grid.n, degree, seed)
    return GridForm(grid, degree, c.reshape((-1,) + (1,) * grid.n) * g)


def bump_differential(grid: Grid, h: int, center, scale: float, seed: int = 0) -> GridForm:
    return diffops.exterior_derivative(bump_potential(grid, h - 1, center, scale, seed))


def projected_random(grid: Grid, h: int, seed: int, kmax: int = 4) -> GridForm:
    """Band-limited random h-form, projected onto closed forms, means removed."""
    rng = np.random.default_rng(seed)
    C = len(basis(grid.n, h))
    spec = np.zeros((C,) + grid.shape, dtype=complex)
    low = (slice(None),) + (slice(0, 2 * kmax + 1),) * grid.n
    spec[low] = rng.normal(size=spec[low].shape) + 1j * rng.normal(size=spec[low].shape)
    spec = np.roll(spec, (-kmax,) * grid.n, axis=tuple(range(1, grid.n + 1)))
    data = np.fft.ifftn(spec, axes=tuple(range(1, grid.n + 1))).real
    u = diffops.project_closed(GridForm(grid, h, data / np.abs(data).max()))
    return GridForm(grid, h, u.data - u.mean().reshape((-1,) + (1,) * grid.n))


def dipole(grid: Grid, h: int, center, scale: float, shift_cells: int = 4, seed: int = 0) -> GridForm:
    """``g(x - s e_1) - g(x + s e_1)`` times seeded coefficients; mean zero, shift a whole number of cells."""
    s = shift_cells * grid.spacing
    c0 = np.asarray(center, float)
    e = np.zeros(grid.n)
    e[0] = s
    g = gaussian(grid, c0 + e, scale) - gaussian(grid, c0 - e, scale)
    c = _coefficients(grid.n, h, seed) if h < grid.n else np.ones(1)
    return GridForm(grid, h, c.reshape((-1,) + (1,) * grid.n) * g)


def top_degree_bump(grid: Grid, center, scale: float, mass: float = 1.0) -> GridForm:
    return GridForm(grid, grid.n, mass * gaussian(grid, center, scale)[None])


@dataclass
class FamilyMember:
    label: str
    params: dict
    form: GridForm


def make_closed_family(cfg: ExperimentConfig, grid: Grid | None = None) -> list[FamilyMember]:
    grid = grid or cfg.grid
    n, h = cfg.n, cfg.h
    out: list[FamilyMember] = []
    if cfg.family == "bump-differential":
        for i, c in enumerate(cfg.centers):
            for j, s in enumerate(cfg.scales):
                seed = cfg.seed + 7 * i + j
                out.append(FamilyMember(f"bump[c{i},s{j}]", {"center": list(c), "scale": s, "seed": seed},
                                        bump_differential(grid, h, c, s, seed)))
    elif cfg.family == "projected-random":
        if h == n:
            raise ConfigError("projected-random needs h <= n - 1")
        for k in range(max(1, len(cfg.scales))):
            seed = cfg.seed + k
            out.append(FamilyMember(f"random[{seed}]", {"seed": seed}, projected_random(grid, h, seed)))
    elif cfg.family == "dipole":
        for i, c in enumerate(cfg.centers):
            for j, s in enumerate(cfg.scales):
                out.append(FamilyMember(f"dipole[c{i},s{j}]", {"center": list(c), "scale": s},
                                        dipole(grid, h, c, s, seed=cfg.seed + j)))
    elif cfg.family == "top-degree-bump":
        if h != n:
            raise ConfigError("top-degree-bump is an n-form family; set h = n")
        for i, c in enumerate(cfg.centers):
            out.append(FamilyMember(f"top[c{i}]", {"center": list(c), "scale": cfg.scales[0]},
                                    top_degree_bump(grid, c, cfg.scales[0])))
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class NormReport:
    experiment: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, value: float, tolerance: float, passed: bool, detail: str = "") -> Check:
        c = Check(name, float(value), float(tolerance), bool(passed), detail)
        self.checks.append(c)
        return c

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "passed": self.passed,
            "config": self.config,
            "aggregate": self.aggregate,
            "checks": [asdict(c) for c in self.checks],
            "rows": self.rows,
            "warnings": self.warnings,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2, default=_json_default))
        keys: list[str] = []
        for row in self.rows:
            keys.extend(k for k in row if k not in keys)
        with open(out / "rows.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys or ["experiment"])
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: _csv_value(row.get(k)) for k in keys})
        return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def _csv_value(v):
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, default=_json_default)
    return v


def _map(cfg: ExperimentConfig, fn: Callable, items: Sequence):
    """Run cases in a pool and merge results in input order."""
    if cfg.workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Poincare sweep


def _chain(cfg: ExperimentConfig) -> DomainChain:
    return DomainChain.from_ratios((0.0,) * cfg.n, cfg.chain_radius, cfg.chain_ratios)


def poincare_case(cfg: ExperimentConfig, member: FamilyMember, grid: Grid, out_dir=None) -> dict:
    t0 = time.perf_counter()
    alpha = member.form
    if cfg.construction == "global":
        res = global_primitive(alpha, cfg.mode)
        phi, residual, ratio = res.phi, res.residual, res.ratio
        alpha_l1, phi_q = lp_norm(alpha, 1), lp_norm(phi, cfg.q)
        tol = cfg.tolerances["periodic_residual" if cfg.mode == "periodic" else "freespace_residual"]
    else:
        chain = _chain(cfg)
        res = interior_primitive(alpha, chain, cfg.R)
        phi, residual, ratio = res.phi, res.residual, res.ratio
        alpha_l1, phi_q = lp_norm(alpha, 1, chain.Bp), lp_norm(phi, cfg.q, chain.B)
        tol = cfg.tolerances["interior_residual"]
    row = {
        "case": member.label,
        **member.params,
        "N": grid.N,
        "L": grid.L,
        "alpha_l1": alpha_l1,
        "phi_q": phi_q,
        "ratio": ratio,
        "residual": residual,
        "flagged": bool(not residual <= tol),
    }
    # timings go to the log so that reports stay byte-for-byte reproducible
    log.info("%s on N=%d: %.2f s", member.label, grid.N, time.perf_counter() - t0)
    if out_dir is not None and cfg.dump_forms:
        d = Path(out_dir) / "forms"
        d.mkdir(parents=True, exist_ok=True)
        stem = member.label.replace("[", "_").replace("]", "").replace(",", "_")
        save_gform(alpha, d / f"{stem}_N{grid.N}_alpha.gform")
        save_gform(phi, d / f"{stem}_N{grid.N}_phi.gform")
    return row


def run_poincare_sweep(cfg: ExperimentConfig, grids: Sequence[int] | None = None, out_dir=None) -> NormReport:
    """Primitive and ratio ``||phi||_q / ||alpha||_1`` for every family member, on each grid size."""
    report = NormReport("poincare", cfg.to_dict())
    if cfg.h >= cfg.n:
        raise ConfigError("top-degree forms with nonzero integral are not differentials of L^q forms "
                          "(see the topdegree experiment); choose h <= n - 1")
    grids = tuple(grids) if grids else (cfg.N,)
    per_grid: dict[int, list[float]] = {}
    for N in grids:
        grid = Grid(cfg.n, N, cfg.L, periodic=cfg.mode == "periodic")
        family = make_closed_family(cfg, grid)
        if not family:
            report.warnings.append("empty family; nothing to do")
            continue
        rows = _map(cfg, lambda m: poincare_case(cfg, m, grid, out_dir), family)
        report.rows.extend(rows)
        good = [r["ratio"] for r in rows if not r["flagged"]]
        per_grid[N] = good
        for r in rows:
            if r["flagged"]:
                report.warnings.append(f"{r['case']} on N={N}: residual {r['residual']:.3g} above tolerance; excluded")
    if not report.rows:
        return report
    max_ratio = {N: (max(v) if v else math.nan) for N, v in per_grid.items()}
    report.aggregate = {"max_ratio": max_ratio, "q": cfg.q}
    tol_key = ("interior_residual" if cfg.construction == "interior" else
               "periodic_residual" if cfg.mode == "periodic" else "freespace_residual")
    worst = max(r["residual"] for r in report.rows)
    report.check("residual", worst, cfg.tolerances[tol_key], worst <= cfg.tolerances[tol_key])
    if len(max_ratio) > 1:
        vals = np.array(list(max_ratio.values()))
        spread = float((vals.max() - vals.min()) / vals.min())
        report.aggregate["ratio_spread"] = spread
        report.check("ratio_stability", spread, cfg.tolerances["ratio_stability"],
                     spread <= cfg.tolerances["ratio_stability"], "relative spread of max ratio across grids")
    return report


# ---------------------------------------------------------------------------
# scale invariance


def run_scale_invariance(cfg: ExperimentConfig, dilations: Sequence[float] | None = None) -> NormReport:
    """``||phi_l||_q / ||alpha_l||_1`` for ``alpha_l(x) = l^h alpha(l x)`` on grids ``(N, L / l)``."""
    dilations = tuple(dilations or cfg.dilations)
    if cfg.h >= cfg.n:
        raise ConfigError("scale sweep needs h <= n - 1")
    report = NormReport("scale", cfg.to_dict())
    q = cfg.q
    q_alt = q + cfg.exponent_shift
    delta = cfg.n - 1 - cfg.n / q_alt
    c, s = cfg.centers[0], cfg.scales[0]
    for lam in dilations:
        if lam <= 0:
            raise ConfigError("dilations must be positive")
        grid = Grid(cfg.n, cfg.N, cfg.L / lam, periodic=cfg.mode == "periodic")
        # psi_l(x) = l^(h-1) psi(l x), so d psi_l = l^h (d psi)(l x)
        psi = bump_potential(grid, cfg.h - 1, tuple(np.asarray(c) / lam), s / lam, cfg.seed)
        psi = psi * lam ** (cfg.h - cfg.n)  # bump_potential carries lam^(n-1) from its unit mass
        alpha = diffops.exterior_derivative(psi)
        res = global_primitive(alpha, cfg.mode)
        a1 = lp_norm(alpha, 1)
        report.rows.append({
            "lambda": lam,
            "N": grid.N,
            "L": grid.L,
            "ratio": res.ratio,
            "ratio_shifted": lp_norm(res.phi, q_alt) / a1,
            "residual": res.residual,
        })
    ratios = np.array([r["ratio"] for r in report.rows])
    spread = float((ratios.max() - ratios.min()) / ratios.min())
    report.check("ratio_constant", spread, cfg.tolerances["scale_invariance"],
                 spread <= cfg.tolerances["scale_invariance"])
    # repeated dilations are allowed (they must reproduce the ratio exactly); drop them for the fit
    unique = {r["lambda"]: r["ratio_shifted"] for r in report.rows}
    lams = np.array(sorted(unique))
    shifted = np.array([unique[v] for v in lams])
    if lams.size > 1:
        fitted = kernels.fit_exponent(lams, shifted)
        steps = np.diff(shifted)
        monotone = bool(np.all(steps > 0) or np.all(steps < 0))
        report.aggregate = {"predicted_drift_exponent": delta, "fitted_drift_exponent": fitted, "q_shifted": q_alt}
        report.check("drift_monotone", float(monotone), 1.0, monotone)
        report.check("drift_exponent", abs(fitted - delta), 0.05 * max(abs(delta), 1e-12) + 1e-3,
                     abs(fitted - delta) <= 0.05 * abs(delta) + 1e-3,
                     f"fitted {fitted:.4f} vs predicted {delta:.4f}")
    return report


# ---------------------------------------------------------------------------
# top degree


def power_norm_profile(u: GridForm, q: float, radii: Sequence[float]) -> list[float]:
    """``int_{B(R)} |u|^q`` for each radius."""
    a = u.pointwise_norm() ** q
    r = u.grid.radius()
    return [float(a[r < R].sum() * u.grid.cell_volume) for R in radii]


def log_fit(radii, values) -> tuple[float, float, float]:
    """Slope, intercept and R^2 of ``values`` against ``log radii``."""
    x, y = np.log(np.asarray(radii, float)), np.asarray(values, float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2


def _default_radii(grid: Grid, count: int = 5) -> tuple[float, ...]:
    top = 0.97 * grid.L / 2
    return tuple(top / 2 ** k for k in range(count - 1, -1, -1))


def run_top_degree_divergence(cfg: ExperimentConfig, radii: Sequence[float] | None = None,
                              mass: float = 1.0) -> NormReport:
    """``||d* Delta^-1 alpha||_{q, B(R)}^q`` against ``log R`` for a bump n-form."""
    if cfg.mode != "freespace":
        raise ConfigError("the top-degree experiment needs free-space mode; the periodic inverse "
                          "Laplacian would discard the mean of alpha")
    n, grid, q = cfg.n, cfg.grid, cfg.q
    radii = tuple(radii or cfg.radii or _default_radii(grid))
    report = NormReport("topdegree", cfg.to_dict())
    op = kernels.FreeSpaceOperator(kernels.dstar_green_kernel(n, n), grid)
    c, s = cfg.centers[0], cfg.scales[0]
    alpha = top_degree_bump(grid, c, s, mass)
    prof = power_norm_profile(op.apply(alpha), q, radii)
    dip = op.apply(dipole(grid, n, c, s, shift_cells=max(1, int(round(s / grid.spacing)))) * mass)
    dprof = power_norm_profile(dip, q, radii)
    for R, v, w in zip(radii, prof, dprof):
        report.rows.append({"R": R, "log_R": math.log(R), "bump_power_norm": v, "dipole_power_norm": w})
    slope, intercept, r2 = log_fit(radii, prof)
    expected = sphere_area(n) ** (1 - q) * mass ** q
    report.aggregate = {"slope": slope, "intercept": intercept, "r2": r2, "far_field_slope": expected,
                        "mass": float(alpha.integral()[0])}
    report.check("log_linear_r2", r2, cfg.tolerances["top_degree_r2"], r2 >= cfg.tolerances["top_degree_r2"])
    report.check("slope_positive", slope, 0.0, slope > 0)
    # the dipole profile saturates: its last dyadic increment is a small fraction of the bump's
    d_inc = dprof[-1] - dprof[-2]
    b_inc = prof[-1] - prof[-2]
    report.aggregate["dipole_last_increment_ratio"] = d_inc / b_inc
    report.check("dipole_bounded", d_inc / b_inc, 0.1, d_inc / b_inc < 0.1)
    return report


# ---------------------------------------------------------------------------
# obstruction


def run_obstruction_check(cfg: ExperimentConfig, chain_R: Sequence[float] | None = None,
                          energy_grid: Grid | None = None) -> NormReport:
    """Vanishing moments of exact forms, the Hoelder chain, and parabolic energies."""
    n, h, grid = cfg.n, cfg.h, cfg.grid
    report = NormReport("obstruction", cfg.to_dict())
    c, s = cfg.centers[0], cfg.scales[0]
    # (a) int d psi ^ beta = 0 for every constant beta of complementary degree
    psi = bump_potential(grid, h - 1, c, s, cfg.seed)
    omega = diffops.exterior_derivative(psi)
    scale = lp_norm(omega, 1) * grid.L ** (n - h)
    worst = 0.0
    for I in basis(n, n - h):
        beta = ConstantForm(n, n - h, {I: 1.0})
        worst = max(worst, abs(moment_pairing(omega, beta)))
    report.check("pairing_vanishes", worst / scale, cfg.tolerances["pairing"], worst <= cfg.tolerances["pairing"] * scale)
    ok, means = check_vanishing_average(omega)
    report.check("vanishing_average", float(not ok), 0.0, ok)

    # (b) |int d chi_R ^ phi ^ beta| <= ||d chi_R||_n ||phi||_{n/(n-1)} ||beta||_inf
    if h <= n - 1:
        phi = global_primitive(omega, "freespace").phi if cfg.mode == "freespace" else global_primitive(omega).phi
        q = cfg.q
        top = math.sqrt(0.95 * grid.L / 2)
        chain_R = tuple(chain_R or (top ** 0.6, top ** 0.8, top))
        worst_ratio = 0.0
        shell_bounds = []
        for R in chain_R:
            par = build_parabolic_cutoff(grid, R)
            dchi_n = lp_norm(par.dchi, n)
            r = grid.radius()
            shell = (r > R) & (r < R * R)
            phi_shell = lp_norm(phi, q, shell)
            for I in basis(n, n - h):
                beta = ConstantForm(n, n - h, {I: 1.0})
                lhs = abs(moment_pairing(par.dchi.wedge(phi), beta))
                rhs = dchi_n * lp_norm(phi, q) * beta.norm()
                worst_ratio = max(worst_ratio, lhs / rhs if rhs > 0 else 0.0)
            shell_bounds.append(dchi_n * phi_shell)
            report.rows.append({"R": R, "log_R": math.log(R), "dchi_n": dchi_n, "phi_q_shell": phi_shell,
                                "shell_bound": dchi_n * phi_shell})
        report.check("holder_chain", worst_ratio, 1 + cfg.tolerances["holder_slack"],
                     worst_ratio <= 1 + cfg.tolerances["holder_slack"])
        decreasing = bool(np.all(np.diff(shell_bounds) < 0))
        report.check("shell_bound_decreasing", float(decreasing), 1.0, decreasing)

    # (c) parabolic energies against sigma_{n-1} (log R)^(1-n)
    energies = []
    for t in cfg.log_radii:
        R = math.exp(t)
        g = energy_grid or Grid(n, cfg.N, 2.2 * R * R)
        par = build_parabolic_cutoff(g, R)
        exact = sphere_area(n) * t ** (1 - n)
        rel = abs(par.energy - exact) / exact
        energies.append(par.energy)
        report.rows.append({"log_R": t, "energy": par.energy, "exact_energy": exact, "relative_error": rel,
                            "grid_L": g.L, "grid_N": g.N})
        report.check(f"parabolic_energy[logR={t:g}]", rel, cfg.tolerances["parabolic_energy"],
                     rel <= cfg.tolerances["parabolic_energy"])
    if len(energies) >= 2:
        t0, t1 = cfg.log_radii[0], cfg.log_radii[-1]
        measured = (energies[-1] / energies[0]) ** (1 / n)
        predicted = (t1 / t0) ** ((1 - n) / n)
        rel = abs(measured / predicted - 1)
        report.aggregate["dchi_norm_ratio"] = {"measured": measured, "predicted": predicted}
        report.check("dchi_norm_scaling", rel, cfg.tolerances["parabolic_energy"],
                     rel <= cfg.tolerances["parabolic_energy"])
    return report


# ---------------------------------------------------------------------------
# kernel lemmas


def sandwich_check(fields: Sequence[GridForm], ps=(1.5, 2.0, 3.0)) -> tuple[bool, float]:
    """``c_p M^p <= sup_t t^p lambda(t) <= M^p`` on every field; returns (ok, worst slack)."""
    ok, worst = True, math.inf
    for u in fields:
        for p in ps:
            w = weak_norm(u, p)
            M = w.m_norm ** p
            lo, hi = w.sandwich_constant * M, M
            ok &= lo <= w.weak_sup * (1 + 1e-12) and w.weak_sup <= hi * (1 + 1e-12)
            worst = min(worst, (w.weak_sup - lo) / max(M, 1e-300), (hi - w.weak_sup) / max(M, 1e-300))
    return bool(ok), float(worst)


def random_fields(n: int, N: int, count: int, seed: int) -> list[GridForm]:
    rng = np.random.default_rng(seed)
    grid = Grid(n, N, 1.0)
    out = []
    for _ in range(count):
        data = rng.standard_cauchy(size=(1,) + grid.shape) * rng.uniform(size=(1,) + grid.shape) ** 3
        out.append(GridForm(grid, 0, data))
    return out


def run_kernel_suite(cfg: ExperimentConfig) -> NormReport:
    n = cfg.n
    report = NormReport("kernels", cfg.to_dict())
    tol = cfg.tolerances
    built = [kernels.newtonian(n), kernels.newtonian_gradient(n, 1), kernels.riesz(n, 1.0)]
    built += [kernels.dstar_green_kernel(n, h) for h in range(1, n + 1)]
    worst = max(kernels.homogeneity_error(K, seed=cfg.seed) for K in built)
    report.check("homogeneity", worst, tol["homogeneity"], worst <= tol["homogeneity"])

    grid = Grid(n, cfg.N, cfg.L)
    s = cfg.scales[0]
    centre = (0.0,) * n
    dip = dipole(grid, 0, centre, s, shift_cells=max(1, int(round(0.75 * s / grid.spacing))))
    radii = tuple(cfg.radii) or tuple(grid.L / 4 / 2 ** k for k in (2, 1, 0))
    prof = kernels.annulus_decay_profile(kernels.newtonian_gradient(n, 1), dip, radii)
    ratios = [b / a for a, b in zip(prof, prof[1:])]
    for R, v in zip(radii, prof):
        report.rows.append({"lemma": "annulus", "R": R, "value": v})
    ok = all(tol["annulus_low"] <= r <= tol["annulus_high"] for r in ratios)
    report.check("annulus_ratios", max(abs(r - 0.5) for r in ratios), 0.1, ok, f"ratios {ratios}")

    bump = GridForm.scalar(grid, gaussian(grid, centre, s))
    far_r = tuple(grid.L / 2 * f for f in (0.3, 0.4, 0.55, 0.7, 0.85))
    for name, psi, ell, K in (("bump", bump, 0, kernels.newtonian(n)),
                              ("bump", bump, 1, kernels.newtonian(n)),
                              ("dipole", dip, 0, kernels.newtonian(n))):
        rep = kernels.far_field_decay_check(psi, K, far_r, ell)
        expected = rep.expected - (1 if name == "dipole" else 0)
        err = abs(rep.exponent - expected)
        for p, v, b in rep.rows:
            report.rows.append({"lemma": f"far_field[{name},l={ell}]", "R": p, "value": v, "bound": b,
                                "fitted_exponent": rep.exponent})
        report.check(f"far_field[{name},l={ell}]", err, tol["far_field_exponent"], err <= tol["far_field_exponent"],
                     f"fitted {rep.exponent:.3f}, expected {expected:g}")

    constants = {}
    for N in cfg.grids:
        g = Grid(n, N, cfg.L)
        fam = [GridForm.scalar(g, gaussian(g, centre, sc)) for sc in cfg.scales]
        constants[N] = kernels.weak_type_bound_check(kernels.newtonian_gradient(n, 1), fam).max_ratio
        report.rows.append({"lemma": "weak_type", "N": N, "value": constants[N]})
    vals = np.array(list(constants.values()))
    spread = float((vals.max() - vals.min()) / vals.min())
    report.check("weak_type_stability", spread, tol["weak_type_stability"], spread <= tol["weak_type_stability"])

    ok, slack = sandwich_check(random_fields(n, 12, 50, cfg.seed))
    report.check("weak_norm_sandwich", slack, 0.0, ok, "min distance to either bound, relative to M^p")
    report.aggregate = {"annulus_ratios": ratios, "weak_type_constants": constants}
    return report


# ---------------------------------------------------------------------------
# algebraic identities


def _random_form(grid: Grid, h: int, rng) -> GridForm:
    return GridForm(grid, h, rng.normal(size=(len(basis(grid.n, h)),) + grid.shape))


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-300)
    return float(np.abs(a - b).max(initial=0.0) / scale)


def algebra_errors(n: int, N: int, samples: int, seed: int = 0) -> dict[str, float]:
    """Worst relative error of each exterior-calculus identity over random forms."""
    rng = np.random.default_rng(seed)
    grid = Grid(n, N, 2 * np.pi)
    d, ds = diffops.exterior_derivative, diffops.codifferential
    lap, inv = diffops.laplacian, diffops.inverse_laplacian
    err: dict[str, float] = {k: 0.0 for k in ("dd", "dsds", "adjoint", "laplacian", "diagonal",
                                              "starstar", "comm_d", "comm_dstar", "duality")}

    def bump(key, value):
        err[key] = max(err[key], value)

    for h in range(n + 1):
        for _ in range(samples):
            u = _random_form(grid, h, rng)
            v = _random_form(grid, h, rng)
            # second derivatives scale like N^2, so normalise by it
            if h <= n - 2:
                bump("dd", float(np.abs(d(d(u)).data).max() / np.abs(u.data).max()) / grid.N ** 2)
            if h >= 2:
                bump("dsds", float(np.abs(ds(ds(u)).data).max() / np.abs(u.data).max()) / grid.N ** 2)
            if h <= n - 1:
                w = _random_form(grid, h + 1, rng)
                a, b = diffops.grid_inner(d(u), w), diffops.grid_inner(u, ds(w))
                norm = np.sqrt(diffops.grid_inner(d(u), d(u)) * diffops.grid_inner(w, w))
                bump("adjoint", abs(a - b) / (norm + 1e-300))
            assembled = GridForm.zeros(grid, h)
            if h >= 1:
                assembled = assembled + d(ds(u))
            if h <= n - 1:
                assembled = assembled + ds(d(u))
            bump("laplacian", _rel(assembled.data, lap(u).data))
            # diagonal action: each component of Delta u is the scalar Laplacian of that component
            comp = np.stack([lap(GridForm.scalar(grid, c)).data[0] for c in u.data])
            bump("diagonal", _rel(comp, lap(u).data))
            star2 = diffops.hodge_star_field(diffops.hodge_star_field(u))
            bump("starstar", _rel(star2.data, (-1) ** (h * (n - h)) * u.data))
            z = GridForm(grid, h, u.data - u.mean().reshape((-1,) + (1,) * n))
            if h <= n - 1:
                bump("comm_d", _rel(d(inv(z, "annihilate")).data, inv(d(z), "annihilate").data))
            if h >= 1:
                bump("comm_dstar", _rel(ds(inv(z, "annihilate")).data, inv(ds(z), "annihilate").data))
            zv = GridForm(grid, h, v.data - v.mean().reshape((-1,) + (1,) * n))
            a = diffops.grid_inner(inv(z, "annihilate"), zv)
            b = diffops.grid_inner(z, inv(zv, "annihilate"))
            bump("duality", abs(a - b) / (abs(a) + abs(b) + 1e-300))
    return err


def run_algebra_suite(cfg: ExperimentConfig, dims=(2, 3, 4), samples: int = 100) -> NormReport:
    report = NormReport("algebra", cfg.to_dict())
    sizes = {2: 16, 3: 8, 4: 6}
    for n in dims:
        errs = algebra_errors(n, sizes.get(n, 6), samples, cfg.seed)
        for name, value in errs.items():
            report.rows.append({"n": n, "identity": name, "max_error": value})
            report.check(f"{name}[n={n}]", value, cfg.tolerances["algebra"], value <= cfg.tolerances["algebra"])
    return report
