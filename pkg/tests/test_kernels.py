import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from l1forms import kernels
from l1forms.exterior import DegreeError
from l1forms.grid import Grid, GridForm, lp_norm
from l1forms.kernels import (
    FreeSpaceOperator,
    SupportError,
    annulus_decay_profile,
    direct_convolve,
    dstar_green_kernel,
    epstein_zeta,
    far_field_decay_check,
    freespace_convolve,
    homogeneity_error,
    newtonian,
    newtonian_gradient,
    riesz,
    truncate_split,
    unit_cube_integral,
    weak_type_bound_check,
)


def gaussian(grid, c=(0.0, 0.0, 0.0), s=0.5):
    x = grid.coords() - np.asarray(c, float).reshape((-1,) + (1,) * grid.n)
    r2 = np.sum(x * x, axis=0)
    return np.exp(-r2 / (2 * s * s)) / ((2 * np.pi) ** (grid.n / 2) * s ** grid.n)


def dipole(grid, s=0.4, shift=0.3):
    return GridForm.scalar(grid, gaussian(grid, (shift, 0, 0), s) - gaussian(grid, (-shift, 0, 0), s))


# analytic kernels


def test_newtonian_values():
    assert newtonian(3)(np.array([[1.0], [0.0], [0.0]]))[0] == pytest.approx(1 / (4 * math.pi))
    assert newtonian(4)(np.array([[0.0], [1.0], [0.0], [0.0]]))[0] == pytest.approx(1 / (4 * math.pi ** 2))
    x = np.array([[0.3], [-0.4], [1.2]])
    assert newtonian(3)(2 * x)[0] == pytest.approx(newtonian(3)(x)[0] / 2)
    with pytest.raises(ValueError):
        newtonian(2)


def test_newtonian_gradient_values():
    K = newtonian_gradient(3, 1)
    e1 = np.array([[1.0], [0.0], [0.0]])
    assert K(e1)[0] == pytest.approx(-1 / (4 * math.pi))
    # finite-difference cross-check against the Newtonian kernel
    x = np.array([[0.7], [-0.2], [0.5]])
    eps = 1e-6
    G = newtonian(3)
    fd = (G(x + [[eps], [0], [0]]) - G(x - [[eps], [0], [0]])) / (2 * eps)
    assert K(x)[0] == pytest.approx(fd[0], rel=1e-7)
    assert K(2 * x)[0] == pytest.approx(2 ** -2 * K(x)[0])
    assert np.allclose(K.reflected()(x), -K(x))


def test_derivative_matches_builtin():
    d = newtonian(3).derivative(0)  # axes are 0-based here
    x = np.random.default_rng(0).normal(size=(3, 20))
    assert np.allclose(d(x), newtonian_gradient(3, 1)(x))


def test_homogeneity_of_builtins():
    for K in (newtonian(3), newtonian_gradient(3, 2), riesz(3, 1.5), dstar_green_kernel(3, 2), newtonian(5)):
        assert homogeneity_error(K) <= 1e-12


def test_riesz_symbol_normalisation():
    # I_2 is the Newtonian kernel
    x = np.random.default_rng(1).normal(size=(3, 5))
    assert np.allclose(riesz(3, 2.0)(x), newtonian(3)(x))
    with pytest.raises(ValueError):
        riesz(3, 3.0)


def test_dstar_green_kernel_structure():
    K = dstar_green_kernel(3, 1)
    assert (K.in_degree, K.out_degree) == (1, 0)
    x = np.array([[0.3], [0.2], [-0.5]])
    # K u(x) = sigma^-1 i_x u / |x|^3 componentwise: entry for dx_j is x_j / (4 pi |x|^3)
    vals = K(x)
    r = np.linalg.norm(x)
    assert np.allclose(vals[0, :, 0], x[:, 0] / (4 * math.pi * r ** 3))
    with pytest.raises(DegreeError):
        dstar_green_kernel(3, 0)


# singular corrections


def test_epstein_zeta_special_values():
    assert epstein_zeta(3, 0.0) == -1.0
    assert epstein_zeta(3, -1.0) == 0.0
    with pytest.raises(ValueError):
        epstein_zeta(3, 1.5)


def test_epstein_zeta_matches_lattice_sum():
    # s = 3 converges absolutely; oracle: truncated sum plus continuum tail
    M = 40
    m = np.arange(-M, M + 1)
    X, Y, Z = np.meshgrid(m, m, m, indexing="ij")
    r2 = (X * X + Y * Y + Z * Z).astype(float)
    inside = (r2 > 0) & (r2 <= M * M)
    direct = np.sum(r2[inside] ** -3.0) + 4 * math.pi / (3 * M ** 3)
    assert epstein_zeta(3, 3.0) == pytest.approx(direct, rel=1e-5)


def test_unit_cube_integral_against_quadrature():
    f = lambda z, y, x: 1.0 / math.sqrt(x * x + y * y + z * z)
    oracle = 8 * integrate.tplquad(f, 0, 0.5, 0, 0.5, 0, 0.5, epsabs=1e-10)[0]
    assert unit_cube_integral(3, (0, 0, 0), -1.0) == pytest.approx(oracle, rel=1e-7)
    f2 = lambda z, y, x: x * x / (x * x + y * y + z * z) ** 1.5
    oracle2 = 8 * integrate.tplquad(f2, 0, 0.5, 0, 0.5, 0, 0.5, epsabs=1e-10)[0]
    assert unit_cube_integral(3, (2, 0, 0), -3.0) == pytest.approx(oracle2, rel=1e-7)


# convolution


def naive_convolution(K, u, points):
    """Oracle from the analytic kernel, origin term dropped (the 'none' scheme)."""
    g = u.grid
    x = g.coords().reshape(g.n, -1)
    vals = u.data[0].reshape(-1)
    out = []
    for p in points:
        diff = x[:, p][:, None] - x
        with np.errstate(divide="ignore", invalid="ignore"):
            k = K(diff)
        k = k.reshape(-1) if K.is_scalar else k
        k[p] = 0.0
        out.append(np.sum(k * vals) * g.cell_volume)
    return np.array(out)


@pytest.mark.parametrize("K", [newtonian(3), newtonian_gradient(3, 1)], ids=["newtonian", "type1"])
def test_fft_matches_direct_summation(K):
    g = Grid(3, 16, 4.0, periodic=False)
    u = GridForm.scalar(g, gaussian(g, (0.2, -0.1, 0.0), 0.25))
    fast, slow = freespace_convolve(K, u), direct_convolve(K, u)
    assert np.abs(fast.data - slow.data).max() <= 1e-8 * np.abs(slow.data).max()


def test_fft_matches_naive_analytic_sum():
    g = Grid(3, 12, 3.0, periodic=False)
    u = GridForm.scalar(g, np.random.default_rng(0).normal(size=g.shape))
    u = GridForm.scalar(g, u.data[0] * (g.radius() < 1.2))
    # the support check would reject noise near the edge; zero guard disables it
    op = FreeSpaceOperator(newtonian(3), g, "none", guard_cells=0)
    pts = np.random.default_rng(1).choice(g.N ** 3, 10, replace=False)
    got = op.apply(u).data[0].reshape(-1)[pts]
    assert np.allclose(got, naive_convolution(newtonian(3), u, pts), rtol=1e-10, atol=1e-12)


def test_green_recovers_gaussian():
    errs = []
    for N in (32, 64):
        g = Grid(3, N, 8.0, periodic=False)
        f = GridForm.scalar(g, gaussian(g, s=0.5))
        back = FreeSpaceOperator(newtonian(3), g).apply_laplacian(f)
        errs.append(lp_norm(back - f, 1) / lp_norm(f, 1))
    assert errs[1] <= 1e-2
    assert errs[0] / errs[1] >= 2 ** 1.5


def test_green_recovers_bump_from_its_laplacian():
    # u = Delta(Gaussian) analytically; G * u must give the Gaussian back
    g = Grid(3, 64, 8.0, periodic=False)
    s = 0.5
    r2 = g.radius() ** 2
    bump = np.exp(-r2 / (2 * s * s))
    lap = -(r2 / s ** 4 - 3 / s ** 2) * bump  # Delta = -sum d_j^2
    got = freespace_convolve(newtonian(3), GridForm.scalar(g, lap)).data[0]
    assert np.abs(got - bump).max() <= 1e-3


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_convolution_linear(seed, a, b):
    g = Grid(3, 16, 8.0, periodic=False)
    rng = np.random.default_rng(seed)
    u = GridForm.scalar(g, gaussian(g, rng.uniform(-0.3, 0.3, 3), 0.3))
    v = GridForm.scalar(g, gaussian(g, rng.uniform(-0.3, 0.3, 3), 0.4))
    K = newtonian(3)
    lhs = freespace_convolve(K, u * a + v * b).data
    rhs = a * freespace_convolve(K, u).data + b * freespace_convolve(K, v).data
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_zero_input_and_support_guard():
    g = Grid(3, 12, 4.0, periodic=False)
    assert not freespace_convolve(newtonian(3), GridForm.zeros(g, 0)).data.any()
    with pytest.raises(SupportError):
        freespace_convolve(newtonian(3), GridForm.scalar(g, 1.0))
    with pytest.raises(ValueError):
        FreeSpaceOperator(newtonian(3), g, scheme="bogus")


# truncation


def test_truncate_split_partition():
    g = Grid(3, 24, 6.0, periodic=False)
    R = 0.8
    pair = truncate_split(newtonian_gradient(3, 1), g, R)
    near, far, full = pair.near_samples()[0], pair.far_samples()[0], pair.full.samples()[0]
    x = kernels.padded_offsets(g.N, 3, g.spacing)
    r = np.sqrt(np.sum(x * x, axis=0))
    away = r > 2 * g.spacing
    assert np.allclose((near + far)[away], full[away], rtol=1e-14, atol=0)
    assert not far[r <= R].any()
    assert np.abs(far).max() <= 1 / (4 * math.pi * R ** 2) * (1 + 1e-12)
    with pytest.raises(ValueError):
        truncate_split(newtonian(3), g, g.L / 4)


# diagnostics


def test_far_field_exponents():
    g = Grid(3, 64, 16.0, periodic=False)
    bump = GridForm.scalar(g, gaussian(g, s=0.5))
    radii = (2.5, 3.5, 4.5, 5.5, 6.5)
    assert abs(far_field_decay_check(bump, newtonian(3), radii).exponent + 1) <= 0.3
    assert abs(far_field_decay_check(bump, newtonian(3), radii, 1).exponent + 2) <= 0.3
    rep = far_field_decay_check(dipole(g), newtonian(3), radii)
    assert abs(rep.exponent + 2) <= 0.3
    with pytest.raises(ValueError):
        far_field_decay_check(bump, newtonian(3), (9.0,))


def test_annulus_profile():
    g = Grid(3, 64, 16.0, periodic=False)
    K = newtonian_gradient(3, 1)
    prof = annulus_decay_profile(K, dipole(g), (1.0, 2.0, 4.0))
    ratios = [b / a for a, b in zip(prof, prof[1:])]
    assert all(0.4 <= r <= 0.6 for r in ratios)
    assert annulus_decay_profile(K, GridForm.zeros(g, 0), (1.0, 2.0)) == [0.0, 0.0]
    with pytest.raises(ValueError):
        annulus_decay_profile(K, GridForm.scalar(g, gaussian(g)), (1.0,))


def test_weak_type_ratios():
    # the box clips the M^p supremum by roughly sigma / L, so keep the widths small
    g = Grid(3, 64, 16.0, periodic=False)
    K = newtonian_gradient(3, 1)
    fam = [GridForm.scalar(g, gaussian(g, s=s)) for s in (0.3, 0.4, 0.55)]
    rep = weak_type_bound_check(K, fam + [GridForm.zeros(g, 0)])
    assert len(rep.ratios) == 3 and rep.notes
    assert max(rep.ratios) / min(rep.ratios) <= 1.1
    doubled = weak_type_bound_check(K, [f * 2 for f in fam])
    assert np.allclose(doubled.ratios, rep.ratios, rtol=1e-12)
