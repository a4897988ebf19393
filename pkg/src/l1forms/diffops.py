"""Spectral exterior calculus on periodic grids.

Derivatives are the Fourier multipliers ``i k_j`` with the Nyquist
wavenumber set to zero, so ``d`` and ``d*`` are exact adjoints for the grid
inner product and every constant-coefficient identity of the continuum
(``d d = 0``, ``Delta = d d* + d* d``, commutation with ``Delta^-1``) holds
to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .exterior import DegreeError, basis, permutation_sign, raising_table
from .grid import GridForm


def wavenumbers(N: int, spacing: float, n: int, half_last: bool = True) -> list[np.ndarray]:
    """Per-axis wavenumbers, Nyquist zeroed, shaped to broadcast over an rfftn spectrum."""
    full = 2 * np.pi * sfft.fftfreq(N, d=spacing)
    full[N // 2] = 0.0
    half = 2 * np.pi * sfft.rfftfreq(N, d=spacing)
    half[-1] = 0.0
    out = []
    for axis in range(n):
        k = half if (half_last and axis == n - 1) else full
        shape = [1] * n
        shape[axis] = k.size
        out.append(k.reshape(shape))
    return out


def _forward(data: np.ndarray, n: int) -> np.ndarray:
    return sfft.rfftn(data, axes=tuple(range(-n, 0)))


def _inverse(spec: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    n = len(shape)
    return sfft.irfftn(spec, s=tuple(shape), axes=tuple(range(-n, 0)))


def k_squared(ks: Sequence[np.ndarray]) -> np.ndarray:
    out = ks[0] ** 2
    for k in ks[1:]:
        out = out + k ** 2
    return out


def d_spectrum(U: np.ndarray, ks, n: int, h: int) -> np.ndarray:
    """Spectrum of ``d u`` from the spectrum ``U`` of an h-form."""
    out = np.zeros((len(basis(n, h + 1)),) + U.shape[1:], dtype=complex)
    for up, lo, j, sign in raising_table(n, h):
        out[up] += (sign * 1j) * ks[j] * U[lo]
    return out


def dstar_spectrum(U: np.ndarray, ks, n: int, h: int) -> np.ndarray:
    """Spectrum of ``d* u`` from the spectrum ``U`` of an h-form."""
    out = np.zeros((len(basis(n, h - 1)),) + U.shape[1:], dtype=complex)
    for up, lo, j, sign in raising_table(n, h - 1):
        out[lo] -= (sign * 1j) * ks[j] * U[up]
    return out


def exterior_derivative(u: GridForm) -> GridForm:
    n, h = u.n, u.degree
    if h >= n:
        raise DegreeError(f"d of a degree-{h} form in dimension {n}")
    ks = wavenumbers(u.grid.N, u.grid.spacing, n)
    spec = d_spectrum(_forward(u.data, n), ks, n, h)
    return GridForm(u.grid, h + 1, _inverse(spec, u.grid.shape))


def codifferential(u: GridForm) -> GridForm:
    n, h = u.n, u.degree
    if h == 0:
        raise DegreeError("d* of a 0-form")
    ks = wavenumbers(u.grid.N, u.grid.spacing, n)
    spec = dstar_spectrum(_forward(u.data, n), ks, n, h)
    return GridForm(u.grid, h - 1, _inverse(spec, u.grid.shape))


_CENTRAL = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
    8: (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}


def central_difference(field: np.ndarray, axis: int, spacing: float, order: int = 8) -> np.ndarray:
    """Central difference of the given even order along ``axis`` (wraps at the edges)."""
    if order not in _CENTRAL:
        raise ValueError(f"order must be one of {sorted(_CENTRAL)}")
    out = np.zeros_like(field)
    for s, c in enumerate(_CENTRAL[order], start=1):
        out += c * (np.roll(field, -s, axis) - np.roll(field, s, axis))
    return out / spacing


def local_exterior_derivative(u: GridForm, order: int = 8) -> GridForm:
    """``d u`` by central differences.

    For forms known only on part of the grid: the value at a point uses
    ``order / 2`` neighbours per axis, so it is valid wherever ``u`` is valid
    that far around.
    """
    n, h = u.n, u.degree
    if h >= n:
        raise DegreeError(f"d of a degree-{h} form in dimension {n}")
    out = np.zeros((len(basis(n, h + 1)),) + u.grid.shape)
    for up, lo, j, sign in raising_table(n, h):
        out[up] += sign * central_difference(u.data[lo], j, u.grid.spacing, order)
    return GridForm(u.grid, h + 1, out)


def grid_inner(u: GridForm, v: GridForm) -> float:
    """``sum_x <u(x), v(x)> h^n``."""
    if u.grid != v.grid or u.degree != v.degree:
        raise DegreeError("inner product of forms on different grids or degrees")
    return float(np.vdot(u.data, v.data) * u.grid.cell_volume)


@dataclass(frozen=True)
class FrequencyMultiplier:
    """Scalar Fourier multiplier applied to every component of a grid form.

    ``symbol`` maps the tuple of wavenumber arrays to the multiplier.  At
    wavevectors where ``singular(ks)`` is true the symbol is not evaluated:
    the mode is set to zero.  With ``zero_mode="error"`` a non-negligible
    mean (the k = 0 mode) raises instead of being discarded.
    """

    symbol: Callable[[Sequence[np.ndarray]], np.ndarray]
    zero_mode: str = "annihilate"
    singular: Callable[[Sequence[np.ndarray]], np.ndarray] | None = None
    tol: float = 1e-10

    def __post_init__(self):
        if self.zero_mode not in ("annihilate", "error"):
            raise ValueError(f"zero-mode policy must be 'annihilate' or 'error', got {self.zero_mode!r}")

    def apply(self, u: GridForm) -> GridForm:
        ks = wavenumbers(u.grid.N, u.grid.spacing, u.n)
        U = _forward(u.data, u.n)
        if self.singular is None:
            mult = self.symbol(ks)
        else:
            bad = np.broadcast_to(self.singular(ks), U.shape[1:])
            if self.zero_mode == "error" and bad.flat[0]:
                size = np.abs(U).max(initial=0.0)
                mean = U[(slice(None),) + (0,) * u.n]
                if np.abs(mean).max(initial=0.0) > self.tol * max(size, 1e-300):
                    raise ValueError("input has a component in the kernel of the multiplier "
                                     "(nonzero mean); use zero_mode='annihilate' to discard it")
            with np.errstate(divide="ignore", invalid="ignore"):
                mult = np.where(bad, 0.0, self.symbol(ks))
        return GridForm(u.grid, u.degree, _inverse(U * mult, u.grid.shape))


def _ksq_zero(ks):
    return k_squared(ks) == 0


LAPLACIAN = FrequencyMultiplier(k_squared)


def laplacian(u: GridForm) -> GridForm:
    """Hodge Laplacian ``d d* + d* d``; acts on each component as ``-sum_j d_j^2``."""
    return LAPLACIAN.apply(u)


def inverse_laplacian(u: GridForm, zero_mode: str | None = None) -> GridForm:
    """``Delta^-1`` on the orthogonal complement of the discrete harmonic forms.

    The discrete kernel of ``Delta`` holds the constant mode and, because the
    Nyquist wavenumber is zeroed, the pure-Nyquist checkerboard modes.  The
    default policy raises for top-degree inputs with nonzero mean and
    annihilates the kernel otherwise.
    """
    if zero_mode is None:
        zero_mode = "error" if u.degree == u.n else "annihilate"
    mult = FrequencyMultiplier(lambda ks: 1.0 / k_squared(ks), zero_mode, _ksq_zero)
    return mult.apply(u)


def harmonic_part(u: GridForm) -> GridForm:
    """Projection onto the kernel of the discrete Laplacian."""
    return FrequencyMultiplier(lambda ks: _ksq_zero(ks).astype(float)).apply(u)


def project_closed(u: GridForm) -> GridForm:
    """Orthogonal projection onto closed forms, one wavevector at a time.

    At wavevector k the closed forms are ``k ^ Lambda``; the projector is
    ``k ^ i_k / |k|^2``.  Where the effective wavevector vanishes every form
    is closed and the mode is kept.
    """
    n, h = u.n, u.degree
    if h == 0:
        # only constants (and Nyquist checkerboards) are closed 0-forms
        return harmonic_part(u)
    if h == n:
        return u
    ks = wavenumbers(u.grid.N, u.grid.spacing, n)
    U = _forward(u.data, n)
    contracted = np.zeros((len(basis(n, h - 1)),) + U.shape[1:], dtype=complex)
    for up, lo, j, sign in raising_table(n, h - 1):
        contracted[lo] += sign * ks[j] * U[up]
    out = np.zeros_like(U)
    for up, lo, j, sign in raising_table(n, h - 1):
        out[up] += sign * ks[j] * contracted[lo]
    ksq = k_squared(ks)
    zero = ksq == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero, U, out / np.where(zero, 1.0, ksq))
    return GridForm(u.grid, h, _inverse(out, u.grid.shape))


def hodge_star_field(u: GridForm) -> GridForm:
    """Pointwise Hodge star of a grid form."""
    n, h = u.n, u.degree
    pos = {I: k for k, I in enumerate(basis(n, n - h))}
    out = np.zeros((len(basis(n, n - h)),) + u.grid.shape)
    for k, I in enumerate(u.indices):
        Ic = I.complement()
        out[pos[Ic]] = permutation_sign(I.entries + Ic.entries) * u.data[k]
    return GridForm(u.grid, n - h, out)


def adjoint_duality_check(u: GridForm, K, psi: GridForm) -> float:
    """``|<u * K, psi> - <u, psi * K^v>|`` for free-space convolutions.

    ``K^v`` is the reflected kernel, transposed when K is matrix valued.
    """
    from .kernels import freespace_convolve

    left = grid_inner(freespace_convolve(K, u), psi)
    right = grid_inner(u, freespace_convolve(K.adjoint(), psi))
    return abs(left - right)
