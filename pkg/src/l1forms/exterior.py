"""Constant-coefficient alternating forms on R^n.

Multi-indices are 1-based and strictly increasing.  A ``ConstantForm`` is a
sparse map from multi-indices of a fixed degree to real coefficients; every
operation returns a new form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np


class DegreeError(ValueError):
    """Degree or dimension of a form does not fit the requested operation."""


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(seq)):
        j = i
        while j > 0 and seq[j - 1] > seq[j]:
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    return sign


@dataclass(frozen=True, order=True)
class MultiIndex:
    entries: tuple[int, ...]
    n: int

    def __post_init__(self):
        if not 0 <= len(self.entries) <= self.n:
            raise DegreeError(f"degree {len(self.entries)} outside [0, {self.n}]")
        prev = 0
        for i in self.entries:
            if not prev < i <= self.n:
                raise DegreeError(f"{self.entries} is not strictly increasing in 1..{self.n}")
            prev = i

    @classmethod
    def from_unsorted(cls, entries: Iterable[int], n: int) -> tuple[int, "MultiIndex | None"]:
        """Sort ``entries``; return (sign, index), or (0, None) on a repeat."""
        entries = tuple(entries)
        sign = permutation_sign(entries)
        if sign == 0:
            return 0, None
        return sign, cls(tuple(sorted(entries)), n)

    @property
    def degree(self) -> int:
        return len(self.entries)

    def complement(self) -> "MultiIndex":
        return MultiIndex(tuple(i for i in range(1, self.n + 1) if i not in self.entries), self.n)

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        if not self.entries:
            return "1"
        return "dx" + "".join(str(i) for i in self.entries)


@lru_cache(maxsize=None)
def basis(n: int, h: int) -> tuple[MultiIndex, ...]:
    """Increasing multi-indices of degree ``h`` in lexicographic order."""
    if not 0 <= h <= n:
        raise DegreeError(f"degree {h} outside [0, {n}]")
    return tuple(MultiIndex(c, n) for c in itertools.combinations(range(1, n + 1), h))


@lru_cache(maxsize=None)
def basis_position(n: int, h: int) -> dict[MultiIndex, int]:
    return {I: k for k, I in enumerate(basis(n, h))}


@lru_cache(maxsize=None)
def raising_table(n: int, h: int) -> tuple[tuple[int, int, int, int], ...]:
    """Rows ``(upper, lower, j, sign)`` with ``dx_j ^ dx^lower = sign dx^upper``.

    ``lower`` runs over the degree-h basis and ``upper`` over degree h+1
    (positions into :func:`basis`); ``j`` is the 0-based axis.  The same table
    read backwards gives interior products: ``i_{e_j} dx^upper = sign dx^lower``.
    """
    if not 0 <= h < n:
        raise DegreeError(f"no degree {h + 1} forms in dimension {n}")
    pos = basis_position(n, h + 1)
    rows = []
    for lo, I in enumerate(basis(n, h)):
        for j in range(1, n + 1):
            if j in I.entries:
                continue
            sign, up = MultiIndex.from_unsorted((j,) + I.entries, n)
            rows.append((pos[up], lo, j - 1, sign))
    return tuple(rows)


def _coerce_key(key, n) -> MultiIndex:
    if isinstance(key, MultiIndex):
        return key
    if isinstance(key, int):
        key = (key,)
    return MultiIndex(tuple(key), n)


@dataclass(frozen=True)
class ConstantForm:
    """Element of Lambda^h(R^n) with the orthonormal basis dx^I."""

    n: int
    h: int
    coeffs: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.h <= self.n:
            raise DegreeError(f"degree {self.h} outside [0, {self.n}]")
        clean = {}
        for key, value in dict(self.coeffs).items():
            key = _coerce_key(key, self.n)
            if key.n != self.n or key.degree != self.h:
                raise DegreeError(f"key {key.entries} does not have degree {self.h} in dimension {self.n}")
            if value != 0:
                clean[key] = clean.get(key, 0.0) + float(value)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_terms(cls, n: int, h: int, terms: Mapping[Sequence[int], float]) -> "ConstantForm":
        """Build from possibly unsorted index tuples, absorbing permutation signs."""
        out: dict[MultiIndex, float] = {}
        for entries, value in terms.items():
            sign, key = MultiIndex.from_unsorted(entries, n)
            if sign:
                out[key] = out.get(key, 0.0) + sign * value
        return cls(n, h, out)

    @classmethod
    def scalar(cls, n: int, value: float) -> "ConstantForm":
        return cls(n, 0, {MultiIndex((), n): value})

    @classmethod
    def zero(cls, n: int, h: int) -> "ConstantForm":
        return cls(n, h, {})

    def __getitem__(self, key) -> float:
        return self.coeffs.get(_coerce_key(key, self.n), 0.0)

    def vector(self) -> np.ndarray:
        """Coefficients in the order of :func:`basis`."""
        return np.array([self.coeffs.get(I, 0.0) for I in basis(self.n, self.h)])

    @classmethod
    def from_vector(cls, n: int, h: int, values) -> "ConstantForm":
        return cls(n, h, dict(zip(basis(n, h), np.asarray(values, dtype=float))))

    def _check_same(self, other: "ConstantForm"):
        if self.n != other.n:
            raise DegreeError(f"dimension mismatch: {self.n} vs {other.n}")
        if self.h != other.h:
            raise DegreeError(f"degree mismatch: {self.h} vs {other.h}")

    def __add__(self, other: "ConstantForm") -> "ConstantForm":
        self._check_same(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return ConstantForm(self.n, self.h, out)

    def __neg__(self):
        return ConstantForm(self.n, self.h, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c: float) -> "ConstantForm":
        return ConstantForm(self.n, self.h, {k: c * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "ConstantForm") -> "ConstantForm":
        return wedge(self, other)

    def allclose(self, other: "ConstantForm", atol: float = 1e-12) -> bool:
        self._check_same(other)
        return bool(np.allclose(self.vector(), other.vector(), rtol=0, atol=atol))

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self)))

    def __str__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"{v:g}*{k}" for k, v in sorted(self.coeffs.items()))


def dx(i: int, n: int) -> ConstantForm:
    """The basis 1-form dx_i (1-based)."""
    return ConstantForm(n, 1, {MultiIndex((i,), n): 1.0})


def volume_form(n: int) -> ConstantForm:
    return ConstantForm(n, n, {MultiIndex(tuple(range(1, n + 1)), n): 1.0})


def wedge(a: ConstantForm, b: ConstantForm) -> ConstantForm:
    if a.n != b.n:
        raise DegreeError(f"dimension mismatch: {a.n} vs {b.n}")
    if a.h + b.h > a.n:
        raise DegreeError(f"degree {a.h} + {b.h} exceeds dimension {a.n}")
    out: dict[MultiIndex, float] = {}
    for I, u in a.coeffs.items():
        for J, v in b.coeffs.items():
            sign, K = MultiIndex.from_unsorted(I.entries + J.entries, a.n)
            if sign:
                out[K] = out.get(K, 0.0) + sign * u * v
    return ConstantForm(a.n, a.h + b.h, out)


def hodge_star(a: ConstantForm) -> ConstantForm:
    out = {}
    for I, v in a.coeffs.items():
        Ic = I.complement()
        out[Ic] = permutation_sign(I.entries + Ic.entries) * v
    return ConstantForm(a.n, a.n - a.h, out)


def inner_product(a: ConstantForm, b: ConstantForm) -> float:
    a._check_same(b)
    return float(sum(v * b.coeffs.get(I, 0.0) for I, v in a.coeffs.items()))


def interior_product(v: Sequence[float], a: ConstantForm) -> ConstantForm:
    """Contraction i_v a; i_v dx_j = v_j."""
    v = np.asarray(v, dtype=float)
    if v.shape != (a.n,):
        raise DegreeError(f"vector of shape {v.shape} in dimension {a.n}")
    if a.h == 0:
        raise DegreeError("cannot contract a 0-form")
    out: dict[MultiIndex, float] = {}
    for I, c in a.coeffs.items():
        for pos, j in enumerate(I.entries):
            J = MultiIndex(I.entries[:pos] + I.entries[pos + 1:], a.n)
            out[J] = out.get(J, 0.0) + (-1) ** pos * v[j - 1] * c
    return ConstantForm(a.n, a.h - 1, out)
