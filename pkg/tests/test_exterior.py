import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1forms.exterior import (
    ConstantForm,
    DegreeError,
    MultiIndex,
    basis,
    dx,
    hodge_star,
    inner_product,
    interior_product,
    permutation_sign,
    raising_table,
    volume_form,
    wedge,
)


def random_form(n, h, seed):
    rng = np.random.default_rng(seed)
    return ConstantForm.from_vector(n, h, rng.normal(size=len(basis(n, h))))


def evaluate(a: ConstantForm, vectors) -> float:
    """Independent oracle: a(v_1, ..., v_h) = sum_I a_I det(v_{k, I_l})."""
    V = np.asarray(vectors, float).reshape(a.h, a.n)
    total = 0.0
    for I, c in a.coeffs.items():
        cols = [j - 1 for j in I.entries]
        total += c * (np.linalg.det(V[:, cols]) if a.h else 1.0)
    return total


def wedge_oracle(a, b, vectors):
    """(a ^ b)(v) = sum over (h, k) shuffles of sign * a(v_sigma) b(v_tau)."""
    h, k = a.h, b.h
    total = 0.0
    for first in itertools.combinations(range(h + k), h):
        rest = tuple(i for i in range(h + k) if i not in first)
        sign = permutation_sign(first + rest)
        total += sign * evaluate(a, [vectors[i] for i in first]) * evaluate(b, [vectors[i] for i in rest])
    return total


# basis bookkeeping


def test_basis_sizes_and_order():
    assert [I.entries for I in basis(3, 2)] == [(1, 2), (1, 3), (2, 3)]
    for n in range(1, 6):
        assert sum(len(basis(n, h)) for h in range(n + 1)) == 2 ** n


def test_permutation_sign():
    assert permutation_sign((1, 2, 3)) == 1
    assert permutation_sign((2, 1, 3)) == -1
    assert permutation_sign((3, 1, 2)) == 1
    assert permutation_sign((1, 1)) == 0


def test_multi_index_validation():
    with pytest.raises(ValueError):
        MultiIndex((2, 1), 3)
    with pytest.raises(ValueError):
        MultiIndex((1, 4), 3)
    assert MultiIndex((1,), 3).complement().entries == (2, 3)


def test_raising_table_rows():
    # dx_2 ^ dx_1 = -dx_12
    rows = raising_table(3, 1)
    up = [I.entries for I in basis(3, 2)].index((1, 2))
    assert (up, 0, 1, -1) in rows


# wedge


def test_wedge_examples():
    assert wedge(dx(1, 3), dx(2, 3))[(1, 2)] == 1.0
    assert wedge(dx(2, 3), dx(1, 3))[(1, 2)] == -1.0
    assert not wedge(dx(1, 3), dx(1, 3)).coeffs


def test_wedge_degree_overflow():
    with pytest.raises(DegreeError):
        wedge(volume_form(3), dx(1, 3))


def test_dimension_mismatch():
    with pytest.raises(DegreeError):
        wedge(dx(1, 2), dx(1, 3))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 5), data=st.data())
def test_wedge_matches_shuffle_oracle(n, data):
    h = data.draw(st.integers(0, n))
    k = data.draw(st.integers(0, n - h))
    seed = data.draw(st.integers(0, 10 ** 6))
    a, b = random_form(n, h, seed), random_form(n, k, seed + 1)
    vectors = np.random.default_rng(seed + 2).normal(size=(h + k, n))
    assert evaluate(wedge(a, b), vectors) == pytest.approx(wedge_oracle(a, b, vectors), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 5), data=st.data())
def test_wedge_graded_commutative_and_associative(n, data):
    h = data.draw(st.integers(0, n))
    k = data.draw(st.integers(0, n - h))
    m = data.draw(st.integers(0, n - h - k))
    seed = data.draw(st.integers(0, 10 ** 6))
    a, b, c = random_form(n, h, seed), random_form(n, k, seed + 1), random_form(n, m, seed + 2)
    assert wedge(a, b).allclose(wedge(b, a) * (-1) ** (h * k), atol=1e-12)
    assert wedge(wedge(a, b), c).allclose(wedge(a, wedge(b, c)), atol=1e-12)


# Hodge star


def test_star_examples():
    assert hodge_star(dx(1, 3))[(2, 3)] == 1.0
    assert hodge_star(ConstantForm(3, 2, {(2, 3): 1.0}))[(1,)] == 1.0
    assert hodge_star(dx(1, 2))[(2,)] == 1.0
    assert hodge_star(dx(2, 2))[(1,)] == -1.0


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 6), data=st.data())
def test_star_star_and_defining_identity(n, data):
    h = data.draw(st.integers(0, n))
    seed = data.draw(st.integers(0, 10 ** 6))
    a, b = random_form(n, h, seed), random_form(n, h, seed + 1)
    assert hodge_star(hodge_star(a)).allclose(a * (-1) ** (h * (n - h)), atol=1e-12)
    lhs = wedge(a, hodge_star(b))
    assert lhs.allclose(volume_form(n) * inner_product(a, b), atol=1e-10)


# inner and interior products


def test_inner_product_examples():
    e12 = ConstantForm(3, 2, {(1, 2): 1.0})
    assert inner_product(e12, e12) == 1.0
    assert inner_product(e12, ConstantForm(3, 2, {(1, 3): 1.0})) == 0.0
    assert inner_product(2 * dx(1, 3) + 3 * dx(2, 3), dx(2, 3)) == 3.0


def test_interior_examples():
    assert interior_product((1, 0, 0), dx(1, 3))[()] == 1.0
    x = np.array([0.3, -1.2, 2.0])
    got = interior_product(x, wedge(dx(1, 3), dx(2, 3)))
    want = dx(2, 3) * x[0] - dx(1, 3) * x[1]
    assert got.allclose(want)
    with pytest.raises(DegreeError):
        interior_product(x, ConstantForm.scalar(3, 1.0))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 5), data=st.data())
def test_interior_antiderivation(n, data):
    h = data.draw(st.integers(1, n))
    k = data.draw(st.integers(0, n - h))
    seed = data.draw(st.integers(0, 10 ** 6))
    a, b = random_form(n, h, seed), random_form(n, k, seed + 1)
    v = np.random.default_rng(seed + 2).normal(size=n)
    if h >= 2:
        assert interior_product(v, interior_product(v, a)).allclose(ConstantForm.zero(n, h - 2), atol=1e-12)
    lhs = interior_product(v, wedge(a, b))
    rhs = wedge(interior_product(v, a), b)
    if k:
        rhs = rhs + wedge(a, interior_product(v, b)) * (-1) ** h
    assert lhs.allclose(rhs, atol=1e-10)


def test_interior_matches_evaluation():
    a = random_form(4, 3, 5)
    v = np.random.default_rng(0).normal(size=(3, 4))
    assert evaluate(interior_product(v[0], a), v[1:]) == pytest.approx(evaluate(a, v), abs=1e-12)
