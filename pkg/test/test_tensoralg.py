import pytest
import numpy as np

from .helpers import *


def test_lie_data(su2, abelian):
    from ymmodel.errors import LieAlgebraError
    from ymmodel.tensoralg import LieData

    assert su2.dim_k == 3
    assert su2.dim_v == 9
    assert not su2.is_abelian
    assert su2.f[0, 1, 2] == 1.0
    assert su2.f[1, 0, 2] == -1.0
    assert su2.f[2, 1, 0] == -1.0
    assert su2.jacobi_residual() == 0.0

    e = np.eye(3)
    assert np.allclose(su2.bracket(e[0], e[1]), e[2])
    assert np.allclose(su2.bracket(e[1], e[1]), 0)
    # broadcasting over leading axes
    assert su2.bracket(np.ones((5, 3)), np.ones((5, 3))).shape == (5, 3)

    assert abelian.is_abelian
    assert abelian.dim_v == 9
    assert LieData.abelian(dim_k=1).dim_v == 3

    # triples imply antisymmetry
    built = LieData.from_triples(3, [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)])
    assert np.array_equal(built.f, su2.f)
    assert built.name == "custom"

    with pytest.raises(LieAlgebraError):
        LieData.from_triples(3, [(0, 1, 3, 1.0)])
    # [e0, e1] = e2, [e1, e2] = e1 violates Jacobi
    with pytest.raises(LieAlgebraError):
        LieData.from_triples(3, [(0, 1, 2, 1.0), (1, 2, 1, 1.0)])
    f = np.zeros((3, 3, 3))
    f[0, 1, 2] = 1.0
    with pytest.raises(LieAlgebraError):
        LieData(f)
    with pytest.raises(LieAlgebraError):
        LieData(np.zeros((3, 3)))

    opposite = su2.opposite()
    assert opposite.name == "su2-opposite"
    assert np.array_equal(opposite.f, -su2.f)
    assert opposite.opposite().name == "su2"

    assert su2.json() == {
        "name": "su2",
        "dim_k": 3,
        "structure_constants": [[0, 1, 2, 1.0], [0, 2, 1, -1.0], [1, 2, 0, 1.0]],
    }


def test_lie_bracket(su2, abelian):
    from ymmodel.tensoralg import lie_bracket

    e = np.eye(3)
    assert np.allclose(lie_bracket(e[0], e[1], su2), e[2])
    assert np.allclose(lie_bracket(e[1], e[0], su2), -e[2])
    assert np.allclose(lie_bracket(e[2], e[0], su2), e[1])

    rng = np.random.default_rng(11)
    x, y, z = rng.standard_normal((3, 20, 3))
    assert np.max(np.abs(lie_bracket(x, x, su2))) < 1e-12
    jacobi = (
        lie_bracket(x, lie_bracket(y, z, su2), su2)
        + lie_bracket(y, lie_bracket(z, x, su2), su2)
        + lie_bracket(z, lie_bracket(x, y, su2), su2)
    )
    assert np.max(np.abs(jacobi)) < 1e-12

    assert np.allclose(lie_bracket(x, y, su2.opposite()), lie_bracket(y, x, su2))
    assert not np.any(lie_bracket(x, y, abelian))


def test_nonlinearity_tensors():
    from ymmodel.tensoralg import nonlin_tensors

    A, B = nonlin_tensors()
    assert A.shape == B.shape == (3, 3, 3, 3)
    assert A[0, 0, 1, 1] == 2.0
    assert A[0, 1, 1, 0] == -1.0
    assert A[0, 0, 0, 0] == 1.0
    assert B[0, 1, 1, 0] == 1.0
    assert B[0, 0, 1, 1] == 0.0
    assert B.sum() == 9.0


def test_w_spaces():
    from ymmodel.indexcalc import MultiIndex
    from ymmodel.tensoralg import dim_space, w_basis, product_matrix, product_iso

    g = MultiIndex.g(1)
    d0 = MultiIndex.delta((0, 0, 0, 0))
    d1 = MultiIndex.delta((0, 1, 0, 0))

    assert dim_space(g, 9) == 1
    assert dim_space(MultiIndex.zero(), 9) == 1
    assert dim_space(g + d0, 9) == 9
    assert dim_space(g + d0 + d0, 9) == 45
    assert dim_space(d0 + d1, 9) == 81

    # the basis only depends on the polynomial part
    basis = w_basis(MultiIndex.g(3) + d0 + d0, 9)
    assert basis is w_basis(d0 + d0, 9)
    assert basis.dim == 45
    assert basis.elements[0] == ((0, 0),)
    assert basis.index(((0, 1),)) == 1
    assert basis.slots == ((0, 0, 0, 0),)

    # disjoint slots: a permutation
    matrix = product_matrix(d0, d1, 9)
    assert matrix.shape == (81, 81)
    assert np.array_equal(matrix @ matrix.T, np.eye(81))

    # shared slot: onto and not one-to-one
    matrix = product_matrix(d0, d0, 9)
    assert matrix.shape == (45, 81)
    assert np.array_equal(matrix.sum(axis=0), np.ones(81))
    assert np.linalg.matrix_rank(matrix) == 45
    assert not matrix.flags.writeable
    # both orderings of a pair land on the same monomial
    a, b = 2, 5
    target = w_basis(d0 + d0, 9).index(((a, b),))
    summed = matrix[:, a * 9 + b] + matrix[:, b * 9 + a]
    assert summed[target] == 2.0
    assert summed.sum() == 2.0
    assert np.array_equal(product_matrix(g, g, 9), np.ones((1, 1)))

    iso = product_iso(g + d0, g, 9)
    assert iso.target == MultiIndex.g(2) + d0
    assert iso.matrix.shape == (9, 9)


def test_reflection_signs():
    from ymmodel.indexcalc import MultiIndex
    from ymmodel.tensoralg import v_reflection_signs, reflection_signs

    signs = v_reflection_signs(1, 3)
    assert list(signs) == [-1.0, 1.0, 1.0] * 3
    assert list(v_reflection_signs(3, 1)) == [1.0, 1.0, -1.0]

    assert list(reflection_signs(MultiIndex.g(2), 1, 9)) == [1.0]
    d0 = MultiIndex.g(1) + MultiIndex.delta((0, 0, 0, 0))
    assert np.array_equal(reflection_signs(d0, 2, 9), v_reflection_signs(2, 3))
    # ∂_1 picks up an extra sign under the first reflection only
    d1 = MultiIndex.g(1) + MultiIndex.delta((0, 1, 0, 0))
    assert np.array_equal(reflection_signs(d1, 1, 9), -v_reflection_signs(1, 3))
    assert np.array_equal(reflection_signs(d1, 2, 9), v_reflection_signs(2, 3))

    # products of two labels take both signs
    both = reflection_signs(MultiIndex.g(2) + MultiIndex.delta((0, 0, 0, 0), 2), 1, 9)
    assert both.shape == (45,)
    assert set(both) == {-1.0, 1.0}
