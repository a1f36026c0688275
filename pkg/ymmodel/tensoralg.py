import logging
import itertools
import numpy as np
from math import comb
from functools import lru_cache
from dataclasses import dataclass

from ymmodel.errors import LieAlgebraError
from ymmodel.indexcalc import MultiIndex


log = logging.getLogger(__name__)

SPATIAL_DIM = 3


class LieData:
    """
    Structure constants of 𝔨 in a basis orthonormal for minus the (normalized) Killing form.

    ``f[a, b, c]`` is the coefficient of e_c in [e_a, e_b]. V = 𝔨 ⊗ ℝ³ is laid out with the label
    ``3·a + i`` for Lie index a and spatial index i.
    """

    def __init__(self, structure_constants, name="custom", check=True):
        f = np.array(structure_constants, dtype=float)
        if f.ndim != 3 or len(set(f.shape)) != 1:
            raise LieAlgebraError(f"structure constants must have shape (k, k, k), got {f.shape}")
        f.setflags(write=False)
        self.f = f
        self.name = name
        if check:
            self.validate()

    @classmethod
    def su2(cls):
        f = np.zeros((3, 3, 3))
        for a, b, c in itertools.permutations(range(3)):
            # sign of the permutation (a, b, c)
            f[a, b, c] = np.linalg.det(np.eye(3)[[a, b, c]])
        return cls(np.round(f), name="su2")

    @classmethod
    def abelian(cls, dim_k=3):
        return cls(np.zeros((dim_k, dim_k, dim_k)), name="abelian")

    @classmethod
    def from_triples(cls, dim_k, triples, name="custom"):
        """
        Build from ``(a, b, c, value)`` entries meaning f_abc = value; f_bac = −value is implied.
        """
        f = np.zeros((dim_k, dim_k, dim_k))
        for a, b, c, value in triples:
            if not all(0 <= _ < dim_k for _ in (a, b, c)):
                raise LieAlgebraError(f"structure constant index out of range: {(a, b, c)}")
            f[a, b, c] = value
            f[b, a, c] = -value
        return cls(f, name=name)

    def opposite(self):
        """
        The opposite algebra [a, b]' = [b, a]; the map a ↦ −a identifies it with the original one.
        """
        name = self.name[:-9] if self.name.endswith("-opposite") else f"{self.name}-opposite"
        return LieData(-self.f, name=name, check=False)

    @property
    def dim_k(self):
        return self.f.shape[0]

    @property
    def dim_v(self):
        return SPATIAL_DIM * self.dim_k

    @property
    def is_abelian(self):
        return not np.any(self.f)

    def jacobi_residual(self):
        f = self.f
        cyclic = (
            np.einsum("abd,dce->abce", f, f) + np.einsum("bcd,dae->abce", f, f) + np.einsum("cad,dbe->abce", f, f)
        )
        return float(np.max(np.abs(cyclic))) if cyclic.size else 0.0

    def validate(self, tolerance=1e-12):
        asym = float(np.max(np.abs(self.f + self.f.transpose(1, 0, 2)))) if self.f.size else 0.0
        if asym > tolerance:
            raise LieAlgebraError(f"structure constants of {self.name} are not antisymmetric (residual {asym:.3e})")
        jacobi = self.jacobi_residual()
        if jacobi > tolerance:
            raise LieAlgebraError(f"Jacobi identity fails for {self.name} (residual {jacobi:.3e})")

    def bracket(self, a, b):
        return np.einsum("...a,...b,abc->...c", a, b, self.f)

    def json(self):
        nonzero = np.argwhere(self.f)
        triples = [[int(a), int(b), int(c), float(self.f[a, b, c])] for a, b, c in nonzero if a < b]
        return {"name": self.name, "dim_k": self.dim_k, "structure_constants": triples}

    def __repr__(self):
        return f"LieData({self.name}, dim_k={self.dim_k})"


def lie_bracket(a, b, lie):
    """
    Bracket of 𝔨-valued arrays (Lie index on the last axis); the coupling factor is applied by the caller.
    """
    return lie.bracket(a, b)


def nonlin_tensors():
    """
    Coefficient tensors of the quadratic and cubic nonlinearity, indexed ``[i, j, k, l]``.

    Returns:
        tuple[np.ndarray, np.ndarray]: A^{ijk}_l = 2δ_ij δ_kl − δ_il δ_jk and B^{ijk}_l = δ_il δ_jk.
    """
    eye = np.eye(SPATIAL_DIM)
    A = 2 * np.einsum("ij,kl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye)
    B = np.einsum("il,jk->ijkl", eye, eye)
    return A, B


def dim_space(beta, dim_v):
    result = 1
    for _, count in beta.poly:
        result *= comb(dim_v + count - 1, count)
    return result


@dataclass(frozen=True, eq=False)
class WBasis:
    """
    Monomial basis of W_β: one multiset of V-labels per polynomial slot, slots in canonical order.
    """

    beta: MultiIndex
    dim_v: int
    elements: tuple
    lookup: dict

    @property
    def dim(self):
        return len(self.elements)

    @property
    def slots(self):
        return self.beta.slots

    def index(self, element):
        return self.lookup[element]


@lru_cache(maxsize=None)
def _w_basis(poly_part, dim_v):
    per_slot = [tuple(itertools.combinations_with_replacement(range(dim_v), count)) for _, count in poly_part.poly]
    elements = tuple(itertools.product(*per_slot))
    return WBasis(poly_part, dim_v, elements, {e: i for i, e in enumerate(elements)})


def w_basis(beta, dim_v):
    return _w_basis(beta.poly_part, dim_v)


@dataclass(frozen=True, eq=False)
class BlockLinear:
    source: tuple
    target: MultiIndex
    matrix: np.ndarray


@lru_cache(maxsize=None)
def _product_matrix(beta_poly, gamma_poly, dim_v):
    left = _w_basis(beta_poly, dim_v)
    right = _w_basis(gamma_poly, dim_v)
    target = _w_basis(beta_poly + gamma_poly, dim_v)
    left_pos = {n: i for i, n in enumerate(left.slots)}
    right_pos = {n: i for i, n in enumerate(right.slots)}
    matrix = np.zeros((target.dim, left.dim * right.dim))
    for u_idx, u in enumerate(left.elements):
        for v_idx, v in enumerate(right.elements):
            merged = []
            for n in target.slots:
                labels = ()
                if n in left_pos:
                    labels += u[left_pos[n]]
                if n in right_pos:
                    labels += v[right_pos[n]]
                merged.append(tuple(sorted(labels)))
            matrix[target.index(tuple(merged)), u_idx * right.dim + v_idx] = 1.0
    matrix.setflags(write=False)
    return matrix


def product_matrix(beta, gamma, dim_v):
    return _product_matrix(beta.poly_part, gamma.poly_part, dim_v)


def product_iso(beta, gamma, dim_v):
    """
    The multiplication W_β ⊗ W_γ → W_{β+γ} of monomials, with unit coefficients.

    Monomials are multisets of labels without normalization factors, so the multinomial weights show up
    when summing over tensor orderings: e_a ⊗ e_b + e_b ⊗ e_a ↦ 2·z_a z_b. The map is onto; it is one-to-one
    exactly when β and γ share no polynomial slot.
    """
    return BlockLinear((beta, gamma), beta + gamma, product_matrix(beta, gamma, dim_v))


def v_reflection_signs(axis, dim_k):
    """
    Sign of each V-label under the reflection of spatial coordinate ``axis`` (1, 2 or 3).
    """
    signs = np.ones(SPATIAL_DIM * dim_k)
    signs[axis - 1 :: SPATIAL_DIM] = -1.0
    return signs


def reflection_signs(beta, axis, dim_v):
    """
    Diagonal of the reflection action on W_β: each factor z^a_n picks up (−1)^{n_axis} times the sign of a.
    """
    basis = w_basis(beta, dim_v)
    label_signs = v_reflection_signs(axis, dim_v // SPATIAL_DIM)
    signs = np.ones(basis.dim)
    for idx, element in enumerate(basis.elements):
        sign = 1.0
        for n, labels in zip(basis.slots, element):
            for label in labels:
                sign *= (-1.0) ** n[axis] * label_signs[label]
        signs[idx] = sign
    return signs
