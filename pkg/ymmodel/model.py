"""
Canonical lift, recentering automorphisms and the structure group over one noise sample.

Conventions:

- A field for the index β has fiber ``(dim V, dim W_β)``: column ``w`` is the V-valued coefficient of the
  monomial ``z^β_w``.
- A block ``(F)_β^γ`` is a ``(dim W_γ, dim W_β)`` matrix, so recentering reads Π_{xβ} = Σ_γ 𝚷_γ (F_x)_β^γ
  and block maps compose as matrices: Π_y = Π_x G_xy with G_xy = F_x⁻¹ F_y.
- The coupling g never multiplies a field; it is carried by β(g) and only enters in
  :func:`reconstruct_ansatz`.
"""

import orjson
import logging
import numpy as np
from pathlib import Path
from math import comb, factorial
from dataclasses import dataclass, replace
from collections import defaultdict

from ymmodel import defaults
from ymmodel.base import ModelBase
from ymmodel.helpers import sanitize_filename
from ymmodel.errors import GridError, IndexSetError, TriangularityError
from ymmodel.tensoralg import LieData, dim_space, nonlin_tensors, product_matrix, w_basis
from ymmodel.indexcalc import (
    DEFAULT_PARAMS,
    GradedValue,
    MultiIndex,
    decompositions,
    enumerate_populated,
    grade,
    membership,
    multi_indices_upto,
    parabolic_degree,
    population,
)
from ymmodel.fieldgrid import (
    GridField,
    KernelSpec,
    derivative_at,
    dump_field,
    fd_derivative,
    heat_kernel_operator,
    mollify,
    sample_white_noise,
    stack_fields,
    taylor_indices,
    taylor_subtract,
)


log = logging.getLogger(__name__)

# index sets beyond this grade need lift entries with [β] = −1 outside M
MAX_GRADE_BOUND = GradedValue(3)

SPATIAL_UNITS = ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))

_A, _B = nonlin_tensors()
_A_ENTRIES = [(i, j, k, l, float(_A[i, j, k, l])) for i, j, k, l in zip(*np.nonzero(_A))]
_B_ENTRIES = [(i, j, k, l, float(_B[i, j, k, l])) for i, j, k, l in zip(*np.nonzero(_B))]


def multi_binomial(m, n):
    result = 1
    for mi, ni in zip(m, n):
        if ni > mi:
            return 0
        result *= comb(mi, ni)
    return result


def multi_factorial(n):
    result = 1
    for ni in n:
        result *= factorial(ni)
    return result


def monomial_value(point, m):
    return float(np.prod([float(p) ** k for p, k in zip(point, m)]))


@dataclass(frozen=True)
class RenormConstants:
    """
    c = Σ_{k=1}^4 c_k g^k, with the provenance of the values.
    """

    c: tuple = (0.0, 0.0, 0.0, 0.0)
    provenance: str = "zero"
    scale: float = None
    nsamples: int = None
    seed: int = None

    def __post_init__(self):
        c = tuple(float(_) for _ in self.c)
        if len(c) != 4:
            raise ValueError(f"expected four renormalization constants, got {len(c)}")
        object.__setattr__(self, "c", c)

    @classmethod
    def zero(cls):
        return cls()

    def value(self, k):
        return self.c[k - 1]

    def with_value(self, k, value):
        c = list(self.c)
        c[k - 1] = float(value)
        return replace(self, c=tuple(c))

    def json(self):
        j = {"c": list(self.c), "provenance": self.provenance}
        if self.provenance != "zero":
            j.update({"scale": self.scale, "nsamples": self.nsamples, "seed": self.seed})
        return j

    @classmethod
    def from_json(cls, data):
        return cls(
            tuple(data["c"]),
            provenance=data.get("provenance", "file"),
            scale=data.get("scale", data.get("lambda_bar")),
            nsamples=data.get("nsamples"),
            seed=data.get("seed"),
        )


def _as_hom(field, dim_v):
    if field.fiber_shape == (dim_v,):
        return field.map(lambda a: a[..., None], (dim_v, 1)), True
    if len(field.fiber_shape) != 2 or field.fiber_shape[0] != dim_v:
        raise GridError(f"expected a V or Hom(W, V) field with dim V = {dim_v}, got fiber {field.fiber_shape}")
    return field, False


def _split_v(array, dim_k, extra):
    # V label 3a + i -> (a, i)
    return array.reshape(array.shape[:4] + (dim_k, 3) + extra)


def _bracket(u, v, f):
    return np.einsum("...ap,...bq,abc->...cpq", u, v, f)


def nonlinearity_eval(kind, fields, lie):
    """
    Evaluate 𝒜(U, U') or ℬ(U, U', U'') without the coupling factor.

    𝒜(U, U')_l = A^{ijk}_l [U_j, ∂_i U'_k] and ℬ(U, U', U'')_l = B^{ijk}_l [U_j, [U'_k, U''_i]], with the
    stencil derivatives. Inputs are V fields, or Hom(W, V) fields whose W axes end up flattened in input
    order in the result.
    """
    dim_v, dim_k, f = lie.dim_v, lie.dim_k, lie.f
    fields = list(fields)
    expected = {"A": 2, "B": 3}.get(kind)
    if expected is None:
        raise ValueError(f"unknown nonlinearity '{kind}'")
    if len(fields) != expected:
        raise ValueError(f"{kind} takes {expected} fields, got {len(fields)}")
    for other in fields[1:]:
        fields[0]._check_grid(other)
    promoted = [_as_hom(field, dim_v) for field in fields]
    was_vector = all(flag for _, flag in promoted)
    fields = [field for field, _ in promoted]
    widths = [field.fiber_shape[1] for field in fields]
    width = int(np.prod(widths))
    grid = fields[0].grid

    if lie.is_abelian:
        result = GridField.zeros(grid, (dim_v, width))
    elif kind == "A":
        u, u_prime = fields
        p, q = widths
        derivatives = stack_fields([fd_derivative(u_prime, unit) for unit in SPATIAL_UNITS])

        def quadratic(a, d):
            a = _split_v(a, dim_k, (p,))
            d = _split_v(d, dim_k, (q, 3))
            out = np.zeros(np.broadcast_shapes(a.shape[:4], d.shape[:4]) + (dim_k, 3, p, q))
            for i, j, k, l, value in _A_ENTRIES:
                out[..., :, l, :, :] += value * _bracket(a[..., :, j, :], d[..., :, k, :, i], f)
            return out.reshape(out.shape[:4] + (dim_v, p * q))

        result = GridField.bilinear(u, derivatives, quadratic, (dim_v, width))
    else:
        u, u_prime, u_second = fields
        p, q, r = widths

        def inner(b, c):
            b = _split_v(b, dim_k, (q,))
            c = _split_v(c, dim_k, (r,))
            return np.einsum("...akq,...bir,abc->...ckiqr", b, c, f)

        brackets = GridField.bilinear(u_prime, u_second, inner, (dim_k, 3, 3, q, r))

        def cubic(a, m):
            a = _split_v(a, dim_k, (p,))
            out = np.zeros(np.broadcast_shapes(a.shape[:4], m.shape[:4]) + (dim_k, 3, p, q, r))
            for i, j, k, l, value in _B_ENTRIES:
                term = np.einsum("...ap,...bqr,abc->...cpqr", a[..., :, j, :], m[..., :, k, i, :, :], f)
                out[..., :, l, :, :, :] += value * term
            return out.reshape(out.shape[:4] + (dim_v, p * q * r))

        result = GridField.bilinear(u, brackets, cubic, (dim_v, width))

    if was_vector:
        return result.map(lambda a: a[..., 0], (dim_v,))
    return result


def _contract_pair(field, beta1, beta2, dim_v):
    return field.matmul(product_matrix(beta1, beta2, dim_v).T)


def _contract_triple(field, beta1, beta2, beta3, dim_v):
    first = product_matrix(beta1, beta2, dim_v)
    second = product_matrix(beta1 + beta2, beta3, dim_v)
    width = dim_space(beta3, dim_v)

    def contract(a):
        a = a.reshape(a.shape[:-1] + (first.shape[1], width))
        a = np.einsum("...xr,wx->...wr", a, first)
        return a.reshape(a.shape[:-2] + (-1,)) @ second.T

    return field.map(contract, (dim_v, second.shape[0]))


def minus_from_pieces(beta, piece, constants, lie, grid):
    """
    Right-hand side for β ≠ 0: Σ 𝒜(Φ_{β₁}, Φ_{β₂}) + Σ ℬ(Φ_{β₁}, Φ_{β₂}, Φ_{β₃}) + Σ c_k Φ_{β₁}.

    ``piece(γ)`` returns the field of a lower index, or None where it vanishes.
    """
    dim_v = lie.dim_v
    total = GridField.zeros(grid, (dim_v, dim_space(beta, dim_v)))
    for beta1, beta2 in decompositions(beta, "pair"):
        u, v = piece(beta1), piece(beta2)
        if u is None or v is None:
            continue
        total = total + _contract_pair(nonlinearity_eval("A", (u, v), lie), beta1, beta2, dim_v)
    for beta1, beta2, beta3 in decompositions(beta, "triple"):
        u, v, w = piece(beta1), piece(beta2), piece(beta3)
        if u is None or v is None or w is None:
            continue
        total = total + _contract_triple(nonlinearity_eval("B", (u, v, w), lie), beta1, beta2, beta3, dim_v)
    for k, beta1 in decompositions(beta, "counterterm"):
        ck = constants.value(k)
        u = piece(beta1)
        if ck and u is not None:
            total = total + u * ck
    return total


def dependency_closure(indices, available=None, params=DEFAULT_PARAMS):
    """
    Smallest set containing ``indices`` and closed under the decompositions of the right-hand side.

    Raises:
        IndexSetError: if an index (or one of its pieces) lies outside ``available``.

    Returns:
        list[MultiIndex]: sorted by (grade, canonical order).
    """
    if available is not None:
        available = set(available)
    seen = set()
    stack = list(indices)
    while stack:
        beta = stack.pop()
        if beta in seen:
            continue
        if available is not None and beta not in available:
            raise IndexSetError(f"{beta} is outside the enumerated index set")
        seen.add(beta)
        for pattern in ("pair", "triple", "counterterm"):
            for pieces in decompositions(beta, pattern):
                stack.extend(p for p in pieces if isinstance(p, MultiIndex))
    return sorted(seen, key=lambda b: (grade(b, "plain", params), b.sort_key()))


def polynomial_identity(grid, beta, dim_v, center=(0, 0, 0, 0)):
    """
    (Y − x)^n·Id for β = δ_n.
    """
    (n,) = beta.slots
    return GridField.monomial(grid, n, np.eye(dim_v), center=center)


def noise_as_lift(noise, dim_v):
    return noise.map(lambda a: a[..., None], (dim_v, 1))


class CanonicalLift:
    """
    The base-point free fields 𝚷_β⁻ and 𝚷_β = 𝒦𝚷_β⁻, built lazily on dependency closures.
    """

    def __init__(self, noise_rho, constants, lie, kernel, indices, params=DEFAULT_PARAMS):
        self.grid = noise_rho.grid
        self.noise_rho = noise_rho
        self.constants = constants
        self.lie = lie
        self.kernel = kernel
        self.indices = tuple(indices)
        self.params = params
        self._minus = {}
        self._lift = {}

    @property
    def built(self):
        return tuple(self._lift)

    def ensure(self, beta):
        if beta.is_polynomial or beta in self._lift:
            return
        for piece in dependency_closure([beta], self.indices, self.params):
            if not piece.is_polynomial and piece not in self._lift:
                self._build(piece)

    def _piece(self, gamma):
        field = self.lift(gamma)
        return field if field.terms else None

    def _build(self, beta):
        dim_v = self.lie.dim_v
        if beta.is_zero:
            minus = noise_as_lift(self.noise_rho, dim_v)
        elif population(beta) < -1:
            minus = GridField.zeros(self.grid, (dim_v, dim_space(beta, dim_v)))
        else:
            minus = minus_from_pieces(beta, self._piece, self.constants, self.lie, self.grid)
        self._minus[beta] = minus
        self._lift[beta] = self.kernel(minus)

    def minus(self, beta):
        if beta.is_polynomial:
            return GridField.zeros(self.grid, (self.lie.dim_v, self.lie.dim_v))
        self.ensure(beta)
        return self._minus[beta]

    def lift(self, beta):
        if beta.is_polynomial:
            return polynomial_identity(self.grid, beta, self.lie.dim_v)
        self.ensure(beta)
        return self._lift[beta]


def build_canonical_lift(noise_rho, constants, indices, lie, spec=KernelSpec(), params=DEFAULT_PARAMS):
    """
    Build 𝚷⁻ and 𝚷 for every index in ``indices`` (in grade order).
    """
    lift = CanonicalLift(noise_rho, constants, lie, heat_kernel_operator(noise_rho.grid, spec), indices, params)
    for beta in indices:
        lift.ensure(beta)
    return lift


class BlockMap:
    """
    A homogeneity-indexed block matrix {(F)_β^γ : W_β → W_γ}; only nonzero blocks are stored.
    """

    def __init__(self, indices, blocks, dim_v, params=DEFAULT_PARAMS):
        self.indices = tuple(indices)
        self.dim_v = dim_v
        self.params = params
        self.blocks = {key: np.asarray(block, dtype=float) for key, block in blocks.items() if np.any(block)}
        self.grades = {beta: grade(beta, "plain", params) for beta in self.indices}

    def dim(self, beta):
        return dim_space(beta, self.dim_v)

    def block(self, gamma, beta):
        try:
            return self.blocks[(gamma, beta)]
        except KeyError:
            return np.zeros((self.dim(gamma), self.dim(beta)))

    @classmethod
    def identity(cls, indices, dim_v, params=DEFAULT_PARAMS):
        return cls(indices, {(b, b): np.eye(dim_space(b, dim_v)) for b in indices}, dim_v, params)

    def _compatible(self, other):
        if self.indices != other.indices or self.dim_v != other.dim_v:
            raise IndexSetError("block maps live on different index sets")

    def __matmul__(self, other):
        self._compatible(other)
        by_source = defaultdict(list)
        for (eta, beta), block in other.blocks.items():
            by_source[eta].append((beta, block))
        result = {}
        for (gamma, eta), left in self.blocks.items():
            for beta, right in by_source.get(eta, ()):
                key = (gamma, beta)
                value = left @ right
                result[key] = result[key] + value if key in result else value
        return BlockMap(self.indices, result, self.dim_v, self.params)

    def __add__(self, other):
        self._compatible(other)
        result = dict(self.blocks)
        for key, block in other.blocks.items():
            result[key] = result[key] + block if key in result else block
        return BlockMap(self.indices, result, self.dim_v, self.params)

    def __neg__(self):
        return BlockMap(self.indices, {k: -v for k, v in self.blocks.items()}, self.dim_v, self.params)

    def __sub__(self, other):
        return self + (-other)

    def check_unipotent(self, tolerance=1e-12):
        """
        Raises:
            TriangularityError: if a diagonal block is not the identity or an off-diagonal block points up
                in grade.
        """
        for beta in self.indices:
            if np.max(np.abs(self.block(beta, beta) - np.eye(self.dim(beta)))) > tolerance:
                raise TriangularityError(f"diagonal block at {beta} is not the identity")
        for gamma, beta in self.blocks:
            if gamma != beta and not self.grades[gamma] < self.grades[beta]:
                raise TriangularityError(f"block ({gamma}, {beta}) violates the grade order")

    def inverse(self):
        """
        F⁻¹ = Σ_n (Id − F)^n; the sum is finite because Id − F is strictly triangular in grade.
        """
        self.check_unipotent()
        nilpotent = BlockMap(
            self.indices, {k: -v for k, v in self.blocks.items() if k[0] != k[1]}, self.dim_v, self.params
        )
        result = BlockMap.identity(self.indices, self.dim_v, self.params)
        term = result
        for _ in range(len(self.indices) + 1):
            term = term @ nilpotent
            if not term.blocks:
                return result
            result = result + term
        raise TriangularityError("Neumann series did not terminate")

    def max_difference(self, other):
        self._compatible(other)
        keys = set(self.blocks) | set(other.blocks)
        if not keys:
            return 0.0
        return max(float(np.max(np.abs(self.block(*k) - other.block(*k)))) for k in keys)

    def json(self):
        return {
            "indices": [str(b) for b in self.indices],
            "blocks": [
                {"gamma": str(gamma), "beta": str(beta), "matrix": block.tolist()}
                for (gamma, beta), block in sorted(
                    self.blocks.items(), key=lambda kv: (self.grades[kv[0][1]], self.grades[kv[0][0]])
                )
            ],
        }


def invert_triangular(block_map):
    return block_map.inverse()


class BlockAssembler:
    """
    Extends polynomial rows {(F)_β^{δ_n}} multiplicatively to every block, with F*z_g = z_g.

    ``rows[n][β]`` is the ``(dim V, dim W_β)`` matrix whose row ``a`` holds the coefficients of F*z^a_n in
    the monomials of type β.
    """

    def __init__(self, rows, dim_v):
        self.rows = rows
        self.dim_v = dim_v
        self._cache = {}

    def entry(self, poly, target):
        """
        Coefficients of F* applied to the monomials of the purely polynomial ``poly`` in the monomials of
        type ``target``, shape ``(dim W_poly, dim W_target)``.
        """
        key = (poly, target)
        if key in self._cache:
            return self._cache[key]
        width = dim_space(target, self.dim_v)
        if poly.is_zero:
            result = np.ones((1, 1)) if target.is_zero else np.zeros((1, width))
        else:
            n = poly.slots[-1]
            rest = poly - MultiIndex.delta(n)
            basis = w_basis(poly, self.dim_v)
            rest_basis = w_basis(rest, self.dim_v)
            rest_rows = []
            labels = []
            for element in basis.elements:
                last = element[-1]
                reduced = element[:-1] + ((last[:-1],) if len(last) > 1 else ())
                rest_rows.append(rest_basis.index(reduced))
                labels.append(last[-1])
            result = np.zeros((basis.dim, width))
            for piece, row in self.rows.get(n, {}).items():
                if not target.contains(piece):
                    continue
                remainder = target - piece
                left = self.entry(rest, remainder)
                if not np.any(left):
                    continue
                outer = np.einsum("ui,uj->uij", left[rest_rows], row[labels]).reshape(basis.dim, -1)
                result += outer @ product_matrix(remainder, piece, self.dim_v).T
        self._cache[key] = result
        return result

    def block(self, gamma, beta):
        if gamma.is_polynomial:
            (n,) = gamma.slots
            return self.rows.get(n, {}).get(beta)
        if beta.g_count < gamma.g_count:
            return None
        result = self.entry(gamma.poly_part, beta - MultiIndex.g(gamma.g_count))
        return result if np.any(result) else None


def polynomial_rows(slots, shift, dim_v):
    """
    Rows of the substitution z_n ↦ Σ_m C(m, n) h^{m−n} z_m restricted to the given slots.
    """
    rows = defaultdict(dict)
    eye = np.eye(dim_v)
    for m in slots:
        for n in slots:
            binomial = multi_binomial(m, n)
            if not binomial:
                continue
            coef = binomial * monomial_value(shift, tuple(a - b for a, b in zip(m, n)))
            if coef:
                rows[n][MultiIndex.delta(m)] = coef * eye
    return rows


def poly_substitution_block(gamma, beta, h, dim_v):
    """
    Block (γ, β) of the pure polynomial substitution z_n ↦ Σ_m C(m, n) h^{m−n} z_m for a physical shift h.
    """
    degree = max((parabolic_degree(n) for n in beta.slots + gamma.slots), default=0)
    rows = polynomial_rows(multi_indices_upto(degree), h, dim_v)
    block = BlockAssembler(rows, dim_v).block(gamma, beta)
    if block is None:
        return np.zeros((dim_space(gamma, dim_v), dim_space(beta, dim_v)))
    return block


def assemble_from_generators(indices, rows, dim_v, params=DEFAULT_PARAMS):
    """
    Rebuild a full block map from its polynomial rows.
    """
    assembler = BlockAssembler(rows, dim_v)
    blocks = {}
    for beta in indices:
        for gamma in indices:
            block = assembler.block(gamma, beta)
            if block is not None:
                blocks[(gamma, beta)] = block
    return BlockMap(indices, blocks, dim_v, params)


def polynomial_rows_of(block_map):
    rows = defaultdict(dict)
    for (gamma, beta), block in block_map.blocks.items():
        if gamma.is_polynomial:
            rows[gamma.slots[0]][beta] = block
    return rows


def build_recenter_map(x, instance):
    """
    F_x by induction on the grade: multiplicative blocks from lower rows, then Π⁻_{xβ}, then the
    polynomial rows of β from the stencil derivatives of 𝒦Π⁻_{xβ} at x.
    """
    grid = instance.grid
    dim_v = instance.dim_v
    params = instance.params
    point = grid.physical(x)
    indices = instance.indices
    lift = instance.lift

    slots = [beta.slots[0] for beta in indices if beta.is_polynomial]
    rows = polynomial_rows(slots, -point, dim_v)
    assembler = BlockAssembler(rows, dim_v)
    non_polynomial = [beta for beta in indices if not beta.is_polynomial]
    blocks = {}
    for beta in indices:
        if beta.is_polynomial:
            for n in slots:
                if beta in rows[n]:
                    blocks[(MultiIndex.delta(n), beta)] = rows[n][beta]
            continue
        for gamma in non_polynomial:
            block = assembler.block(gamma, beta)
            if block is not None:
                blocks[(gamma, beta)] = block
        level = grade(beta, "plain", params)
        if not membership(beta).in_Mgeq0 or not level > 0:
            continue
        minus = GridField.zeros(grid, (dim_v, dim_space(beta, dim_v)))
        for gamma in non_polynomial:
            if (gamma, beta) in blocks:
                minus = minus + lift.minus(gamma).matmul(blocks[(gamma, beta)])
        integrated = lift.kernel(minus)
        for n in taylor_indices(level):
            row = np.zeros((dim_v, dim_space(beta, dim_v)))
            for m in taylor_indices(level - parabolic_degree(n)):
                weight = monomial_value(-point, m) / multi_factorial(m)
                if weight:
                    row = row + weight * derivative_at(integrated, tuple(a + b for a, b in zip(n, m)), x)
            row = -row / multi_factorial(n)
            if np.any(row):
                rows[n][beta] = row
                blocks[(MultiIndex.delta(n), beta)] = row
    instance.log.debug(f"built F_{tuple(x)} with {len(blocks)} nonzero blocks")
    return BlockMap(indices, blocks, dim_v, params)


def recentered_fields(x, instance, beta):
    """
    Π_{xβ} = Σ_γ 𝚷_γ (F_x)_β^γ and Π⁻_{xβ} = Σ_γ 𝚷⁻_γ (F_x)_β^γ.
    """
    if beta not in instance.index_set:
        raise IndexSetError(f"{beta} is outside the enumerated index set")
    recenter = instance.recenter_map(x)
    fiber = (instance.dim_v, dim_space(beta, instance.dim_v))
    pi = GridField.zeros(instance.grid, fiber)
    minus = GridField.zeros(instance.grid, fiber)
    for gamma in instance.indices:
        block = recenter.blocks.get((gamma, beta))
        if block is None:
            continue
        pi = pi + instance.lift.lift(gamma).matmul(block)
        if not gamma.is_polynomial:
            minus = minus + instance.lift.minus(gamma).matmul(block)
    return pi, minus


def direct_recentered_fields(x, noise_rho, constants, indices, lie, spec=KernelSpec(), params=DEFAULT_PARAMS):
    """
    Π_{xβ} and Π⁻_{xβ} straight from the recursion: Π⁻ from the lower recentered fields, then Taylor
    subtraction of 𝒦Π⁻ at x up to the grade.

    Returns:
        dict: β ↦ (Π_{xβ}, Π⁻_{xβ}) on the dependency closure of ``indices``.
    """
    grid = noise_rho.grid
    dim_v = lie.dim_v
    kernel = heat_kernel_operator(grid, spec)
    fields = {}

    def piece(gamma):
        field = fields[gamma][0]
        return field if field.terms else None

    for beta in dependency_closure(indices, params=params):
        fiber = (dim_v, dim_space(beta, dim_v))
        if beta.is_polynomial:
            fields[beta] = (polynomial_identity(grid, beta, dim_v, center=x), GridField.zeros(grid, fiber))
            continue
        if beta.is_zero:
            minus = noise_as_lift(noise_rho, dim_v)
        else:
            minus = minus_from_pieces(beta, piece, constants, lie, grid)
        if population(beta) < 0:
            pi = GridField.zeros(grid, fiber)
        else:
            pi = taylor_subtract(kernel(minus), x, grade(beta, "plain", params))
        fields[beta] = (pi, minus)
    return fields


def structure_group(x, y, instance):
    """
    G_xy = F_x⁻¹ F_y.
    """
    return instance.recenter_map(x).inverse() @ instance.recenter_map(y)


def translate_noise(noise, h):
    return noise.shift(h)


def reconstruct_ansatz(v, g, instance):
    """
    A = v + Π_0 + g·Π_{δg}; both recentered maps coincide with their lifts when evaluated at the base point.
    """
    dim_v = instance.dim_v
    squeeze = lambda field: field.map(lambda a: a[..., 0], (dim_v,))  # noqa: E731
    ansatz = v + squeeze(instance.lift.lift(MultiIndex.zero()))
    if g:
        ansatz = ansatz + squeeze(instance.lift.lift(MultiIndex.g(1))) * g
    return ansatz


class ModelInstance(ModelBase):
    """
    One noise sample with its canonical lift, renormalization constants and recentering maps.

    Lifts and F_x are built on first use and cached.
    """

    def __init__(
        self,
        grid,
        seed=defaults.seed,
        rho=defaults.rho,
        lie=None,
        spec=None,
        constants=None,
        bound=defaults.grade_bound,
        params=DEFAULT_PARAMS,
        base_points=None,
        noise=None,
    ):
        super().__init__()
        self.grid = grid
        self.seed = seed
        self.rho = float(rho)
        self.lie = lie if lie is not None else LieData.su2()
        self.spec = spec if spec is not None else KernelSpec()
        self.constants = constants if constants is not None else RenormConstants.zero()
        self.params = params
        self.bound = GradedValue.coerce(bound)
        if self.bound > MAX_GRADE_BOUND:
            raise IndexSetError(f"grade bound {self.bound} exceeds the supported maximum {MAX_GRADE_BOUND}")
        if base_points is None:
            base_points = defaults.base_points
        self.base_points = [tuple(int(_) for _ in p) for p in base_points]
        self.indices = tuple(enumerate_populated(self.bound, "plain", params, "M"))
        self.index_set = frozenset(self.indices)
        if noise is None:
            noise = sample_white_noise(grid, seed, self.dim_v)
        if noise.fiber_shape != (self.dim_v,) or noise.grid != grid:
            raise GridError(f"noise must be a V field on {grid}, got fiber {noise.fiber_shape} on {noise.grid}")
        self.noise = noise
        self.noise_rho = mollify(noise, self.rho)
        self.kernel = heat_kernel_operator(grid, self.spec)
        self.lift = CanonicalLift(self.noise_rho, self.constants, self.lie, self.kernel, self.indices, params)
        self._recenter = {}

    @property
    def dim_v(self):
        return self.lie.dim_v

    def with_noise(self, noise, **overrides):
        kwargs = {
            "grid": self.grid,
            "seed": self.seed,
            "rho": self.rho,
            "lie": self.lie,
            "spec": self.spec,
            "constants": self.constants,
            "bound": self.bound,
            "params": self.params,
            "base_points": self.base_points,
            "noise": noise,
        }
        kwargs.update(overrides)
        return ModelInstance(**kwargs)

    def recenter_map(self, x):
        x = tuple(int(_) for _ in x)
        if x not in self._recenter:
            self._recenter[x] = build_recenter_map(x, self)
        return self._recenter[x]

    def recentered(self, x, beta):
        return recentered_fields(x, self, beta)

    def direct(self, x, indices=None):
        if indices is None:
            indices = self.indices
        for beta in indices:
            if beta not in self.index_set:
                raise IndexSetError(f"{beta} is outside the enumerated index set")
        return direct_recentered_fields(x, self.noise_rho, self.constants, indices, self.lie, self.spec, self.params)

    def structure_group(self, x, y):
        return structure_group(x, y, self)

    def manifest(self, field_files=None):
        return {
            "seed": self.seed,
            "rho": self.rho,
            "grid": self.grid.json(),
            "kernel": self.spec.json(),
            "lie": self.lie.json(),
            "constants": self.constants.json(),
            "bound": self.bound.json(),
            "indices": [{"beta": str(b), "grade": grade(b, "plain", self.params).json()} for b in self.indices],
            "base_points": [list(p) for p in self.base_points],
            "fields": field_files or {},
        }

    def dump(self, out_dir):
        """
        Write every built lift field in the binary field format plus ``manifest.json``.
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        field_files = {}
        for beta in self.lift.built:
            position = self.indices.index(beta)
            filename = f"lift_{position:02d}_{sanitize_filename(str(beta))}.bin"
            dump_field(self.lift.lift(beta), out_dir / filename)
            field_files[str(beta)] = filename
        manifest_path = out_dir / "manifest.json"
        with open(manifest_path, "wb") as f:
            f.write(orjson.dumps(self.manifest(field_files), option=orjson.OPT_INDENT_2))
        self.log.info(f"wrote {len(field_files)} fields to {out_dir}")
        return manifest_path

    def __repr__(self):
        return f"ModelInstance(seed={self.seed}, rho={self.rho}, grid={self.grid}, lie={self.lie.name})"
