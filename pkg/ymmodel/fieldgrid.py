"""
Fields on a periodic parabolic lattice.

A :class:`GridField` is a finite sum Σ_k Y^k f_k(y): periodic coefficient arrays f_k on the torus times
monomials Y^k in the unwrapped physical coordinates of the lattice ℤ⁴. Periodic fields have the single
exponent k = 0; polynomial fields (the Π_{δ_n}, Taylor polynomials, kernel images of polynomials) keep
their exponents, so shifts, stencils, Taylor subtraction and convolution with the compactly supported
kernel are exact on the whole lattice, not only away from the torus wrap.

Coefficient arrays have shape ``grid.shape + fiber_shape`` or broadcast to it (size-1 grid axes for
coefficients constant in y).
"""

import struct
import logging
import numpy as np
from math import comb, factorial
from functools import lru_cache
from dataclasses import dataclass
from scipy.integrate import quad
from scipy.special import erf

from ymmodel import defaults
from ymmodel.bumps import cutoff_profile, normalized_bump
from ymmodel.errors import GridError, SupportError
from ymmodel.indexcalc import GradedValue, multi_indices_upto, parabolic_degree


log = logging.getLogger(__name__)

GRID_AXES = (0, 1, 2, 3)
ZERO = (0, 0, 0, 0)


@dataclass(frozen=True)
class ParabolicGrid:
    """
    Periodic lattice on [0, T) × [0, L)³ with Nt × Nx³ points and parabolic spacing ht = hx².
    """

    nt: int
    nx: int
    box_time: float
    box_length: float

    def __post_init__(self):
        if self.nt < 1 or self.nx < 1 or self.box_time <= 0 or self.box_length <= 0:
            raise GridError(f"invalid grid {self.nt}x{self.nx}^3 on T={self.box_time}, L={self.box_length}")
        if abs(self.ht - self.hx**2) > 1e-9 * self.hx**2:
            raise GridError(f"grid is not parabolic: ht={self.ht} but hx²={self.hx**2}")

    @classmethod
    def from_nx(cls, nx=defaults.grid_nx, box_length=defaults.box_length, box_time=defaults.box_time):
        hx = box_length / nx
        nt = int(round(box_time / hx**2))
        return cls(nt, nx, box_time, box_length)

    @property
    def ht(self):
        return self.box_time / self.nt

    @property
    def hx(self):
        return self.box_length / self.nx

    @property
    def vol(self):
        return self.ht * self.hx**3

    @property
    def sizes(self):
        return (self.nt, self.nx, self.nx, self.nx)

    shape = sizes

    @property
    def spacing(self):
        return np.array([self.ht, self.hx, self.hx, self.hx])

    @property
    def boxes(self):
        return (self.box_time, self.box_length, self.box_length, self.box_length)

    def wrap(self, point):
        return tuple(int(p) % n for p, n in zip(point, self.sizes))

    def minimal_image(self, offset):
        return tuple(((int(o) + n // 2) % n) - n // 2 for o, n in zip(offset, self.sizes))

    def physical(self, point):
        return np.asarray(point, dtype=float) * self.spacing

    def axis_shape(self, axis):
        shape = [1, 1, 1, 1]
        shape[axis] = self.sizes[axis]
        return tuple(shape)

    def axis_coordinates(self, axis):
        """
        Physical coordinates of the fundamental cell along ``axis``, shaped for broadcasting.
        """
        return (np.arange(self.sizes[axis]) * self.spacing[axis]).reshape(self.axis_shape(axis))

    def minimal_coordinates(self, axis):
        """
        Physical minimal-image offsets along ``axis``, shaped for broadcasting.
        """
        n = self.sizes[axis]
        index = (np.arange(n) + n // 2) % n - n // 2
        return (index * self.spacing[axis]).reshape(self.axis_shape(axis))

    def check_support(self, time_extent, space_extent, what="support"):
        if not (2 * time_extent < self.box_time and 2 * space_extent < self.box_length):
            raise SupportError(
                f"{what} (time {time_extent}, space {space_extent}) does not embed in the {self} torus"
            )

    def json(self):
        return {"nt": self.nt, "nx": self.nx, "T": self.box_time, "L": self.box_length}

    def __str__(self):
        return f"{self.nt}x{self.nx}^3"


def parabolic_norm(point, grid=None):
    """
    (t² + x₁⁴ + x₂⁴ + x₃⁴)^{1/4}. With a grid, ``point`` is a lattice offset taken at its minimal image.
    """
    if grid is not None:
        point = grid.physical(grid.minimal_image(point))
    t, x1, x2, x3 = (float(_) for _ in point)
    return (t**2 + x1**4 + x2**4 + x3**4) ** 0.25


def _as_exponent(k):
    k = tuple(int(_) for _ in k)
    if len(k) != 4 or any(_ < 0 for _ in k):
        raise ValueError(f"invalid exponent {k}")
    return k


def _binomial_expansion(a, center):
    """
    (Y − c)^a = Σ_{j ≤ a} C(a, j) (−c)^{a−j} Y^j, as a list of (j, coefficient).
    """
    ranges = [range(_ + 1) for _ in a]
    expansion = []
    for j in np.ndindex(*[len(r) for r in ranges]):
        coef = 1.0
        for ai, ji, ci in zip(a, j, center):
            coef *= comb(ai, ji) * (-ci) ** (ai - ji)
        if coef != 0:
            expansion.append((tuple(int(_) for _ in j), coef))
    return expansion


def _roll(array, offset):
    for axis, o in enumerate(offset):
        if o and array.shape[axis] > 1:
            array = np.roll(array, int(o), axis=axis)
    return array


class GridField:
    """
    A fiber-valued field Σ_k Y^k f_k(y) on a :class:`ParabolicGrid`.
    """

    def __init__(self, grid, terms=None, fiber_shape=None):
        self.grid = grid
        terms = dict(terms or {})
        if fiber_shape is None:
            if not terms:
                raise GridError("fiber shape is required for an empty field")
            first = np.asarray(next(iter(terms.values())))
            fiber_shape = first.shape[4:]
        self.fiber_shape = tuple(fiber_shape)
        self.terms = {}
        for k, array in terms.items():
            array = np.asarray(array, dtype=float)
            if array.ndim != 4 + len(self.fiber_shape):
                array = array.reshape((1, 1, 1, 1) + self.fiber_shape)
            if array.shape[4:] != self.fiber_shape:
                raise GridError(f"coefficient fiber {array.shape[4:]} does not match {self.fiber_shape}")
            if any(s not in (1, n) for s, n in zip(array.shape[:4], grid.sizes)):
                raise GridError(f"coefficient shape {array.shape[:4]} does not fit grid {grid}")
            k = _as_exponent(k)
            self.terms[k] = self.terms[k] + array if k in self.terms else array

    @classmethod
    def zeros(cls, grid, fiber_shape=()):
        return cls(grid, {}, fiber_shape)

    @classmethod
    def from_values(cls, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape[:4] != grid.sizes:
            raise GridError(f"values of shape {values.shape} do not match grid {grid}")
        return cls(grid, {ZERO: values}, values.shape[4:])

    @classmethod
    def constant(cls, grid, value):
        value = np.asarray(value, dtype=float)
        return cls(grid, {ZERO: value.reshape((1, 1, 1, 1) + value.shape)}, value.shape)

    @classmethod
    def monomial(cls, grid, exponent, value=1.0, center=ZERO):
        """
        (Y − x)^n · value for a lattice point x.
        """
        value = np.asarray(value, dtype=float)
        shift = grid.physical(center)
        terms = {}
        for j, coef in _binomial_expansion(_as_exponent(exponent), shift):
            terms[j] = coef * value.reshape((1, 1, 1, 1) + value.shape)
        return cls(grid, terms, value.shape)

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise GridError(f"grid mismatch: {self.grid} vs {other.grid}")

    @property
    def is_periodic(self):
        return all(k == ZERO for k in self.terms)

    @property
    def exponents(self):
        return tuple(sorted(self.terms, key=lambda k: (parabolic_degree(k), k)))

    @property
    def values(self):
        """
        Dense values on the fundamental cell, shape ``grid.shape + fiber_shape``.
        """
        out = np.zeros(self.grid.sizes + self.fiber_shape)
        tail = (1,) * len(self.fiber_shape)
        for k, array in self.terms.items():
            monomial = np.ones((1, 1, 1, 1))
            for axis, power in enumerate(k):
                if power:
                    monomial = monomial * self.grid.axis_coordinates(axis) ** power
            out = out + monomial.reshape(monomial.shape + tail) * array
        return out

    def coefficient(self, k=ZERO):
        return self.terms.get(_as_exponent(k), np.zeros((1, 1, 1, 1) + self.fiber_shape))

    def copy(self):
        return GridField(self.grid, {k: a.copy() for k, a in self.terms.items()}, self.fiber_shape)

    def __add__(self, other):
        self._check_grid(other)
        if other.fiber_shape != self.fiber_shape:
            raise GridError(f"fiber mismatch: {self.fiber_shape} vs {other.fiber_shape}")
        terms = dict(self.terms)
        for k, array in other.terms.items():
            terms[k] = terms[k] + array if k in terms else array
        return GridField(self.grid, terms, self.fiber_shape)

    def __neg__(self):
        return GridField(self.grid, {k: -a for k, a in self.terms.items()}, self.fiber_shape)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, factor):
        return GridField(self.grid, {k: a * factor for k, a in self.terms.items()}, self.fiber_shape)

    __rmul__ = __mul__

    def map(self, fn, fiber_shape):
        """
        Apply a map acting on the fiber axes (linear in the coefficients) to every term.
        """
        return GridField(self.grid, {k: fn(a) for k, a in self.terms.items()}, fiber_shape)

    def matmul(self, matrix):
        """
        Contract the last fiber axis with ``matrix``: a Hom(W_γ, V) field times a W_β → W_γ block.
        """
        matrix = np.asarray(matrix, dtype=float)
        return self.map(lambda a: a @ matrix, self.fiber_shape[:-1] + (matrix.shape[1],))

    def scale_axis(self, factors, axis):
        """
        Multiply fiber axis ``axis`` elementwise by ``factors``.
        """
        factors = np.asarray(factors, dtype=float)
        shape = [1] * (4 + len(self.fiber_shape))
        shape[4 + axis] = len(factors)
        return self.map(lambda a: a * factors.reshape(shape), self.fiber_shape)

    @staticmethod
    def bilinear(left, right, fn, fiber_shape):
        """
        Pointwise product: (Y^a f)(Y^b g) = Y^{a+b} fn(f, g) with ``fn`` bilinear on fibers.
        """
        left._check_grid(right)
        terms = {}
        for ka, fa in left.terms.items():
            for kb, fb in right.terms.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                value = fn(fa, fb)
                terms[k] = terms[k] + value if k in terms else value
        return GridField(left.grid, terms, fiber_shape)

    def shift(self, offset):
        """
        Lattice translation: the field y ↦ f(y − h) for the integer offset h.
        """
        offset = tuple(int(_) for _ in offset)
        shift = self.grid.physical(offset)
        terms = {}
        for k, array in self.terms.items():
            rolled = _roll(array, offset)
            for j, coef in _binomial_expansion(k, shift):
                value = coef * rolled
                terms[j] = terms[j] + value if j in terms else value
        return GridField(self.grid, terms, self.fiber_shape)

    def reflect(self, axis):
        """
        The field y ↦ f(R_i y), where R_i flips the sign of spatial coordinate ``axis`` (1, 2 or 3).
        """
        if axis not in (1, 2, 3):
            raise ValueError(f"reflection axis must be 1, 2 or 3, got {axis}")
        terms = {}
        for k, array in self.terms.items():
            if array.shape[axis] > 1:
                array = np.roll(np.flip(array, axis=axis), 1, axis=axis)
            terms[k] = (-1.0) ** k[axis] * array
        return GridField(self.grid, terms, self.fiber_shape)

    def at_points(self, points):
        """
        Values at arbitrary lattice points (integer array ``(P, 4)``, unwrapped), shape ``(P,) + fiber``.
        """
        points = np.asarray(points, dtype=int).reshape(-1, 4)
        coords = points * self.grid.spacing
        out = np.zeros((len(points),) + self.fiber_shape)
        tail = (1,) * len(self.fiber_shape)
        for k, array in self.terms.items():
            index = tuple(
                points[:, axis] % n if array.shape[axis] > 1 else np.zeros(len(points), dtype=int)
                for axis, n in enumerate(self.grid.sizes)
            )
            monomial = np.prod(coords**np.asarray(k), axis=1)
            out = out + monomial.reshape((-1,) + tail) * array[index]
        return out

    def evaluate(self, point):
        return self.at_points([point])[0]

    def max_abs(self):
        return float(np.max(np.abs(self.values))) if self.terms else 0.0

    def __repr__(self):
        return f"GridField({self.grid}, fiber={self.fiber_shape}, exponents={list(self.exponents)})"


def stack_fields(fields):
    """
    Stack fields with equal fibers along a new last fiber axis; missing exponents are zero-padded.
    """
    fields = list(fields)
    first = fields[0]
    for other in fields[1:]:
        first._check_grid(other)
        if other.fiber_shape != first.fiber_shape:
            raise GridError(f"fiber mismatch: {first.fiber_shape} vs {other.fiber_shape}")
    zero = np.zeros((1, 1, 1, 1) + first.fiber_shape)
    exponents = {k for f in fields for k in f.terms}
    terms = {}
    for k in exponents:
        arrays = np.broadcast_arrays(*[f.terms.get(k, zero) for f in fields])
        terms[k] = np.stack(arrays, axis=-1)
    return GridField(first.grid, terms, first.fiber_shape + (len(fields),))


def sample_white_noise(grid, seed, dim_v=9):
    """
    Discrete white noise: iid N(0, 1/(ht·hx³)) per cell and orthonormal V-component.
    """
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(grid.sizes + (dim_v,)) / np.sqrt(grid.vol)
    return GridField.from_values(grid, values)


@dataclass(frozen=True)
class KernelSpec:
    """
    The massive heat kernel with cutoff ς (≡ 1 on B_{1/2}, supported in B_1).
    """

    mass: float = defaults.mass

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"kernel mass must be positive, got {self.mass}")

    @staticmethod
    def cutoff(t, x1, x2, x3):
        return cutoff_profile(t, x1, x2, x3)

    def json(self):
        return {"mass": self.mass}


def kernel_value(point, spec=KernelSpec()):
    """
    θ(t)(4πt)^{-3/2} exp(−|x̄|²/4t − m²t)·ς(x) at a physical point, 0 for t ≤ 0.
    """
    t, x1, x2, x3 = (float(_) for _ in point)
    if t <= 0:
        return 0.0
    heat = (4 * np.pi * t) ** -1.5 * np.exp(-(x1**2 + x2**2 + x3**2) / (4 * t) - spec.mass**2 * t)
    return float(heat * spec.cutoff(t, x1, x2, x3))


def origin_cell_average(grid, spec=KernelSpec()):
    """
    Average of the (uncut) kernel over the cell around the origin.
    """
    hx = grid.hx

    def integrand(t):
        return np.exp(-spec.mass**2 * t) * erf(hx / (4 * np.sqrt(t))) ** 3

    value, _ = quad(integrand, 0.0, grid.ht / 2, limit=200)
    return value / grid.vol


def _kernel_values(grid, spec):
    grid.check_support(1.0, 1.0, what="kernel cutoff")
    t = grid.minimal_coordinates(0)
    x1, x2, x3 = (grid.minimal_coordinates(axis) for axis in (1, 2, 3))
    positive = t > 0
    safe_t = np.where(positive, t, 1.0)
    heat = (4 * np.pi * safe_t) ** -1.5 * np.exp(-(x1**2 + x2**2 + x3**2) / (4 * safe_t) - spec.mass**2 * safe_t)
    values = np.where(positive, heat * spec.cutoff(t, x1, x2, x3), 0.0)
    values = np.broadcast_to(values, grid.sizes).copy()
    values[ZERO] = origin_cell_average(grid, spec)
    return values


def kernel_field(grid, spec=KernelSpec()):
    """
    The kernel on the lattice, stored at minimal-image offsets (a periodic scalar field).
    """
    return GridField.from_values(grid, _kernel_values(grid, spec))


class KernelOperator:
    """
    Convolution with a compactly supported kernel that embeds in the torus.

    On a term Y^a f the convolution is Σ_j C(a, j) Y^{a−j} (K_j ⊛ f) with the weighted kernels
    K_j(z) = K(z)(−z)^j; weighted kernels, their spectra and their moments are cached per exponent.
    """

    def __init__(self, kernel):
        if not kernel.is_periodic or kernel.fiber_shape:
            raise GridError("kernel must be a periodic scalar field")
        self.grid = kernel.grid
        self.kernel = kernel
        self.values = np.broadcast_to(kernel.coefficient(), self.grid.sizes)
        self._weighted = {}
        self._spectra = {}

    def weighted(self, j):
        j = _as_exponent(j)
        if j not in self._weighted:
            array = np.array(self.values, dtype=float)
            for axis, power in enumerate(j):
                if power:
                    array = array * (-self.grid.minimal_coordinates(axis)) ** power
            self._weighted[j] = array
        return self._weighted[j]

    def moment(self, j=ZERO):
        return float(self.weighted(j).sum() * self.grid.vol)

    def spectrum(self, j):
        j = _as_exponent(j)
        if j not in self._spectra:
            self._spectra[j] = np.fft.rfftn(self.weighted(j), axes=GRID_AXES)
        return self._spectra[j]

    def convolve_periodic(self, array, j=ZERO):
        if array.shape[:4] == (1, 1, 1, 1):
            return array * self.moment(j)
        array = np.broadcast_to(array, self.grid.sizes + array.shape[4:])
        spectrum = self.spectrum(j)
        spectrum = spectrum.reshape(spectrum.shape + (1,) * (array.ndim - 4))
        product = np.fft.rfftn(array, axes=GRID_AXES) * spectrum
        return np.fft.irfftn(product, s=self.grid.sizes, axes=GRID_AXES) * self.grid.vol

    def __call__(self, field):
        if field.grid != self.grid:
            raise GridError(f"grid mismatch: kernel on {self.grid}, field on {field.grid}")
        terms = {}
        for a, array in field.terms.items():
            for j in np.ndindex(*[_ + 1 for _ in a]):
                coef = 1.0
                for ai, ji in zip(a, j):
                    coef *= comb(ai, ji)
                k = tuple(ai - ji for ai, ji in zip(a, j))
                value = coef * self.convolve_periodic(array, j)
                terms[k] = terms[k] + value if k in terms else value
        return GridField(self.grid, terms, field.fiber_shape)


@lru_cache(maxsize=8)
def heat_kernel_operator(grid, spec=KernelSpec()):
    return KernelOperator(kernel_field(grid, spec))


def convolve(kernel, field):
    """
    Periodic convolution Σ_z K(z) f(y − z) ht·hx³, exact on polynomial terms.
    """
    if isinstance(kernel, GridField):
        kernel = KernelOperator(kernel)
    return kernel(field)


def convolve_direct(kernel, field):
    """
    Brute-force convolution by summing lattice shifts over the kernel support.
    """
    grid = kernel.grid
    values = np.broadcast_to(kernel.coefficient(), grid.sizes)
    result = GridField.zeros(grid, field.fiber_shape)
    for index in zip(*np.nonzero(values)):
        offset = grid.minimal_image(index)
        result = result + field.shift(offset) * (values[index] * grid.vol)
    return result


def patch_kernel(grid, patch):
    """
    A lattice patch placed at its minimal-image offsets, as a periodic scalar kernel field.
    """
    extent = patch.extent()
    if any(2 * e >= n for e, n in zip(extent, grid.sizes)):
        raise SupportError(f"patch with extent {tuple(extent)} does not embed in the {grid} torus")
    values = np.zeros(grid.sizes)
    index = tuple(patch.offsets[:, axis] % n for axis, n in enumerate(grid.sizes))
    np.add.at(values, index, patch.weights)
    return GridField.from_values(grid, values)


@lru_cache(maxsize=16)
def mollifier_operator(grid, rho):
    patch = normalized_bump((grid.ht, grid.hx), rho)
    return KernelOperator(patch_kernel(grid, patch))


def mollify(field, rho):
    """
    Convolution with η^ρ, the unit-mass bump rescaled to ρ; ρ = 0 returns the field itself.
    """
    if rho < 0:
        raise ValueError(f"mollification scale must be non-negative, got {rho}")
    if rho == 0:
        return field
    grid = field.grid
    grid.check_support(rho**2, rho, what=f"mollifier at ρ={rho}")
    return mollifier_operator(grid, float(rho))(field)


def pair(field, tf):
    """
    Riemann sum Σ_y field(y) φ^λ_x(y) ht·hx³ over the test function's lattice patch.
    """
    grid = field.grid
    tf.check_support(grid)
    patch = tf.patch(grid)
    values = field.at_points(np.asarray(tf.center) + patch.offsets)
    return np.tensordot(patch.weights, values, axes=(0, 0)) * grid.vol


@lru_cache(maxsize=None)
def stencil(n, grid):
    """
    The fixed finite-difference stencil for ∂^n as ``{offset: weight}``.

    Time derivatives use forward differences; in each spatial direction pairs of derivatives use the
    centered second difference and a leftover single derivative the centered first difference.
    """
    n = _as_exponent(n)
    ht, hx = grid.ht, grid.hx
    result = {ZERO: 1.0}

    def compose(current, factor):
        merged = {}
        for o1, w1 in current.items():
            for o2, w2 in factor.items():
                key = tuple(a + b for a, b in zip(o1, o2))
                merged[key] = merged.get(key, 0.0) + w1 * w2
        return {k: w for k, w in merged.items() if w != 0}

    for _ in range(n[0]):
        result = compose(result, {ZERO: -1.0 / ht, (1, 0, 0, 0): 1.0 / ht})
    for axis in (1, 2, 3):
        unit = [0, 0, 0, 0]
        unit[axis] = 1
        plus, minus = tuple(unit), tuple(-u for u in unit)
        pairs, single = divmod(n[axis], 2)
        for _ in range(pairs):
            result = compose(result, {plus: 1.0 / hx**2, ZERO: -2.0 / hx**2, minus: 1.0 / hx**2})
        if single:
            result = compose(result, {plus: 0.5 / hx, minus: -0.5 / hx})
    return result


def fd_derivative(field, n):
    result = GridField.zeros(field.grid, field.fiber_shape)
    for offset, weight in stencil(_as_exponent(n), field.grid).items():
        result = result + field.shift(tuple(-o for o in offset)) * weight
    return result


def derivative_at(field, n, x):
    """
    The stencil derivative ∂^n evaluated at the lattice point ``x``.
    """
    points = []
    weights = []
    for offset, weight in stencil(_as_exponent(n), field.grid).items():
        points.append(tuple(p + o for p, o in zip(x, offset)))
        weights.append(weight)
    return np.tensordot(np.array(weights), field.at_points(points), axes=(0, 0))


def taylor_indices(cutoff):
    """
    Every n ∈ ℕ⁴ with |n| < cutoff, in canonical order.
    """
    cutoff = GradedValue.coerce(cutoff)
    if cutoff <= 0:
        return ()
    return tuple(n for n in multi_indices_upto(cutoff.floor()) if GradedValue(parabolic_degree(n)) < cutoff)


def taylor_polynomial(grid, x, derivatives, fiber_shape):
    """
    Σ_n d_n (Y − x)^n / n! for a mapping n ↦ d_n of fiber values.
    """
    result = GridField.zeros(grid, fiber_shape)
    for n, value in derivatives.items():
        scale = 1.0 / np.prod([factorial(_) for _ in n])
        result = result + GridField.monomial(grid, n, np.asarray(value) * scale, center=x)
    return result


def taylor_subtract(field, x, cutoff):
    """
    field − Σ_{|n| < cutoff} ∂^n field(x) (y − x)^n / n!, with the stencil derivatives.
    """
    indices = taylor_indices(cutoff)
    if not indices:
        return field
    derivatives = {n: derivative_at(field, n, x) for n in indices}
    return field - taylor_polynomial(field.grid, x, derivatives, field.fiber_shape)


def gaussian_pairing_variance(grid, spec, rho, tf):
    """
    Exact variance of pair(K ∗ η^ρ ∗ ξ, φ) per V-component for discrete white noise ξ.
    """
    tf.check_support(grid)
    kernel = np.broadcast_to(heat_kernel_operator(grid, spec).kernel.coefficient(), grid.sizes)
    spectrum = np.fft.rfftn(kernel)
    if rho > 0:
        grid.check_support(rho**2, rho, what=f"mollifier at ρ={rho}")
        eta = np.broadcast_to(mollifier_operator(grid, float(rho)).kernel.coefficient(), grid.sizes)
        spectrum = spectrum * np.fft.rfftn(eta) * grid.vol
    weights = np.broadcast_to(patch_kernel(grid, tf.patch(grid)).coefficient(), grid.sizes)
    weights = _roll(np.array(weights), tf.center)
    # G(z) = vol² Σ_y φ(y) k(y − z)
    g = np.fft.irfftn(np.fft.rfftn(weights) * np.conj(spectrum), s=grid.sizes) * grid.vol**2
    return float((g**2).sum() / grid.vol)


_header = struct.Struct("<qqddq")


def dump_field(field, path):
    """
    Little-endian header {Nt, Nx, T, L, fiber_dim} followed by the dense values as row-major doubles.
    """
    grid = field.grid
    fiber_dim = int(np.prod(field.fiber_shape)) if field.fiber_shape else 1
    with open(path, "wb") as f:
        f.write(_header.pack(grid.nt, grid.nx, grid.box_time, grid.box_length, fiber_dim))
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path, fiber_shape=None):
    with open(path, "rb") as f:
        nt, nx, box_time, box_length, fiber_dim = _header.unpack(f.read(_header.size))
        data = np.frombuffer(f.read(), dtype="<f8")
    grid = ParabolicGrid(nt, nx, box_time, box_length)
    if fiber_shape is None:
        fiber_shape = (fiber_dim,)
    if int(np.prod(fiber_shape)) != fiber_dim or data.size != nt * nx**3 * fiber_dim:
        raise GridError(f"{path}: payload does not match header {nt}x{nx}^3 with fiber {fiber_dim}")
    return GridField.from_values(grid, data.reshape(grid.sizes + tuple(fiber_shape)).copy())


def csv_slice(field, path, axis=1, point=ZERO, component=0):
    """
    Write the 1-D slice through ``point`` along ``axis`` as ``coordinate,value`` rows.
    """
    grid = field.grid
    points = np.tile(np.asarray(point, dtype=int), (grid.sizes[axis], 1))
    points[:, axis] = np.arange(grid.sizes[axis])
    values = field.at_points(points).reshape(len(points), -1)[:, component]
    coords = points[:, axis] * grid.spacing[axis]
    np.savetxt(path, np.column_stack([coords, values]), delimiter=",", header="coordinate,value", comments="")
