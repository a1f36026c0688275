"""
Multi-index arithmetic over {g} ⊔ ℕ⁴.

A multi-index β counts how often the coupling slot ``g`` and each polynomial slot ``n = (n0, n1, n2, n3)``
occur. Grades are kept exact as :class:`GradedValue` triples ``r + s·ε + u·ε₋`` so that every comparison
is decided symbolically; the rational surrogates of ε and ε₋ are only used for float export.
"""

import re
import logging
import itertools
from fractions import Fraction
from functools import lru_cache, total_ordering
from dataclasses import dataclass

from ymmodel import defaults
from ymmodel.errors import GradeOrderError, IndexSetError


log = logging.getLogger(__name__)


def parabolic_degree(n):
    return 2 * n[0] + n[1] + n[2] + n[3]


def canonical_key(n):
    """
    Graded-lexicographic key on ℕ⁴: parabolic degree first, then the components.
    """
    return (parabolic_degree(n), *n)


@lru_cache(maxsize=None)
def multi_indices_upto(max_degree):
    """
    All n ∈ ℕ⁴ with |n| ≤ max_degree, in canonical order.
    """
    found = []
    for n0 in range(max_degree // 2 + 1):
        rest = max_degree - 2 * n0
        for n1, n2, n3 in itertools.product(range(rest + 1), repeat=3):
            if n1 + n2 + n3 <= rest:
                found.append((n0, n1, n2, n3))
    return tuple(sorted(found, key=canonical_key))


@total_ordering
@dataclass(frozen=True, eq=False)
class GradedValue:
    """
    Exact grade r + s·ε + u·ε₋, ordered lexicographically on (r, s, u).
    """

    r: Fraction
    s: int = 0
    u: int = 0

    def __post_init__(self):
        object.__setattr__(self, "r", Fraction(self.r))
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "u", int(self.u))

    @classmethod
    def coerce(cls, value):
        if isinstance(value, GradedValue):
            return value
        if isinstance(value, float):
            value = Fraction(value).limit_denominator(10**12)
        return cls(Fraction(value))

    @property
    def key(self):
        return (self.r, self.s, self.u)

    def __eq__(self, other):
        try:
            other = GradedValue.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.key == other.key

    def __lt__(self, other):
        other = GradedValue.coerce(other)
        return self.key < other.key

    def __hash__(self):
        return hash(self.key)

    def __add__(self, other):
        other = GradedValue.coerce(other)
        return GradedValue(self.r + other.r, self.s + other.s, self.u + other.u)

    __radd__ = __add__

    def __neg__(self):
        return GradedValue(-self.r, -self.s, -self.u)

    def __sub__(self, other):
        return self + (-GradedValue.coerce(other))

    def __rsub__(self, other):
        return GradedValue.coerce(other) - self

    def __mul__(self, factor):
        if isinstance(factor, GradedValue):
            raise TypeError("graded values can only be scaled by rationals")
        factor = Fraction(factor)
        s = self.s * factor
        u = self.u * factor
        if s.denominator != 1 or u.denominator != 1:
            raise ValueError(f"scaling {self} by {factor} leaves non-integer ε coefficients")
        return GradedValue(self.r * factor, int(s), int(u))

    __rmul__ = __mul__

    def to_float(self, params=None):
        if params is None:
            params = DEFAULT_PARAMS
        return float(self.r + self.s * params.eps + self.u * params.eps_minus)

    def floor(self):
        """
        Largest integer ≤ the grade, decided symbolically.
        """
        whole = self.r.numerator // self.r.denominator
        if self.r == whole and (self.s, self.u) < (0, 0):
            return whole - 1
        return whole

    def json(self):
        return {"r": f"{self.r.numerator}/{self.r.denominator}", "s": self.s, "u": self.u}

    @classmethod
    def from_json(cls, data):
        return cls(Fraction(data["r"]), data.get("s", 0), data.get("u", 0))

    def __str__(self):
        parts = [str(self.r)] if self.r or not (self.s or self.u) else []
        for coef, symbol in ((self.s, "ε"), (self.u, "ε₋")):
            if not coef:
                continue
            sign = "-" if coef < 0 else "+"
            magnitude = "" if abs(coef) == 1 else str(abs(coef))
            if parts:
                parts.append(f"{sign} {magnitude}{symbol}")
            else:
                parts.append(f"{'-' if coef < 0 else ''}{magnitude}{symbol}")
        return " ".join(parts)

    def __repr__(self):
        return f"GradedValue({self})"


@dataclass(frozen=True)
class HomParams:
    d: int = 5
    eps: Fraction = defaults.eps
    eps_minus: Fraction = defaults.eps_minus

    def __post_init__(self):
        object.__setattr__(self, "eps", Fraction(self.eps))
        object.__setattr__(self, "eps_minus", Fraction(self.eps_minus))
        if not (0 < self.eps <= Fraction(1, 100)):
            raise ValueError(f"ε surrogate must lie in (0, 1/100], got {self.eps}")
        if not (0 < self.eps_minus < self.eps / 100):
            raise ValueError(f"ε₋ surrogate must lie in (0, ε/100), got {self.eps_minus}")

    @property
    def alpha(self):
        return GradedValue(Fraction(-1, 2), -1, 0)

    @property
    def half_dim(self):
        return Fraction(self.d, 2)


DEFAULT_PARAMS = HomParams()


@dataclass(frozen=True)
class MultiIndex:
    """
    Finitely supported map {g} ⊔ ℕ⁴ → ℕ.

    ``poly`` is stored as a tuple of ``(n, count)`` pairs in canonical order with positive counts, so
    equal multi-indices compare and hash equal.
    """

    g_count: int = 0
    poly: tuple = ()

    def __post_init__(self):
        if self.g_count < 0:
            raise ValueError(f"negative g count: {self.g_count}")
        items = self.poly.items() if isinstance(self.poly, dict) else self.poly
        merged = {}
        for n, count in items:
            n = tuple(int(_) for _ in n)
            if len(n) != 4 or any(_ < 0 for _ in n):
                raise ValueError(f"invalid polynomial slot {n}")
            if count < 0:
                raise ValueError(f"negative count {count} for slot {n}")
            merged[n] = merged.get(n, 0) + int(count)
        poly = tuple((n, merged[n]) for n in sorted(merged, key=canonical_key) if merged[n])
        object.__setattr__(self, "g_count", int(self.g_count))
        object.__setattr__(self, "poly", poly)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def g(cls, k=1):
        return cls(k)

    @classmethod
    def delta(cls, n, count=1):
        return cls(0, ((tuple(n), count),))

    def __add__(self, other):
        return MultiIndex(self.g_count + other.g_count, self.poly + other.poly)

    def __sub__(self, other):
        if not self.contains(other):
            raise ValueError(f"{other} is not contained in {self}")
        counts = dict(self.poly)
        for n, count in other.poly:
            counts[n] -= count
        return MultiIndex(self.g_count - other.g_count, counts)

    def contains(self, other):
        counts = dict(self.poly)
        return other.g_count <= self.g_count and all(counts.get(n, 0) >= c for n, c in other.poly)

    def count(self, n):
        return dict(self.poly).get(tuple(n), 0)

    @property
    def slots(self):
        return tuple(n for n, _ in self.poly)

    @property
    def poly_total(self):
        return sum(c for _, c in self.poly)

    @property
    def poly_degree(self):
        return sum(c * parabolic_degree(n) for n, c in self.poly)

    @property
    def is_zero(self):
        return self.g_count == 0 and not self.poly

    @property
    def is_polynomial(self):
        return self.g_count == 0 and self.poly_total == 1

    @property
    def poly_part(self):
        return MultiIndex(0, self.poly)

    def sort_key(self):
        return (self.g_count, tuple((canonical_key(n), c) for n, c in self.poly))

    def json(self):
        return {"g": self.g_count, "poly": [[list(n), c] for n, c in self.poly]}

    @classmethod
    def from_json(cls, data):
        return cls(data.get("g", 0), tuple((tuple(n), c) for n, c in data.get("poly", [])))

    def __str__(self):
        return format_multi_index(self)

    def __repr__(self):
        return f"MultiIndex({self})"


_g_token = re.compile(r"^g(?:\^(\d+))?$")
_n_token = re.compile(r"^\((\d+),(\d+),(\d+),(\d+)\)(?:\^(\d+))?$")


def format_multi_index(beta):
    parts = []
    if beta.g_count:
        parts.append("g" if beta.g_count == 1 else f"g^{beta.g_count}")
    for n, count in beta.poly:
        slot = f"({','.join(str(_) for _ in n)})"
        parts.append(slot if count == 1 else f"{slot}^{count}")
    return " * ".join(parts) if parts else "1"


def parse_multi_index(text):
    """
    Inverse of :func:`format_multi_index`.

    Examples:
        >>> parse_multi_index("g^2 * (0,0,0,0)")
        MultiIndex(g^2 * (0,0,0,0))
    """
    text = "".join(str(text).split())
    if text in ("", "1", "0"):
        return MultiIndex.zero()
    g_count = 0
    poly = []
    for token in text.split("*"):
        g_match = _g_token.match(token)
        n_match = _n_token.match(token)
        if g_match:
            g_count += int(g_match.group(1) or 1)
        elif n_match:
            n = tuple(int(n_match.group(i)) for i in range(1, 5))
            poly.append((n, int(n_match.group(5) or 1)))
        else:
            raise ValueError(f"cannot parse multi-index token '{token}'")
    return MultiIndex(g_count, tuple(poly))


def population(beta):
    return beta.g_count - beta.poly_total


def grade(beta, kind="plain", params=DEFAULT_PARAMS):
    """
    Homogeneity of ``beta``.

    Args:
        beta (MultiIndex): the multi-index.
        kind (str): ``plain`` for |β|, ``modified`` for |β|_≺ = |β| + (d/2)([β]+1), ``corrected`` for
            |β|₋ = |β| − ε₋([β]+1).
        params (HomParams): dimension and ε surrogates.

    Returns:
        GradedValue: the exact grade.
    """
    pop1 = population(beta) + 1
    value = GradedValue(beta.g_count + beta.poly_degree) + params.alpha * pop1
    if kind == "plain":
        return value
    if kind == "modified":
        return value + params.half_dim * pop1
    if kind == "corrected":
        return value + GradedValue(0, 0, -pop1)
    raise ValueError(f"unknown grade kind '{kind}'")


@dataclass(frozen=True)
class Membership:
    in_Mpp: bool
    in_Mgeq0: bool
    in_Mprime: bool
    in_M: bool

    def json(self):
        return {"in_Mpp": self.in_Mpp, "in_Mgeq0": self.in_Mgeq0, "in_Mprime": self.in_Mprime, "in_M": self.in_M}


def membership(beta):
    in_Mpp = beta.is_polynomial
    in_Mgeq0 = population(beta) >= 0
    # δg + δn + δn' and 2δg + δn + δn' + δn''
    special = (beta.g_count == 1 and beta.poly_total == 2) or (beta.g_count == 2 and beta.poly_total == 3)
    in_Mprime = in_Mgeq0 or special
    return Membership(in_Mpp, in_Mgeq0, in_Mprime, in_Mprime or in_Mpp)


_population_sets = {
    "M": lambda m: m.in_M,
    "Mprime": lambda m: m.in_Mprime,
    "Mgeq0": lambda m: m.in_Mgeq0,
    "Mpp": lambda m: m.in_Mpp,
}


def _grade_from_counts(g_count, poly_total, poly_degree, kind, params):
    pop1 = g_count - poly_total + 1
    value = GradedValue(g_count + poly_degree) + params.alpha * pop1
    if kind == "modified":
        value = value + params.half_dim * pop1
    return value


def _min_grade_for_g(g_count, kind, params):
    # plain: no polynomial atoms; modified: as many δ0 as membership allows
    if kind == "plain":
        return _grade_from_counts(g_count, 0, 0, kind, params)
    return _grade_from_counts(g_count, g_count + 1, 0, kind, params)


def enumerate_populated(bound, kind="plain", params=DEFAULT_PARAMS, population_set="M"):
    """
    All populated multi-indices with grade strictly below ``bound``.

    Every β ∈ M has at most β(g)+1 polynomial atoms, which bounds the search depth; atoms are added in
    canonical order and a branch is cut as soon as no completion can fall below the bound.

    Returns:
        list[MultiIndex]: sorted by (grade, g_count, polynomial part).
    """
    bound = GradedValue.coerce(bound)
    if kind not in ("plain", "modified"):
        raise ValueError(f"enumeration supports plain and modified grades, not '{kind}'")
    try:
        accept = _population_sets[population_set]
    except KeyError:
        raise ValueError(f"unknown population set '{population_set}'")

    max_degree = max(0, bound.floor() + 1)
    atoms = multi_indices_upto(max_degree)
    atom_shift = params.alpha + params.half_dim if kind == "modified" else params.alpha
    found = []

    def visit(g_count, start, chosen, poly_total, poly_degree):
        value = _grade_from_counts(g_count, poly_total, poly_degree, kind, params)
        if value < bound:
            beta = MultiIndex(g_count, tuple((n, 1) for n in chosen))
            if accept(membership(beta)):
                found.append(beta)
        if poly_total >= g_count + 1:
            return
        for idx in range(start, len(atoms)):
            n = atoms[idx]
            degree = parabolic_degree(n)
            new_value = _grade_from_counts(g_count, poly_total + 1, poly_degree + degree, kind, params)
            remaining = g_count - poly_total
            step = GradedValue(degree) - atom_shift
            lower = new_value + (step * remaining if step < 0 else 0)
            if lower >= bound:
                break
            visit(g_count, idx, chosen + [n], poly_total + 1, poly_degree + degree)

    g_count = 0
    while _min_grade_for_g(g_count, kind, params) < bound:
        visit(g_count, 0, [], 0, 0)
        g_count += 1

    grades = [grade(beta, kind, params) for beta in found]
    check_surrogate_order(grades, params)
    order = sorted(range(len(found)), key=lambda i: (grades[i], found[i].sort_key()))
    log.debug(f"enumerated {len(found)} indices below {bound} ({kind}, {population_set})")
    return [found[i] for i in order]


def check_surrogate_order(values, params=DEFAULT_PARAMS):
    """
    Make sure the float surrogates of ε and ε₋ preserve the exact order of ``values``.
    """
    exact = sorted(set(values))
    floats = [v.to_float(params) for v in exact]
    for (lo, hi), (flo, fhi) in zip(zip(exact, exact[1:]), zip(floats, floats[1:])):
        if not flo < fhi:
            raise GradeOrderError(
                f"surrogates ε={params.eps}, ε₋={params.eps_minus} reorder {lo} and {hi} ({flo} vs {fhi})"
            )


def sub_indices(beta):
    """
    Every multi-index contained in ``beta``, in a fixed order.
    """
    ranges = [range(beta.g_count + 1)] + [range(c + 1) for _, c in beta.poly]
    slots = beta.slots
    for counts in itertools.product(*ranges):
        yield MultiIndex(counts[0], tuple(zip(slots, counts[1:])))


def decompositions(beta, pattern):
    """
    Splittings of ``beta`` used by the recursion for the right-hand side.

    Only pieces that are populated are returned; the lift vanishes on the others.

    Args:
        beta (MultiIndex): the index to split.
        pattern (str): ``pair`` for β₁+β₂+δg = β, ``triple`` for β₁+β₂+β₃+2δg = β, ``counterterm`` for
            kδg+β₁ = β with k ∈ {1,2,3,4}.

    Returns:
        list[tuple]: ordered tuples of pieces (``(k, β₁)`` for the counterterm pattern).
    """

    def populated(piece):
        return membership(piece).in_M

    result = []
    if pattern == "pair":
        if beta.g_count < 1:
            return result
        rest = beta - MultiIndex.g(1)
        for first in sub_indices(rest):
            second = rest - first
            if populated(first) and populated(second):
                result.append((first, second))
    elif pattern == "triple":
        if beta.g_count < 2:
            return result
        rest = beta - MultiIndex.g(2)
        for first in sub_indices(rest):
            remainder = rest - first
            if not populated(first):
                continue
            for second in sub_indices(remainder):
                third = remainder - second
                if populated(second) and populated(third):
                    result.append((first, second, third))
    elif pattern == "counterterm":
        for k in range(1, 5):
            if beta.g_count >= k:
                rest = beta - MultiIndex.g(k)
                if populated(rest):
                    result.append((k, rest))
    else:
        raise IndexSetError(f"unknown decomposition pattern '{pattern}'")
    return result
