import pytest
import itertools
from fractions import Fraction

from .helpers import *


def brute_force_populated(bound, population_set, params):
    from ymmodel.indexcalc import MultiIndex, grade, membership, multi_indices_upto

    atoms = multi_indices_upto(2)
    found = set()
    for g_count in range(8):
        for count in range(g_count + 2):
            for combo in itertools.combinations_with_replacement(atoms, count):
                beta = MultiIndex(g_count, tuple((n, 1) for n in combo))
                m = membership(beta)
                accepted = {"M": m.in_M, "Mprime": m.in_Mprime}[population_set]
                if accepted and grade(beta, "plain", params) < bound:
                    found.add(beta)
    return found


def test_graded_values():
    from ymmodel.errors import GradeOrderError
    from ymmodel.indexcalc import GradedValue, HomParams, DEFAULT_PARAMS, check_surrogate_order

    # lexicographic order on (r, s, u)
    assert GradedValue(1, -1) < GradedValue(1) < GradedValue(1, 0, 1) < GradedValue(Fraction(3, 2), -5)
    assert GradedValue(2) == 2
    assert GradedValue(Fraction(1, 2), -1) * 3 == GradedValue(Fraction(3, 2), -3)
    assert -GradedValue(1, 2, 3) == GradedValue(-1, -2, -3)
    assert 2 - GradedValue(1, 1) == GradedValue(1, -1)
    with pytest.raises(ValueError):
        GradedValue(1, 1) * Fraction(1, 2)
    with pytest.raises(TypeError):
        GradedValue(1) * GradedValue(1)

    # floor is decided symbolically
    assert GradedValue(2).floor() == 2
    assert GradedValue(2, -1).floor() == 1
    assert GradedValue(2, 0, 1).floor() == 2
    assert GradedValue(Fraction(-1, 2), -1).floor() == -1

    # export
    value = GradedValue(Fraction(1, 2), -1, 3)
    assert value.json() == {"r": "1/2", "s": -1, "u": 3}
    assert GradedValue.from_json(value.json()) == value
    assert value.to_float(DEFAULT_PARAMS) == pytest.approx(0.5 - 1 / 128 + 3 / 16384)
    assert str(GradedValue(Fraction(1, 2), -1)) == "1/2 - ε"
    assert str(GradedValue(0, -2)) == "-2ε"

    # surrogate ranges
    with pytest.raises(ValueError):
        HomParams(eps=Fraction(1, 50))
    with pytest.raises(ValueError):
        HomParams(eps=Fraction(1, 128), eps_minus=Fraction(1, 1000))

    # surrogates that reorder exact grades are rejected
    check_surrogate_order([GradedValue(0, 1), GradedValue(1)])
    with pytest.raises(GradeOrderError):
        check_surrogate_order([GradedValue(0, 1), GradedValue(Fraction(1, 1000))])


def test_multi_indices():
    from ymmodel.indexcalc import MultiIndex, parse_multi_index, format_multi_index, population, membership

    zero = MultiIndex.zero()
    g = MultiIndex.g(1)
    d0 = MultiIndex.delta((0, 0, 0, 0))
    d1 = MultiIndex.delta((0, 1, 0, 0))

    # canonical storage
    assert MultiIndex(1, (((0, 1, 0, 0), 1), ((0, 0, 0, 0), 1))) == g + d0 + d1
    assert (g + d0 + d0).count((0, 0, 0, 0)) == 2
    assert (g + d0 + d1).slots == ((0, 0, 0, 0), (0, 1, 0, 0))
    assert (g + d0 + d1) - d1 == g + d0
    with pytest.raises(ValueError):
        d0 - d1
    with pytest.raises(ValueError):
        MultiIndex(-1)

    # text form
    assert format_multi_index(zero) == "1"
    assert format_multi_index(MultiIndex.g(2) + d0) == "g^2 * (0,0,0,0)"
    assert parse_multi_index("g^2 * (0,0,0,0)") == MultiIndex.g(2) + d0
    assert parse_multi_index("g*(0,1,0,0)^2") == g + d1 + d1
    assert parse_multi_index("1") == zero
    with pytest.raises(ValueError):
        parse_multi_index("h^2")

    # population and membership
    assert population(MultiIndex.g(3) + d0) == 2
    assert membership(zero).in_Mgeq0 and membership(zero).in_M
    assert membership(d0).in_Mpp and membership(d0).in_M and not membership(d0).in_Mprime
    assert membership(g + d0 + d1).in_Mprime and population(g + d0 + d1) == -1
    assert membership(MultiIndex.g(2) + d0 + d0 + d1).in_Mprime
    assert not membership(d0 + d1).in_M
    assert not membership(g + d0 + d0 + d1).in_M


def test_grades():
    from ymmodel.indexcalc import MultiIndex, GradedValue, DEFAULT_PARAMS, grade

    params = DEFAULT_PARAMS
    alpha = params.alpha
    zero = MultiIndex.zero()
    d0 = MultiIndex.delta((0, 0, 0, 0))

    assert alpha == GradedValue(Fraction(-1, 2), -1)
    assert grade(zero) == alpha
    assert grade(MultiIndex.g(1)) == GradedValue(0, -2)
    assert grade(MultiIndex.delta((0, 1, 0, 0))) == 1
    assert grade(MultiIndex.delta((1, 0, 0, 0))) == 2

    # the four families of M' below grade 2
    for k in range(6):
        assert grade(MultiIndex.g(k)) == k * (alpha + 1) + alpha
    for k in range(1, 5):
        assert grade(MultiIndex.g(k) + d0) == k * (alpha + 1)
    for k in range(1, 4):
        assert grade(MultiIndex.g(k) + d0 + d0) == k * (alpha + 1) - alpha
    for k in range(1, 3):
        for unit in ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)):
            assert grade(MultiIndex.g(k) + MultiIndex.delta(unit)) == k * (alpha + 1) + 1

    # modified and corrected grades
    g = MultiIndex.g(1)
    assert grade(g, "modified") == GradedValue(5, -2)
    assert grade(g, "corrected") == GradedValue(0, -2, -2)
    assert grade(d0, "modified") == grade(d0)
    with pytest.raises(ValueError):
        grade(g, "bogus")


def test_enumeration():
    from ymmodel.indexcalc import DEFAULT_PARAMS, MultiIndex, enumerate_populated, grade

    params = DEFAULT_PARAMS
    primed = enumerate_populated(2, "plain", params, "Mprime")
    full = enumerate_populated(2, "plain", params, "M")
    assert len(primed) == 19
    assert len(full) == 23
    assert set(full) - set(primed) == {
        MultiIndex.delta(n) for n in ((0, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))
    }

    # sorted by grade, all strictly below the bound
    grades = [grade(beta, "plain", params) for beta in full]
    assert grades == sorted(grades)
    assert all(value < 2 for value in grades)
    assert full[0] == MultiIndex.zero()

    # cross-checked against a brute-force filter
    assert set(primed) == brute_force_populated(2, "Mprime", params)
    assert set(full) == brute_force_populated(2, "M", params)

    # the bound is strict
    assert MultiIndex.g(1) + MultiIndex.delta((0, 0, 0, 0)) + MultiIndex.delta((0, 1, 0, 0)) not in full
    assert enumerate_populated(0, "plain", params, "M") == [MultiIndex.zero(), MultiIndex.g(1)]

    # modified grades are larger, so fewer indices fall below the same bound
    modified = enumerate_populated(4, "modified", params, "M")
    assert all(grade(beta, "modified", params) < 4 for beta in modified)
    assert MultiIndex.zero() in modified

    with pytest.raises(ValueError):
        enumerate_populated(2, "corrected", params)
    with pytest.raises(ValueError):
        enumerate_populated(2, "plain", params, "N")


@pytest.mark.slow
def test_modified_enumeration_covers_plain():
    from ymmodel.indexcalc import DEFAULT_PARAMS, GradedValue, enumerate_populated, grade

    params = DEFAULT_PARAMS
    # |β| ≤ 2 includes the polynomial δ_n with |n| = 2, whose grade is exactly 2
    plain = [
        beta
        for beta in enumerate_populated(Fraction(5, 2), "plain", params, "M")
        if grade(beta, "plain", params) <= GradedValue(2)
    ]
    assert any(grade(beta, "plain", params) == GradedValue(2) for beta in plain)
    modified = set(enumerate_populated(17, "modified", params, "M"))
    assert set(plain) <= modified


def test_decompositions():
    from ymmodel.indexcalc import MultiIndex, decompositions, sub_indices

    zero = MultiIndex.zero()
    g = MultiIndex.g(1)
    d0 = MultiIndex.delta((0, 0, 0, 0))

    assert len(list(sub_indices(MultiIndex.g(2) + d0))) == 6
    assert decompositions(g, "pair") == [(zero, zero)]
    assert decompositions(zero, "pair") == []
    assert decompositions(MultiIndex.g(2), "triple") == [(zero, zero, zero)]
    assert decompositions(MultiIndex.g(2) + d0, "counterterm") == [(1, g + d0), (2, d0)]

    # pieces outside M are skipped: g + δ0 splits as (0, δ0) and (δ0, 0)
    assert decompositions(g + d0, "pair") == [(zero, d0), (d0, zero)]
