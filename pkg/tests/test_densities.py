import itertools
from collections.abc import Callable
from fractions import Fraction

import numpy as np
import pytest

from pyalmostuniversal.arithmetic import valuation
from pyalmostuniversal.densities import (
    SolutionType,
    anisotropic_primes,
    beta_infinity,
    count_mod,
    density_breakdown,
    density_report,
    hasse_invariant,
    is_anisotropic,
    is_locally_represented,
    is_locally_represented_at,
    jordan_decompose,
    local_density,
    local_obstructions,
    stable_exponent,
)
from pyalmostuniversal.exceptions import ResourceLimitError
from pyalmostuniversal.forms import QuadraticForm
from pyalmostuniversal.settings import Settings


def _brute_force_count(form: QuadraticForm, modulus: int, m: int) -> int:
    return sum(
        1
        for x in itertools.product(range(modulus), repeat=form.dim)
        if (form.evaluate(x) - m) % modulus == 0
    )


@pytest.mark.parametrize(
    "p,m,expected",
    [
        (2, 1, Fraction(3, 4)),
        (3, 1, Fraction(10, 9)),
        (7, 1, Fraction(8, 7)),
        (7, 7, Fraction(50, 49)),
        (13, 1, Fraction(14, 13)),
    ],
)
def test_halmos_densities(
    halmos: QuadraticForm, p: int, m: int, expected: Fraction
) -> None:
    assert local_density(halmos, p, m) == expected


def test_density_parts_add_up(halmos: QuadraticForm) -> None:
    for p, m in [(2, 4), (2, 5), (7, 49), (13, 26)]:
        breakdown = density_breakdown(halmos, p, m)
        assert breakdown.density == breakdown.good + breakdown.zero + breakdown.bad
        assert breakdown.density == local_density(halmos, p, m)


def test_unramified_density() -> None:
    # For a unimodular quaternary form and a unit m, β_p(m) = 1 - χ(p)/p².
    form = QuadraticForm.diagonal(1, 1, 1, 1)

    assert local_density(form, 3, 1) == 1 - Fraction(1, 9)
    assert local_density(form, 5, 2) == 1 - Fraction(1, 25)


@pytest.mark.parametrize(
    "coefficients,p,v,m",
    [
        ((1, 2, 7, 13), 2, 2, 1),
        ((1, 2, 7, 13), 7, 1, 0),
        ((1, 1, 3, 3), 3, 2, 6),
        ((1, 1, 1), 2, 3, 7),
    ],
)
def test_count_mod_agrees_with_brute_force(
    coefficients: tuple[int, ...], p: int, v: int, m: int
) -> None:
    form = QuadraticForm.diagonal(*coefficients)

    assert count_mod(form, p, v, m) == _brute_force_count(form, p**v, m)


def test_count_mod_solution_types_add_up() -> None:
    form = QuadraticForm.diagonal(1, 1, 3, 3)
    total = count_mod(form, 3, 2, 3)

    assert total == sum(count_mod(form, 3, 2, 3, kind) for kind in SolutionType)


def test_count_mod_stabilizes_at_the_local_density() -> None:
    form = QuadraticForm.diagonal(1, 1, 1, 1)
    v = stable_exponent(form, 2, 1)

    assert v == 5
    assert Fraction(count_mod(form, 2, v, 1), 2 ** (3 * v)) == local_density(form, 2, 1)


def test_count_mod_respects_the_cap(halmos: QuadraticForm) -> None:
    Settings.get_instance().count_mod_cap = 1000

    # Try to count more residue vectors than allowed
    with pytest.raises(ResourceLimitError):
        count_mod(halmos, 7, 2, 1)


def test_count_mod_needs_positive_exponent(halmos: QuadraticForm) -> None:
    with pytest.raises(ValueError, match="exponent"):
        count_mod(halmos, 2, 0, 1)


def test_jordan_decomposition(halmos: QuadraticForm) -> None:
    jordan = jordan_decompose(halmos, 7)

    assert jordan.coordinate_scales == (0, 0, 0, 1)
    assert (jordan.s0, jordan.s1, jordan.s2) == (3, 1, 0)
    assert jordan_decompose(halmos, 3).coordinate_scales == (0, 0, 0, 0)


def test_jordan_decomposition_with_binary_block() -> None:
    # 2x² + 2xy + 2y² has no odd diagonal entry over Z₂.
    jordan = jordan_decompose(QuadraticForm.from_rows([[2, 1], [1, 2]]), 2)

    assert len(jordan.blocks) == 1
    assert jordan.blocks[0].dim == 2
    assert jordan.blocks[0].scale == 0


def test_local_density_needs_positive_number(halmos: QuadraticForm) -> None:
    with pytest.raises(ValueError, match="positive"):
        local_density(halmos, 2, 0)


@pytest.mark.parametrize(
    "coefficients,expected",
    [
        ((1, 2, 7, 13), set()),
        ((1, 1, 7, 7), {7}),
        ((1, 1, 1, 1), {2}),
        ((1, 1, 1), {2}),
        ((1, 1, 1, 1, 1), set()),
    ],
)
def test_anisotropic_primes(coefficients: tuple[int, ...], expected: set[int]) -> None:
    assert anisotropic_primes(QuadraticForm.diagonal(*coefficients)) == expected


def test_anisotropy_of_small_forms() -> None:
    assert is_anisotropic(QuadraticForm.diagonal(1), 5)
    # x² + y² is isotropic over Q₅, since -1 is a square there.
    assert not is_anisotropic(QuadraticForm.diagonal(1, 1), 5)
    assert is_anisotropic(QuadraticForm.diagonal(1, 1), 3)
    with pytest.raises(ValueError, match="infinitely many"):
        anisotropic_primes(QuadraticForm.diagonal(1, 1))


def test_hasse_invariant() -> None:
    assert hasse_invariant(QuadraticForm.diagonal(1, 1, 1), 2) == 1
    assert hasse_invariant(QuadraticForm.diagonal(7, 7, 1), 7) == -1


@pytest.mark.parametrize(
    "coefficients,m,expected",
    [
        ((1, 2, 7, 13), 5, True),
        ((1, 1, 1), 7, False),
        ((1, 1, 1), 28, False),
        ((1, 1, 1), 14, True),
        ((2, 2, 2, 2), 1, False),
        ((2, 2, 2, 2), 2, True),
        ((1, 1), 3, False),
    ],
)
def test_is_locally_represented(
    coefficients: tuple[int, ...], m: int, expected: bool
) -> None:
    form = QuadraticForm.diagonal(*coefficients)

    assert is_locally_represented(form, m) == expected


def test_is_locally_represented_at() -> None:
    three_squares = QuadraticForm.diagonal(1, 1, 1)

    assert not is_locally_represented_at(three_squares, 2, 7)
    assert is_locally_represented_at(three_squares, 3, 7)
    with pytest.raises(ValueError, match="not a prime"):
        is_locally_represented_at(three_squares, 4, 7)


def test_local_obstructions(halmos: QuadraticForm) -> None:
    assert local_obstructions(halmos) == []
    assert local_obstructions(QuadraticForm.diagonal(2, 2, 2, 2)) == [
        (2, 1),
        (2, 3),
        (2, 5),
        (2, 7),
    ]


def test_density_report(halmos: QuadraticForm) -> None:
    report = density_report(halmos, 5)

    assert sorted(report.densities) == [2, 5, 7, 13]
    assert report.locally_represented
    assert report.beta_infinity.coefficient == 5
    assert str(report.beta_infinity) == "5·π²/√182"
    assert report.local_product > 0


def test_beta_infinity_needs_quaternary_form() -> None:
    with pytest.raises(ValueError, match="quaternary"):
        beta_infinity(QuadraticForm.diagonal(1, 1, 1), 3)


def _hensel_exponent(form: QuadraticForm, p: int, m: int) -> int:
    # Every solution modulo p^v lifts once v exceeds twice the valuation of the
    # gradient, which is at most ord_p(m)/2 + ord_p(2D).
    return valuation(m, p) + 2 * valuation(2 * form.determinant, p) + 1


def _check_density_against_counts(
    forms: list[QuadraticForm], primes: tuple[int, ...], numbers: list[int], work: int
) -> int:
    checked = 0
    for form in forms:
        for p in primes:
            for m in numbers:
                v = _hensel_exponent(form, p, m)
                if p ** (3 * (v + 2)) > work:
                    continue
                density = local_density(form, p, m)
                for w in range(v, v + 3):
                    ratio = Fraction(count_mod(form, p, w, m), p ** (3 * w))
                    assert ratio == density, (form.gram, p, m, w)
                checked += 1
    return checked


def test_local_density_agrees_with_counts(
    halmos: QuadraticForm, random_forms: Callable[..., list[QuadraticForm]]
) -> None:
    forms = [halmos, *random_forms(4, seed=3)]

    checked = _check_density_against_counts(forms, (2, 3), [1, 2, 3, 5, 6], 2**15)

    assert checked > 0


@pytest.mark.slow
def test_local_density_agrees_with_counts_for_random_forms(
    random_forms: Callable[..., list[QuadraticForm]],
) -> None:
    rng = np.random.default_rng(11)
    checked = 0
    for form in random_forms(30, seed=7):
        numbers = sorted(int(m) for m in rng.choice(np.arange(1, 51), 6, replace=False))
        checked += _check_density_against_counts([form], (2, 3, 5), numbers, 2**21)

    assert checked >= 30


@pytest.mark.parametrize(
    "rows,p,k,m",
    [
        (((1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 7, 0), (0, 0, 0, 13)), 2, 3, 4),
        (((1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 7, 0), (0, 0, 0, 13)), 2, 4, 12),
        (((2, 1, 0, 0), (1, 2, 0, 0), (0, 0, 1, 0), (0, 0, 0, 3)), 2, 4, 8),
        (((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 3, 0), (0, 0, 0, 3)), 3, 3, 9),
    ],
)
def test_zero_solutions_scale_down(
    rows: tuple[tuple[int, ...], ...], p: int, k: int, m: int
) -> None:
    # x = p·y solves Q(x) ≡ m (mod p^k) exactly when Q(y) ≡ m/p² (mod p^(k-2)), and
    # each y modulo p^(k-2) gives p⁴ vectors x modulo p^k.
    form = QuadraticForm.from_rows(rows)
    zero = count_mod(form, p, k, m, SolutionType.ZERO)

    assert zero == p**4 * count_mod(form, p, k - 2, m // p**2)


@pytest.mark.parametrize(
    "rows,p,k,m",
    [
        (((1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 7, 0), (0, 0, 0, 13)), 2, 3, 1),
        (((1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 7, 0), (0, 0, 0, 13)), 2, 3, 6),
        (((2, 1, 0, 0), (1, 2, 0, 0), (0, 0, 1, 0), (0, 0, 0, 3)), 2, 3, 3),
        (((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 3, 0), (0, 0, 0, 3)), 3, 1, 3),
        (((1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 7, 0), (0, 0, 0, 13)), 5, 1, 10),
        (((1, 0, 0, 0), (0, 2, 0, 0), (0, 0, 7, 0), (0, 0, 0, 13)), 3, 1, 2),
    ],
)
def test_good_solutions_lift_uniformly(
    rows: tuple[tuple[int, ...], ...], p: int, k: int, m: int
) -> None:
    form = QuadraticForm.from_rows(rows)
    good = count_mod(form, p, k, m, SolutionType.GOOD)

    assert count_mod(form, p, k + 1, m, SolutionType.GOOD) == p**3 * good
