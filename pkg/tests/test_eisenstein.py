import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from pyalmostuniversal.arithmetic import kronecker
from pyalmostuniversal.densities import local_density
from pyalmostuniversal.eisenstein import (
    HALMOS_FORM,
    HALMOS_L_VALUE,
    BoundConstants,
    a_E_halmos,
    beta_2_halmos,
    beta_7_halmos,
    beta_13_halmos,
    cusp_bound,
    cusp_gap,
    eisenstein_coefficient,
    eisenstein_lower_bound,
    halmos_constants,
    halmos_prime_factor,
    load_constants,
)
from pyalmostuniversal.enumeration import theta_coefficients
from pyalmostuniversal.exceptions import FileFormatError, NotLocallyRepresentedError
from pyalmostuniversal.forms import QuadraticForm


def test_halmos_constants() -> None:
    constants = halmos_constants()

    assert constants.form == HALMOS_FORM
    assert constants.c_e == Fraction(36, 71)
    assert constants.c_f == Fraction("13.4964")
    assert constants.level == 728
    assert constants.determinant == 182
    assert constants.anisotropic == frozenset()
    assert constants.l_value == HALMOS_L_VALUE
    assert constants.chi(3) == -1


def test_first_eisenstein_coefficient() -> None:
    assert a_E_halmos(1) == Fraction(56, 71)
    with pytest.raises(ValueError, match="positive"):
        a_E_halmos(0)


@pytest.mark.parametrize(
    "closed_form,p", [(beta_2_halmos, 2), (beta_7_halmos, 7), (beta_13_halmos, 13)]
)
def test_closed_forms_match_local_densities(closed_form, p: int) -> None:
    for m in range(1, 120):
        assert closed_form(m) == local_density(HALMOS_FORM, p, m), m


@pytest.mark.slow
@pytest.mark.parametrize(
    "closed_form,p", [(beta_2_halmos, 2), (beta_7_halmos, 7), (beta_13_halmos, 13)]
)
def test_closed_forms_match_local_densities_further(closed_form, p: int) -> None:
    for m in range(120, 501):
        assert closed_form(m) == local_density(HALMOS_FORM, p, m), m


@pytest.mark.parametrize("p,m", [(3, 3), (3, 9), (3, 27), (5, 5), (5, 50), (11, 121)])
def test_prime_factor_matches_local_density(p: int, m: int) -> None:
    chi = kronecker(182, p)
    expected = local_density(HALMOS_FORM, p, m) * Fraction(p * p, p * p - chi)

    assert halmos_prime_factor(m, p) == expected


def test_general_coefficient_matches_closed_form() -> None:
    for m in range(1, 80):
        coefficient = eisenstein_coefficient(HALMOS_FORM, m)
        assert coefficient.value(HALMOS_L_VALUE) == a_E_halmos(m), m


def test_eisenstein_coefficient_needs_quaternary_form() -> None:
    with pytest.raises(ValueError, match="quaternary"):
        eisenstein_coefficient(QuadraticForm.diagonal(1, 1, 1), 1)


def test_theta_lies_between_the_bounds() -> None:
    constants = halmos_constants()
    counts = theta_coefficients(HALMOS_FORM, 400).tolist()

    for m in range(1, 401):
        gap = cusp_gap(HALMOS_FORM, m, HALMOS_L_VALUE, counts[m])
        assert gap == abs(counts[m] - a_E_halmos(m))
        assert gap <= cusp_bound(m, constants.c_f), m
        assert eisenstein_lower_bound(m, constants) <= a_E_halmos(m), m


@pytest.mark.slow
def test_theta_lies_between_the_bounds_up_to_2000() -> None:
    constants = halmos_constants()
    counts = theta_coefficients(HALMOS_FORM, 2000).tolist()

    for m in range(1, 2001):
        a_e = a_E_halmos(m)
        assert abs(counts[m] - a_e) <= cusp_bound(m, constants.c_f), m
        assert eisenstein_lower_bound(m, constants) <= a_e, m


def test_cusp_gap_computes_representation_number() -> None:
    assert cusp_gap(HALMOS_FORM, 1, HALMOS_L_VALUE) == Fraction(86, 71)


def test_cusp_bound() -> None:
    assert cusp_bound(1, 2) == 2.0
    assert cusp_bound(6, 1) == pytest.approx(4 * math.sqrt(6))
    with pytest.raises(ValueError, match="positive"):
        cusp_bound(0, 1)


def test_lower_bound_uses_inert_primes() -> None:
    constants = halmos_constants()

    # χ(3) = -1 and χ(5) = -1, while 7 divides the level.
    assert eisenstein_lower_bound(3, constants) == Fraction(36, 71) * 3 * Fraction(1, 2)
    assert eisenstein_lower_bound(15, constants) == Fraction(36, 71) * 15 * Fraction(
        1, 2
    ) * Fraction(2, 3)
    assert eisenstein_lower_bound(7, constants) == Fraction(36, 71) * 7


def test_lower_bound_rejects_locally_unrepresented_numbers() -> None:
    constants = BoundConstants.for_form(QuadraticForm.diagonal(2, 2, 2, 2), 1, 1)

    # Try to bound the coefficient of an odd number
    with pytest.raises(NotLocallyRepresentedError, match="not locally represented"):
        eisenstein_lower_bound(1, constants)


def test_constants_must_be_positive() -> None:
    with pytest.raises(ValueError, match="cusp constant"):
        BoundConstants.for_form(HALMOS_FORM, 0, 1)
    with pytest.raises(ValueError, match="Eisenstein constant"):
        BoundConstants.for_form(HALMOS_FORM, 1, "-1/2")
    with pytest.raises(ValueError, match="quaternary"):
        BoundConstants.for_form(QuadraticForm.diagonal(1, 1, 1), 1, 1)


def test_load_constants(tmp_path: Path) -> None:
    path = tmp_path / "constants.json"
    form = QuadraticForm.diagonal(1, 1, 7, 7)
    path.write_text(json.dumps({"form": form.to_dict(), "C_f": 2.5, "C_E": "1/3"}))
    constants = load_constants(path)

    assert constants.c_f == Fraction(5, 2)
    assert constants.c_e == Fraction(1, 3)
    assert constants.anisotropic == frozenset({7})
    assert constants.l_value is None


@pytest.mark.parametrize(
    "content,message",
    [
        ("{", "not valid JSON"),
        ('{"C_f": 1, "C_E": 1}', "cannot be parsed"),
        ('{"form": {"gram": [[1]]}, "C_f": 1, "C_E": 1}', "cannot be parsed"),
        ('{"form": {"gram": [[1, 0], [0, 1]]}, "C_f": "x", "C_E": 1}', "cannot be parsed"),
    ],
)
def test_load_constants_rejects_bad_files(
    tmp_path: Path, content: str, message: str
) -> None:
    path = tmp_path / "constants.json"
    path.write_text(content)

    with pytest.raises(FileFormatError, match=message):
        load_constants(path)
