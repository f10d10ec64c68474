"""Eisenstein coefficients and the bounds used for proving exception sets.

The theta series of a quaternary form splits into an Eisenstein series and a cusp form,
r_Q(m) = a_E(m) + a_C(m). Two bounds make this effective:

* a_E(m) ≥ C_E·m·∏ (p-1)/(p+1) for locally represented m, where the product runs over
  the primes p ∤ N dividing m with χ(p) = -1.
* |a_C(m)| ≤ C_f·√m·τ(m).

The constants C_f and C_E are inputs. The values for x² + 2y² + 7z² + 13w² are shipped
with the package and returned by `halmos_constants`.
"""

import dataclasses
import json
import logging
import math
from collections.abc import Callable, Mapping
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

from pyalmostuniversal.arithmetic import (
    divisor_count,
    factorize,
    kronecker,
    prime_divisors,
    valuation,
)
from pyalmostuniversal.densities import (
    anisotropic_primes,
    is_locally_represented,
    local_density,
)
from pyalmostuniversal.enumeration import theta_coefficients
from pyalmostuniversal.exceptions import (
    FileFormatError,
    InvalidFormError,
    NotLocallyRepresentedError,
)
from pyalmostuniversal.forms import QuadraticForm

__all__ = [
    "BoundConstants",
    "EisensteinCoefficient",
    "HALMOS_FORM",
    "HALMOS_L_VALUE",
    "load_constants",
    "halmos_constants",
    "beta_2_halmos",
    "beta_7_halmos",
    "beta_13_halmos",
    "halmos_prime_factor",
    "a_E_halmos",
    "eisenstein_coefficient",
    "eisenstein_lower_bound",
    "cusp_bound",
    "cusp_gap",
]

logger = logging.getLogger(__name__)

HALMOS_FORM = QuadraticForm.diagonal(1, 2, 7, 13)

# L(2, χ) = l·√D·π² for the Halmos form.
HALMOS_L_VALUE = Fraction(213, 33124)


@dataclasses.dataclass(frozen=True)
class BoundConstants:
    """
    The constants driving the eligibility bounds for a form.

    Attributes:
        c_f: The cusp constant C_f.
        c_e: The Eisenstein constant C_E.
        level: The level N.
        determinant: The determinant D.
        anisotropic: The anisotropic primes.
        character: The character p ↦ χ(p), used for primes p ∤ N only.
        form: The form, if the constants belong to an actual form.
        l_value: The coefficient l with L(2, χ) = l·√D·π², if known.
    """

    c_f: Fraction
    c_e: Fraction
    level: int
    determinant: int
    anisotropic: frozenset[int]
    character: Callable[[int], int] = dataclasses.field(compare=False, repr=False)
    form: QuadraticForm | None = None
    l_value: Fraction | None = None

    def __post_init__(self) -> None:
        if self.c_f <= 0:
            raise ValueError("The cusp constant must be positive.")
        if self.c_e <= 0:
            raise ValueError("The Eisenstein constant must be positive.")

    @classmethod
    def for_form(
        cls,
        form: QuadraticForm,
        c_f: Fraction | float | str,
        c_e: Fraction | str,
        l_value: Fraction | str | None = None,
    ) -> "BoundConstants":
        """
        Create the constants for a quaternary form.

        The level, determinant, character and anisotropic primes are computed from the
        form.

        Args:
            form: A quaternary form.
            c_f: The cusp constant. Floats are converted via their decimal string.
            c_e: The Eisenstein constant.
            l_value: The optional L-value coefficient.

        Returns:
            The constants.
        """
        if form.dim != 4:
            raise ValueError("Bound constants are defined for quaternary forms.")
        return cls(
            c_f=_exact(c_f),
            c_e=_exact(c_e),
            level=form.level,
            determinant=form.determinant,
            anisotropic=frozenset(anisotropic_primes(form)),
            character=form.character,
            form=form,
            l_value=_exact(l_value) if l_value is not None else None,
        )

    def chi(self, p: int) -> int:
        """Return χ(p) for a prime p ∤ N."""
        return self.character(p)


def _exact(value: Fraction | float | int | str) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def _constants_from_mapping(data: Mapping[str, Any]) -> BoundConstants:
    try:
        form = QuadraticForm.from_dict(data["form"])
        return BoundConstants.for_form(
            form, data["C_f"], data["C_E"], data.get("l_value")
        )
    except (KeyError, TypeError, ValueError, ZeroDivisionError, InvalidFormError) as e:
        raise FileFormatError(f"The constants cannot be parsed: {e}") from e


def load_constants(path: Path | str) -> BoundConstants:
    """
    Load bound constants from a JSON file.

    The file must contain an object with the keys "form" (an object with the Gram
    matrix), "C_f" (a number or decimal string), "C_E" (a fraction string such as
    "36/71") and optionally "l_value".

    Args:
        path: The file path.

    Returns:
        The constants.

    Raises:
        FileFormatError: The file cannot be parsed.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FileFormatError(f"The constants file is not valid JSON: {e}") from e
    return _constants_from_mapping(data)


def halmos_constants() -> BoundConstants:
    """Return the shipped constants of the form x² + 2y² + 7z² + 13w²."""
    text = resources.files("pyalmostuniversal").joinpath("data/halmos.json").read_text()
    return _constants_from_mapping(json.loads(text))


def _closed_form(
    m: int,
    p: int,
    modulus: int,
    head: Fraction,
    residues: set[int],
    even: tuple[Fraction, Fraction],
    odd: tuple[Fraction, Fraction],
) -> Fraction:
    e = valuation(m, p)
    k = e // 2
    unit = (m // p**e) % modulus
    q = Fraction(1, p * p)
    if e % 2 == 0:
        tail = even[0] if unit in residues else even[1]
        return head * sum((q**i for i in range(k)), Fraction(0)) + q**k * tail
    tail = odd[0] if unit in residues else odd[1]
    return (
        head * sum((q**i for i in range(k + 1)), Fraction(0))
        + Fraction(1, p ** (2 * k + 1)) * tail
    )


def beta_2_halmos(m: int) -> Fraction:
    """Return the closed form of β₂(m) for the form x² + 2y² + 7z² + 13w²."""
    return _closed_form(
        m,
        2,
        8,
        Fraction(3, 4),
        {1, 3},
        (Fraction(3, 4), Fraction(5, 4)),
        (Fraction(3, 4), Fraction(1, 4)),
    )


def beta_7_halmos(m: int) -> Fraction:
    """Return the closed form of β₇(m) for the form x² + 2y² + 7z² + 13w²."""
    return _closed_form(
        m,
        7,
        7,
        Fraction(48, 49),
        {1, 2, 4},
        (Fraction(8, 7), Fraction(6, 7)),
        (Fraction(2, 7), Fraction(0)),
    )


def beta_13_halmos(m: int) -> Fraction:
    """Return the closed form of β₁₃(m) for the form x² + 2y² + 7z² + 13w²."""
    return _closed_form(
        m,
        13,
        13,
        Fraction(168, 169),
        {1, 3, 4, 9, 10, 12},
        (Fraction(14, 13), Fraction(12, 13)),
        (Fraction(2, 13), Fraction(0)),
    )


def halmos_prime_factor(m: int, p: int) -> Fraction:
    """
    Return β_p(m)·p²/(p² - χ(p)) for the Halmos form and a prime p ∉ {2, 7, 13}.

    Args:
        m: A positive integer divisible by p.
        p: The prime.

    Returns:
        The closed form of the factor.
    """
    e = valuation(m, p)
    k = e // 2
    chi = kronecker(182, p)
    if e % 2 == 0:
        numerator = p ** (2 * k + 1) - chi
        denominator = (p - chi) * p ** (2 * k)
    else:
        numerator = p ** (2 * k + 2) - 1
        denominator = (p - chi) * p ** (2 * k + 1)
    return Fraction(numerator, denominator)


def a_E_halmos(m: int) -> Fraction:
    """
    Return the Eisenstein coefficient a_E(m) of x² + 2y² + 7z² + 13w².

    The value is rational, as π² and √182 cancel against the L-value.
    """
    if m < 1:
        raise ValueError("The coefficient is defined for positive integers only.")
    value = Fraction(182 * m, 213) * beta_2_halmos(m) * beta_7_halmos(m)
    value *= beta_13_halmos(m)
    for p in prime_divisors(m):
        if p not in (2, 7, 13):
            value *= halmos_prime_factor(m, p)
    return value


@dataclasses.dataclass(frozen=True)
class EisensteinCoefficient:
    """
    The Eisenstein coefficient a_E(m) of a quaternary form, up to the L-value.

    With the L-value L(2, χ) = l·√D·π² (Euler factors at p | 2N removed) the
    coefficient is local_factor·m/(D·l).

    Attributes:
        m: The number.
        determinant: The determinant D.
        local_factor: ∏_{p | 2N} β_p(m) · ∏_{p | m, p ∤ 2N} β_p(m)·p²/(p² - χ(p)).
    """

    m: int
    determinant: int
    local_factor: Fraction

    def value(self, l_value: Fraction) -> Fraction:
        """Return a_E(m) for the given L-value coefficient l."""
        return self.local_factor * self.m / (self.determinant * l_value)


def eisenstein_coefficient(form: QuadraticForm, m: int) -> EisensteinCoefficient:
    """
    Return the Eisenstein coefficient of a quaternary form, up to the L-value.

    Args:
        form: A quaternary form.
        m: A positive integer.

    Returns:
        The coefficient.
    """
    if form.dim != 4:
        raise ValueError("Eisenstein coefficients are implemented for quaternary forms.")
    level = form.level
    factor = Fraction(1)
    for p in prime_divisors(2 * level):
        factor *= local_density(form, p, m)
    for p in prime_divisors(m):
        if (2 * level) % p:
            chi = form.character(p)
            factor *= local_density(form, p, m) * Fraction(p * p, p * p - chi)
    return EisensteinCoefficient(m, form.determinant, factor)


def eisenstein_lower_bound(m: int, constants: BoundConstants) -> Fraction:
    """
    Return the lower bound C_E·m·∏ (p-1)/(p+1) for a_E(m).

    The product runs over the primes p ∤ N which divide m and have χ(p) = -1.

    Args:
        m: A positive integer.
        constants: The bound constants.

    Returns:
        The lower bound.

    Raises:
        NotLocallyRepresentedError: The constants belong to a form which does not
            represent m locally.
    """
    if m < 1:
        raise ValueError("The bound is defined for positive integers only.")
    if constants.form is not None and not is_locally_represented(constants.form, m):
        raise NotLocallyRepresentedError(f"{m} is not locally represented.", m)
    bound = constants.c_e * m
    for p, _ in factorize(m):
        if constants.level % p and constants.chi(p) == -1:
            bound *= Fraction(p - 1, p + 1)
    return bound


def cusp_bound(m: int, c_f: Fraction | float) -> float:
    """Return the bound C_f·√m·τ(m) for the cusp coefficient a_C(m)."""
    if m < 1:
        raise ValueError("The bound is defined for positive integers only.")
    return float(c_f) * math.sqrt(m) * divisor_count(m)


def cusp_gap(
    form: QuadraticForm, m: int, l_value: Fraction, r: int | None = None
) -> Fraction:
    """
    Return |r_Q(m) - a_E(m)|, the absolute value of the cusp coefficient.

    Args:
        form: A quaternary form.
        m: A positive integer.
        l_value: The L-value coefficient of the form.
        r: The representation number r_Q(m), if already known.

    Returns:
        The absolute cusp coefficient.
    """
    if r is None:
        r = int(theta_coefficients(form, m)[m])
    return abs(r - eisenstein_coefficient(form, m).value(l_value))
