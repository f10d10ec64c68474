from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from sympy import factorint

from pyalmostuniversal.arithmetic import primes_up_to
from pyalmostuniversal.eisenstein import BoundConstants, halmos_constants
from pyalmostuniversal.eligible import (
    EligiblePrime,
    EligibleSession,
    b_squared,
    b_value,
    c_b_squared,
    closure_loop,
    eligible_primes,
    iter_primes,
    primes_csv,
    read_numbers,
    square_augment,
    squarefree_eligible,
    write_numbers,
)
from pyalmostuniversal.exceptions import FileFormatError, ResourceLimitError
from pyalmostuniversal.forms import QuadraticForm


def _constants(
    c_f: int = 3, anisotropic: frozenset[int] = frozenset(), inert_mod_4: bool = False
) -> BoundConstants:
    # Level 1 constants, so that B(m)² = m/τ(m)² unless inert primes are requested.
    if inert_mod_4:
        character = lambda p: -1 if p % 4 == 3 else 1  # noqa: E731
    else:
        character = lambda p: 1  # noqa: E731
    return BoundConstants(
        c_f=Fraction(c_f),
        c_e=Fraction(1),
        level=1,
        determinant=1,
        anisotropic=anisotropic,
        character=character,
    )


def _squarefree(m: int) -> bool:
    return all(e == 1 for e in factorint(m).values())


def test_b_squared_for_halmos() -> None:
    constants = halmos_constants()

    assert b_squared(1, constants) == 1
    assert b_value(1, constants) == 1.0
    # 7 divides the level, χ(5) = -1
    assert b_squared(7, constants) == Fraction(7, 4)
    assert b_squared(5, constants) == Fraction(5, 9)
    with pytest.raises(ValueError, match="positive"):
        b_squared(0, constants)


def test_b_squared_is_multiplicative() -> None:
    constants = halmos_constants()

    for m, n in [(3, 5), (2, 11), (14, 15), (9, 8), (13, 49)]:
        assert b_squared(m * n, constants) == b_squared(m, constants) * b_squared(
            n, constants
        )


def test_b_squared_strips_anisotropic_primes() -> None:
    constants = _constants(anisotropic=frozenset({7}))

    assert b_squared(7, constants) == Fraction(1, 4)
    assert b_squared(49 * 3, constants) == Fraction(3, 36)


def test_c_b_squared() -> None:
    assert c_b_squared(halmos_constants()) == Fraction(5, 96)
    assert c_b_squared(_constants()) == Fraction(3, 8)


def test_c_b_squared_includes_large_anisotropic_primes() -> None:
    # B(11)² = 1/4 once 11 is anisotropic
    assert c_b_squared(_constants(anisotropic=frozenset({11}))) == Fraction(3, 32)


@pytest.mark.slow
def test_prime_bound_inversions_are_twin_gaps() -> None:
    rng = np.random.default_rng(2024)
    primes = primes_up_to(10**6).tolist()
    inversions = 0
    for _ in range(20):
        signs = dict(zip(primes, rng.choice([-1, 1], size=len(primes)).tolist()))
        anisotropic = frozenset(rng.choice(primes[:25], size=2, replace=False).tolist())
        constants = BoundConstants(
            c_f=Fraction(1),
            c_e=Fraction(1),
            level=int(rng.choice([1, 4, 28, 728])),
            determinant=1,
            anisotropic=anisotropic,
            character=signs.__getitem__,
        )
        values = [b_squared(p, constants) for p in primes]
        for i in range(len(primes) - 1):
            p, q = primes[i], primes[i + 1]
            if p in anisotropic or q in anisotropic:
                continue
            if values[i] > values[i + 1]:
                inversions += 1
                assert q - p <= 2, (p, q)

    assert inversions > 0


def test_iter_primes() -> None:
    primes = iter_primes(10)

    assert [next(primes) for _ in range(3)] == [11, 13, 17]
    assert [p for p, _ in zip(iter_primes(), range(2000))][-1] == 17389


def test_eligible_primes_for_synthetic_constants() -> None:
    primes = eligible_primes(_constants())

    # B(p)² = p/4 against the threshold 9/(3/8) = 24
    assert [e.p for e in primes] == [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37,
        41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    ]  # fmt: skip
    assert primes[0] == EligiblePrime(2, Fraction(1, 2))


def test_eligible_primes_include_large_anisotropic_primes() -> None:
    primes = eligible_primes(_constants(anisotropic=frozenset({101})), Fraction(2))

    assert [e.p for e in primes] == [101, 2, 3, 5, 7]


def test_squarefree_eligible_agrees_with_brute_force() -> None:
    constants = _constants()
    found = squarefree_eligible(constants)

    # With B(m)² = m/τ(m)² and the threshold 9 no eligible number exceeds 9·4⁶.
    expected = [
        m
        for m in range(1, 9 * 4**6 + 1)
        if _squarefree(m) and b_squared(m, constants) <= 9
    ]
    assert found == expected
    assert found[-1] == 30030


def test_squarefree_eligible_with_inert_primes() -> None:
    constants = _constants(c_f=1, inert_mod_4=True)
    found = squarefree_eligible(constants)
    limit = 20000

    assert all(_squarefree(m) and b_squared(m, constants) <= 1 for m in found)
    assert [m for m in found if m <= limit] == [
        m
        for m in range(1, limit + 1)
        if _squarefree(m) and b_squared(m, constants) <= 1
    ]


def test_squarefree_eligible_without_one() -> None:
    primes = [EligiblePrime(2, Fraction(1, 4))]

    assert squarefree_eligible(_constants(), primes, Fraction(1, 2)) == [2]


def test_squarefree_eligible_respects_the_cap() -> None:
    # Try to generate more numbers than allowed
    with pytest.raises(ResourceLimitError, match="too many"):
        squarefree_eligible(_constants(), max_count=10)


def test_square_augment_for_synthetic_constants() -> None:
    constants = _constants()

    assert square_augment([2], constants, primes=[2, 3]) == [8, 18]
    assert square_augment([], constants) == []
    # B(p²)² = p²/9 ≤ 9 for p ≤ 7
    assert square_augment([1], constants) == [4, 9, 25, 49]


def test_square_augment_cuts_off_anisotropic_powers() -> None:
    constants = _constants(anisotropic=frozenset({3}))

    assert square_augment([1], constants, primes=[3]) == [9]
    assert square_augment([9], constants, primes=[3]) == [81]
    assert square_augment([81], constants, primes=[3]) == []
    assert square_augment([81], constants, primes=[3], anisotropic_depth=6) == [729]


def test_square_augment_checks_squares_of_two() -> None:
    # B(2)² = 1/2 but B(4)² = 4/9, so that 4 is eligible although 2 is not.
    constants = _constants()
    threshold = Fraction(9, 20)

    assert b_squared(2, constants) > threshold
    assert square_augment([1], constants, [2], threshold) == [4]
    assert square_augment([3], constants, [2, 5], threshold) == [12]


def test_eligible_session() -> None:
    constants = halmos_constants()
    session = EligibleSession(constants)
    number_threshold = (Fraction("13.4964") / Fraction(36, 71)) ** 2

    assert session.c_b_squared == Fraction(5, 96)
    assert session.number_threshold_squared == number_threshold
    assert session.prime_threshold_squared == number_threshold * Fraction(96, 5)
    assert session.is_eligible(5)
    assert not session.is_eligible(10**12)


def test_numbers_file(tmp_path: Path) -> None:
    path = tmp_path / "numbers.bin"
    write_numbers(path, [1, 5, 18047039010])

    assert read_numbers(path) == [1, 5, 18047039010]
    assert path.stat().st_size == 12 + 3 * 8


def test_numbers_file_with_bad_magic(tmp_path: Path) -> None:
    path = tmp_path / "numbers.bin"
    path.write_bytes(b"XXXX" + bytes(8))

    with pytest.raises(FileFormatError, match="not a numbers file"):
        read_numbers(path)


def test_truncated_numbers_file(tmp_path: Path) -> None:
    path = tmp_path / "numbers.bin"
    write_numbers(path, [1, 2, 3])
    path.write_bytes(path.read_bytes()[:-4])

    with pytest.raises(FileFormatError, match="truncated"):
        read_numbers(path)
    path.write_bytes(b"EL")
    with pytest.raises(FileFormatError, match="truncated"):
        read_numbers(path)


def test_primes_csv() -> None:
    primes = [EligiblePrime(2, Fraction(1, 2)), EligiblePrime(3, Fraction(3, 4))]
    text = primes_csv(primes)

    assert text.splitlines() == [
        "p,B,B_squared",
        "2,0.707106781187,1/2",
        "3,0.866025403784,3/4",
    ]


@pytest.mark.parametrize(
    "coefficients,expected",
    [((1, 1, 2, 22), [14, 78]), ((1, 3, 5, 7), [2, 22]), ((1, 2, 7, 13), [5])],
)
def test_closure_loop_at_desk_scale(
    coefficients: tuple[int, ...], expected: list[int]
) -> None:
    report = closure_loop(QuadraticForm.diagonal(*coefficients), desk_bound=1000)

    assert report.exceptions == expected
    assert not report.definitive
    assert report.bound == 1000
    assert report.to_dict()["exceptions"] == expected


def test_closure_loop_needs_quaternary_form() -> None:
    with pytest.raises(ValueError, match="quaternary"):
        closure_loop(QuadraticForm.diagonal(1, 1, 1))


def test_closure_loop_rejects_local_obstructions() -> None:
    form = QuadraticForm.diagonal(2, 2, 2, 2)
    constants = BoundConstants.for_form(form, 1, 1)

    # Try to run the closure loop for a form which misses all odd numbers
    with pytest.raises(ValueError, match="2-adic"):
        closure_loop(form, constants)


@pytest.mark.slow
def test_halmos_eligible_numbers() -> None:
    session = EligibleSession(halmos_constants())

    assert len(session.primes) == 5634
    assert len(session.squarefree) == 343203
    assert session.squarefree[-1] == 18047039010


@pytest.mark.slow
def test_halmos_square_candidates() -> None:
    candidates = square_augment([5], halmos_constants())

    assert len(candidates) == 28
    assert all(m % 5 == 0 for m in candidates)


@pytest.mark.slow
def test_halmos_exceptions() -> None:
    constants = halmos_constants()
    assert constants.form is not None
    report = closure_loop(constants.form, constants)

    assert report.exceptions == [5]
    assert report.rounds[0] == [5]
    assert report.rounds[-1] == []
    assert report.candidate_counts[:2] == [343203, 28]
    assert report.definitive
