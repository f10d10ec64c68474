import itertools
import math
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from pyalmostuniversal.enumeration import theta_coefficients
from pyalmostuniversal.exceptions import (
    CoverNotFoundError,
    FileFormatError,
    ResourceLimitError,
)
from pyalmostuniversal.forms import QuadraticForm
from pyalmostuniversal.representability import (
    BitsetMode,
    RepresentedBitset,
    boolean_theta,
    check_numbers,
    find_split_local_cover,
    form_hash,
    precision,
    prism_for,
    represent_numbers,
    resolve_with_full_theta,
)
from pyalmostuniversal.settings import Settings

TERNARY = QuadraticForm.diagonal(2, 7, 13)


def _values_up_to(form: QuadraticForm, bound: int) -> set[int]:
    # Both test forms have all eigenvalues at least 1.
    r = math.isqrt(bound)
    box = range(-r, r + 1)
    return {
        value
        for x in itertools.product(box, repeat=form.dim)
        if (value := form.evaluate(x)) <= bound
    }


def test_halmos_cover(halmos: QuadraticForm) -> None:
    cover = find_split_local_cover(halmos)

    assert cover.d == 1
    assert cover.complement == TERNARY
    assert cover.form == halmos
    assert cover.basis[0] == (1, 0, 0, 0)
    assert cover.embed(1, (0, 0, 0)) == (1, 0, 0, 0)
    assert cover.embed(2, (1, 1, 0)) == (2, 1, 1, 0)
    assert cover.verified_modulus > 1


def test_cover_needs_quaternary_form() -> None:
    with pytest.raises(ValueError, match="quaternary"):
        find_split_local_cover(QuadraticForm.diagonal(1, 1, 1))


def test_cover_not_found(halmos: QuadraticForm) -> None:
    with pytest.raises(CoverNotFoundError, match="No split local cover") as excinfo:
        find_split_local_cover(halmos, max_norm=0)
    assert excinfo.value.max_norm == 0


def test_boolean_theta_agrees_with_brute_force() -> None:
    bitset = boolean_theta(TERNARY, 30)

    assert set(np.flatnonzero(bitset.bits).tolist()) == _values_up_to(TERNARY, 30)
    assert bitset.mode == BitsetMode.EXACT
    assert bitset.count() == len(_values_up_to(TERNARY, 30))
    for m in np.flatnonzero(bitset.bits).tolist():
        assert TERNARY.evaluate(bitset.witness(m)) == m


def test_boolean_theta_of_non_diagonal_form() -> None:
    form = QuadraticForm.from_rows([[2, 1, 0], [1, 3, 1], [0, 1, 4]])
    bitset = boolean_theta(form, 25)

    assert set(np.flatnonzero(bitset.bits).tolist()) == _values_up_to(form, 25)
    for m in np.flatnonzero(bitset.bits).tolist():
        assert form.evaluate(bitset.witness(m)) == m


def test_boolean_theta_with_zero_bound() -> None:
    bitset = boolean_theta(TERNARY, 0)

    assert bitset.bits.tolist() == [True]
    assert 0 in bitset
    assert 1 not in bitset


def test_approximate_bitset_is_a_subset() -> None:
    exact = boolean_theta(TERNARY, 800)
    approximate = boolean_theta(TERNARY, 800, mode=BitsetMode.APPROXIMATE)

    assert not np.any(approximate.bits & ~exact.bits)
    assert approximate.mode == BitsetMode.APPROXIMATE


def test_full_prism_gives_exact_bitset() -> None:
    Settings.get_instance().prism_scale = 1.0
    exact = boolean_theta(TERNARY, 400)
    approximate = boolean_theta(TERNARY, 400, mode=BitsetMode.APPROXIMATE)

    assert approximate.bits.tolist() == exact.bits.tolist()


def test_prism_for() -> None:
    assert prism_for(TERNARY, 100, 1.0) == [8, 4, 3]
    assert prism_for(TERNARY, 100, 0.5) == [4, 2, 2]


def test_boolean_theta_respects_the_cap() -> None:
    Settings.get_instance().max_lattice_points = 100

    # Try to allocate more bits than allowed
    with pytest.raises(ResourceLimitError, match="bits"):
        boolean_theta(TERNARY, 1000)


def test_bitset_membership() -> None:
    bitset = boolean_theta(TERNARY, 20)

    assert 2 in bitset
    assert 5 not in bitset
    assert 21 not in bitset
    assert "2" not in bitset
    with pytest.raises(ValueError, match="not marked"):
        bitset.witness(5)


def test_bitset_file(tmp_path: Path) -> None:
    path = tmp_path / "theta.bin"
    bitset = boolean_theta(TERNARY, 100, mode=BitsetMode.APPROXIMATE)
    bitset.save(path)
    loaded = RepresentedBitset.load(path, TERNARY)

    assert loaded.bound == 100
    assert loaded.mode == BitsetMode.APPROXIMATE
    assert loaded.bits.tolist() == bitset.bits.tolist()
    assert loaded.witnesses is None
    assert TERNARY.evaluate(loaded.witness(9)) == 9
    # 21 bytes of header and two u64 words
    assert path.stat().st_size == 21 + 16


def test_bitset_file_of_another_form(tmp_path: Path) -> None:
    path = tmp_path / "theta.bin"
    boolean_theta(TERNARY, 10).save(path)

    # Try to load the bitset for a different form
    with pytest.raises(FileFormatError, match="different form"):
        RepresentedBitset.load(path, QuadraticForm.diagonal(1, 7, 13))


@pytest.mark.parametrize(
    "content,message",
    [(b"BTH", "truncated"), (b"XXXX" + bytes(24), "not a bitset file")],
)
def test_malformed_bitset_files(tmp_path: Path, content: bytes, message: str) -> None:
    path = tmp_path / "theta.bin"
    path.write_bytes(content)

    with pytest.raises(FileFormatError, match=message):
        RepresentedBitset.load(path, TERNARY)


def test_truncated_bitset_body(tmp_path: Path) -> None:
    path = tmp_path / "theta.bin"
    boolean_theta(TERNARY, 200).save(path)
    path.write_bytes(path.read_bytes()[:-8])

    with pytest.raises(FileFormatError, match="truncated"):
        RepresentedBitset.load(path, TERNARY)


def test_form_hash() -> None:
    assert form_hash(TERNARY) == form_hash(QuadraticForm.diagonal(2, 7, 13))
    assert form_hash(TERNARY) != form_hash(QuadraticForm.diagonal(2, 7, 12))
    assert 0 <= form_hash(TERNARY) < 2**64


@pytest.mark.parametrize(
    "d,c,x,expected", [(1, 5, 100, 100), (1, 1, 2, 3), (2, 3, 10**12, 12_000_000)]
)
def test_precision(d: int, c: int, x: int, expected: int) -> None:
    assert precision(d, c, x) == expected


def test_check_numbers_finds_all_small_representations(halmos: QuadraticForm) -> None:
    cover = find_split_local_cover(halmos)
    result = check_numbers(cover, list(range(1, 200)), c=20, mode=BitsetMode.EXACT)

    assert result.unresolved == [5]
    assert len(result.represented) == 198
    x, y = result.represented[10]
    assert halmos.evaluate(cover.embed(x, y)) == 10


def test_check_numbers_uses_a_given_bitset(halmos: QuadraticForm) -> None:
    cover = find_split_local_cover(halmos)
    bitset = boolean_theta(TERNARY, 50)
    result = check_numbers(cover, [1, 5, 10, 30], c=3, bitset=bitset)

    assert result.unresolved == [5]
    assert result.represented[1] == (1, (0, 0, 0))


def test_check_numbers_edge_cases(halmos: QuadraticForm) -> None:
    cover = find_split_local_cover(halmos)

    assert check_numbers(cover, []).unresolved == []
    with pytest.raises(ValueError, match="positive"):
        check_numbers(cover, [0, 3])


def test_represent_numbers(halmos: QuadraticForm) -> None:
    numbers = list(range(1, 300)) + [123457]
    result = represent_numbers(halmos, numbers)

    assert 5 in result.unresolved
    assert resolve_with_full_theta(halmos, result.unresolved) == [5]
    for a, (x, y) in result.represented.items():
        assert halmos.evaluate((x, *y)) == a


def test_resolve_with_full_theta(halmos: QuadraticForm) -> None:
    assert resolve_with_full_theta(halmos, []) == []
    assert resolve_with_full_theta(halmos, [5, 1, 5]) == [5]


def test_check_and_resolve_agree_with_theta(
    random_forms: Callable[..., list[QuadraticForm]],
) -> None:
    numbers = list(range(1, 501))
    covered = 0
    for form in random_forms(20, seed=19):
        try:
            cover = find_split_local_cover(form)
        except CoverNotFoundError:
            continue
        result = check_numbers(cover, numbers, c=5)
        exceptions = resolve_with_full_theta(form, result.unresolved)
        theta = theta_coefficients(form, 500)

        assert not set(result.represented) & set(result.unresolved)
        assert set(exceptions) <= set(result.unresolved)
        represented = set(numbers) - set(exceptions)
        assert represented == {a for a in numbers if theta[a] > 0}, form.gram
        for a, (x, y) in result.represented.items():
            assert form.evaluate(cover.embed(x, y)) == a
        covered += 1

    assert covered > 0


def test_resolve_number_by_number(halmos: QuadraticForm) -> None:
    Settings.get_instance().max_lattice_points = 10

    assert resolve_with_full_theta(halmos, [1, 5, 22]) == [5]
