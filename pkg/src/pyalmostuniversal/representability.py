"""Fast checks of global representability for many large numbers.

A quaternary form Q usually contains a sublattice d·x² ⊕ T with a ternary form T which
locally represents the same numbers as Q (a split local cover). A number a is then
represented by Q if a - d·x² is represented by T for some x, and the values of T up to
a bound Y can be stored as a single bit per number. Only Y = ⌈2·d·c·√X⌉ bits are needed
to check all numbers up to X with c attempts each.

Usage example:

  halmos = QuadraticForm.diagonal(1, 2, 7, 13)
  cover = find_split_local_cover(halmos)  # d = 1, T = 2y² + 7z² + 13w²
  result = check_numbers(cover, [1, 5, 10, 123457])
  result.unresolved  # [5] (and possibly numbers missed by the approximate bitset)
"""

import dataclasses
import hashlib
import logging
import math
import struct
from collections.abc import Iterator, Sequence
from enum import Enum
from pathlib import Path

import numpy as np

from pyalmostuniversal.arithmetic import ceil_sqrt, prime_divisors, valuation
from pyalmostuniversal.densities import is_locally_represented_at
from pyalmostuniversal.enumeration import (
    Block,
    check_points,
    estimated_points,
    find_vector,
    map_slabs,
    represented_up_to,
    short_vectors,
)
from pyalmostuniversal.exceptions import (
    CoverNotFoundError,
    FileFormatError,
    ResourceLimitError,
)
from pyalmostuniversal.forms import QuadraticForm, orthogonal_complement, reduce_form
from pyalmostuniversal.settings import Settings

__all__ = [
    "SplitLocalCover",
    "BitsetMode",
    "RepresentedBitset",
    "CheckResult",
    "find_split_local_cover",
    "form_hash",
    "prism_for",
    "boolean_theta",
    "precision",
    "check_numbers",
    "represent_numbers",
    "resolve_with_full_theta",
]

logger = logging.getLogger(__name__)

_BITSET_MAGIC = b"BTH1"
_BITSET_HEADER = struct.Struct("<4sQBQ")


@dataclasses.dataclass(frozen=True)
class SplitLocalCover:
    """
    A sublattice d·x² ⊕ T of a form which locally represents the same numbers.

    Attributes:
        d: The norm of the split vector.
        complement: The ternary form T.
        parent: The form containing the cover.
        basis: The embedding of the cover into the parent, as rows in the coordinates of
            the parent. The first row is the split vector, the others span T.
        verified_modulus: The modulus up to which the local agreement was checked.
    """

    d: int
    complement: QuadraticForm
    parent: QuadraticForm
    basis: tuple[tuple[int, ...], ...]
    verified_modulus: int

    @property
    def form(self) -> QuadraticForm:
        """The cover d·x² ⊕ T as a form."""
        return QuadraticForm.diagonal(self.d).direct_sum(self.complement)

    def embed(self, x: int, y: Sequence[int]) -> tuple[int, ...]:
        """Return the vector of the parent corresponding to (x, y)."""
        coefficients = (x, *y)
        n = self.parent.dim
        return tuple(
            sum(c * row[j] for c, row in zip(coefficients, self.basis)) for j in range(n)
        )


class BitsetMode(int, Enum):
    """
    The way a bitset was computed.

    Exact bitsets mark every value of the form up to the bound. Approximate bitsets
    only evaluate the vectors inside a prism, and may therefore miss values.
    """

    EXACT = 0
    APPROXIMATE = 1


def form_hash(form: QuadraticForm) -> int:
    """Return a 64-bit hash of the canonical JSON of a form."""
    digest = hashlib.blake2b(form.to_json().encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclasses.dataclass
class RepresentedBitset:
    """
    The numbers up to a bound which are values of a form, one bit per number.

    A set bit always means that the number is represented. For exact bitsets the
    converse holds as well.

    Attributes:
        form: The form.
        bound: The bound Y.
        bits: A boolean array of length Y + 1.
        mode: Whether the bitset is exact or approximate.
        witnesses: An optional array whose m-th row is a vector y with T(y) = m for
            every set bit m.
    """

    form: QuadraticForm
    bound: int
    bits: np.ndarray
    mode: BitsetMode
    witnesses: np.ndarray | None = dataclasses.field(default=None, repr=False)

    def __contains__(self, m: object) -> bool:
        return isinstance(m, int) and 0 <= m <= self.bound and bool(self.bits[m])

    def count(self) -> int:
        """Return the number of set bits."""
        return int(np.count_nonzero(self.bits))

    def witness(self, m: int) -> tuple[int, ...]:
        """
        Return a vector y with T(y) = m for a set bit m.

        Bitsets without a witness table (such as loaded ones) search for the vector.
        """
        if m not in self:
            raise ValueError(f"{m} is not marked as represented.")
        if self.witnesses is not None:
            return tuple(int(e) for e in self.witnesses[m])
        found = find_vector(self.form, m)
        if found is None:
            raise FileFormatError(f"The bitset marks {m}, which is not represented.")
        return found

    def save(self, path: Path | str) -> None:
        """
        Save the bitset in the BTH1 format.

        The file consists of the magic b"BTH1", the bound Y (u64), the mode (u8), the form
        hash (u64) and the bits packed into little-endian u64 words.
        """
        header = _BITSET_HEADER.pack(
            _BITSET_MAGIC, self.bound, self.mode.value, form_hash(self.form)
        )
        words = _word_count(self.bound)
        packed = np.zeros(8 * words, dtype=np.uint8)
        bytes_ = np.packbits(self.bits, bitorder="little")
        packed[: len(bytes_)] = bytes_
        Path(path).write_bytes(header + packed.view("<u8").tobytes())

    @classmethod
    def load(cls, path: Path | str, form: QuadraticForm) -> "RepresentedBitset":
        """
        Load a bitset saved in the BTH1 format.

        Args:
            path: The file path.
            form: The form the bitset belongs to.

        Returns:
            The bitset, without witness table.

        Raises:
            FileFormatError: The file is malformed or belongs to another form.
        """
        data = Path(path).read_bytes()
        if len(data) < _BITSET_HEADER.size:
            raise FileFormatError("The bitset file is truncated.")
        magic, bound, mode, stored_hash = _BITSET_HEADER.unpack_from(data)
        if magic != _BITSET_MAGIC:
            raise FileFormatError("The file is not a bitset file.")
        if stored_hash != form_hash(form):
            raise FileFormatError("The bitset belongs to a different form.")
        try:
            bitset_mode = BitsetMode(mode)
        except ValueError as e:
            raise FileFormatError(f"Unknown bitset mode: {mode}") from e
        body = data[_BITSET_HEADER.size :]
        if len(body) != 8 * _word_count(bound):
            raise FileFormatError("The bitset file is truncated.")
        raw = np.frombuffer(body, dtype="<u8").view(np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: bound + 1].astype(bool)
        return cls(form, bound, bits, bitset_mode)


def _word_count(bound: int) -> int:
    return (bound + 1 + 63) // 64


@dataclasses.dataclass
class CheckResult:
    """
    The outcome of checking numbers against a split local cover.

    Attributes:
        represented: For every represented number a the pair (x, y) with
            d·x² + T(y) = a.
        unresolved: The numbers for which no representation was found, sorted.
    """

    represented: dict[int, tuple[int, tuple[int, ...]]]
    unresolved: list[int]


def _local_agreement(
    cover: QuadraticForm, form: QuadraticForm
) -> tuple[bool, int]:
    # Compare local representability at every prime dividing 2·det(cover), for the
    # unit classes times p^e up to beyond the Jordan scales.
    modulus = 1
    for p in prime_divisors(2 * cover.determinant):
        top = 2 * valuation(2 * cover.determinant, p) + 1
        units = range(1, 8) if p == 2 else range(1, p)
        for e in range(top + 1):
            for u in units:
                if u % p == 0:
                    continue
                m = p**e * u
                if is_locally_represented_at(cover, p, m) != is_locally_represented_at(
                    form, p, m
                ):
                    return False, modulus
        modulus *= p ** (top + (3 if p == 2 else 1))
    return True, modulus


def find_split_local_cover(
    form: QuadraticForm, max_norm: int | None = None
) -> SplitLocalCover:
    """
    Find a split local cover d·x² ⊕ T of a quaternary form with minimal d.

    The vectors v of norm d = 1, 2, … are tried in lexicographic order (up to sign).
    For each of them T is the restriction of the form to the orthogonal complement of
    v, and the cover is accepted if it locally represents the same numbers as the form.

    Args:
        form: A quaternary form.
        max_norm: The largest norm d to try. The default is the configured cap.

    Returns:
        The cover.

    Raises:
        CoverNotFoundError: No cover exists with d up to the cap.
    """
    if form.dim != 4:
        raise ValueError("Split local covers are defined for quaternary forms.")
    if max_norm is None:
        max_norm = Settings.get_instance().max_cover_norm
    for v in short_vectors(form, max_norm):
        if next(e for e in v if e != 0) < 0:
            continue
        d = form.evaluate(v)
        complement, complement_basis = orthogonal_complement(form, v)
        cover = QuadraticForm.diagonal(d).direct_sum(complement)
        agrees, modulus = _local_agreement(cover, form)
        if agrees:
            logger.info("Split local cover of %s: d = %d, T = %s", form, d, complement)
            return SplitLocalCover(
                d, complement, form, (tuple(v), *complement_basis), modulus
            )
        logger.debug("Vector %s of norm %d gives no local cover", v, d)
    raise CoverNotFoundError(
        f"No split local cover of {form} with d <= {max_norm} exists.", max_norm
    )


def prism_for(form: QuadraticForm, bound: int, scale: float | None = None) -> list[int]:
    """
    Return the prism radii ⌈α·√(Y/λ_i)⌉ for the reduced diagonal entries λ_i.

    Args:
        form: The form.
        bound: The bound Y.
        scale: The relative size α. The default is the configured prism scale.
    """
    if scale is None:
        scale = Settings.get_instance().prism_scale
    return [
        math.ceil(scale * math.sqrt(bound / entry))
        for entry in reduce_form(form).form.diagonal_entries
    ]


def boolean_theta(
    form: QuadraticForm,
    bound: int,
    mode: BitsetMode = BitsetMode.EXACT,
    prism: Sequence[int] | None = None,
    with_witnesses: bool = True,
) -> RepresentedBitset:
    """
    Compute the bitset of the values of a form up to a bound.

    Args:
        form: The form, usually the ternary part of a split local cover.
        bound: The bound Y.
        mode: Exact mode evaluates every vector of the ellipsoid T(y) ≤ Y. Approximate
            mode only evaluates the vectors inside a prism.
        prism: The prism radii for approximate mode, in the coordinates of the reduced
            form. The default is given by `prism_for`.
        with_witnesses: Whether to keep a witness vector for every set bit.

    Returns:
        The bitset.

    Raises:
        ResourceLimitError: The bitset or the enumeration exceed the configured caps.
    """
    if bound < 0:
        raise ValueError("The bound must be nonnegative.")
    limit = Settings.get_instance().max_lattice_points
    if bound + 1 > limit:
        raise ResourceLimitError(
            f"A bitset with {bound + 1} bits exceeds the cap.", limit, bound + 1
        )
    if mode == BitsetMode.APPROXIMATE:
        if prism is None:
            prism = prism_for(form, bound)
    else:
        prism = None
        check_points(form, bound)

    reduction = reduce_form(form)
    n = form.dim

    def consume(blocks: Iterator[Block]) -> tuple[np.ndarray, np.ndarray | None]:
        bits = np.zeros(bound + 1, dtype=bool)
        table = np.zeros((bound + 1, n), dtype=np.int64) if with_witnesses else None
        for values, vectors in blocks:
            bits[values] = True
            if table is not None and vectors is not None:
                table[values] = reduction.to_original(vectors)
        return bits, table

    parts = map_slabs(form, bound, prism, with_witnesses, consume)
    bits = np.zeros(bound + 1, dtype=bool)
    witnesses = np.zeros((bound + 1, n), dtype=np.int64) if with_witnesses else None
    for part_bits, part_table in parts:
        if witnesses is not None and part_table is not None:
            fresh = part_bits & ~bits
            witnesses[fresh] = part_table[fresh]
        bits |= part_bits
    logger.info(
        "Boolean theta of %s up to %d (%s): %d values",
        form,
        bound,
        mode.name.lower(),
        int(np.count_nonzero(bits)),
    )
    return RepresentedBitset(form, bound, bits, mode, witnesses)


def precision(d: int, c: int, x: int) -> int:
    """Return the bitset bound Y = ⌈2·d·c·√X⌉."""
    return ceil_sqrt(4 * d * d * c * c * x)


def check_numbers(
    cover: SplitLocalCover,
    numbers: Sequence[int],
    c: int | None = None,
    bitset: RepresentedBitset | None = None,
    mode: BitsetMode = BitsetMode.APPROXIMATE,
) -> CheckResult:
    """
    Check numbers for representations a = d·x² + T(y).

    For every number a the values x = x₀, x₀ + 1, … are tried, where x₀ is the least
    x with a - d·x² ≤ Y, as long as a - d·x² ≥ 0 and at most c times. Every
    representation found is verified by evaluating the parent form.

    Args:
        cover: The split local cover.
        numbers: Positive integers.
        c: The number of attempts per number. The default is the configured value.
        bitset: The bitset of T. By default one is computed up to Y = ⌈2·d·c·√X⌉ for
            the largest number X.
        mode: The mode of the computed bitset.

    Returns:
        The represented numbers with their witnesses, and the unresolved numbers.
    """
    if c is None:
        c = Settings.get_instance().attempts
    if not numbers:
        return CheckResult({}, [])
    a = np.array(sorted(set(numbers)), dtype=np.int64)
    if a[0] < 1:
        raise ValueError("Only positive integers can be checked.")
    d = cover.d
    if bitset is None:
        bitset = boolean_theta(
            cover.complement, precision(d, c, int(a[-1])), mode=mode
        )
    y_bound = bitset.bound

    excess = np.maximum(a - y_bound, 0)
    x_min = np.ceil(np.sqrt(excess / d)).astype(np.int64)
    # Correct the floating point estimate of x₀ exactly.
    x_min = np.where(a - d * x_min * x_min > y_bound, x_min + 1, x_min)
    x_min = np.where(
        (x_min > 0) & (a - d * (x_min - 1) ** 2 <= y_bound), x_min - 1, x_min
    )

    found_x = np.full(len(a), -1, dtype=np.int64)
    for attempt in range(c):
        x = x_min + attempt
        rest = a - d * x * x
        valid = (found_x < 0) & (rest >= 0) & (rest <= y_bound)
        hit = np.zeros(len(a), dtype=bool)
        hit[valid] = bitset.bits[rest[valid]]
        found_x[hit] = x[hit]

    represented: dict[int, tuple[int, tuple[int, ...]]] = {}
    unresolved: list[int] = []
    for value, x in zip(a.tolist(), found_x.tolist()):
        if x < 0:
            unresolved.append(value)
            continue
        y = bitset.witness(value - d * x * x)
        if cover.parent.evaluate(cover.embed(x, y)) != value:
            raise ArithmeticError(f"The witness for {value} does not evaluate to it.")
        represented[value] = (x, y)
    logger.info(
        "Checked %d numbers against the cover: %d unresolved", len(a), len(unresolved)
    )
    return CheckResult(represented, unresolved)


def resolve_with_full_theta(form: QuadraticForm, unresolved: Sequence[int]) -> list[int]:
    """
    Decide the unresolved numbers on the original form.

    Small sets of numbers are decided from the representation bits of the form up to
    their maximum; otherwise every number is searched for individually.

    Args:
        form: The form.
        unresolved: Positive integers.

    Returns:
        The numbers which are not represented, sorted.
    """
    if not unresolved:
        return []
    numbers = sorted(set(unresolved))
    top = numbers[-1]
    limit = Settings.get_instance().max_lattice_points
    if estimated_points(form, top) <= limit:
        bits = represented_up_to(form, top)
        exceptions = [m for m in numbers if not bits[m]]
    else:
        exceptions = [m for m in numbers if find_vector(form, m) is None]
    logger.info(
        "Resolved %d numbers on %s: %d exceptions", len(numbers), form, len(exceptions)
    )
    return exceptions


def represent_numbers(
    form: QuadraticForm,
    numbers: Sequence[int],
    cover: SplitLocalCover | None = None,
    c: int | None = None,
) -> CheckResult:
    """
    Check numbers with an approximate bitset and retry the misses with an exact one.

    Args:
        form: A quaternary form.
        numbers: Positive integers.
        cover: The split local cover. By default one is searched for.
        c: The number of attempts per number.

    Returns:
        The combined result. The unresolved numbers still need
        `resolve_with_full_theta`.
    """
    if cover is None:
        cover = find_split_local_cover(form)
    first = check_numbers(cover, numbers, c, mode=BitsetMode.APPROXIMATE)
    if not first.unresolved:
        return first
    second = check_numbers(cover, first.unresolved, c, mode=BitsetMode.EXACT)
    represented = {**first.represented, **second.represented}
    return CheckResult(represented, second.unresolved)
