"""Eligible numbers and the closure loop which determines all exceptions of a form.

Combining the lower bound for the Eisenstein coefficient with the bound for the cusp
coefficient shows that a locally represented m is represented as soon as

  B(m) = √m′/τ(m) · ∏ (p-1)/(p+1) > C_f/C_E,

where m′ is m stripped of its anisotropic prime factors and the product runs over the
primes p ∤ N dividing m with χ(p) = -1. Numbers with B(m) ≤ C_f/C_E are called
eligible; only they can be exceptions. B is multiplicative, so that every prime factor
p of a squarefree eligible number satisfies B(p) ≤ C_f/(C_E·C_B), where C_B is the
product of all values B(p) < 1.

All comparisons are exact: B(m)² is rational, and B(m) ≤ T is decided as B(m)² ≤ T².

Usage example:

  constants = halmos_constants()
  session = EligibleSession(constants)
  len(session.primes)  # 5634
  report = closure_loop(constants.form, constants)
  report.exceptions  # [5]
"""

import dataclasses
import functools
import io
import itertools
import logging
import math
import struct
from collections.abc import Iterable, Iterator, Sequence
from fractions import Fraction
from pathlib import Path

import numpy as np

from pyalmostuniversal.arithmetic import (
    divisor_count,
    factorize,
    prime_divisors,
    primes_up_to,
    valuation,
)
from pyalmostuniversal.densities import local_obstructions
from pyalmostuniversal.eisenstein import BoundConstants
from pyalmostuniversal.enumeration import represented_up_to
from pyalmostuniversal.exceptions import FileFormatError, ResourceLimitError
from pyalmostuniversal.forms import QuadraticForm
from pyalmostuniversal.representability import (
    represent_numbers,
    resolve_with_full_theta,
)
from pyalmostuniversal.settings import Settings

__all__ = [
    "EligiblePrime",
    "EligibleSession",
    "ExceptionReport",
    "b_squared",
    "b_value",
    "c_b_squared",
    "iter_primes",
    "eligible_primes",
    "squarefree_eligible",
    "square_augment",
    "closure_loop",
    "write_numbers",
    "read_numbers",
    "primes_csv",
]

logger = logging.getLogger(__name__)

_NUMBERS_MAGIC = b"ELG1"
_NUMBERS_HEADER = struct.Struct("<4sQ")

# Augmented candidates contain anisotropic primes to at most this power.
DEFAULT_ANISOTROPIC_DEPTH = 4


def b_squared(m: int, constants: BoundConstants) -> Fraction:
    """
    Return B(m)², an exact rational number.

    Args:
        m: A positive integer.
        constants: The bound constants.

    Returns:
        m′/τ(m)² · ∏ ((p-1)/(p+1))², with m′ and the product as for B(m).
    """
    if m < 1:
        raise ValueError("B is defined for positive integers only.")
    value = Fraction(m, divisor_count(m) ** 2)
    for p, e in factorize(m):
        if p in constants.anisotropic:
            value /= p**e
        elif constants.level % p and constants.chi(p) == -1:
            value *= Fraction(p - 1, p + 1) ** 2
    return value


def b_value(m: int, constants: BoundConstants) -> float:
    """Return B(m) as a float, for display."""
    return math.sqrt(b_squared(m, constants))


def c_b_squared(constants: BoundConstants) -> Fraction:
    """
    Return C_B², the product of the values B(p)² < 1.

    Only the primes p ≤ 7 and the anisotropic primes can have B(p) < 1, so that these
    are the primes considered. Anisotropic primes larger than 7 contribute B(p)² =
    1/τ(p)² = 1/4.
    """
    candidates = {2, 3, 5, 7} | set(constants.anisotropic)
    return math.prod(
        (b for b in (b_squared(p, constants) for p in sorted(candidates)) if b < 1),
        start=Fraction(1),
    )


def iter_primes(start: int = 2) -> Iterator[int]:
    """Iterate over the primes p ≥ start in increasing order."""
    limit = max(1024, 2 * start)
    last = start - 1
    while True:
        for p in primes_up_to(limit).tolist():
            if p > last:
                yield p
                last = p
        limit *= 2


@dataclasses.dataclass(frozen=True)
class EligiblePrime:
    """
    An eligible prime.

    Attributes:
        p: The prime.
        b_squared: The exact value B(p)².
    """

    p: int
    b_squared: Fraction

    @property
    def b(self) -> float:
        """B(p) as a float."""
        return math.sqrt(self.b_squared)


def eligible_primes(
    constants: BoundConstants, threshold_squared: Fraction | None = None
) -> list[EligiblePrime]:
    """
    Return the primes p with B(p) ≤ C_f/(C_E·C_B).

    The primes are scanned in increasing order. B(p) > B(q) for primes p < q implies
    q - p ≤ 2, so that the scan may stop once two consecutive primes fail. This does
    not hold for anisotropic primes, so that the scan covers all of them.

    Args:
        constants: The bound constants.
        threshold_squared: The square of the threshold. The default is
            (C_f/(C_E·C_B))².

    Returns:
        The eligible primes, sorted by B(p) (and by p for equal values).
    """
    if threshold_squared is None:
        threshold_squared = (constants.c_f / constants.c_e) ** 2 / c_b_squared(
            constants
        )
    found = []
    failures = 0
    for p in iter_primes():
        b2 = b_squared(p, constants)
        if b2 <= threshold_squared:
            found.append(EligiblePrime(p, b2))
            failures = 0
            continue
        failures += 1
        if failures == 2 and p > max(constants.anisotropic, default=0):
            break
    found.sort(key=lambda e: (e.b_squared, e.p))
    logger.info(
        "%d eligible primes, the largest is %s",
        len(found),
        max((e.p for e in found), default=None),
    )
    return found


def squarefree_eligible(
    constants: BoundConstants,
    primes: Sequence[EligiblePrime] | None = None,
    threshold_squared: Fraction | None = None,
    max_count: int | None = None,
) -> list[int]:
    """
    Return all squarefree m with B(m) ≤ C_f/C_E.

    The products of eligible primes are generated like an odometer over the primes
    sorted by B: the last factor is replaced by the next prime until the product stops
    being eligible, and then the carry moves to the previous factor. A branch is only
    abandoned when even the smallest possible product of the remaining factors cannot
    bring B back below the threshold.

    Args:
        constants: The bound constants.
        primes: The eligible primes, sorted by B. The default is computed.
        threshold_squared: The square of the threshold. The default is (C_f/C_E)².
        max_count: The maximum number of eligible numbers. The default is the
            configured cap.

    Returns:
        The squarefree eligible numbers, including 1, in increasing order.

    Raises:
        ResourceLimitError: There are more eligible numbers than the cap allows.
    """
    if threshold_squared is None:
        threshold_squared = (constants.c_f / constants.c_e) ** 2
    if primes is None:
        primes = eligible_primes(constants)
    if max_count is None:
        max_count = Settings.get_instance().max_eligible_numbers
    values = [e.b_squared for e in primes]
    ps = [e.p for e in primes]
    k = len(ps)
    # suffix[i] is the smallest product of the B(p)² with index ≥ i.
    suffix = [Fraction(1)] * (k + 1)
    for i in range(k - 1, -1, -1):
        suffix[i] = suffix[i + 1] * min(values[i], Fraction(1))

    found = [1] if threshold_squared >= 1 else []
    # Each entry holds the next index to try, the product and B² of the prefix.
    stack: list[tuple[int, int, Fraction]] = [(0, 1, Fraction(1))]
    while stack:
        start, product, b2 = stack.pop()
        for i in range(start, k):
            candidate = b2 * values[i]
            if candidate * suffix[i + 1] > threshold_squared:
                break
            if candidate <= threshold_squared:
                found.append(product * ps[i])
                if len(found) > max_count:
                    raise ResourceLimitError(
                        "There are too many squarefree eligible numbers.",
                        max_count,
                        len(found),
                    )
            stack.append((i + 1, product * ps[i], candidate))
    found.sort()
    logger.info(
        "%d squarefree eligible numbers, the largest is %s",
        len(found),
        found[-1] if found else None,
    )
    return found


def _square_dominates(p: int, s: int) -> bool:
    # Whether B(s·p²) ≥ B(s·p), so that s·p² is not eligible if s·p is not. The
    # character factor of p occurs in both, and for p ∤ s the ratio of the squares
    # is 4p/9.
    return s % p == 0 or 4 * p >= 9


def _square_lower_bound(p: int, s_b2: Fraction) -> Fraction:
    # A lower bound for B(s·p²)² if p ∤ s·N is not anisotropic; increasing in p.
    return s_b2 * Fraction(p * p, 9) * Fraction(p - 1, p + 1) ** 2


def square_augment(
    exceptions: Iterable[int],
    constants: BoundConstants,
    primes: Iterable[int] | None = None,
    threshold_squared: Fraction | None = None,
    anisotropic_depth: int = DEFAULT_ANISOTROPIC_DEPTH,
) -> list[int]:
    """
    Return the eligible numbers s·p² for the exceptions s.

    Primes p with s·p not eligible are skipped without further checks, unless B(s·p²)
    may be smaller than B(s·p), which happens for anisotropic p and for p = 2 with s
    odd.

    Args:
        exceptions: The exceptions s.
        constants: The bound constants.
        primes: The primes p to consider. By default all primes are scanned until
            B(s·p²) provably exceeds the threshold.
        threshold_squared: The square of the threshold. The default is (C_f/C_E)².
        anisotropic_depth: The largest exponent of an anisotropic prime in a
            candidate. Multiplying by the square of an anisotropic prime never makes a
            number ineligible, so that the search must be cut off.

    Returns:
        The candidates for the next round, sorted.
    """
    if threshold_squared is None:
        threshold_squared = (constants.c_f / constants.c_e) ** 2
    candidates: set[int] = set()
    for s in sorted(set(exceptions)):
        if primes is not None:
            pool: Iterable[int] = primes
        else:
            pool = _augmenting_primes(s, constants, threshold_squared)
        for p in pool:
            if p in constants.anisotropic and valuation(s, p) + 2 > anisotropic_depth:
                continue
            if p not in constants.anisotropic and _square_dominates(p, s) and (
                b_squared(s * p, constants) > threshold_squared
            ):
                continue
            if b_squared(s * p * p, constants) <= threshold_squared:
                candidates.add(s * p * p)
    return sorted(candidates)


def _augmenting_primes(
    s: int, constants: BoundConstants, threshold_squared: Fraction
) -> Iterator[int]:
    special = set(prime_divisors(2 * s * constants.level)) | set(constants.anisotropic)
    yield from sorted(special)
    s_b2 = b_squared(s, constants)
    for p in iter_primes():
        if p in special:
            continue
        if _square_lower_bound(p, s_b2) > threshold_squared:
            return
        yield p


@dataclasses.dataclass
class ExceptionReport:
    """
    The exceptions of a form found by the closure loop.

    Attributes:
        form: The form.
        exceptions: All exceptions found, sorted.
        rounds: The exceptions S₁, S₂, … of the individual rounds.
        candidate_counts: The number of candidates checked in each round.
        definitive: Whether the exceptions are provably complete.
        bound: The desk-scale bound up to which all numbers were checked, if no
            constants were given.
        anisotropic: The anisotropic primes of the form. If there are any, the
            exceptions are only complete up to the anisotropic depth.
    """

    form: QuadraticForm
    exceptions: list[int]
    rounds: list[list[int]]
    candidate_counts: list[int]
    definitive: bool
    bound: int | None = None
    anisotropic: list[int] = dataclasses.field(default_factory=list)

    def to_dict(self) -> dict:
        """Return the JSON-serializable representation of the report."""
        return {
            "form": self.form.to_dict(),
            "exceptions": self.exceptions,
            "rounds": self.rounds,
            "candidate_counts": self.candidate_counts,
            "definitive": self.definitive,
            "bound": self.bound,
            "anisotropic": self.anisotropic,
        }


def _exceptions_among(form: QuadraticForm, numbers: Sequence[int]) -> list[int]:
    if not numbers:
        return []
    result = represent_numbers(form, numbers)
    return resolve_with_full_theta(form, result.unresolved)


def closure_loop(
    form: QuadraticForm,
    constants: BoundConstants | None = None,
    desk_bound: int | None = None,
    anisotropic_depth: int = DEFAULT_ANISOTROPIC_DEPTH,
) -> ExceptionReport:
    """
    Determine the exceptions of a quaternary form.

    With constants, the squarefree eligible numbers are checked first, which gives the
    exceptions S₁. The eligible numbers s·p² for s in S_i are then checked to give
    S_{i+1}, until S_h is empty. The union of the S_i is the set of all exceptions.

    Without constants, every number up to the desk bound is checked instead, and the
    result is not definitive.

    Args:
        form: A quaternary form without local obstructions.
        constants: The bound constants of the form.
        desk_bound: The bound for the check without constants. The default is the
            configured verification bound.
        anisotropic_depth: See `square_augment`.

    Returns:
        The exception report.

    Raises:
        ResourceLimitError: A computation exceeds a configured cap.
    """
    if form.dim != 4:
        raise ValueError("The closure loop is defined for quaternary forms.")
    if constants is None:
        if desk_bound is None:
            desk_bound = Settings.get_instance().verification_bound
        bits = represented_up_to(form, desk_bound)
        exceptions = np.flatnonzero(~bits[1:]).astype(np.int64) + 1
        found = exceptions.tolist()
        logger.info("Exceptions of %s up to %d: %s", form, desk_bound, found)
        return ExceptionReport(
            form, found, [found], [desk_bound], definitive=False, bound=desk_bound
        )

    obstructions = local_obstructions(form)
    if obstructions:
        raise ValueError(
            f"{form} does not represent {obstructions[0][1]} over the "
            f"{obstructions[0][0]}-adic integers."
        )
    session = EligibleSession(constants)
    numbers = session.squarefree
    rounds = [_exceptions_among(form, numbers)]
    counts = [len(numbers)]
    logger.info("Round 1: %d candidates, exceptions %s", len(numbers), rounds[0])
    while rounds[-1]:
        candidates = square_augment(
            rounds[-1], constants, anisotropic_depth=anisotropic_depth
        )
        counts.append(len(candidates))
        rounds.append(_exceptions_among(form, candidates))
        logger.info(
            "Round %d: %d candidates, exceptions %s",
            len(rounds),
            len(candidates),
            rounds[-1],
        )
    exceptions = sorted(set(itertools.chain.from_iterable(rounds)))
    return ExceptionReport(
        form,
        exceptions,
        rounds,
        counts,
        definitive=not constants.anisotropic,
        anisotropic=sorted(constants.anisotropic),
    )


class EligibleSession:
    """
    The thresholds, eligible primes and squarefree eligible numbers for some constants.

    The primes and numbers are computed on first access.
    """

    def __init__(self, constants: BoundConstants):
        """
        Initialize the session.

        Args:
            constants: The bound constants.
        """
        self.constants = constants

    @functools.cached_property
    def c_b_squared(self) -> Fraction:
        """C_B²."""
        return c_b_squared(self.constants)

    @functools.cached_property
    def number_threshold_squared(self) -> Fraction:
        """(C_f/C_E)², the bound for B(m)² of eligible numbers."""
        return (self.constants.c_f / self.constants.c_e) ** 2

    @functools.cached_property
    def prime_threshold_squared(self) -> Fraction:
        """(C_f/(C_E·C_B))², the bound for B(p)² of eligible primes."""
        return self.number_threshold_squared / self.c_b_squared

    @functools.cached_property
    def primes(self) -> list[EligiblePrime]:
        """The eligible primes, sorted by B(p)."""
        return eligible_primes(self.constants, self.prime_threshold_squared)

    @functools.cached_property
    def squarefree(self) -> list[int]:
        """The squarefree eligible numbers, in increasing order."""
        return squarefree_eligible(
            self.constants, self.primes, self.number_threshold_squared
        )

    def is_eligible(self, m: int) -> bool:
        """Return whether B(m) ≤ C_f/C_E."""
        return b_squared(m, self.constants) <= self.number_threshold_squared


def write_numbers(path: Path | str, numbers: Sequence[int]) -> None:
    """
    Write numbers in the ELG1 format.

    The file consists of the magic b"ELG1", the count (u64) and the numbers as
    little-endian u64 values.
    """
    data = np.array(numbers, dtype="<u8")
    Path(path).write_bytes(_NUMBERS_HEADER.pack(_NUMBERS_MAGIC, len(data)) + data.tobytes())


def read_numbers(path: Path | str) -> list[int]:
    """
    Read numbers written in the ELG1 format.

    Raises:
        FileFormatError: The file is malformed.
    """
    data = Path(path).read_bytes()
    if len(data) < _NUMBERS_HEADER.size:
        raise FileFormatError("The numbers file is truncated.")
    magic, count = _NUMBERS_HEADER.unpack_from(data)
    if magic != _NUMBERS_MAGIC:
        raise FileFormatError("The file is not a numbers file.")
    body = data[_NUMBERS_HEADER.size :]
    if len(body) != 8 * count:
        raise FileFormatError("The numbers file is truncated.")
    return [int(n) for n in np.frombuffer(body, dtype="<u8").tolist()]


def primes_csv(primes: Sequence[EligiblePrime]) -> str:
    """Return eligible primes as CSV text with the columns p, B and B_squared."""
    out = io.StringIO()
    out.write("p,B,B_squared\n")
    for e in primes:
        out.write(f"{e.p},{e.b:.12g},{e.b_squared}\n")
    return out.getvalue()
