"""Local densities of quaternary (and other) forms over the p-adic integers.

The local density β_p(m) is the limit of r_{p^k}(m)/p^{k(n-1)}, where r_{p^k}(m) counts
the vectors x modulo p^k with Q(x) ≡ m (mod p^k). It is computed exactly from the
Jordan decomposition of the form by splitting the solutions into Good, Zero and Bad
types:

* Good solutions lift uniformly, so that their density is a finite count.
* Zero solutions x ≡ 0 (mod p) reduce to the density of m/p².
* Bad solutions reduce to densities of auxiliary forms with shifted scales.

Usage example:

  halmos = QuadraticForm.diagonal(1, 2, 7, 13)
  local_density(halmos, 2, 1)  # Fraction(3, 4)
  anisotropic_primes(halmos)  # set()
"""

import dataclasses
import functools
import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from enum import Enum
from fractions import Fraction

import numpy as np

from pyalmostuniversal.arithmetic import (
    fraction_valuation,
    hilbert_symbol,
    is_padic_square,
    kronecker,
    prime_divisors,
    require_prime,
    unit_part,
    valuation,
)
from pyalmostuniversal.exceptions import ResourceLimitError
from pyalmostuniversal.forms import QuadraticForm
from pyalmostuniversal.settings import Settings

__all__ = [
    "JordanBlock",
    "JordanDecomposition",
    "SolutionType",
    "PrimeDensity",
    "BetaInfinity",
    "DensityReport",
    "jordan_decompose",
    "count_mod",
    "local_density",
    "density_breakdown",
    "beta_infinity",
    "stable_exponent",
    "is_locally_represented",
    "is_locally_represented_at",
    "hasse_invariant",
    "is_anisotropic",
    "anisotropic_primes",
    "local_obstructions",
    "density_report",
]

logger = logging.getLogger(__name__)

# The number of residue vectors handled per numpy chunk.
_CHUNK = 1 << 18


@dataclasses.dataclass(frozen=True)
class JordanBlock:
    """
    A Jordan block p^scale·Q_j of a form over the p-adic integers.

    Attributes:
        scale: The scale exponent v_j.
        unit: The Gram matrix of the unimodular block Q_j, with entries reduced modulo p
            (odd p) or modulo 8 (p = 2). It has dimension 1, or dimension 2 for p = 2.
    """

    scale: int
    unit: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        """The dimension of the block."""
        return len(self.unit)


@dataclasses.dataclass(frozen=True)
class JordanDecomposition:
    """
    A Jordan decomposition Q ≅ Σ_j p^{v_j}·Q_j over the p-adic integers.

    The blocks are sorted by scale. Coordinates are numbered block by block.

    Attributes:
        p: The prime.
        blocks: The Jordan blocks.
    """

    p: int
    blocks: tuple[JordanBlock, ...]

    @property
    def dim(self) -> int:
        """The dimension of the form."""
        return sum(block.dim for block in self.blocks)

    @property
    def coordinate_scales(self) -> tuple[int, ...]:
        """The scale exponent of every coordinate."""
        return tuple(block.scale for block in self.blocks for _ in range(block.dim))

    def indices(self, scale: int) -> tuple[int, ...]:
        """
        Return the coordinates of a given scale class.

        Args:
            scale: 0 or 1 for the coordinates of that scale, 2 for all coordinates of
                scale at least 2.

        Returns:
            The coordinates S₀, S₁ or S₂.
        """
        scales = self.coordinate_scales
        if scale >= 2:
            return tuple(i for i, v in enumerate(scales) if v >= 2)
        return tuple(i for i, v in enumerate(scales) if v == scale)

    @property
    def s0(self) -> int:
        """The number of coordinates of scale 0."""
        return len(self.indices(0))

    @property
    def s1(self) -> int:
        """The number of coordinates of scale 1."""
        return len(self.indices(1))

    @property
    def s2(self) -> int:
        """The number of coordinates of scale at least 2."""
        return len(self.indices(2))

    def lift_gram(self) -> tuple[tuple[int, ...], ...]:
        """Return the block diagonal integer Gram matrix Σ p^{v_j}·Q_j."""
        n = self.dim
        rows = [[0] * n for _ in range(n)]
        offset = 0
        for block in self.blocks:
            factor = self.p**block.scale
            for i in range(block.dim):
                for j in range(block.dim):
                    rows[offset + i][offset + j] = factor * block.unit[i][j]
            offset += block.dim
        return tuple(tuple(row) for row in rows)

    def rescaled(self, shift: dict[int, int]) -> "JordanDecomposition":
        """
        Return the decomposition with shifted scales.

        Args:
            shift: Maps a scale class (0, 1 or 2) to the change of its scale exponents.

        Returns:
            The decomposition of the auxiliary form.
        """
        blocks = [
            JordanBlock(block.scale + shift[min(block.scale, 2)], block.unit)
            for block in self.blocks
        ]
        return JordanDecomposition(self.p, tuple(sorted(blocks, key=lambda b: b.scale)))


class SolutionType(str, Enum):
    """
    The type of a solution x of Q(x) ≡ m modulo a prime power.

    The types are defined in terms of the Jordan coordinates:

    1. Good: Some coordinate of scale 0 is nonzero modulo p.
    2. Zero: All coordinates are zero modulo p.
    3. Bad I: The solution is not Good, but some coordinate of scale 1 is nonzero.
    4. Bad II: The solution is neither Good nor Bad I, but some coordinate of scale at
       least 2 is nonzero.
    """

    GOOD = "good"
    ZERO = "zero"
    BAD_I = "bad-i"
    BAD_II = "bad-ii"


@dataclasses.dataclass(frozen=True)
class PrimeDensity:
    """
    The local density at a prime, split by solution type.

    Attributes:
        p: The prime.
        density: The local density β_p(m).
        good: The contribution of Good solutions.
        zero: The contribution of Zero solutions.
        bad: The contribution of Bad solutions.
    """

    p: int
    density: Fraction
    good: Fraction
    zero: Fraction
    bad: Fraction


@dataclasses.dataclass(frozen=True)
class BetaInfinity:
    """
    The archimedean density coefficient·π²/√D of a quaternary form.

    Attributes:
        coefficient: The rational coefficient, which equals m.
        determinant: The determinant D.
    """

    coefficient: Fraction
    determinant: int

    @property
    def value(self) -> float:
        """The numerical value."""
        return float(self.coefficient) * math.pi**2 / math.sqrt(self.determinant)

    def __str__(self) -> str:
        return f"{self.coefficient}·π²/√{self.determinant}"


@dataclasses.dataclass(frozen=True)
class DensityReport:
    """
    The local densities of a form for a number.

    Attributes:
        m: The number.
        densities: The local densities for all primes dividing 2·D·m, keyed by prime.
        beta_infinity: The archimedean density.
        locally_represented: Whether m is represented over all p-adic integers.
    """

    m: int
    densities: dict[int, PrimeDensity]
    beta_infinity: BetaInfinity
    locally_represented: bool

    @property
    def local_product(self) -> Fraction:
        """The product of the listed local densities."""
        return math.prod((d.density for d in self.densities.values()), start=Fraction(1))


def _valuation(x: Fraction, p: int) -> float:
    return math.inf if x == 0 else fraction_valuation(x, p)


def _residue(x: Fraction, modulus: int) -> int:
    return x.numerator * pow(x.denominator, -1, modulus) % modulus


def _eliminate(g: list[list[Fraction]], size: int) -> list[list[Fraction]]:
    # The Schur complement of the leading size×size block.
    n = len(g)
    rest = range(size, n)
    if size == 1:
        a = g[0][0]
        return [[g[k][l] - g[k][0] * g[0][l] / a for l in rest] for k in rest]
    a, b, c = g[0][0], g[0][1], g[1][1]
    delta = a * c - b * b
    result = []
    for k in rest:
        u = (c * g[k][0] - b * g[k][1]) / delta
        w = (a * g[k][1] - b * g[k][0]) / delta
        result.append([g[k][l] - u * g[0][l] - w * g[1][l] for l in rest])
    return result


def jordan_decompose(form: QuadraticForm, p: int) -> JordanDecomposition:
    """
    Return a Jordan decomposition of a form over the p-adic integers.

    The form is split by rational changes of basis whose denominators are prime to p.
    For odd p all blocks are one-dimensional; for p = 2 two-dimensional blocks occur
    when an off-diagonal entry has a smaller valuation than every diagonal entry.

    Args:
        form: The form.
        p: A prime.

    Returns:
        The Jordan decomposition.
    """
    require_prime(p)
    modulus = 8 if p == 2 else p
    g = [[Fraction(e) for e in row] for row in form.gram]
    blocks: list[JordanBlock] = []
    while g:
        n = len(g)
        vd, i = min((_valuation(g[k][k], p), k) for k in range(n))
        vo, oi, oj = min(
            ((_valuation(g[k][l], p), k, l) for k in range(n) for l in range(k + 1, n)),
            default=(math.inf, 0, 0),
        )
        if vo < vd and p != 2:
            # e_i -> e_i + e_j gives a diagonal entry of valuation vo.
            gii = g[oi][oi] + 2 * g[oi][oj] + g[oj][oj]
            for k in range(n):
                if k != oi:
                    g[oi][k] += g[oj][k]
                    g[k][oi] = g[oi][k]
            g[oi][oi] = gii
            pivot = [oi]
        elif vo < vd:
            pivot = [oi, oj]
        else:
            pivot = [i]

        order = pivot + [k for k in range(n) if k not in pivot]
        g = [[g[a][b] for b in order] for a in order]
        size = len(pivot)
        scale = int(_valuation(g[0][1] if size == 2 else g[0][0], p))
        unit = tuple(
            tuple(_residue(g[a][b] / Fraction(p) ** scale, modulus) for b in range(size))
            for a in range(size)
        )
        blocks.append(JordanBlock(scale, unit))
        g = _eliminate(g, size)

    blocks.sort(key=lambda b: b.scale)
    return JordanDecomposition(p, tuple(blocks))


def _residue_vectors(modulus: int, n: int) -> Iterator[np.ndarray]:
    # All vectors of (Z/modulus)^n, in chunks of shape (k, n).
    inner = 0
    while inner < n and modulus ** (inner + 1) <= _CHUNK:
        inner += 1
    if inner:
        tail = np.indices((modulus,) * inner, dtype=np.int64).reshape(inner, -1).T
    else:
        tail = np.zeros((1, 0), dtype=np.int64)
    for head in itertools.product(range(modulus), repeat=n - inner):
        chunk = np.empty((len(tail), n), dtype=np.int64)
        chunk[:, : n - inner] = head
        chunk[:, n - inner :] = tail
        yield chunk


def _values(gram: Sequence[Sequence[int]], x: np.ndarray, modulus: int) -> np.ndarray:
    g = np.array(gram, dtype=np.int64).reshape(len(gram), len(gram)) % modulus
    return np.einsum("ki,ij,kj->k", x, g, x) % modulus


def _check_cap(requested: int, what: str) -> None:
    limit = Settings.get_instance().count_mod_cap
    if requested > limit:
        raise ResourceLimitError(
            f"Counting {what} needs {requested} residue vectors.", limit, requested
        )


def _count_total(gram: Sequence[Sequence[int]], modulus: int, m: int) -> int:
    n = len(gram)
    if n == 0:
        return 1 if m % modulus == 0 else 0
    _check_cap(modulus ** (n - 1) + modulus**2, "solutions")

    # table[b, r] counts the values y with a·y² + 2·b·y ≡ r.
    a = gram[n - 1][n - 1] % modulus
    y = np.arange(modulus, dtype=np.int64)
    b = np.arange(modulus, dtype=np.int64)
    r = (a * y * y % modulus + 2 * np.outer(b, y)) % modulus
    flat = (b[:, None] * modulus + r).ravel()
    table = np.bincount(flat, minlength=modulus * modulus).reshape(modulus, modulus)

    if n == 1:
        return int(table[0, m % modulus])
    total = 0
    head = [row[: n - 1] for row in gram[: n - 1]]
    border = np.array([gram[i][n - 1] for i in range(n - 1)], dtype=np.int64) % modulus
    for x in _residue_vectors(modulus, n - 1):
        c = _values(head, x, modulus)
        bx = x @ border % modulus
        total += int(table[bx, (m - c) % modulus].sum())
    return total


def _type_mask(
    jordan: JordanDecomposition, x: np.ndarray, kind: SolutionType
) -> np.ndarray:
    nonzero = x % jordan.p != 0
    s0, s1, s2 = (list(jordan.indices(k)) for k in range(3))
    good = nonzero[:, s0].any(axis=1)
    if kind == SolutionType.GOOD:
        return good
    if kind == SolutionType.ZERO:
        return ~nonzero.any(axis=1)
    bad_i = ~good & nonzero[:, s1].any(axis=1)
    if kind == SolutionType.BAD_I:
        return bad_i
    return ~good & ~nonzero[:, s1].any(axis=1) & nonzero[:, s2].any(axis=1)


def _count_lift(
    jordan: JordanDecomposition, v: int, m: int, kind: SolutionType
) -> int:
    n = jordan.dim
    modulus = jordan.p**v
    _check_cap(modulus**n, "solutions of a given type")
    gram = jordan.lift_gram()
    total = 0
    for x in _residue_vectors(modulus, n):
        hits = _values(gram, x, modulus) == m % modulus
        total += int((hits & _type_mask(jordan, x, kind)).sum())
    return total


def count_mod(
    form: QuadraticForm, p: int, v: int, m: int, kind: SolutionType | None = None
) -> int:
    """
    Count the solutions of Q(x) ≡ m modulo p^v.

    Total counts are computed from the Gram matrix of the form. Counts restricted to a
    solution type refer to the Jordan coordinates and are computed by enumerating the
    Jordan decomposition's integer lift, which has the same counts as the form.

    Args:
        form: The form.
        p: A prime.
        v: The exponent, at least 1.
        m: The number.
        kind: An optional solution type.

    Returns:
        The number of solutions x in (Z/p^v)ⁿ.

    Raises:
        ResourceLimitError: The count needs more residue vectors than the configured
            cap allows.
    """
    require_prime(p)
    if v < 1:
        raise ValueError("The exponent must be positive.")
    if kind is None:
        return _count_total(form.gram, p**v, m)
    return _count_lift(jordan_decompose(form, p), v, m, kind)


def _diagonal_count(units: Sequence[int], r: int, p: int) -> int:
    # Solutions y in F_p^s of Σ u_i·y_i² = r for a nondegenerate diagonal form.
    s = len(units)
    if s == 0:
        return 1 if r % p == 0 else 0
    d = math.prod(units)
    if s % 2 == 0:
        eta = kronecker((-1) ** (s // 2) * d, p)
        nu = p - 1 if r % p == 0 else -1
        return p ** (s - 1) + nu * p ** ((s - 2) // 2) * eta
    if r % p == 0:
        return p ** (s - 1)
    eta = kronecker((-1) ** ((s - 1) // 2) * r * d, p)
    return p ** (s - 1) + p ** ((s - 1) // 2) * eta


@functools.lru_cache(maxsize=1 << 16)
def _good(jordan: JordanDecomposition, r: int) -> Fraction:
    # The Good density, which depends on m modulo p (odd p) or modulo 8 (p = 2).
    p, n = jordan.p, jordan.dim
    if jordan.s0 == 0:
        return Fraction(0)
    if p != 2:
        units = [b.unit[0][0] for b in jordan.blocks if b.scale == 0]
        count = p ** (n - jordan.s0) * (_diagonal_count(units, r, p) - (r % p == 0))
        return Fraction(count, p ** (n - 1))
    count = _count_lift(jordan, 3, r, SolutionType.GOOD)
    return Fraction(count, 8 ** (n - 1))


def _parts(jordan: JordanDecomposition, m: int) -> tuple[Fraction, Fraction, Fraction]:
    p, n = jordan.p, jordan.dim
    good = _good(jordan, m % (8 if p == 2 else p))
    zero = Fraction(0)
    bad = Fraction(0)
    if m % p == 0:
        s0, s1, s2 = jordan.s0, jordan.s1, jordan.s2
        # Bad I: Q(x) = p·Q'(y) with scales v+1 on S₀ and v-1 elsewhere.
        if s1 + s2:
            shifted = jordan.rescaled({0: 1, 1: -1, 2: -1})
            bad += Fraction(p) ** (s1 + s2 - n + 1) * _good(
                shifted, (m // p) % (8 if p == 2 else p)
            )
        if m % (p * p) == 0:
            zero = Fraction(p) ** (2 - n) * _beta(jordan, m // (p * p))
            # Bad II: Q(x) = p²·Q''(y) with scales v-2 on S₂, restricted to x_{S₂} ≢ 0.
            if s2:
                shifted = jordan.rescaled({0: 0, 1: 0, 2: -2})
                restricted = _beta(shifted, m // (p * p)) - Fraction(p) ** (
                    -s2
                ) * _beta(jordan, m // (p * p))
                bad += Fraction(p) ** (2 - s0 - s1) * restricted
    return good, zero, bad


@functools.lru_cache(maxsize=1 << 16)
def _beta(jordan: JordanDecomposition, m: int) -> Fraction:
    return sum(_parts(jordan, m), start=Fraction(0))


def local_density(form: QuadraticForm, p: int, m: int) -> Fraction:
    """
    Return the local density β_p(m) of a form.

    Args:
        form: The form.
        p: A prime.
        m: A positive integer.

    Returns:
        The exact local density.
    """
    if m < 1:
        raise ValueError("The local density is computed for positive integers only.")
    return _beta(jordan_decompose(form, p), m)


def density_breakdown(form: QuadraticForm, p: int, m: int) -> PrimeDensity:
    """Return the local density β_p(m) together with its Good, Zero and Bad parts."""
    if m < 1:
        raise ValueError("The local density is computed for positive integers only.")
    good, zero, bad = _parts(jordan_decompose(form, p), m)
    return PrimeDensity(p, good + zero + bad, good, zero, bad)


def beta_infinity(form: QuadraticForm, m: int) -> BetaInfinity:
    """
    Return the archimedean density π²·m/√D of a quaternary form.

    Raises:
        ValueError: The form is not quaternary.
    """
    if form.dim != 4:
        raise ValueError("The archimedean density is implemented for quaternary forms.")
    return BetaInfinity(Fraction(m), form.determinant)


def stable_exponent(form: QuadraticForm, p: int, m: int) -> int:
    """Return the exponent ord_p(m) + 2·ord_p(2D) + 3 beyond which counts stabilize."""
    return valuation(m, p) + 2 * valuation(2 * form.determinant, p) + 3


def _relevant_primes(form: QuadraticForm, m: int) -> list[int]:
    primes = set(prime_divisors(2 * form.determinant))
    if form.dim <= 2:
        primes |= set(prime_divisors(m))
    return sorted(primes)


@functools.lru_cache(maxsize=1 << 16)
def _represented_class(form: QuadraticForm, p: int, order: int, unit: int) -> bool:
    return local_density(form, p, p**order * unit) > 0


def _class_representative(m: int, p: int) -> tuple[int, int]:
    # m and m·u² have the same p-adic representability for every unit u.
    order = valuation(m, p)
    u = unit_part(m, p)
    if p == 2:
        return order, u % 8
    if kronecker(u, p) == 1:
        return order, 1
    return order, next(k for k in range(2, p) if kronecker(k, p) == -1)


def is_locally_represented(form: QuadraticForm, m: int) -> bool:
    """
    Return whether a number is represented by a form over every p-adic integers.

    Only the primes dividing 2·D need checking (for forms of dimension at most 2 also
    the primes dividing m), since unimodular forms of dimension at least 3 represent
    every p-adic integer for odd p.

    Args:
        form: The form.
        m: A positive integer.

    Returns:
        Whether all local densities β_p(m) are positive.
    """
    if m < 1:
        raise ValueError("Only positive integers are checked.")
    if form.dim == 0:
        return False
    return all(
        _represented_class(form, p, *_class_representative(m, p))
        for p in _relevant_primes(form, m)
    )


def is_locally_represented_at(form: QuadraticForm, p: int, m: int) -> bool:
    """Return whether a positive integer is represented over the p-adic integers."""
    require_prime(p)
    if m < 1:
        raise ValueError("Only positive integers are checked.")
    return _represented_class(form, p, *_class_representative(m, p))


def _diagonal_coefficients(form: QuadraticForm) -> list[Fraction]:
    # a_i = Δ_i/Δ_{i-1} for the leading principal minors Δ_i.
    minors = [1] + [
        QuadraticForm._unchecked(
            tuple(row[:k] for row in form.gram[:k])
        ).determinant
        for k in range(1, form.dim + 1)
    ]
    return [Fraction(minors[k], minors[k - 1]) for k in range(1, form.dim + 1)]


def hasse_invariant(form: QuadraticForm, p: int) -> int:
    """Return the Hasse invariant ∏_{i<j} (a_i, a_j)_p of a rational diagonalization."""
    require_prime(p)
    a = _diagonal_coefficients(form)
    return math.prod(
        (hilbert_symbol(a[i], a[j], p) for i in range(len(a)) for j in range(i + 1, len(a))),
        start=1,
    )


def is_anisotropic(form: QuadraticForm, p: int) -> bool:
    """
    Return whether Q(x) = 0 has only the trivial solution over the p-adic numbers.

    Args:
        form: A form of positive dimension.
        p: A prime.

    Returns:
        Whether the form is anisotropic at p.
    """
    require_prime(p)
    n = form.dim
    if n == 0:
        raise ValueError("The trivial form has no isotropy.")
    if n == 1:
        return True
    d = form.determinant
    if n == 2:
        return not is_padic_square(-d, p)
    epsilon = hasse_invariant(form, p)
    if n == 3:
        return hilbert_symbol(-1, -d, p) != epsilon
    if n == 4:
        return is_padic_square(d, p) and epsilon == -hilbert_symbol(-1, -1, p)
    return False


def anisotropic_primes(form: QuadraticForm) -> set[int]:
    """
    Return the primes at which a form is anisotropic.

    Args:
        form: A form of dimension at least 3.

    Returns:
        The anisotropic primes, which all divide 2·D. Forms of dimension at least 5
        have none.

    Raises:
        ValueError: The form has dimension 1 or 2, for which the set is infinite.
    """
    if form.dim <= 2:
        raise ValueError("Forms of dimension at most 2 are anisotropic at infinitely many primes.")
    return {p for p in prime_divisors(2 * form.determinant) if is_anisotropic(form, p)}


def local_obstructions(form: QuadraticForm) -> list[tuple[int, int]]:
    """
    Return witnesses of numbers which the form does not represent locally.

    For every prime p dividing 2·D and every unit u modulo p (modulo 8 for p = 2) the
    numbers u and p·u are checked. This finds an obstruction whenever one exists,
    since a number p²·m is locally represented if m is.

    Args:
        form: A form of dimension at least 3.

    Returns:
        Pairs (p, m) of a prime and a positive integer m which is not represented over
        the p-adic integers, sorted.
    """
    found = []
    for p in prime_divisors(2 * form.determinant):
        modulus = 8 if p == 2 else p
        for order in (0, 1):
            for u in range(1, modulus):
                if u % p == 0:
                    continue
                if not _represented_class(form, p, *_class_representative(p**order * u, p)):
                    found.append((p, p**order * u))
    return sorted(found)


def density_report(form: QuadraticForm, m: int) -> DensityReport:
    """
    Return the local densities of a quaternary form for a number.

    Args:
        form: A quaternary form.
        m: A positive integer.

    Returns:
        The densities for all primes dividing 2·D·m, and the archimedean density.
    """
    primes = sorted(set(prime_divisors(2 * form.determinant * m)))
    densities = {p: density_breakdown(form, p, m) for p in primes}
    represented = all(
        densities[p].density > 0 for p in _relevant_primes(form, m)
    )
    return DensityReport(m, densities, beta_infinity(form, m), represented)
