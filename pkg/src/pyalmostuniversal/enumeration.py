"""Enumeration of lattice vectors inside the ellipsoid Q(x) ≤ B.

The vectors are enumerated coordinate by coordinate, from the last to the first, with
the interval of each coordinate derived from the Cholesky decomposition of the Gram
matrix (Fincke–Pohst). The two innermost coordinates are handled as vectorized numpy
blocks and all values are computed with exact integer arithmetic; floating point is
only used to bound the coordinate intervals, which are widened slightly.
"""

import io
import logging
import math
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np

from pyalmostuniversal.exceptions import ResourceLimitError
from pyalmostuniversal.forms import (
    ExceptionTarget,
    QuadraticForm,
    orthogonal_complement,
    reduce_form,
)
from pyalmostuniversal.settings import Settings

__all__ = [
    "estimated_points",
    "check_points",
    "iter_blocks",
    "map_slabs",
    "theta_coefficients",
    "theta_csv",
    "represented_values",
    "represented_up_to",
    "is_represented",
    "find_vector",
    "short_vectors",
    "truant",
]

logger = logging.getLogger(__name__)

_SLACK = 1e-7

# Dimension 4 and higher use orthogonal splittings above this many lattice points.
_DIRECT_LIMIT = 5_000_000

Block = tuple[np.ndarray, np.ndarray | None]


def _widen(radius: Any) -> Any:
    # Relative slack for rounding errors, and an absolute one for points at the center.
    return radius * (1 + _SLACK) + _SLACK


def estimated_points(form: QuadraticForm, bound: int) -> float:
    """Return an upper estimate of the number of lattice points with Q(x) ≤ bound."""
    n = form.dim
    if n == 0:
        return 1.0
    unit_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    radius = math.sqrt(bound) + math.sqrt(n * max(form.diagonal_entries))
    return unit_ball * radius**n / math.sqrt(form.determinant)


def check_points(form: QuadraticForm, bound: int) -> None:
    """Raise a ResourceLimitError if the ellipsoid Q(x) ≤ bound has too many points."""
    limit = Settings.get_instance().max_lattice_points
    requested = estimated_points(form, bound)
    if requested > limit:
        raise ResourceLimitError(
            f"Enumerating the ellipsoid Q(x) <= {bound} for {form} needs about "
            f"{requested:.3g} lattice points.",
            limit,
            requested,
        )


class _Ellipsoid:
    """Coordinate bounds for the ellipsoid Q(x) ≤ bound of a (reduced) Gram matrix."""

    def __init__(
        self, form: QuadraticForm, bound: int, prism: Sequence[int] | None = None
    ):
        self.n = form.dim
        self.bound = bound
        self.gram = [list(row) for row in form.gram]
        self.prism = list(prism) if prism is not None else None
        if self.n == 0:
            self.q, self.mu = [], []
            return
        r = np.linalg.cholesky(np.array(form.gram, dtype=float)).T
        self.q = [float(r[i, i] ** 2) for i in range(self.n)]
        self.mu = [
            [float(r[i, j] / r[i, i]) if j > i else 0.0 for j in range(self.n)]
            for i in range(self.n)
        ]

    def interval(self, i: int, center: float, rest: float) -> tuple[int, int]:
        if rest < -_SLACK * (self.bound + 1):
            return 1, 0
        radius = _widen(math.sqrt(max(rest, 0.0) / self.q[i]))
        lo, hi = math.ceil(center - radius), math.floor(center + radius)
        if self.prism is not None:
            lo, hi = max(lo, -self.prism[i]), min(hi, self.prism[i])
        return lo, hi

    def outermost_interval(self) -> tuple[int, int]:
        n = self.n
        return self.interval(n - 1, 0.0, float(self.bound))

    def blocks(
        self, with_vectors: bool, slab: tuple[int, int] | None = None
    ) -> Iterator[Block]:
        n = self.n
        if n == 0:
            yield np.zeros(1, dtype=np.int64), (
                np.zeros((1, 0), dtype=np.int64) if with_vectors else None
            )
            return
        if n == 1:
            lo, hi = self.interval(0, 0.0, float(self.bound))
            x0 = np.arange(lo, hi + 1, dtype=np.int64)
            values = self.gram[0][0] * x0 * x0
            mask = values <= self.bound
            yield values[mask], (x0[mask].reshape(-1, 1) if with_vectors else None)
            return
        outer = [0] * n
        yield from self._outer(n - 1, 0.0, outer, with_vectors, slab)

    def _outer(
        self,
        i: int,
        partial: float,
        outer: list[int],
        with_vectors: bool,
        slab: tuple[int, int] | None,
    ) -> Iterator[Block]:
        if i == 1:
            yield from self._inner(partial, outer, with_vectors)
            return
        center = -sum(self.mu[i][j] * outer[j] for j in range(i + 1, self.n))
        lo, hi = self.interval(i, center, self.bound - partial)
        if slab is not None and i == self.n - 1:
            lo, hi = max(lo, slab[0]), min(hi, slab[1])
        for x in range(lo, hi + 1):
            outer[i] = x
            term = self.q[i] * (x - center) ** 2
            yield from self._outer(i - 1, partial + term, outer, with_vectors, None)
        outer[i] = 0

    def _inner(
        self, partial: float, outer: list[int], with_vectors: bool
    ) -> Iterator[Block]:
        n, g = self.n, self.gram
        tail = range(2, n)

        # Exact contributions of the fixed outer coordinates.
        q_out = sum(g[a][b] * outer[a] * outer[b] for a in tail for b in tail)
        l0 = 2 * sum(g[0][j] * outer[j] for j in tail)
        l1 = 2 * sum(g[1][j] * outer[j] for j in tail)

        center1 = -sum(self.mu[1][j] * outer[j] for j in tail)
        lo1, hi1 = self.interval(1, center1, self.bound - partial)
        if hi1 < lo1:
            return
        x1 = np.arange(lo1, hi1 + 1, dtype=np.int64)
        rest = self.bound - partial - self.q[1] * (x1 - center1) ** 2
        center0 = -(self.mu[0][1] * x1 + sum(self.mu[0][j] * outer[j] for j in tail))
        radius = _widen(np.sqrt(np.maximum(rest, 0.0) / self.q[0]))
        lo0 = np.ceil(center0 - radius).astype(np.int64)
        hi0 = np.floor(center0 + radius).astype(np.int64)
        if self.prism is not None:
            lo0 = np.maximum(lo0, -self.prism[0])
            hi0 = np.minimum(hi0, self.prism[0])
        counts = np.where(rest < -_SLACK * (self.bound + 1), 0, hi0 - lo0 + 1)
        counts = np.maximum(counts, 0)
        total = int(counts.sum())
        if total == 0:
            return

        x1s = np.repeat(x1, counts)
        offsets = np.arange(total, dtype=np.int64) - np.repeat(
            np.cumsum(counts) - counts, counts
        )
        x0s = np.repeat(lo0, counts) + offsets
        values = (
            g[0][0] * x0s * x0s
            + 2 * g[0][1] * x0s * x1s
            + g[1][1] * x1s * x1s
            + l0 * x0s
            + l1 * x1s
            + q_out
        )
        mask = values <= self.bound
        vectors = None
        if with_vectors:
            x0m, x1m = x0s[mask], x1s[mask]
            vectors = np.empty((len(x0m), n), dtype=np.int64)
            vectors[:, 0] = x0m
            vectors[:, 1] = x1m
            for j in tail:
                vectors[:, j] = outer[j]
        yield values[mask], vectors


def iter_blocks(
    form: QuadraticForm,
    bound: int,
    with_vectors: bool = False,
    prism: Sequence[int] | None = None,
) -> Iterator[Block]:
    """
    Iterate over all lattice vectors x with Q(x) ≤ bound, in blocks.

    The enumeration order is deterministic. Vectors are returned in the coordinates of
    the given form.

    Args:
        form: The form.
        bound: The bound.
        with_vectors: Whether to return the vectors in addition to the values.
        prism: Optional per-coordinate bounds |x_i| ≤ prism[i], applied in the
            coordinates of the reduced form.

    Yields:
        Pairs (values, vectors), where vectors is None unless requested.
    """
    if bound < 0:
        return
    reduction = reduce_form(form)
    ellipsoid = _Ellipsoid(reduction.form, bound, prism)
    for values, vectors in ellipsoid.blocks(with_vectors):
        if vectors is not None:
            vectors = reduction.to_original(vectors)
        yield values, vectors


def _slabs(form: QuadraticForm, bound: int, prism: Sequence[int] | None) -> list:
    # Split the outermost coordinate range into contiguous slabs, one per worker.
    threads = Settings.get_instance().threads
    if threads == 1 or form.dim < 3:
        return [None]
    ellipsoid = _Ellipsoid(reduce_form(form).form, bound, prism)
    lo, hi = ellipsoid.outermost_interval()
    size = max(1, math.ceil((hi - lo + 1) / threads))
    return [(start, min(start + size - 1, hi)) for start in range(lo, hi + 1, size)]


def map_slabs(
    form: QuadraticForm,
    bound: int,
    prism: Sequence[int] | None,
    with_vectors: bool,
    consume: Callable[[Iterator[Block]], object],
) -> list:
    """
    Apply a consumer to the blocks of each slab of the outermost coordinate.

    The slabs are processed by the configured number of worker threads. The vectors
    passed to the consumer are in the coordinates of the reduced form.

    Returns:
        The consumer results, one per slab.
    """
    reduction = reduce_form(form)
    slabs = _slabs(form, bound, prism)

    def work(slab: tuple[int, int] | None) -> object:
        ellipsoid = _Ellipsoid(reduction.form, bound, prism)
        blocks = ellipsoid.blocks(with_vectors, slab)
        return consume(blocks)

    if len(slabs) == 1:
        return [work(slabs[0])]
    with ThreadPoolExecutor(max_workers=len(slabs)) as executor:
        return list(executor.map(work, slabs))


def theta_coefficients(form: QuadraticForm, bound: int) -> np.ndarray:
    """
    Return the representation numbers r_Q(0), …, r_Q(bound).

    Args:
        form: The form.
        bound: The largest represented number of interest.

    Returns:
        An array of length bound + 1 whose m-th entry is the number of integer vectors
        x with Q(x) = m.

    Raises:
        ResourceLimitError: The ellipsoid contains too many lattice points.
    """
    if bound < 0:
        raise ValueError("The bound must be nonnegative.")
    check_points(form, bound)

    def consume(blocks: Iterator[Block]) -> np.ndarray:
        counts = np.zeros(bound + 1, dtype=np.int64)
        for values, _ in blocks:
            counts += np.bincount(values, minlength=bound + 1)
        return counts

    parts = map_slabs(form, bound, None, False, consume)
    return np.sum(parts, axis=0).astype(np.int64)


def theta_csv(form: QuadraticForm, bound: int) -> str:
    """Return the theta prefix r_Q(0..bound) as CSV text with columns m and r."""
    counts = theta_coefficients(form, bound)
    out = io.StringIO()
    out.write("m,r\n")
    for m, r in enumerate(counts.tolist()):
        out.write(f"{m},{r}\n")
    return out.getvalue()


def represented_values(
    form: QuadraticForm, bound: int, prism: Sequence[int] | None = None
) -> np.ndarray:
    """
    Return a boolean array marking the values of the form up to a bound.

    The values are found by enumerating the whole ellipsoid (or its intersection with
    a prism).

    Raises:
        ResourceLimitError: The ellipsoid contains too many lattice points.
    """
    if bound < 0:
        raise ValueError("The bound must be nonnegative.")
    check_points(form, bound)

    def consume(blocks: Iterator[Block]) -> np.ndarray:
        bits = np.zeros(bound + 1, dtype=bool)
        for values, _ in blocks:
            bits[values] = True
        return bits

    parts = map_slabs(form, bound, prism, False, consume)
    return np.logical_or.reduce(parts)


def _split_values(form: QuadraticForm, bound: int) -> np.ndarray:
    # Values of the sublattices d·x² ⊕ T over the reduced basis vectors; a subset of
    # the values of the form.
    reduction = reduce_form(form)
    reduced = reduction.form
    bits = np.zeros(bound + 1, dtype=bool)
    for k in range(min(3, reduced.dim)):
        v = [1 if j == k else 0 for j in range(reduced.dim)]
        d = reduced.gram[k][k]
        complement, _ = orthogonal_complement(reduced, v)
        complement_bits = represented_up_to(complement, bound, verify=False)
        for x in range(math.isqrt(bound // d) + 1):
            shift = d * x * x
            bits[shift:] |= complement_bits[: bound + 1 - shift]
    return bits


def represented_up_to(
    form: QuadraticForm, bound: int, verify: bool = True
) -> np.ndarray:
    """
    Return a boolean array marking the numbers up to a bound represented by a form.

    Forms of small dimension (or small bound) are handled by direct enumeration.
    Otherwise the values of the orthogonal splittings d·x² ⊕ T of the form over its
    reduced basis vectors are combined, and the remaining gaps are checked one by one.

    Args:
        form: The form.
        bound: The bound.
        verify: Whether to check the gaps individually. If False, the result may have
            false negatives (but never false positives).

    Returns:
        An array of length bound + 1 whose m-th entry indicates whether m is
        represented.
    """
    if bound < 0:
        raise ValueError("The bound must be nonnegative.")
    if form.dim <= 3 or estimated_points(form, bound) <= _DIRECT_LIMIT:
        return represented_values(form, bound)
    bits = _split_values(form, bound)
    if verify:
        for m in np.flatnonzero(~bits).tolist():
            if is_represented(form, m):
                bits[m] = True
    return bits


def is_represented(form: QuadraticForm, m: int) -> bool:
    """
    Return whether a form represents a number.

    The enumeration stops as soon as a representation is found.
    """
    return find_vector(form, m) is not None


def find_vector(form: QuadraticForm, m: int) -> tuple[int, ...] | None:
    """
    Return an integer vector x with Q(x) = m, or None if there is none.

    The ellipsoid Q(x) ≤ m is searched without a resource guard, as the search stops at
    the first hit.
    """
    if m < 0:
        raise ValueError("Only nonnegative numbers can be represented.")
    if m == 0:
        return (0,) * form.dim
    for values, vectors in iter_blocks(form, m, with_vectors=True):
        hits = np.flatnonzero(values == m)
        if len(hits):
            assert vectors is not None
            return tuple(int(e) for e in vectors[hits[0]])
    return None


def short_vectors(form: QuadraticForm, bound: int) -> list[tuple[int, ...]]:
    """
    Return all nonzero vectors x with Q(x) ≤ bound.

    The vectors are sorted by norm, and lexicographically for equal norms.
    """
    check_points(form, bound)
    found: list[tuple[int, tuple[int, ...]]] = []
    for values, vectors in iter_blocks(form, bound, with_vectors=True):
        assert vectors is not None
        for value, vector in zip(values.tolist(), vectors.tolist()):
            if value > 0:
                found.append((value, tuple(vector)))
    found.sort()
    return [vector for _, vector in found]


def truant(
    form: QuadraticForm, target: ExceptionTarget, cap: int | None = None
) -> int | None:
    """
    Return the truant of a form with respect to a set of exceptions.

    The truant is the least positive integer outside the exceptions which the form does
    not represent.

    Args:
        form: The form.
        target: The prescribed exceptions.
        cap: The largest number to check. The default is the configured truant cap.

    Returns:
        The truant, or None if every number up to the cap outside the exceptions is
        represented.
    """
    if cap is None:
        cap = Settings.get_instance().truant_cap
    bound = min(64, cap)
    checked = 0
    while True:
        bits = represented_up_to(form, bound, verify=False)
        for n in np.flatnonzero(~bits).tolist():
            if n <= checked or n in target:
                continue
            if not is_represented(form, n):
                return n
        if bound >= cap:
            logger.debug("No truant of %s up to %d", form, cap)
            return None
        checked = bound
        bound = min(2 * bound, cap)
