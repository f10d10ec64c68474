"""Integral equivalence of quadratic forms.

Two forms are equivalent if A₁ = M·A₂·Mᵀ for some M in GL_n(Z). Equivalence is decided
exactly: cheap invariants (determinant and a prefix of the theta series) rule out most
pairs, and an isometry is then searched for by backtracking over short vectors of the
reduced forms.
"""

import logging
from collections import defaultdict
from collections.abc import Sequence

import numpy as np
from sympy import Matrix

from pyalmostuniversal.enumeration import short_vectors, theta_coefficients
from pyalmostuniversal.forms import QuadraticForm, reduce_form

__all__ = [
    "canonical_key",
    "theta_prefix",
    "find_isometry",
    "is_equivalent",
    "dedup",
]

logger = logging.getLogger(__name__)

# Theta prefixes used for bucketing never extend beyond this bound.
_MAX_PREFIX = 96


def canonical_key(form: QuadraticForm) -> tuple[int, ...]:
    """Return the flattened Gram matrix of the reduced form."""
    return reduce_form(form).form.key()


def theta_prefix(form: QuadraticForm, length: int | None = None) -> tuple[int, ...]:
    """
    Return the representation numbers r_Q(0), …, r_Q(length).

    Args:
        form: The form.
        length: The last coefficient. The default is twice the largest diagonal entry
            of the reduced form.

    Returns:
        The theta coefficients as a tuple.
    """
    if length is None:
        length = 2 * max(reduce_form(form).form.diagonal_entries, default=0)
    return tuple(theta_coefficients(form, length).tolist())


def _reduced_isometry(
    g1: Sequence[Sequence[int]], g2: QuadraticForm
) -> list[list[int]] | None:
    # Find the rows m_i with m_iᵀ·A₂·m_j = g1[i][j] by backtracking.
    n = g2.dim
    norms = sorted({g1[i][i] for i in range(n)})
    vectors = short_vectors(g2, max(norms))
    if not vectors:
        return None
    candidates = np.array(vectors, dtype=np.int64)
    inner = candidates @ g2.matrix @ candidates.T
    own = np.diagonal(inner)
    by_norm = {t: np.flatnonzero(own == t) for t in norms}

    chosen: list[int] = []

    def extend(i: int) -> bool:
        if i == n:
            return True
        pool = by_norm[g1[i][i]]
        if chosen:
            wanted = np.array([g1[i][j] for j in range(i)], dtype=np.int64)
            mask = np.all(inner[np.ix_(pool, chosen)] == wanted, axis=1)
            pool = pool[mask]
        for c in pool.tolist():
            chosen.append(c)
            if extend(i + 1):
                return True
            chosen.pop()
        return False

    if not extend(0):
        return None
    return [list(vectors[c]) for c in chosen]


def find_isometry(
    form1: QuadraticForm, form2: QuadraticForm
) -> tuple[tuple[int, ...], ...] | None:
    """
    Find an integer matrix M with M·A₂·Mᵀ = A₁.

    Args:
        form1: The first form.
        form2: The second form.

    Returns:
        The rows of M, or None if the forms are not equivalent.
    """
    if form1.dim != form2.dim or form1.determinant != form2.determinant:
        return None
    if form1.dim == 0:
        return ()
    r1, r2 = reduce_form(form1), reduce_form(form2)
    found = _reduced_isometry(r1.form.gram, r2.form)
    if found is None:
        return None

    # The rows of U₁⁻¹·M'·U₂ map the second form onto the first.
    u1 = Matrix(r1.transform)
    u2 = Matrix(r2.transform)
    m = u1.inv() * Matrix(found) * u2
    n = form1.dim
    return tuple(tuple(int(m[i, j]) for j in range(n)) for i in range(n))


def is_equivalent(form1: QuadraticForm, form2: QuadraticForm) -> bool:
    """
    Return whether two forms are integrally equivalent.

    Forms of different dimension are never equivalent.
    """
    if form1.dim != form2.dim or form1.determinant != form2.determinant:
        return False
    if reduce_form(form1).form == reduce_form(form2).form:
        return True
    length = min(
        _MAX_PREFIX,
        2
        * max(
            reduce_form(form1).form.diagonal_entries
            + reduce_form(form2).form.diagonal_entries,
            default=0,
        ),
    )
    if theta_prefix(form1, length) != theta_prefix(form2, length):
        return False
    return find_isometry(form1, form2) is not None


def dedup(forms: Sequence[QuadraticForm]) -> list[QuadraticForm]:
    """
    Return one representative per equivalence class.

    The representative of a class is the member whose reduced Gram matrix is
    lexicographically smallest (ties are broken by the member's own Gram matrix). The
    representatives are returned in the order of their reduced Gram matrices.

    Args:
        forms: Forms of equal dimension.

    Returns:
        The class representatives.
    """
    if not forms:
        return []
    length = min(
        _MAX_PREFIX,
        2 * max(max(reduce_form(f).form.diagonal_entries, default=0) for f in forms),
    )
    buckets: dict[tuple, list[list[QuadraticForm]]] = defaultdict(list)
    for form in sorted(set(forms), key=lambda f: (canonical_key(f), f.key())):
        key = (form.determinant, theta_prefix(form, length))
        for cls in buckets[key]:
            if find_isometry(cls[0], form) is not None:
                cls.append(form)
                break
        else:
            buckets[key].append([form])

    representatives = [cls[0] for classes in buckets.values() for cls in classes]
    representatives.sort(key=lambda f: (canonical_key(f), f.key()))
    logger.debug("%d forms fall into %d classes", len(forms), len(representatives))
    return representatives
