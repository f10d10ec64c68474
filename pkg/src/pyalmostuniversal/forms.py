"""Classically integral positive definite quadratic forms.

A form Q(x) = xᵀ·A·x is stored by its Gram matrix A, whose diagonal entries are the
coefficients of the squares and whose off-diagonal entries are half the cross
coefficients. All entries are integers.

Usage example:

  halmos = QuadraticForm.diagonal(1, 2, 7, 13)
  halmos.determinant  # 182
  halmos.level  # 728
  halmos.evaluate((1, 1, 0, 0))  # 3
"""

import dataclasses
import functools
import json
import math
from collections.abc import Iterable, Iterator, Sequence
from fractions import Fraction
from typing import Any

import numpy as np
from sympy import Matrix

try:
    from sympy.core.intfunc import igcdex
except ImportError:  # sympy < 1.13
    from sympy.core.numbers import igcdex

from pyalmostuniversal.arithmetic import kronecker, require_prime
from pyalmostuniversal.exceptions import DimensionMismatchError, InvalidFormError
from pyalmostuniversal.settings import MAX_SUPPORTED_DIM

__all__ = [
    "QuadraticForm",
    "ExceptionTarget",
    "Reduction",
    "evaluate",
    "determinant",
    "level",
    "character",
    "reduce_form",
    "orthogonal_complement",
]

Gram = tuple[tuple[int, ...], ...]


@dataclasses.dataclass(frozen=True)
class QuadraticForm:
    """
    A classically integral positive definite quadratic form.

    The form is immutable and hashable, so that it can be used as a dictionary key.
    The zero-dimensional form (the trivial lattice) is allowed; it represents 0 only.

    Attributes:
        gram: The Gram matrix, as a tuple of rows.
    """

    gram: Gram

    def __post_init__(self) -> None:
        gram = self.gram
        n = len(gram)
        if n > MAX_SUPPORTED_DIM:
            raise InvalidFormError(
                f"Forms of dimension {n} are not supported; the maximum dimension is "
                f"{MAX_SUPPORTED_DIM}."
            )
        for row in gram:
            if len(row) != n:
                raise InvalidFormError("The Gram matrix must be square.")
            for entry in row:
                if isinstance(entry, bool) or not isinstance(entry, int):
                    raise InvalidFormError("The Gram matrix entries must be integers.")
        for i in range(n):
            for j in range(i):
                if gram[i][j] != gram[j][i]:
                    raise InvalidFormError("The Gram matrix must be symmetric.")

        # Check that all leading principal minors are positive.
        for k in range(1, n + 1):
            if Matrix([list(row[:k]) for row in gram[:k]]).det() <= 0:
                raise InvalidFormError("The form must be positive definite.")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]]) -> "QuadraticForm":
        """Create a form from the rows of its Gram matrix."""
        return cls(tuple(tuple(int(entry) for entry in row) for row in rows))

    @classmethod
    def diagonal(cls, *coefficients: int) -> "QuadraticForm":
        """Create the diagonal form a₁x₁² + a₂x₂² + ⋯."""
        n = len(coefficients)
        return cls(
            tuple(
                tuple(coefficients[i] if i == j else 0 for j in range(n))
                for i in range(n)
            )
        )

    @classmethod
    def trivial(cls) -> "QuadraticForm":
        """Return the zero-dimensional form, which is the root of every escalation."""
        return cls(())

    @classmethod
    def _unchecked(cls, gram: Gram) -> "QuadraticForm":
        # For forms which are positive definite by construction, such as escalations.
        form = object.__new__(cls)
        object.__setattr__(form, "gram", gram)
        return form

    @property
    def dim(self) -> int:
        """The dimension (number of variables)."""
        return len(self.gram)

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        """The Gram matrix as a numpy array of 64-bit integers."""
        return np.array(self.gram, dtype=np.int64).reshape(self.dim, self.dim)

    @functools.cached_property
    def determinant(self) -> int:
        """The determinant D of the Gram matrix."""
        if self.dim == 0:
            return 1
        return int(Matrix(self.gram).det())

    @functools.cached_property
    def adjugate(self) -> Gram:
        """The adjugate of the Gram matrix, so that A·adj(A) = D·I."""
        if self.dim == 0:
            return ()
        adj = Matrix(self.gram).adjugate()
        return tuple(tuple(int(adj[i, j]) for j in range(self.dim)) for i in range(self.dim))

    @functools.cached_property
    def level(self) -> int:
        """
        The level N of the form.

        This is the smallest positive integer N for which N·(2A)⁻¹ is integral with an
        even diagonal.
        """
        n = self.dim
        if n == 0:
            return 1
        d = self.determinant
        denominators = []
        for i in range(n):
            for j in range(n):
                # N·adj/(2D) must be integral off the diagonal and even on it.
                scale = 4 if i == j else 2
                denominators.append(Fraction(self.adjugate[i][j], scale * d).denominator)
        return math.lcm(*denominators)

    def character(self, p: int) -> int:
        """
        Return the value χ(p) = (D|p) of the character of the form.

        Args:
            p: A prime which does not divide 2N.

        Returns:
            The Kronecker symbol (D|p), which is +1 or -1.

        Raises:
            ValueError: p is not prime or divides 2N.
        """
        require_prime(p)
        if (2 * self.level) % p == 0:
            raise ValueError(f"The prime {p} divides twice the level {self.level}.")
        return kronecker(self.determinant, p)

    def evaluate(self, x: Sequence[int]) -> int:
        """
        Return the value Q(x) = xᵀ·A·x.

        Args:
            x: An integer vector whose length is the dimension of the form.

        Returns:
            The value of the form at x.

        Raises:
            DimensionMismatchError: The vector has the wrong length.
        """
        if len(x) != self.dim:
            raise DimensionMismatchError(
                f"Expected a vector of length {self.dim}.", self.dim, len(x)
            )
        gram = self.gram
        return sum(
            gram[i][j] * x[i] * x[j] for i in range(self.dim) for j in range(self.dim)
        )

    def inner_product(self, x: Sequence[int], y: Sequence[int]) -> int:
        """Return the bilinear form xᵀ·A·y."""
        gram = self.gram
        return sum(
            gram[i][j] * x[i] * y[j] for i in range(self.dim) for j in range(self.dim)
        )

    @property
    def diagonal_entries(self) -> tuple[int, ...]:
        """The diagonal entries of the Gram matrix."""
        return tuple(self.gram[i][i] for i in range(self.dim))

    @property
    def is_diagonal(self) -> bool:
        """Whether all off-diagonal entries vanish."""
        return all(
            self.gram[i][j] == 0 for i in range(self.dim) for j in range(self.dim) if i != j
        )

    def principal_subform(self, indices: Sequence[int]) -> "QuadraticForm":
        """Return the form restricted to the given coordinates."""
        return QuadraticForm._unchecked(
            tuple(tuple(self.gram[i][j] for j in indices) for i in indices)
        )

    def transform(self, basis: Sequence[Sequence[int]]) -> "QuadraticForm":
        """
        Return the form restricted to the lattice spanned by the given vectors.

        Args:
            basis: Linearly independent integer vectors in the coordinates of the form.

        Returns:
            The form with Gram matrix M·A·Mᵀ, where the rows of M are the vectors.
        """
        m = np.array(basis, dtype=object).reshape(len(basis), self.dim)
        product = m.dot(np.array(self.gram, dtype=object).reshape(self.dim, self.dim))
        product = product.dot(m.T)
        return QuadraticForm.from_rows(product.tolist())

    def escalate(self, border: Sequence[int], corner: int) -> "QuadraticForm":
        """Return the form obtained by appending a row and column to the Gram matrix."""
        rows = [row + (border[i],) for i, row in enumerate(self.gram)]
        rows.append(tuple(border) + (corner,))
        return QuadraticForm._unchecked(tuple(rows))

    def direct_sum(self, other: "QuadraticForm") -> "QuadraticForm":
        """Return the orthogonal direct sum of two forms."""
        n, k = self.dim, other.dim
        rows = [row + (0,) * k for row in self.gram]
        rows += [(0,) * n + row for row in other.gram]
        return QuadraticForm._unchecked(tuple(rows))

    def key(self) -> tuple[int, ...]:
        """Return the flattened Gram matrix, used for sorting forms."""
        return (self.dim,) + tuple(entry for row in self.gram for entry in row)

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON-serializable representation of the form."""
        return {"dim": self.dim, "gram": [list(row) for row in self.gram]}

    def to_json(self) -> str:
        """Return the form as a JSON string."""
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QuadraticForm":
        """
        Create a form from its JSON-serializable representation.

        Raises:
            InvalidFormError: The data does not describe a valid form.
        """
        try:
            form = cls.from_rows(data["gram"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidFormError(f"The form cannot be parsed: {e}") from e
        if "dim" in data and data["dim"] != form.dim:
            raise InvalidFormError("The dimension does not match the Gram matrix.")
        return form

    @classmethod
    def from_json(cls, text: str) -> "QuadraticForm":
        """Create a form from a JSON string."""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidFormError(f"The form is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def __str__(self) -> str:
        """Return the Gram matrix in a compact notation."""
        return "[" + "; ".join(" ".join(str(e) for e in row) for row in self.gram) + "]"


@dataclasses.dataclass(frozen=True)
class ExceptionTarget:
    """
    A prescribed finite set of exceptions.

    The values are stored sorted and without duplicates.

    Attributes:
        values: The excepted positive integers, in ascending order.
    """

    values: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        values = tuple(sorted(set(self.values)))
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in values):
            raise ValueError("The excepted values must be positive integers.")
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, *values: int) -> "ExceptionTarget":
        """Create a target from the given values."""
        return cls(tuple(values))

    def with_value(self, value: int) -> "ExceptionTarget":
        """Return the target extended by one more value."""
        return ExceptionTarget(self.values + (value,))

    def __contains__(self, value: object) -> bool:
        return value in self.values

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __str__(self) -> str:
        return "{" + ", ".join(str(v) for v in self.values) + "}"


@dataclasses.dataclass(frozen=True)
class Reduction:
    """
    A reduced form together with its change of basis.

    Attributes:
        form: The reduced form.
        transform: The integer matrix U (as rows) with U·A·Uᵀ equal to the reduced Gram
            matrix. A vector y in reduced coordinates corresponds to the vector Uᵀ·y in
            the original coordinates.
    """

    form: QuadraticForm
    transform: Gram

    def to_original(self, vectors: np.ndarray) -> np.ndarray:
        """Map row vectors from reduced to original coordinates."""
        u = np.array(self.transform, dtype=np.int64).reshape(self.form.dim, self.form.dim)
        return vectors @ u


def evaluate(form: QuadraticForm, x: Sequence[int]) -> int:
    """Return the value of a form at an integer vector."""
    return form.evaluate(x)


def determinant(form: QuadraticForm) -> int:
    """Return the determinant of the Gram matrix of a form."""
    return form.determinant


def level(form: QuadraticForm) -> int:
    """Return the level of a form."""
    return form.level


def character(form: QuadraticForm, p: int) -> int:
    """Return the character value χ(p) of a form for a prime p not dividing 2N."""
    return form.character(p)


@functools.lru_cache(maxsize=1 << 14)
def reduce_form(form: QuadraticForm) -> Reduction:
    """
    Reduce a form by pairwise size reduction.

    Basis vectors are repeatedly sorted by norm and reduced against each other until no
    norm decreases any longer. Finally the signs are normalized so that the first
    nonzero entry left of the diagonal is negative in every row.

    Args:
        form: The form to reduce.

    Returns:
        The reduced form and the change of basis.
    """
    n = form.dim
    g = [list(row) for row in form.gram]
    u = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    changed = True
    while changed:
        changed = False

        # Sort the basis by norm (stable).
        order = sorted(range(n), key=lambda i: g[i][i])
        if order != list(range(n)):
            g = [[g[i][j] for j in order] for i in order]
            u = [u[i] for i in order]

        for i in range(n):
            for j in range(n):
                if i == j or 2 * abs(g[i][j]) <= g[j][j]:
                    continue
                # b_i -> b_i - r·b_j strictly decreases the norm of b_i.
                r = _round_nearest(g[i][j], g[j][j])
                gii = g[i][i] - 2 * r * g[i][j] + r * r * g[j][j]
                for k in range(n):
                    if k != i:
                        g[i][k] -= r * g[j][k]
                        g[k][i] = g[i][k]
                g[i][i] = gii
                u[i] = [u[i][k] - r * u[j][k] for k in range(n)]
                changed = True

    for i in range(1, n):
        for j in range(i):
            if g[i][j] != 0:
                if g[i][j] > 0:
                    for k in range(n):
                        if k != i:
                            g[i][k] = -g[i][k]
                            g[k][i] = -g[k][i]
                    u[i] = [-e for e in u[i]]
                break

    reduced = QuadraticForm._unchecked(tuple(tuple(row) for row in g))
    return Reduction(reduced, tuple(tuple(row) for row in u))


def _round_nearest(a: int, b: int) -> int:
    # Nearest integer to a/b for b > 0, with ties rounded towards zero.
    q, r = divmod(a, b)
    if 2 * r > b or (2 * r == b and q < 0):
        q += 1
    return q


def orthogonal_complement(
    form: QuadraticForm, v: Sequence[int]
) -> tuple[QuadraticForm, Gram]:
    """
    Return the sublattice orthogonal to a vector.

    Args:
        form: A form of dimension at least 2.
        v: A nonzero integer vector.

    Returns:
        The restriction of the form to {w : wᵀ·A·v = 0}, and a basis of that
        sublattice in the coordinates of the form.
    """
    n = form.dim
    c = [sum(form.gram[i][j] * v[j] for j in range(n)) for i in range(n)]
    basis = _kernel_basis(c)
    complement = form.transform(basis)
    return complement, tuple(tuple(row) for row in basis)


def _kernel_basis(c: Sequence[int]) -> list[list[int]]:
    # Column operations turn c into (g, 0, ..., 0); the matching columns of the
    # unimodular transform then span the integer kernel of w -> c·w.
    n = len(c)
    row = list(c)
    w = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    for k in range(1, n):
        if row[k] == 0:
            continue
        if row[0] == 0:
            row[0], row[k] = row[k], row[0]
            for r in w:
                r[0], r[k] = r[k], r[0]
            continue
        s, t, g = igcdex(row[0], row[k])
        a, b = row[0] // g, row[k] // g
        # The 2x2 block [[s, -b], [t, a]] has determinant 1.
        for r in w:
            r[0], r[k] = s * r[0] + t * r[k], -b * r[0] + a * r[k]
        row[0], row[k] = g, 0
    return [[int(w[i][k]) for i in range(n)] for k in range(1, n)]
