"""Elementary number theory used throughout the package."""

import functools
import math
from fractions import Fraction

import numpy as np
from sympy import divisor_count as _divisor_count
from sympy import factorint, isprime
from sympy.ntheory import legendre_symbol

__all__ = [
    "valuation",
    "fraction_valuation",
    "unit_part",
    "factorize",
    "divisor_count",
    "kronecker",
    "hilbert_symbol",
    "is_padic_square",
    "primes_up_to",
    "prime_divisors",
    "require_prime",
    "ceil_sqrt",
]


def valuation(n: int, p: int) -> int:
    """Return the exponent of the prime p in the nonzero integer n."""
    if n == 0:
        raise ValueError("The valuation of 0 is infinite.")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def fraction_valuation(x: Fraction, p: int) -> int:
    """Return the p-adic valuation of a nonzero rational number."""
    return valuation(x.numerator, p) - valuation(x.denominator, p)


def unit_part(n: int, p: int) -> int:
    """Return n with all factors p removed."""
    return n // p ** valuation(n, p)


@functools.lru_cache(maxsize=1 << 16)
def factorize(n: int) -> tuple[tuple[int, int], ...]:
    """Return the prime factorization of a positive integer as sorted (p, e) pairs."""
    if n < 1:
        raise ValueError("Only positive integers can be factorized.")
    return tuple(sorted(factorint(n).items()))


def prime_divisors(n: int) -> list[int]:
    """Return the sorted prime divisors of a nonzero integer."""
    return [p for p, _ in factorize(abs(n))]


def divisor_count(n: int) -> int:
    """Return the number τ(n) of positive divisors of n."""
    if n < 1:
        raise ValueError("The divisor count is defined for positive integers only.")
    return int(_divisor_count(n))


def require_prime(p: int) -> None:
    """Raise a ValueError if p is not a prime number."""
    if not isprime(p):
        raise ValueError(f"{p} is not a prime number.")


def kronecker(d: int, p: int) -> int:
    """Return the Kronecker symbol (d|p) for a prime p."""
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    return int(legendre_symbol(d % p, p)) if d % p else 0


def _as_integer_class(x: Fraction | int) -> int:
    # A rational a/b and the integer a·b differ by the square b².
    x = Fraction(x)
    return x.numerator * x.denominator


def hilbert_symbol(a: Fraction | int, b: Fraction | int, p: int) -> int:
    """Return the Hilbert symbol (a, b)_p of two nonzero rational numbers."""
    a = _as_integer_class(a)
    b = _as_integer_class(b)
    if a == 0 or b == 0:
        raise ValueError("The Hilbert symbol is defined for nonzero numbers only.")
    alpha, beta = valuation(a, p), valuation(b, p)
    u, v = a // p**alpha, b // p**beta
    if p == 2:

        def epsilon(w: int) -> int:
            return ((w - 1) // 2) % 2

        def omega(w: int) -> int:
            return ((w * w - 1) // 8) % 2

        exponent = epsilon(u) * epsilon(v) + alpha * omega(v) + beta * omega(u)
        return -1 if exponent % 2 else 1
    sign = -1 if (alpha * beta * ((p - 1) // 2)) % 2 else 1
    return (
        sign
        * int(legendre_symbol(u % p, p)) ** beta
        * int(legendre_symbol(v % p, p)) ** alpha
    )


def is_padic_square(x: Fraction | int, p: int) -> bool:
    """Return whether a nonzero rational number is a square in the p-adic numbers."""
    n = _as_integer_class(x)
    if n == 0:
        raise ValueError("Zero is excluded.")
    v = valuation(n, p)
    if v % 2:
        return False
    u = n // p**v
    if p == 2:
        return u % 8 == 1
    return int(legendre_symbol(u % p, p)) == 1


def primes_up_to(limit: int) -> np.ndarray:
    """Return all primes up to and including the limit, using a sieve."""
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p : limit + 1 : p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def ceil_sqrt(n: int) -> int:
    """Return the smallest integer whose square is at least n."""
    if n <= 0:
        return 0
    r = math.isqrt(n)
    return r if r * r == n else r + 1
