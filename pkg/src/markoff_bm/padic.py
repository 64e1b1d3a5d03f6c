"""Exact local arithmetic over Q: valuations, residue symbols, square classes,
Hilbert symbols at every place, and desk-scale integer factorization.

Everything here works on Python integers (arbitrary precision) or
``fractions.Fraction``; nothing is rounded.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Union

from .errors import BoundExceeded

Rational = Union[int, Fraction]

TRIAL_DIVISION_LIMIT = 10**6
DEFAULT_FACTOR_BOUND = 2**63
_DETERMINISTIC_LIMIT = 2**64
# First 12 primes are a deterministic Miller-Rabin witness set below 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_PROBABILISTIC_ROUNDS = 64


# ---------------------------------------------------------------------------
# primality


def _mr_round(n: int, a: int, d: int, s: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime(n: int) -> bool:
    """Miller-Rabin; deterministic below 2**64, 64 seeded rounds above."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < _DETERMINISTIC_LIMIT:
        return all(_mr_round(n, a, d, s) for a in _MR_BASES)
    rng = random.Random(n)
    bases = [rng.randrange(2, n - 1) for _ in range(_PROBABILISTIC_ROUNDS)]
    return all(_mr_round(n, a, d, s) for a in bases)


def primality_certified(n: int) -> bool:
    """True when ``is_prime(n)`` is a proof rather than a probabilistic verdict."""
    return n < _DETERMINISTIC_LIMIT


@lru_cache(maxsize=1)
def _small_primes() -> tuple[int, ...]:
    limit = TRIAL_DIVISION_LIMIT
    sieve = bytearray([1]) * (limit + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, limit + 1, i)))
    return tuple(i for i in range(limit + 1) if sieve[i])


def primes_up_to(n: int) -> list[int]:
    if n <= TRIAL_DIVISION_LIMIT:
        import bisect

        ps = _small_primes()
        return list(ps[: bisect.bisect_right(ps, n)])
    return [p for p in range(2, n + 1) if is_prime(p)]


# ---------------------------------------------------------------------------
# places


@dataclass(frozen=True, order=True)
class Place:
    """A place of Q: the real place (``p is None``) or a finite prime ``p``."""

    p: int | None = None

    def __post_init__(self):
        if self.p is not None:
            if not isinstance(self.p, int) or not is_prime(self.p):
                raise ValueError(f"{self.p!r} is not a prime")

    @classmethod
    def real(cls) -> "Place":
        return cls(None)

    @classmethod
    def prime(cls, p: int) -> "Place":
        return cls(p)

    @classmethod
    def parse(cls, token: str | int) -> "Place":
        """Parse ``"inf"``/``"oo"``/``"R"`` or a prime."""
        if isinstance(token, int):
            return cls(token)
        t = str(token).strip().lower()
        if t in ("inf", "infty", "infinity", "oo", "r", "real"):
            return cls(None)
        return cls(int(t))

    @property
    def is_real(self) -> bool:
        return self.p is None

    @property
    def certified(self) -> bool:
        return self.p is None or primality_certified(self.p)

    def sort_key(self) -> tuple[int, int]:
        return (0, 0) if self.p is None else (1, self.p)

    def __str__(self) -> str:
        return "inf" if self.p is None else str(self.p)


INF = Place(None)


# ---------------------------------------------------------------------------
# valuations and residue symbols


def _as_fraction(a: Rational) -> Fraction:
    if isinstance(a, Fraction):
        return a
    if isinstance(a, int):
        return Fraction(a)
    raise TypeError(f"expected an int or Fraction, got {type(a).__name__}")


def vp(n: Rational, p: int) -> int:
    """p-adic valuation of a nonzero integer or rational."""
    if isinstance(n, Fraction):
        if n == 0:
            raise ValueError("valuation of 0 is undefined")
        return vp(n.numerator, p) - vp(n.denominator, p)
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    n = abs(n)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def split_valuation(n: int, p: int) -> tuple[int, int]:
    """Return (e, u) with n = p**e * u and p not dividing u."""
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e, n


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a/n) for odd positive n, by the reciprocity chain."""
    if n <= 0 or n % 2 == 0:
        raise ValueError("n must be odd and positive")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a/p) for an odd prime p."""
    if p == 2:
        raise ValueError("legendre symbol needs an odd prime")
    return jacobi(a, p)


def legendre_euler(a: int, p: int) -> int:
    """Legendre symbol by Euler's criterion; kept as an independent check."""
    r = pow(a % p, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


def sqrt_mod_prime(a: int, p: int) -> int | None:
    """A square root of a modulo the prime p (Tonelli-Shanks), or None."""
    a %= p
    if p == 2 or a == 0:
        return a
    if legendre(a, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while legendre(z, p) != -1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return r


def sqrt_unit_padic(a: int, p: int, k: int) -> int | None:
    """x with x^2 == a mod p^k for a p-adic unit a that is a square in Z_p.

    Returns None when a is not a unit square (for p = 2 that means a != 1 mod 8).
    """
    if a % p == 0:
        raise ValueError("a must be a p-adic unit")
    q = p**k
    if p == 2:
        if a % 8 != 1:
            return None
        x = 1
        for j in range(3, k):
            if (x * x - a) % (1 << (j + 1)):
                x += 1 << (j - 1)
        return x % q
    x = sqrt_mod_prime(a, p)
    if x is None:
        return None
    # Newton steps double the precision; 2x is a unit for odd p
    prec = 1
    while prec < k:
        prec = min(2 * prec, k)
        mod = p**prec
        x = (x - (x * x - a) * pow(2 * x, -1, mod)) % mod
    return x % q


def nonresidue(p: int) -> int:
    """Least quadratic non-residue modulo the odd prime p."""
    z = 2
    while legendre(z, p) != -1:
        z += 1
    return z


# ---------------------------------------------------------------------------
# square classes


@dataclass(frozen=True)
class SquareClassOutcome:
    """Square class of a nonzero element of Q_v.

    ``unit_class`` is the Legendre symbol of the unit part for odd p, the unit
    part modulo 8 for p = 2, and the sign for the real place.
    """

    is_square: bool
    valuation_parity: str
    unit_class: int


def square_class(a: Rational, v: Place) -> SquareClassOutcome:
    a = _as_fraction(a)
    if a == 0:
        raise ValueError("square class of 0 is undefined")
    if v.is_real:
        sign = 1 if a > 0 else -1
        return SquareClassOutcome(sign > 0, "even", sign)
    p = v.p
    n = a.numerator * a.denominator  # same class as a
    e, u = split_valuation(n, p)
    parity = "even" if e % 2 == 0 else "odd"
    if p == 2:
        uc = u % 8
        return SquareClassOutcome(e % 2 == 0 and uc == 1, parity, uc)
    ls = legendre(u, p)
    return SquareClassOutcome(e % 2 == 0 and ls == 1, parity, ls)


def is_local_square(a: Rational, v: Place) -> bool:
    return square_class(a, v).is_square


# ---------------------------------------------------------------------------
# Hilbert symbols


def _hilbert_odd(a: int, b: int, p: int) -> int:
    alpha, u = split_valuation(a, p)
    beta, w = split_valuation(b, p)
    sign = -1 if (alpha * beta % 2 and p % 4 == 3) else 1
    if beta % 2:
        sign *= legendre(u, p)
    if alpha % 2:
        sign *= legendre(w, p)
    return sign


def _hilbert_two(a: int, b: int) -> int:
    alpha, u = split_valuation(a, 2)
    beta, w = split_valuation(b, 2)
    u8, w8 = u % 8, w % 8
    eps_u, eps_w = (u8 - 1) // 2 % 2, (w8 - 1) // 2 % 2
    om_u, om_w = (u8 * u8 - 1) // 8 % 2, (w8 * w8 - 1) // 8 % 2
    exponent = eps_u * eps_w + alpha * om_w + beta * om_u
    return -1 if exponent % 2 else 1


def hilbert_symbol(a: Rational, b: Rational, v: Place) -> int:
    """Hilbert symbol (a, b)_v in {+1, -1} for nonzero rationals a, b."""
    if type(a) is int and type(b) is int:
        ai, bi = a, b
    else:
        a, b = _as_fraction(a), _as_fraction(b)
        # multiply by the square of the denominator: same class, integral
        ai = a.numerator * a.denominator
        bi = b.numerator * b.denominator
    if ai == 0 or bi == 0:
        raise ValueError("Hilbert symbol needs nonzero arguments")
    if v.is_real:
        return -1 if (ai < 0 and bi < 0) else 1
    if v.p == 2:
        return _hilbert_two(ai, bi)
    return _hilbert_odd(ai, bi, v.p)


def hilbert_places(a: Rational, b: Rational) -> list[Place]:
    """Places where (a, b)_v can be nontrivial: infinity and primes dividing 2ab."""
    a, b = _as_fraction(a), _as_fraction(b)
    primes = {2}
    for n in (a.numerator, a.denominator, b.numerator, b.denominator):
        if abs(n) > 1:
            primes.update(factorize(n).primes)
    return [INF] + [Place(p) for p in sorted(primes)]


# ---------------------------------------------------------------------------
# factorization


@dataclass(frozen=True)
class Factorization:
    """sign * prod(p**e) with primes strictly increasing."""

    sign: int
    factors: tuple[tuple[int, int], ...]
    certified: bool = True

    @property
    def value(self) -> int:
        v = self.sign
        for p, e in self.factors:
            v *= p**e
        return v

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    def exponent(self, p: int) -> int:
        for q, e in self.factors:
            if q == p:
                return e
        return 0

    def __str__(self) -> str:
        body = "*".join(f"{p}^{e}" if e > 1 else str(p) for p, e in self.factors)
        return ("-" if self.sign < 0 else "") + (body or "1")


def _pollard_brent(n: int, seed: int, max_iter: int) -> int | None:
    rng = random.Random(seed)
    y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
    g = r = q = 1
    x = ys = y
    it = 0
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        r *= 2
        it += r
        if it > max_iter:
            return None
    if g == n:
        g = 1
        while g == 1:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
    return None if g == n else g


def _split_large(n: int, out: dict[int, int], max_iter: int) -> bool:
    """Factor n (no prime factors below the trial limit) into out; returns certified."""
    if n == 1:
        return True
    if is_prime(n):
        out[n] = out.get(n, 0) + 1
        return primality_certified(n)
    r = math.isqrt(n)
    if r * r == n:
        ok = _split_large(r, out, max_iter)
        return _split_large(r, out, max_iter) and ok
    for seed in range(1, 40):
        d = _pollard_brent(n, seed, max_iter)
        if d is not None and 1 < d < n:
            ok = _split_large(d, out, max_iter)
            return _split_large(n // d, out, max_iter) and ok
    raise BoundExceeded(f"Pollard rho failed to split {n}")


def factorize(n: int, bound: int = DEFAULT_FACTOR_BOUND) -> Factorization:
    """Complete factorization: trial division to 10**6, then Pollard-Brent rho."""
    if not isinstance(n, int):
        raise TypeError("factorize needs an int")
    if n == 0:
        raise ValueError("cannot factor 0")
    sign = -1 if n < 0 else 1
    n = abs(n)
    out: dict[int, int] = {}
    for p in _small_primes():
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out[p] = e
    certified = True
    if n > 1:
        if n <= TRIAL_DIVISION_LIMIT**2:
            out[n] = out.get(n, 0) + 1
        else:
            max_iter = 10**7 if n <= bound else 10**5
            certified = _split_large(n, out, max_iter)
    return Factorization(sign, tuple(sorted(out.items())), certified)


def squarefree_kernel(n: Rational) -> int:
    """The signed squarefree d with n/d a positive rational square."""
    f = _as_fraction(n)
    if f == 0:
        raise ValueError("squarefree kernel of 0 is undefined")
    fac = factorize(f.numerator * f.denominator)
    d = fac.sign
    for p, e in fac.factors:
        if e % 2:
            d *= p
    return d


def is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def is_rational_square(a: Rational) -> bool:
    a = _as_fraction(a)
    return a >= 0 and is_square(a.numerator) and is_square(a.denominator)


def recompose(fac: Factorization) -> int:
    return fac.value


def prod(xs: Iterable[int]) -> int:
    return math.prod(xs)
