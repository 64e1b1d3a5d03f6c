"""The Markoff surface f(u) = u1^2 + u2^2 + u3^2 - u1*u2*u3 = m.

Points carry an explicit coefficient-domain tag so that exact and rounded
values never mix.  Residue classes mod p^k are enumerated by lifting the
solutions mod p one digit at a time, which keeps the work proportional to the
number of solutions instead of p^(3k).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import BudgetExceeded
from .padic import Factorization, factorize, is_prime, sqrt_mod_prime

DEFAULT_BUDGET = 10**7


def default_budget() -> int:
    """Enumeration budget, overridable through the MARKOFF_BUDGET variable."""
    raw = os.environ.get("MARKOFF_BUDGET")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"MARKOFF_BUDGET must be an integer, got {raw!r}")
        if value <= 0:
            raise ValueError("MARKOFF_BUDGET must be positive")
        return value
    return DEFAULT_BUDGET


# ---------------------------------------------------------------------------
# parameter and points


@dataclass(frozen=True)
class MarkoffParam:
    m: int
    m_minus_4_factorization: Factorization | None = field(default=None, compare=False)

    @classmethod
    def of(cls, m: int) -> "MarkoffParam":
        return cls(m, None if m == 4 else factorize(m - 4))

    @property
    def is_smooth(self) -> bool:
        return self.m not in (0, 4)


@dataclass(frozen=True)
class Domain:
    """Coefficient domain: ``ZZ``, ``QQ``, ``RR`` or ``Zmod`` with a modulus."""

    kind: str
    modulus: int | None = None

    def __post_init__(self):
        if self.kind not in ("ZZ", "QQ", "RR", "Zmod"):
            raise ValueError(f"unknown domain {self.kind!r}")
        if (self.kind == "Zmod") != (self.modulus is not None):
            raise ValueError("a modulus is given exactly for Zmod")
        if self.modulus is not None and self.modulus < 2:
            raise ValueError("modulus must be at least 2")

    def __str__(self) -> str:
        return f"Zmod({self.modulus})" if self.kind == "Zmod" else self.kind

    def coerce(self, x):
        if self.kind == "ZZ":
            if isinstance(x, bool) or not isinstance(x, int):
                raise TypeError(f"{x!r} is not an integer")
            return x
        if self.kind == "QQ":
            if isinstance(x, Fraction):
                return x
            if isinstance(x, int) and not isinstance(x, bool):
                return Fraction(x)
            raise TypeError(f"{x!r} is not a rational")
        if self.kind == "RR":
            if isinstance(x, float):
                return x
            raise TypeError(f"{x!r} is not tagged as a float")
        if isinstance(x, bool) or not isinstance(x, int):
            raise TypeError(f"{x!r} is not an integer residue")
        return x % self.modulus

    def normalize(self, x):
        return x % self.modulus if self.kind == "Zmod" else x


ZZ = Domain("ZZ")
QQ = Domain("QQ")
RR = Domain("RR")


def Zmod(q: int) -> Domain:
    return Domain("Zmod", q)


def _infer_domain(coords: Sequence) -> Domain:
    kinds = set()
    for x in coords:
        if isinstance(x, bool):
            raise TypeError("booleans are not coordinates")
        if isinstance(x, int):
            kinds.add("int")
        elif isinstance(x, Fraction):
            kinds.add("frac")
        elif isinstance(x, float):
            kinds.add("float")
        else:
            raise TypeError(f"unsupported coordinate {x!r}")
    if "float" in kinds:
        if kinds != {"float"}:
            raise TypeError("mixed float and exact coordinates")
        return RR
    return QQ if "frac" in kinds else ZZ


@dataclass(frozen=True)
class Point3:
    u: tuple
    domain: Domain = ZZ

    def __post_init__(self):
        if len(self.u) != 3:
            raise ValueError("a point has three coordinates")
        object.__setattr__(self, "u", tuple(self.domain.coerce(x) for x in self.u))

    @classmethod
    def of(cls, *coords, domain: Domain | None = None) -> "Point3":
        if len(coords) == 1 and isinstance(coords[0], (tuple, list)):
            coords = tuple(coords[0])
        return cls(tuple(coords), domain or _infer_domain(coords))

    def __iter__(self) -> Iterator:
        return iter(self.u)

    def __getitem__(self, i: int):
        return self.u[i]


def _as_point(u) -> Point3:
    return u if isinstance(u, Point3) else Point3.of(*u)


def markoff_poly(u1, u2, u3):
    """The polynomial itself, on bare ring elements."""
    return u1 * u1 + u2 * u2 + u3 * u3 - u1 * u2 * u3


def evaluate_markoff(u) -> object:
    """f(u) in the point's domain (reduced for residues)."""
    pt = _as_point(u)
    return pt.domain.normalize(markoff_poly(*pt.u))


def on_surface(u, m: int) -> bool:
    pt = _as_point(u)
    return evaluate_markoff(pt) == pt.domain.normalize(m)


def _others(i: int) -> tuple[int, int]:
    if i not in (1, 2, 3):
        raise ValueError("coordinate index must be 1, 2 or 3")
    return {1: (2, 3), 2: (1, 3), 3: (1, 2)}[i]


def gs_form_check(u, m: int, i: int) -> bool:
    """(2u_i - u_j u_k)^2 - 4(m-4) == (u_j^2 - 4)(u_k^2 - 4) in the domain.

    The difference of the two sides is 4(f(u) - m), so this holds exactly on
    the surface and fails off it (away from characteristic 2).
    """
    pt = _as_point(u)
    j, k = _others(i)
    ui, uj, uk = pt.u[i - 1], pt.u[j - 1], pt.u[k - 1]
    lhs = (2 * ui - uj * uk) ** 2 - 4 * (m - 4)
    rhs = (uj * uj - 4) * (uk * uk - 4)
    return pt.domain.normalize(lhs - rhs) == pt.domain.normalize(0)


def markoff_move(u, i: int) -> Point3:
    """Vieta involution u_i -> u_j u_k - u_i."""
    pt = _as_point(u)
    j, k = _others(i)
    coords = list(pt.u)
    coords[i - 1] = pt.domain.normalize(coords[j - 1] * coords[k - 1] - coords[i - 1])
    return Point3(tuple(coords), pt.domain)


def gradient(u1, u2, u3) -> tuple:
    return (2 * u1 - u2 * u3, 2 * u2 - u1 * u3, 2 * u3 - u1 * u2)


# ---------------------------------------------------------------------------
# residue classes


def _prime_power(q: int) -> tuple[int, int]:
    if q < 2:
        raise ValueError("modulus must be a prime power >= 2")
    for p in range(2, q + 1):
        if q % p == 0:
            k, r = 0, q
            while r % p == 0:
                r //= p
                k += 1
            if r != 1 or not is_prime(p):
                raise ValueError(f"{q} is not a prime power")
            return p, k
    raise AssertionError


def _val_mod(x: int, p: int, k: int) -> int | None:
    """Valuation of x known modulo p^k, or None if x == 0 mod p^k."""
    x %= p**k
    if x == 0:
        return None
    e = 0
    while x % p == 0:
        x //= p
        e += 1
    return e


@dataclass(frozen=True, order=True)
class ResidueClassPoint:
    """A class of triples mod p^k on which f == m mod p^k."""

    p: int
    k: int
    residues: tuple[int, int, int]
    hensel_status: str = "undetermined"  # certified_liftable, dead, undetermined
    slack: int | None = None  # valuation of the certifying partial derivative
    pivot: int | None = None  # 1-based index of that partial derivative

    @property
    def modulus(self) -> int:
        return self.p**self.k

    def to_point(self) -> Point3:
        return Point3(self.residues, Zmod(self.modulus))


def hensel_certificate(r: Sequence[int], p: int, k: int) -> tuple[int, int] | None:
    """(pivot, e) with v_p(df/du_pivot) = e and 2e + 1 <= k, choosing least e."""
    best = None
    for j, g in enumerate(gradient(*r), start=1):
        e = _val_mod(g, p, k)
        if e is not None and 2 * e + 1 <= k and (best is None or e < best[1]):
            best = (j, e)
    return best


def lift_children(r: Sequence[int], p: int, k: int, m: int) -> list[tuple[int, int, int]]:
    """All classes mod p^(k+1) above r (with f(r) == m mod p^k, k >= 1) on the surface.

    For k >= 1, f(r + p^k t) == f(r) + p^k grad f(r).t mod p^(k+1),
    so the lifts solve one linear congruence mod p.
    """
    pk = p**k
    c = (markoff_poly(*r) - m) // pk % p
    g = [x % p for x in gradient(*r)]
    rs = tuple(r)
    out = []
    if not any(g):
        if c != 0:
            return out
        for t1 in range(p):
            for t2 in range(p):
                for t3 in range(p):
                    out.append((rs[0] + pk * t1, rs[1] + pk * t2, rs[2] + pk * t3))
        return out
    j = next(i for i in range(3) if g[i])
    inv = pow(g[j], -1, p)
    a, b = [i for i in range(3) if i != j]
    for ta in range(p):
        for tb in range(p):
            tj = (-(c + g[a] * ta + g[b] * tb) * inv) % p
            t = [0, 0, 0]
            t[a], t[b], t[j] = ta, tb, tj
            out.append(tuple(rs[i] + pk * t[i] for i in range(3)))
    return out


def has_children(r: Sequence[int], p: int, k: int, m: int) -> bool:
    c = (markoff_poly(*r) - m) // p**k % p
    return any(x % p for x in gradient(*r)) or c == 0


def level_one_solutions(m: int, p: int) -> list[tuple[int, int, int]]:
    """All (r1, r2, r3) mod p with f == m mod p, in lexicographic order."""
    out = []
    if p == 2:
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    if (markoff_poly(a, b, c) - m) % 2 == 0:
                        out.append((a, b, c))
        return out
    inv2 = (p + 1) // 2
    for a in range(p):
        for b in range(p):
            ab = a * b % p
            disc = (ab * ab - 4 * (a * a + b * b - m)) % p
            s = sqrt_mod_prime(disc, p)
            if s is None:
                continue
            roots = {(ab + s) * inv2 % p, (ab - s) * inv2 % p}
            for c in sorted(roots):
                out.append((a, b, c))
    return out


def annotate(r: Sequence[int], p: int, k: int, m: int) -> ResidueClassPoint:
    r = tuple(x % p**k for x in r)
    cert = hensel_certificate(r, p, k)
    if cert is not None:
        return ResidueClassPoint(p, k, r, "certified_liftable", cert[1], cert[0])
    if not has_children(r, p, k, m):
        return ResidueClassPoint(p, k, r, "dead")
    return ResidueClassPoint(p, k, r, "undetermined")


def _solutions_mod(m: int, p: int, k: int, budget: int) -> list[tuple[int, int, int]]:
    level = level_one_solutions(m, p)
    scanned = p * p
    for j in range(1, k):
        nxt = []
        for r in level:
            kids = lift_children(r, p, j, m)
            scanned += len(kids)
            if scanned > budget:
                raise BudgetExceeded(f"enumeration mod {p}^{k} exceeds budget {budget}")
            nxt.extend(kids)
        level = nxt
    return level


def enumerate_points_mod(m: int, q: int, budget: int | None = None) -> list[ResidueClassPoint]:
    """Every residue triple mod q = p^k on f == m, with Hensel annotations."""
    p, k = _prime_power(q)
    budget = default_budget() if budget is None else budget
    if p * p > budget:
        raise BudgetExceeded(f"p^2 = {p * p} residue pairs exceed budget {budget}")
    sols = _solutions_mod(m, p, k, budget)
    return [annotate(r, p, k, m) for r in sorted(sols)]


def singular_points_mod_p(m: int, p: int) -> set[tuple[int, int, int]]:
    """The four singular points (2,2,2), (-2,-2,2), (2,-2,-2), (-2,2,-2) mod p."""
    if p == 2 or not is_prime(p):
        raise ValueError("p must be an odd prime")
    if (m - 4) % p:
        raise ValueError(f"{p} does not divide m - 4")
    pts = {
        tuple(x % p for x in s)
        for s in ((2, 2, 2), (-2, -2, 2), (2, -2, -2), (-2, 2, -2))
    }
    for s in pts:
        assert (markoff_poly(*s) - m) % p == 0
        assert all(g % p == 0 for g in gradient(*s))
    return pts


def hensel_refine(c: ResidueClassPoint, target_k: int, m: int,
                  budget: int | None = None) -> list[ResidueClassPoint]:
    """Children of c mod p^target_k that stay on the surface, re-annotated."""
    if target_k <= c.k:
        raise ValueError("target_k must exceed the class precision")
    if (markoff_poly(*c.residues) - m) % c.modulus:
        raise ValueError("class is not on the surface")
    budget = default_budget() if budget is None else budget
    level = [c.residues]
    scanned = 0
    for j in range(c.k, target_k):
        nxt = []
        for r in level:
            kids = lift_children(r, c.p, j, m)
            scanned += len(kids)
            if scanned > budget:
                raise BudgetExceeded("refinement exceeds budget")
            nxt.extend(kids)
        level = nxt
    return [annotate(r, c.p, target_k, m) for r in sorted(level)]
