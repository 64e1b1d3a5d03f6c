"""Brauer classes alpha_{i,-} = (u_i - 2, m - 4), their local invariants, and the
set of invariant vectors realized by local integral points at one place.

An invariant vector is stored as a triple of bits; bit 1 stands for the
invariant 1/2 in Q/Z.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Sequence

from .errors import (
    BudgetExceeded,
    DepthCapExceeded,
    NoApplicableRule,
    PrecisionInsufficient,
    RepresentationMismatch,
    UndefinedAtPoint,
)
from .padic import (
    INF,
    Place,
    hilbert_symbol,
    is_local_square,
    is_square,
    sqrt_unit_padic,
    split_valuation,
    sqrt_mod_prime,
    vp,
)
from .surface import (
    Point3,
    ResidueClassPoint,
    default_budget,
    gradient,
    level_one_solutions,
    lift_children,
    markoff_poly,
)

Vector = tuple[int, int, int]

ALL_VECTORS: tuple[Vector, ...] = tuple(product((0, 1), repeat=3))
ZERO: Vector = (0, 0, 0)
EVEN_VECTORS = tuple(v for v in ALL_VECTORS if sum(v) % 2 == 0)
NONZERO_VECTORS = tuple(v for v in ALL_VECTORS if v != ZERO)
WEIGHT_ONE = ((0, 0, 1), (0, 1, 0), (1, 0, 0))
WEIGHT_TWO = ((0, 1, 1), (1, 0, 1), (1, 1, 0))


def vector_json(v: Vector) -> list:
    return ["1/2" if b else 0 for b in v]


def vector_str(v: Vector) -> str:
    return "(" + ",".join("1/2" if b else "0" for b in v) + ")"


def parse_vector(items: Sequence) -> Vector:
    out = []
    for x in items:
        if x in (0, "0"):
            out.append(0)
        elif x in ("1/2", Fraction(1, 2), 0.5):
            out.append(1)
        else:
            raise ValueError(f"bad invariant {x!r}")
    return tuple(out)


def add_vectors(a: Vector, b: Vector) -> Vector:
    return (a[0] ^ b[0], a[1] ^ b[1], a[2] ^ b[2])


def bit_to_invariant(b: int) -> Fraction:
    return Fraction(b, 2)


# ---------------------------------------------------------------------------
# classification of m


@dataclass(frozen=True)
class MClass:
    tag: str  # Singular, RationalBrauer, ObviousPoint, TranscendentalException, Generic
    detail: dict = field(default_factory=dict, compare=False)

    @property
    def is_generic(self) -> bool:
        return self.tag == "Generic"


def transcendental_parameter(m: int) -> tuple[int, int, int] | None:
    """(d, n, sign) with 4 - m = d^2 and d = 2(n^2 + sign), n >= 1, or None."""
    if m >= 4 or not is_square(4 - m):
        return None
    d = math.isqrt(4 - m)
    if d % 2:
        return None
    h = d // 2
    for sign in (1, -1):
        n2 = h - sign
        if n2 >= 1 and is_square(n2):
            return d, math.isqrt(n2), sign
    return None


def classify_m(m: int) -> MClass:
    if m in (0, 4):
        return MClass("Singular", {})
    if m > 4 and is_square(m - 4):
        return MClass("RationalBrauer", {"sqrt_m_minus_4": math.isqrt(m - 4)})
    if is_square(m):
        r = math.isqrt(m)
        return MClass("ObviousPoint", {"point": (r, 0, 0)})
    # m(m-4) a square forces m in {0, 4}
    assert not is_square(m * (m - 4)), m
    t = transcendental_parameter(m)
    if t is not None:
        d, n, sign = t
        return MClass("TranscendentalException", {"d": d, "n": n, "sign": sign})
    return MClass("Generic", {})


# ---------------------------------------------------------------------------
# Brauer elements as vectors over the basis alpha_{1,-}, alpha_{2,-}, alpha_{3,-}


@dataclass(frozen=True)
class BrauerElem:
    coeffs: Vector

    @classmethod
    def alpha_minus(cls, i: int) -> "BrauerElem":
        return cls(tuple(int(j == i) for j in (1, 2, 3)))

    @classmethod
    def alpha_plus(cls, i: int) -> "BrauerElem":
        return cls(tuple(int(j != i) for j in (1, 2, 3)))

    @classmethod
    def alpha(cls) -> "BrauerElem":
        return cls((1, 1, 1))

    @classmethod
    def zero(cls) -> "BrauerElem":
        return cls(ZERO)

    def __add__(self, other: "BrauerElem") -> "BrauerElem":
        return BrauerElem(add_vectors(self.coeffs, other.coeffs))

    @property
    def kind(self) -> str:
        c = self.coeffs
        if c == ZERO:
            return "zero"
        if c == (1, 1, 1):
            return "alpha"
        if sum(c) == 1:
            return f"alpha_{c.index(1) + 1}_minus"
        return f"alpha_{c.index(0) + 1}_plus"

    @property
    def symbol_form(self) -> tuple[str, str]:
        k = self.kind
        if k == "zero":
            return ("1", "m-4")
        if k == "alpha":
            return ("u_1^2-4", "m-4")
        i = k.split("_")[1]
        return (f"u_{i}{'-' if k.endswith('minus') else '+'}2", "m-4")

    def pair(self, v: Vector) -> int:
        """Invariant bit of this element at a point with invariant vector v."""
        return sum(a & b for a, b in zip(self.coeffs, v)) % 2


# ---------------------------------------------------------------------------
# invariants at a point


def _delta(p: int) -> int:
    return 3 if p == 2 else 1


def pinned_class_rep(x: int, p: int, prec: int) -> int | None:
    """Integer with the square class of every element of x + p^prec Z_p, or None."""
    q = p**prec
    x %= q
    if x == 0:
        return None
    d, _ = split_valuation(x, p)
    if prec < d + _delta(p):
        return None
    # the class depends on x mod p^(d + delta) only; reduce so reps repeat
    return x % p ** (d + _delta(p))


@lru_cache(maxsize=1 << 16)
def _int_symbol_bit(a: int, D: int, p: int | None) -> int:
    return 0 if hilbert_symbol(a, D, Place(p)) == 1 else 1


def _symbol_bit(a, m: int, v: Place) -> int:
    if isinstance(a, int):
        return _int_symbol_bit(a, m - 4, v.p)
    return 0 if hilbert_symbol(a, m - 4, v) == 1 else 1


def _point_class(u: Point3, v: Place):
    dom = u.domain
    if dom.kind == "Zmod":
        if v.is_real or dom.modulus % v.p:
            raise ValueError(f"residues mod {dom.modulus} carry no information at {v}")
        k = split_valuation(dom.modulus, v.p)[0]
        if v.p ** k != dom.modulus:
            raise ValueError("residue modulus must be a power of the place's prime")
        return "residue", k
    if dom.kind == "RR":
        if not v.is_real:
            raise ValueError("real samples only determine real invariants")
        return "real", None
    return "exact", None


def _symbol_entry_bit(x, m: int, v: Place, kind: str, k: int | None) -> int:
    """Bit of (x, m-4)_v where x is the relevant expression in the coordinates."""
    if kind == "residue":
        rep = pinned_class_rep(x, v.p, k)
        if rep is None:
            raise PrecisionInsufficient(f"{x} mod {v.p}^{k} does not pin a square class")
        return _symbol_bit(rep, m, v)
    if kind == "real":
        if abs(x) < 1e-9:
            raise PrecisionInsufficient("real sample too close to the degenerate locus")
        return 1 if (x < 0 and m < 4) else 0
    if x == 0:
        raise UndefinedAtPoint("symbol entry vanishes at the point")
    return _symbol_bit(Fraction(x), m, v)


def _coerce(u) -> Point3:
    return u if isinstance(u, Point3) else Point3.of(*u)


def inv_alpha_i_minus(m: int, u, i: int, v: Place) -> Fraction:
    """inv_v (u_i - 2, m - 4) at u, in {0, 1/2}."""
    pt = _coerce(u)
    kind, k = _point_class(pt, v)
    return bit_to_invariant(_symbol_entry_bit(pt.u[i - 1] - 2, m, v, kind, k))


def inv_alpha_i_plus(m: int, u, i: int, v: Place) -> Fraction:
    """inv_v (u_i + 2, m - 4) at u, in {0, 1/2}."""
    pt = _coerce(u)
    kind, k = _point_class(pt, v)
    return bit_to_invariant(_symbol_entry_bit(pt.u[i - 1] + 2, m, v, kind, k))


def inv_alpha(m: int, u, v: Place) -> Fraction:
    """inv_v (u_i^2 - 4, m - 4), checked across every usable representation."""
    pt = _coerce(u)
    kind, k = _point_class(pt, v)
    bits = {}
    imprecise = False
    for i in (1, 2, 3):
        try:
            bits[i] = _symbol_entry_bit(pt.u[i - 1] ** 2 - 4, m, v, kind, k)
        except UndefinedAtPoint:
            continue
        except PrecisionInsufficient:
            imprecise = True
    if not bits:
        if imprecise:
            raise PrecisionInsufficient("no representation of alpha is pinned")
        raise UndefinedAtPoint("u_i^2 = 4 for every i")
    if len(set(bits.values())) != 1:
        raise RepresentationMismatch(f"representations of alpha disagree: {bits}")
    return bit_to_invariant(next(iter(bits.values())))


def invariant_vector(m: int, u, v: Place) -> Vector:
    return tuple(int(inv_alpha_i_minus(m, u, i, v) * 2) for i in (1, 2, 3))


def relation_check(m: int, u, v: Place) -> list[str]:
    """Relations among the alpha invariants that fail at u (empty when all hold).

    Each generator is evaluated by its own symbol: alpha_{i,-} by u_i - 2,
    alpha_{i,+} by u_i + 2 and alpha by u_i^2 - 4. Raises PrecisionInsufficient
    or UndefinedAtPoint when some symbol is not determined at u.
    """
    minus = [inv_alpha_i_minus(m, u, i, v) for i in (1, 2, 3)]
    plus = [inv_alpha_i_plus(m, u, i, v) for i in (1, 2, 3)]
    a = inv_alpha(m, u, v)
    bad = [f"minus_plus_{i + 1}" for i in range(3) if (minus[i] + plus[i] - a) % 1]
    if sum(plus) % 1:
        bad.append("plus_sum")
    if (sum(minus) - a) % 1:
        bad.append("minus_sum")
    return bad


# ---------------------------------------------------------------------------
# real witnesses


def _surd_sign(a: Fraction, s: int, disc: Fraction) -> int:
    """Sign of a + s*sqrt(disc), disc >= 0."""
    if disc == 0 or s == 0:
        return (a > 0) - (a < 0)
    if s > 0:
        if a >= 0:
            return 1
        return 1 if disc > a * a else (-1 if disc < a * a else 0)
    if a <= 0:
        return -1
    return -1 if disc > a * a else (1 if disc < a * a else 0)


@dataclass(frozen=True)
class RealWitness:
    """The real point (u1, u2, (u1*u2 + s*sqrt(disc))/2) on U_m, u1 and u2 rational."""

    m: int
    u1: Fraction
    u2: Fraction
    s: int

    @property
    def disc(self) -> Fraction:
        u1, u2 = self.u1, self.u2
        return (u1 * u2) ** 2 - 4 * (u1 * u1 + u2 * u2) + 4 * self.m

    @classmethod
    def make(cls, m: int, u1, u2, s: int) -> "RealWitness":
        w = cls(m, Fraction(u1), Fraction(u2), s)
        if w.disc < 0:
            raise ValueError("no real third coordinate")
        return w

    def approx(self) -> tuple[float, float, float]:
        u3 = (float(self.u1 * self.u2) + self.s * math.sqrt(float(self.disc))) / 2
        return (float(self.u1), float(self.u2), u3)

    def signs_minus_two(self) -> tuple[int, int, int]:
        """Exact signs of u_i - 2."""
        def sg(x):
            return (x > 0) - (x < 0)
        s3 = _surd_sign(self.u1 * self.u2 - 4, self.s, self.disc)
        return (sg(self.u1 - 2), sg(self.u2 - 2), s3)

    def vector(self) -> Vector:
        signs = self.signs_minus_two()
        if 0 in signs:
            raise UndefinedAtPoint("real witness has a coordinate equal to 2")
        return tuple(int(s < 0 and self.m < 4) for s in signs)

    def to_json(self) -> dict:
        return {
            "u1": str(self.u1),
            "u2": str(self.u2),
            "u3": f"({self.u1 * self.u2} {'+' if self.s > 0 else '-'} sqrt({self.disc}))/2",
            "approx": [round(x, 12) for x in self.approx()],
        }


def _real_image(m: int) -> "LocalImage":
    flags = []
    witnesses: dict[Vector, object] = {}
    if m > 4:
        w = RealWitness.make(m, 0, 0, 1)
        witnesses[w.vector()] = w
    else:
        # all |u_i| > 2: u1 u2 u3 > sum u_i^2 - 4 > 0, so an even number of
        # coordinates are negative; all four even patterns occur
        t = 3
        while True:
            w = RealWitness.make(m, t, t, 1) if (t * t - 4) ** 2 + 4 * (m - 4) >= 0 else None
            if w is not None and all(s > 0 for s in w.signs_minus_two()):
                break
            t += 1
        for u1, u2, s in ((t, t, 1), (-t, -t, 1), (-t, t, -1), (t, -t, -1)):
            w = RealWitness.make(m, u1, u2, s)
            witnesses[w.vector()] = w
        # all |u_i| < 2: f > 0 there, so the compact piece exists iff 0 < m < 4
        if 0 < m < 4:
            w = RealWitness.make(m, 0, 0, 1)
            witnesses[w.vector()] = w
        if m >= -8:
            flags.append("beyond_paper")
    for vec, w in witnesses.items():
        assert abs(markoff_poly(*w.approx()) - m) < 1e-6 * max(1, abs(m))
    return LocalImage(INF, frozenset(witnesses), witnesses, "proven_by_enumeration",
                      tuple(flags))


# ---------------------------------------------------------------------------
# local images


@dataclass
class LocalImage:
    place: Place
    vectors: frozenset
    witnesses: dict
    completeness: str  # proven_by_enumeration, from_paper_rule, depth_capped_partial
    flags: tuple = ()
    depth: int | None = None
    classes_scanned: int = 0

    def __post_init__(self):
        self.vectors = frozenset(self.vectors)
        missing = [v for v in self.vectors if v not in self.witnesses]
        if missing:
            raise ValueError(f"vectors without witnesses: {missing}")

    @property
    def sorted_vectors(self) -> list[Vector]:
        return sorted(self.vectors)

    @property
    def is_partial(self) -> bool:
        return self.completeness == "depth_capped_partial"

    def to_json(self) -> dict:
        wit = {}
        for vec in self.sorted_vectors:
            w = self.witnesses[vec]
            if isinstance(w, ResidueClassPoint):
                wit[vector_str(vec)] = {
                    "p": w.p,
                    "k": w.k,
                    "modulus": w.modulus,
                    "residues": list(w.residues),
                    "pivot": w.pivot,
                    "slack": w.slack,
                }
            else:
                wit[vector_str(vec)] = w.to_json()
        doc = {
            "place": str(self.place),
            "vectors": [vector_json(v) for v in self.sorted_vectors],
            "completeness": self.completeness,
            "witnesses": wit,
        }
        if self.flags:
            doc["flags"] = list(self.flags)
        if self.depth is not None:
            doc["depth"] = self.depth
        return doc


def default_depth_cap(m: int, p: int) -> int:
    return vp(m - 4, p) + 6


def pinned_vector(r: Sequence[int], p: int, k: int, m: int) -> Vector | None:
    """Vector shared by every point of the class r mod p^k, if each u_i - 2 is pinned."""
    bits = []
    for x in r:
        rep = pinned_class_rep(x - 2, p, k)
        if rep is None:
            return None
        bits.append(_int_symbol_bit(rep, m - 4, p))
    return tuple(bits)


def existence_witness(r: Sequence[int], p: int, k: int, m: int) -> ResidueClassPoint | None:
    """A Hensel-certified class whose Z_p-point lies in the class of r mod p^k.

    With K = v_p(f(r) - m), e = v_p(df/du_j(r)) and K >= 2e + 1, Hensel moves
    u_j by at most p^(K-e); K - e >= k keeps the root inside the class.
    """
    val = markoff_poly(*r) - m
    best = None
    for j, g in enumerate(gradient(*r), start=1):
        if g == 0:
            continue
        e = split_valuation(g, p)[0]
        K = split_valuation(val, p)[0] if val else max(k + e, 2 * e + 1)
        if K >= 2 * e + 1 and K - e >= k and (best is None or (e, K) < best[:2]):
            best = (e, K, j)
    if best is None:
        return None
    e, K, j = best
    q = p**K
    return ResidueClassPoint(p, K, tuple(x % q for x in r), "certified_liftable", e, j)


def enumerate_image(m: int, p: int, depth_cap: int | None = None,
                    budget: int | None = None) -> LocalImage:
    """Breadth-first refinement over residue classes mod p^k, k = 1, 2, ...

    Every Z_p-point in the class of r mod p^k agrees with r mod p^k, so once
    each u_i - 2 is pinned the class has a single invariant vector. Such a
    class is refined further only while its vector still lacks a certified
    point. Classes are dropped only when they have no lift.
    """
    if m in (0, 4):
        raise ValueError("the surface is singular for m = 0, 4")
    place = Place(p)
    depth_cap = default_depth_cap(m, p) if depth_cap is None else depth_cap
    budget = default_budget() if budget is None else budget
    square = is_local_square(m - 4, place)
    witnesses: dict[Vector, ResidueClassPoint] = {}
    level = level_one_solutions(m, p)
    scanned = p * p
    k = 1
    partial = False
    while level:
        nxt = []
        for r in level:
            vec = ZERO if square else pinned_vector(r, p, k, m)
            if vec is not None:
                if vec in witnesses:
                    continue
                w = existence_witness(r, p, k, m)
                if w is not None:
                    witnesses[vec] = w
                    continue
            kids = lift_children(r, p, k, m)
            if not kids:
                continue
            if k >= depth_cap:
                partial = True
                continue
            scanned += len(kids)
            if scanned > budget:
                raise BudgetExceeded(f"local image at {p} exceeds budget {budget}")
            nxt.extend(kids)
        if (square and witnesses) or len(witnesses) == 8:
            partial = False
            break
        if not nxt:
            break
        level = sorted(nxt)
        k += 1
    completeness = "depth_capped_partial" if partial else "proven_by_enumeration"
    return LocalImage(place, frozenset(witnesses), witnesses, completeness,
                      depth=k, classes_scanned=scanned)


def local_invariant_image(m: int, v: Place, depth_cap: int | None = None,
                          budget: int | None = None, strict: bool = False,
                          method: str = "enumerate") -> LocalImage:
    """The set of invariant vectors realized by U_m(Z_v) (U_m(R) at infinity).

    ``method`` is "enumerate" (residue-class refinement), "scaled" (odd p
    only, see scaled_image) or "auto" (scaled at odd p). With ``strict`` a
    capped search raises DepthCapExceeded instead of returning a partial image.
    """
    if v.is_real:
        if m == 4:
            raise ValueError("the surface is singular for m = 4")
        return _real_image(m)
    if method not in ("enumerate", "scaled", "auto"):
        raise ValueError(f"unknown method {method!r}")
    if method == "scaled" or (method == "auto" and v.p != 2):
        return scaled_image(m, v.p)
    img = enumerate_image(m, v.p, depth_cap, budget)
    if strict and img.is_partial:
        raise DepthCapExceeded(f"unresolved classes at depth {img.depth} for p = {v.p}")
    return img


# ---------------------------------------------------------------------------
# closed-form images


@dataclass(frozen=True)
class ClosedForm:
    name: str
    vectors: frozenset
    mode: str  # exact, contains


def _locally_soluble(m: int, p: int) -> bool:
    if p == 2:
        return m % 4 != 3
    if p == 3:
        return m % 9 not in (3, 6)
    return True


def closed_form_rule(m: int, v: Place) -> ClosedForm:
    """The closed-form image predicted for (m, v), with its matching mode."""
    if v.is_real:
        if m > 4:
            return ClosedForm("real_m_above_4", frozenset([ZERO]), "exact")
        raise NoApplicableRule(f"no closed form at infinity for m = {m}")
    p = v.p
    D = m - 4
    if D == 0:
        raise NoApplicableRule("singular surface")
    soluble = _locally_soluble(m, p)
    if p == 2:
        if not soluble:
            return ClosedForm("two_insoluble", frozenset(), "exact")
        if m % 8 == 1:
            return ClosedForm("two_m_1_mod_8", frozenset(WEIGHT_TWO), "exact")
        if m % 8 == 5:
            return ClosedForm("two_square", frozenset([ZERO]), "exact")
        target = ZERO if vp(D, 2) % 2 == 0 else (0, 0, 1)
        return ClosedForm("two_even_m", frozenset([target]), "contains")
    if D % p != 0 or is_local_square(D, v):
        return ClosedForm("trivial_invariants", frozenset([ZERO] if soluble else []), "exact")
    e = vp(D, p)
    if p > 5:
        if e % 2:
            return ClosedForm("odd_valuation_surjective", frozenset(ALL_VECTORS), "exact")
        return ClosedForm("even_valuation_nonsquare",
                         frozenset((ZERO, (1, 1, 1)) + WEIGHT_ONE), "exact")
    if e == 1 and p == 3:
        return ClosedForm("three_valuation_one", frozenset(WEIGHT_ONE), "exact")
    if e == 1 and p == 5:
        return ClosedForm("five_valuation_one", frozenset(NONZERO_VECTORS), "exact")
    raise NoApplicableRule(f"no closed form at p = {p} with valuation {e}")


@dataclass(frozen=True)
class VerifyOutcome:
    status: str  # consistent, mismatch
    rule: str
    detail: str = ""


def verify_image_against_paper(m: int, v: Place, depth_cap: int | None = None,
                               image: LocalImage | None = None) -> VerifyOutcome:
    rule = closed_form_rule(m, v)
    img = image or local_invariant_image(m, v, depth_cap)
    if img.is_partial:
        return VerifyOutcome("mismatch", rule.name, "enumeration hit its depth cap")
    got = img.vectors
    ok = got == rule.vectors if rule.mode == "exact" else rule.vectors <= got
    if ok:
        return VerifyOutcome("consistent", rule.name)
    detail = (f"enumerated {sorted(map(vector_str, got))}, "
              f"predicted ({rule.mode}) {sorted(map(vector_str, rule.vectors))}")
    return VerifyOutcome("mismatch", rule.name, detail)


# ---------------------------------------------------------------------------
# sampling Z_p-points: choose u1, u2 in Z, solve the quadratic for u3


def zp_point_from_pair(m: int, p: int, u1: int, u2: int, sign: int,
                       extra: int = 6) -> ResidueClassPoint | None:
    """Certified class of the Z_p-point (u1, u2, (u1 u2 + sign sqrt(Delta))/2).

    Delta = (u1^2 - 4)(u2^2 - 4) + 4(m - 4) must be a nonzero square of Q_p.
    """
    disc = (u1 * u1 - 4) * (u2 * u2 - 4) + 4 * (m - 4)
    if disc == 0:
        return None
    e2, unit = split_valuation(disc, p)
    if e2 % 2:
        return None
    need = e2 + 1 + extra + (2 if p == 2 else 0)
    s = sqrt_unit_padic(unit, p, need)
    if s is None:
        return None
    root = p ** (e2 // 2) * s
    num = u1 * u2 + sign * root
    if p == 2:
        if num % 2:
            root = -root + 0
            num = u1 * u2 + sign * root
        if num % 2:
            return None
        u3 = num // 2
        # a square root mod 2^n is only determined mod 2^(n-1)
        k = need - 2
    else:
        u3 = num * pow(2, -1, p**need)
        k = need
    q = p**k
    r = (u1 % q, u2 % q, u3 % q)
    if (markoff_poly(*r) - m) % q:
        raise AssertionError("sampled class is off the surface")
    g = (2 * r[2] - r[0] * r[1]) % q
    if g == 0:
        return None
    e = split_valuation(g, p)[0]
    if 2 * e + 1 > k:
        return None
    return ResidueClassPoint(p, k, r, "certified_liftable", e, 3)


def sample_zp_points(m: int, p: int, n: int, seed: int = 0,
                     extra: int = 6, max_tries: int | None = None) -> list[ResidueClassPoint]:
    """n certified classes of Z_p-points, biased towards u_i close to +-2."""
    rng = random.Random(seed)
    top = vp(m - 4, p) + 3
    out: list[ResidueClassPoint] = []
    tries = 0
    max_tries = max_tries or 200 * n + 1000
    while len(out) < n and tries < max_tries:
        tries += 1
        coords = []
        for _ in range(2):
            if rng.random() < 0.5:
                coords.append(rng.randrange(p ** (top + 2)))
            else:
                a = rng.randrange(top + 1)
                unit = rng.randrange(1, p**3)
                while unit % p == 0:
                    unit = rng.randrange(1, p**3)
                coords.append(rng.choice((2, -2)) + p**a * unit)
        c = zp_point_from_pair(m, p, coords[0], coords[1], rng.choice((1, -1)), extra)
        if c is not None:
            out.append(c)
    return out


def class_vector(c: ResidueClassPoint, m: int) -> Vector | None:
    """Invariant vector of a certified class, or None when it is not pinned."""
    D = m - 4
    square = is_local_square(D, Place(c.p))
    if square:
        return ZERO
    bits = []
    for i in range(3):
        prec = c.k - c.slack if i == c.pivot - 1 else c.k
        rep = pinned_class_rep(c.residues[i] - 2, c.p, prec)
        if rep is None:
            return None
        bits.append(_symbol_bit(rep, m, Place(c.p)))
    return tuple(bits)


def image_from_closed_form(m: int, p: int, seed: int = 0, max_tries: int = 20000) -> LocalImage:
    """The exact closed-form image at p > 5, with sampled witnesses for every vector."""
    rule = closed_form_rule(m, Place(p))
    if rule.mode != "exact" or p <= 5:
        raise NoApplicableRule(f"no exact closed form usable at p = {p}")
    rng = random.Random(seed)
    e = vp(m - 4, p)
    witnesses: dict[Vector, ResidueClassPoint] = {}
    tries = 0
    while set(witnesses) != set(rule.vectors) and tries < max_tries:
        tries += 1
        coords = []
        for _ in range(2):
            a = rng.choice((0, 0, 1, e - 1 if e > 1 else 1, e, e + 1))
            unit = rng.randrange(1, p)
            coords.append(rng.choice((2, -2)) + p**a * unit)
        c = zp_point_from_pair(m, p, coords[0], coords[1], rng.choice((1, -1)))
        if c is None:
            continue
        vec = class_vector(c, m)
        if vec is None:
            continue
        if vec not in rule.vectors:
            raise RepresentationMismatch(f"sampled vector {vec} outside closed form at {p}")
        witnesses.setdefault(vec, c)
    if set(witnesses) != set(rule.vectors):
        raise NoApplicableRule(f"could not witness every vector at p = {p}")
    return LocalImage(Place(p), rule.vectors, witnesses, "from_paper_rule")


# ---------------------------------------------------------------------------
# odd p: exact image by rescaling around the singular points
#
# In x = u - 2 the surface reads Q(x) - x1 x2 x3 = D with
# Q(x) = sum x_i^2 - 2 sum_{i<j} x_i x_j.  Points with x == 0 mod p^j are
# x = p^j y where Q(y) - p^j y1 y2 y3 = D / p^(2j).  For y != 0 mod p that
# surface is smooth mod p, and one coordinate y_a == 0 mod p must be the
# Hensel pivot; then y_a (2(y_b + y_c) + c y_b y_c - y_a) = (y_b - y_c)^2 - E,
# and (w^2 - E, D)_p = 1 for every w when D is not a square, so the symbol of
# y_a is the symbol of a unit known mod p.


def _scaled_level_points(p: int, c: int, E: int) -> list[tuple[int, int, int]]:
    """Solutions mod p of Q(y) - c y1 y2 y3 == E; for p | c this is Q(y) == E."""
    if c % p:
        # c = 1: shift the solutions of f = m by 2
        return [tuple((x - 2) % p for x in r) for r in level_one_solutions(E + 4, p)]
    out = []
    for a in range(p):
        for b in range(p):
            s = sqrt_mod_prime((4 * a * b + E) % p, p)
            if s is None:
                continue
            for y3 in sorted({(a + b + s) % p, (a + b - s) % p}):
                out.append((a, b, y3))
    return out


def _scaled_gradient(y: Sequence[int], c: int) -> tuple[int, int, int]:
    y1, y2, y3 = y
    return (2 * (y1 - y2 - y3) - c * y2 * y3,
            2 * (y2 - y1 - y3) - c * y1 * y3,
            2 * (y3 - y1 - y2) - c * y1 * y2)


def lift_to_witness(m: int, p: int, u: Sequence[int], pivot: int,
                    target: int, t: int, precision: int = 12) -> ResidueClassPoint:
    """Certified class of the Z_p-point with the two free coordinates of u fixed
    and the pivot coordinate (1-based) the root congruent to target mod p^t."""
    j = pivot - 1
    a, b = [i for i in range(3) if i != j]
    ua, ub = u[a], u[b]
    disc = (ua * ua - 4) * (ub * ub - 4) + 4 * (m - 4)
    if disc == 0:
        raise UndefinedAtPoint("double root for the pivot coordinate")
    e2, unit = split_valuation(disc, p)
    N = t + e2 + precision
    s = sqrt_unit_padic(unit, p, N) if e2 % 2 == 0 else None
    if s is None:
        raise RepresentationMismatch("pivot coordinate has no p-adic root")
    q = p**N
    inv2 = pow(2, -1, q)
    root = p ** (e2 // 2) * s
    for sg in (1, -1):
        uj = (ua * ub + sg * root) * inv2 % q
        if (uj - target) % p**t == 0:
            break
    else:
        raise RepresentationMismatch("no root in the requested residue class")
    r = [0, 0, 0]
    r[a], r[b], r[j] = ua, ub, uj
    if markoff_poly(*r) == m:
        # exact point: keep the full working precision so every coordinate is pinned
        e = split_valuation(gradient(*r)[j], p)[0]
        return ResidueClassPoint(p, N, tuple(x % q for x in r), "certified_liftable", e, j + 1)
    w = existence_witness(r, p, t, m)
    if w is None:
        raise RepresentationMismatch("lifted point failed Hensel certification")
    return w


def scaled_image(m: int, p: int) -> LocalImage:
    """Exact image at an odd prime from F_p-points of the rescaled surfaces."""
    if p == 2:
        raise ValueError("scaled reduction needs an odd prime")
    if m in (0, 4):
        raise ValueError("the surface is singular for m = 0, 4")
    place = Place(p)
    D = m - 4
    if is_local_square(D, place):
        pts = sample_zp_points(m, p, 1, seed=p)
        if not pts:
            raise RepresentationMismatch("no Z_p-point found on a soluble surface")
        return LocalImage(place, frozenset([ZERO]), {ZERO: pts[0]}, "proven_by_enumeration",
                          ("scaled_reduction",))

    cache: dict[int, int] = {}

    def chi(x: int) -> int:
        # every argument here is a unit, whose symbol depends on x mod p only
        x %= p
        if x not in cache:
            cache[x] = _symbol_bit(x, m, place)
        return cache[x]

    chi_p, chi_m1 = _symbol_bit(p, m, place), chi(-1)
    found: dict[Vector, tuple] = {}  # vector -> (u residues mod p^(j+1), pivot, j)

    def record(vec, u, pivot, j):
        found.setdefault(vec, (u, pivot, j))

    E, c, j = D, 1, 0
    while True:
        for y in _scaled_level_points(p, c, E):
            if c % p == 0 and not any(y):
                continue
            grad = [g % p for g in _scaled_gradient(y, c)]
            if not any(grad):
                continue  # singular points of the c = 1 level, handled by rescaling
            zeros = [i for i in range(3) if y[i] == 0]
            if len(zeros) > 1:
                raise RepresentationMismatch(f"two coordinates vanish at {y} mod {p}")
            bits = []
            pivot = None
            for i in range(3):
                if y[i]:
                    bits.append(chi(y[i]))
                    continue
                b, cc = [x for x in range(3) if x != i]
                L = (2 * (y[b] + y[cc]) + c * y[b] * y[cc]) % p
                if L == 0 or grad[i] == 0:
                    raise RepresentationMismatch(f"vanishing coordinate is not a pivot at {y}")
                bits.append(chi(L))
                pivot = i
            if pivot is None:
                pivot = next(i for i in range(3) if grad[i])
            vec = tuple(bit ^ (j * chi_p % 2) for bit in bits)
            u = tuple(2 + p**j * yi for yi in y)
            record(vec, u, pivot + 1, j)
            if j >= 1:
                # the other three singular points: (u1, u2, u3) -> (-u1, -u2, u3)
                # and its permutations; u_i + 2 == 4 mod p is a square
                for flip in ((0, 1), (0, 2), (1, 2)):
                    fvec = tuple(chi_m1 if i in flip else vec[i] for i in range(3))
                    fu = tuple(-u[i] if i in flip else u[i] for i in range(3))
                    record(fvec, fu, pivot + 1, j)
        if split_valuation(E, p)[0] < 2:
            break
        E //= p * p
        j += 1
        c = p**j

    witnesses: dict[Vector, ResidueClassPoint] = {}
    partial = False
    if m % p == 0 and ZERO not in found:
        # the origin is singular mod p; near it every u_i - 2 is a unit
        w, partial = _origin_witness(m, p)
        if w is not None:
            witnesses[ZERO] = w
    for vec, (u, pivot, jj) in found.items():
        w = lift_to_witness(m, p, u, pivot, u[pivot - 1], jj + 1)
        got = class_vector(w, m)
        if got is None:
            w = lift_to_witness(m, p, u, pivot, u[pivot - 1], jj + 1, precision=40)
            got = class_vector(w, m)
        if got != vec:
            raise RepresentationMismatch(f"witness for {vec} at {p} has vector {got}")
        witnesses[vec] = w
    completeness = "depth_capped_partial" if partial and ZERO not in witnesses else "proven_by_enumeration"
    return LocalImage(place, frozenset(witnesses), witnesses, completeness,
                      ("scaled_reduction",))


def _origin_witness(m: int, p: int, budget: int | None = None):
    """A certified class of a Z_p-point congruent to (0, 0, 0) mod p, by refinement.

    Returns (witness or None, capped).
    """
    cap = vp(m, p) + 6
    budget = default_budget() if budget is None else budget
    level = [(0, 0, 0)]
    scanned = 0
    for k in range(1, cap + 1):
        nxt = []
        for r in level:
            w = existence_witness(r, p, k, m)
            if w is not None:
                return w, False
            kids = lift_children(r, p, k, m)
            scanned += len(kids)
            if scanned > budget:
                raise BudgetExceeded(f"origin neighbourhood at {p} exceeds budget {budget}")
            nxt.extend(kids)
        if not nxt:
            return None, False
        level = sorted(nxt)
    return None, True
