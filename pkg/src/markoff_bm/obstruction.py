"""Deciding the Brauer-Manin obstruction to the integral Hasse principle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .brauer import (
    ZERO,
    LocalImage,
    MClass,
    Vector,
    add_vectors,
    classify_m,
    enumerate_image,
    image_from_closed_form,
    scaled_image,
    vector_str,
    _real_image,
)
from .errors import Inconclusive, RepresentationMismatch
from .padic import (
    INF,
    Place,
    factorize,
    is_prime,
    is_square,
    legendre,
    sqrt_mod_prime,
    squarefree_kernel,
)
from .surface import gradient

SCHEMA_VERSION = "markoff-bm/obstruction/1"
# odd primes up to this bound get the exact scaled computation; above it the
# closed forms for p > 5 are used
SCALED_PRIME_LIMIT = 50
KERNEL_GROUP = frozenset(s * k for s in (1, -1) for k in (1, 2, 3, 5, 6, 10, 15, 30))


# ---------------------------------------------------------------------------
# local and adelic solubility


def local_solvable(m: int, v: Place) -> str:
    if v.is_real:
        return "soluble"
    if v.p == 2 and m % 4 == 3:
        return "insoluble"
    if v.p == 3 and m % 9 in (3, 6):
        return "insoluble"
    return "soluble"


@dataclass
class SolvabilityReport:
    verdicts: dict  # Place -> "soluble" / "insoluble"

    @property
    def adelically_soluble(self) -> bool:
        # places not listed are soluble by rule
        return all(x == "soluble" for x in self.verdicts.values())

    def to_json(self) -> dict:
        return {
            "adelically_soluble": self.adelically_soluble,
            "places": {str(v): x for v, x in sorted(self.verdicts.items(), key=lambda t: t[0].sort_key())},
        }


def relevant_places(m: int) -> list[Place]:
    out = {INF, Place(2), Place(3), Place(5)}
    out.update(Place(p) for p in factorize(m - 4).primes)
    return sorted(out, key=Place.sort_key)


def solvability(m: int) -> SolvabilityReport:
    return SolvabilityReport({v: local_solvable(m, v) for v in relevant_places(m)})


# ---------------------------------------------------------------------------
# sumset of local images


def sumset(images) -> set[Vector]:
    acc = {ZERO}
    for img in images:
        acc = {add_vectors(a, b) for a in acc for b in img}
    return acc


def zero_sum_choice(images: dict) -> dict | None:
    """Local vectors, one per place, summing to zero, or None."""
    places = sorted(images, key=Place.sort_key)
    # dynamic programming over places, remembering one choice per partial sum
    reach: dict[Vector, tuple] = {ZERO: ()}
    for v in places:
        nxt: dict[Vector, tuple] = {}
        for s, choice in sorted(reach.items()):
            for b in sorted(images[v]):
                t = add_vectors(s, b)
                nxt.setdefault(t, choice + (b,))
        reach = nxt
    if ZERO not in reach:
        return None
    return dict(zip(places, reach[ZERO]))


def place_image(m: int, v: Place) -> LocalImage:
    if v.is_real:
        return _real_image(m)
    if v.p == 2:
        return enumerate_image(m, 2)
    if v.p <= SCALED_PRIME_LIMIT:
        return scaled_image(m, v.p)
    return image_from_closed_form(m, v.p, seed=v.p)


def kernel_constraint_check(m: int) -> bool:
    """Is m - 4 in <-1, 2, 3, 5> modulo squares?"""
    return squarefree_kernel(m - 4) in KERNEL_GROUP


# ---------------------------------------------------------------------------
# weak and strong approximation


@dataclass(frozen=True)
class ApproximationCertificate:
    prime: int
    wa_witness: tuple  # smooth F_p point with u_1^2 - 4 a nonresidue
    sa_witness: tuple  # smooth F_p point and index i with u_i - 2 a nonresidue

    def to_json(self) -> dict:
        pt, i = self.sa_witness
        return {"prime": self.prime, "wa_class": list(self.wa_witness),
                "sa_class": list(pt), "sa_index": i}


def _smooth_points(m: int, p: int, u1_values=None):
    """Smooth F_p-points in lexicographic order, solving for u3 (p odd)."""
    inv2 = pow(2, -1, p)
    for u1 in (range(p) if u1_values is None else u1_values):
        for u2 in range(p):
            b = u1 * u2
            disc = (b * b - 4 * (u1 * u1 + u2 * u2 - m)) % p
            s = sqrt_mod_prime(disc, p)
            if s is None:
                continue
            for u3 in sorted({(b + s) * inv2 % p, (b - s) * inv2 % p}):
                if any(g % p for g in gradient(u1, u2, u3)):
                    yield (u1, u2, u3)


def approximation_certificate(m: int) -> ApproximationCertificate | None:
    """Least prime p > 3 with v_p(m - 4) odd, with explicit local classes.

    The classes are the lexicographically least smooth F_p-points with
    u_1^2 - 4 a nonresidue, and with some u_i - 2 a nonresidue.
    """
    fac = factorize(m - 4)
    for p in fac.primes:
        if p <= 3 or fac.exponent(p) % 2 == 0:
            continue
        good_u1 = (u for u in range(p) if legendre(u * u - 4, p) == -1)
        wa = next(_smooth_points(m, p, good_u1), None)
        sa = None
        for r in _smooth_points(m, p):
            i = next((i for i in range(3) if legendre(r[i] - 2, p) == -1), None)
            if i is not None:
                sa = (r, i + 1)
                break
        if wa is None or sa is None:
            raise RepresentationMismatch(f"no nonresidue class found mod {p}")
        return ApproximationCertificate(p, wa, sa)
    return None


def sa_wa_certificates(m: int) -> tuple[int | None, int | None]:
    cert = approximation_certificate(m)
    return (cert.prime, cert.prime) if cert else (None, None)


# ---------------------------------------------------------------------------
# families with a known verdict


@dataclass(frozen=True)
class FamilyVerdict:
    tag: str
    d: int
    hypotheses: dict
    predicted_bm_empty: bool | None  # None when some hypothesis fails

    def to_json(self) -> dict:
        return {"tag": self.tag, "d": self.d, "hypotheses": dict(self.hypotheses),
                "predicted_bm_empty": self.predicted_bm_empty}


def _prime_divisors(n: int) -> list[int]:
    return factorize(n).primes if n > 1 else []


def _all_primes(d: int, residues: set[int], mod: int) -> bool:
    return all(p % mod in residues for p in _prime_divisors(d))


def _sqrt_if(n: int) -> int | None:
    if n <= 0 or not is_square(n):
        return None
    return math.isqrt(n)


def analyze_family(m: int) -> FamilyVerdict | None:
    """Match m against the families with a proven verdict and check hypotheses."""
    D = m - 4
    cands: list[FamilyVerdict] = []
    if D % 2 == 0 and (d := _sqrt_if(abs(D) // 2)) is not None:
        if D > 0:
            h = {"primes_pm1_mod_8": _all_primes(d, {1, 7}, 8),
                 "d_mod_9_admissible": d % 9 in (0, 3, 6, 4, 5)}
            cands.append(FamilyVerdict("4+2d^2", d, h, True if all(h.values()) else None))
            h2 = {"prime_at_least_13": d >= 13 and is_prime(d),
                  "pm4_mod_9": d % 9 in (4, 5),
                  "not_pm1_mod_8": d % 8 not in (1, 7)}
            cands.append(FamilyVerdict("4+2l^2", d, h2, False if all(h2.values()) else None))
        else:
            h = {"primes_1_or_3_mod_8": _all_primes(d, {1, 3}, 8),
                 "d_above_1": d > 1}
            cands.append(FamilyVerdict("4-2d^2", d, h, True if all(h.values()) else None))
    if D > 0 and D % 12 == 0 and (d := _sqrt_if(D // 12)) is not None:
        h = {"d_odd": d % 2 == 1,
             "primes_pm1_mod_12": _all_primes(d, {1, 11}, 12),
             "d2_25_mod_32": d * d % 32 == 25}
        cands.append(FamilyVerdict("4+12d^2", d, h, True if all(h.values()) else None))
    if D > 0 and D % 20 == 0 and (d := _sqrt_if(D // 20)) is not None:
        h = {"d_odd": d % 2 == 1,
             "pm4_mod_9": d % 9 in (4, 5),
             "primes_pm1_mod_5": _all_primes(d, {1, 4}, 5)}
        cands.append(FamilyVerdict("4+20d^2", d, h, True if all(h.values()) else None))
    if not cands:
        return None
    decided = [c for c in cands if c.predicted_bm_empty is not None]
    return decided[0] if decided else cands[0]


# ---------------------------------------------------------------------------
# the decision


@dataclass
class ObstructionReport:
    m: int
    m_class: MClass
    solvability: SolvabilityReport
    relevant_places: list
    images: dict = field(default_factory=dict)
    bm_empty: bool | None = None
    sa_prime: int | None = None
    wa_prime: int | None = None
    certificate: ApproximationCertificate | None = None
    kernel_ok: bool = False
    flags: list = field(default_factory=list)
    zero_choice: dict | None = None
    family: FamilyVerdict | None = None
    points: dict | None = None

    @property
    def decided(self) -> bool:
        return self.bm_empty is not None

    def to_json(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "m": self.m,
            "class": self.m_class.tag,
            "solvable": self.solvability.to_json(),
            "relevant_places": [str(v) for v in self.relevant_places],
            "images": {str(v): self.images[v].to_json()
                       for v in sorted(self.images, key=Place.sort_key)},
            "bm_empty": self.bm_empty,
            "sa_prime": self.sa_prime,
            "wa_prime": self.wa_prime,
            "kernel_ok": self.kernel_ok,
            "flags": sorted(set(self.flags)),
        }
        if self.certificate:
            doc["approximation_certificate"] = self.certificate.to_json()
        if self.zero_choice is not None:
            doc["zero_sum_choice"] = {str(v): vector_str(b) for v, b in
                                      sorted(self.zero_choice.items(), key=lambda t: t[0].sort_key())}
        if self.family:
            doc["family"] = self.family.to_json()
        if self.points is not None:
            doc["points"] = self.points
        return doc


def decide_bm(m: int, images: dict | None = None) -> ObstructionReport:
    """Is U_m(A_Z)^Br empty?

    ``images`` may supply precomputed LocalImages per Place. Raises
    ValueError for singular m and Inconclusive when a capped image leaves
    the answer open.
    """
    cls = classify_m(m)
    if cls.tag == "Singular":
        raise ValueError(f"the surface is singular for m = {m}")
    places = relevant_places(m)
    rep = ObstructionReport(m, cls, solvability(m), places,
                            kernel_ok=kernel_constraint_check(m))
    rep.family = analyze_family(m)
    if cls.is_generic:
        rep.certificate = approximation_certificate(m)
        if rep.certificate:
            rep.sa_prime = rep.wa_prime = rep.certificate.prime
    if not rep.solvability.adelically_soluble:
        rep.flags.append("adelically_insoluble")
        return rep
    if cls.tag in ("RationalBrauer", "ObviousPoint"):
        rep.bm_empty = False
        rep.flags.append("no_obstruction_" + cls.tag.lower())
        return rep
    if cls.tag == "TranscendentalException":
        rep.flags.append("out_of_method")
        return rep

    given = images or {}
    for v in places:
        img = given.get(v) or place_image(m, v)
        rep.images[v] = img
        rep.flags.extend(img.flags)
        if img.completeness == "from_paper_rule":
            rep.flags.append("closed_form_image")
    vectors = {v: img.vectors for v, img in rep.images.items()}
    choice = zero_sum_choice(vectors)
    partial = [v for v, img in rep.images.items() if img.is_partial]
    if choice is not None:
        # a capped image only loses vectors, so a zero sum found is final
        rep.bm_empty = False
        rep.zero_choice = choice
    elif partial:
        rep.flags.append("inconclusive")
        raise Inconclusive(f"images at {', '.join(map(str, partial))} hit the depth cap")
    else:
        rep.bm_empty = True
    if rep.bm_empty and not rep.kernel_ok:
        raise RepresentationMismatch(f"obstruction for m = {m} outside <-1, 2, 3, 5>")
    return rep
