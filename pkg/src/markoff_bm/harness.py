"""Built-in matrix of oracle instances: enumerated images against closed forms,
family verdicts against the image decider, and the known integral points."""

from __future__ import annotations

from dataclasses import dataclass

from .brauer import local_invariant_image, scaled_image, verify_image_against_paper
from .obstruction import analyze_family, decide_bm
from .padic import INF, Place
from .points import SearchConfig, box_search, certify_empty
from .surface import markoff_poly

# (m, place) pairs; each exercises one closed-form rule
IMAGE_MATRIX = (
    (45, "inf"), (342, "inf"),
    (7, 3), (1456, 3), (12, 3),
    (14, 5), (19224, 5),
    (11, 7), (45, 41), (151, 7), (342, 13),
    (45, 3), (45, 5), (342, 3), (1926, 31), (1456, 11),
    (3, 2), (41, 2), (1456 + 1, 2), (45, 2), (22, 2), (-14, 2),
    (1926, 2), (1456, 2), (342, 2), (19224, 2),
)

# m and the verdict every route must produce
FAMILY_MATRIX = (
    (-14, True), (1926, True), (1456, True), (19224, True), (342, False),
)

POINT_MATRIX = (
    (45, (0, 3, 6)), (-46, (3, 7, 8)), (-94, (5, 5, 9)), (22, (-1, 1, 4)), (54, (-3, 3, 3)),
)

# odd-prime images computed both by refinement and by rescaling
CROSS_MATRIX = ((7, 3), (14, 5), (151, 7), (166, 3), (1254, 5), (45, 3), (490, 3), (19224, 5))


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def _place(tok) -> Place:
    return INF if tok == "inf" else Place(int(tok))


def image_checks():
    for m, tok in IMAGE_MATRIX:
        v = _place(tok)
        out = verify_image_against_paper(m, v)
        yield Check(f"image m={m} v={v} rule={out.rule}", out.status == "consistent", out.detail)


def cross_checks():
    for m, p in CROSS_MATRIX:
        a = local_invariant_image(m, Place(p)).vectors
        b = scaled_image(m, p).vectors
        yield Check(f"two routes m={m} p={p}", a == b, "" if a == b else f"{sorted(a)} vs {sorted(b)}")


def family_checks():
    for m, expected in FAMILY_MATRIX:
        rep = decide_bm(m)
        fam = analyze_family(m)
        predicted = fam.predicted_bm_empty if fam else None
        ok = rep.bm_empty == expected and predicted == expected
        yield Check(f"family m={m}", ok, f"decided {rep.bm_empty}, family {predicted}")


def point_checks():
    for m, pt in POINT_MATRIX:
        found = box_search(m, SearchConfig(height=10))
        ok = markoff_poly(*pt) == m and pt in found and decide_bm(m).bm_empty is False
        yield Check(f"point m={m} {pt}", ok)
    cert = certify_empty(342)
    yield Check("no integral point m=342", cert.status == "empty_certified", cert.status)


def run_verification():
    checks = []
    for gen in (image_checks, cross_checks, family_checks, point_checks):
        checks.extend(gen())
    return checks
