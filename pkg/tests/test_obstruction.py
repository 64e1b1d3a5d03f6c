import json
import random

import pytest

from markoff_bm.brauer import (
    ALL_VECTORS,
    ZERO,
    LocalImage,
    enumerate_image,
    inv_alpha,
    inv_alpha_i_minus,
)
from markoff_bm.errors import Inconclusive
from markoff_bm.obstruction import (
    KERNEL_GROUP,
    analyze_family,
    approximation_certificate,
    decide_bm,
    kernel_constraint_check,
    local_solvable,
    place_image,
    relevant_places,
    sa_wa_certificates,
    solvability,
    sumset,
    zero_sum_choice,
)
from markoff_bm.padic import INF, Place, primes_up_to, squarefree_kernel
from markoff_bm.points import reduced_sweep
from markoff_bm.surface import Point3, Zmod, enumerate_points_mod, markoff_poly


def test_local_solvable_examples():
    assert local_solvable(3, Place(2)) == "insoluble"
    assert local_solvable(12, Place(3)) == "insoluble"
    assert all(local_solvable(45, v) == "soluble" for v in relevant_places(45))
    assert local_solvable(-7, INF) == "soluble"


def _has_zp_point(m, p):
    if p in (2, 3):
        img = enumerate_image(m, p)
        assert img.completeness == "proven_by_enumeration"
        return bool(img.vectors)
    return any(c.hensel_status == "certified_liftable" for c in enumerate_points_mod(m, p))


@pytest.mark.parametrize("p", primes_up_to(100))
def test_local_solvable_by_enumeration(p):
    rng = random.Random(p)
    ms = list(range(-40, 41)) if p <= 3 else [rng.randint(-10**4, 10**4) for _ in range(4)]
    for m in ms:
        if m in (0, 4):
            continue
        assert (local_solvable(m, Place(p)) == "soluble") == _has_zp_point(m, p), (m, p)


def test_solvability_density_mod_36():
    bad = sum(not solvability(m).adelically_soluble for m in range(5, 41))
    assert bad == 15  # 36 * 5/12


@pytest.mark.parametrize("m,expected", [(-14, True), (45, False), (342, False), (1926, True),
                                        (1456, True), (19224, True), (-46, False), (-94, False),
                                        (22, False), (54, False)])
def test_decide_examples(m, expected):
    rep = decide_bm(m)
    assert rep.bm_empty is expected
    if expected:
        assert rep.kernel_ok
        assert rep.zero_choice is None
    else:
        choice = rep.zero_choice
        total = ZERO
        for v, b in choice.items():
            assert b in rep.images[v].vectors
            total = tuple(x ^ y for x, y in zip(total, b))
        assert total == ZERO


def test_decide_short_circuits():
    with pytest.raises(ValueError):
        decide_bm(4)
    r = decide_bm(3)
    assert r.bm_empty is None and "adelically_insoluble" in r.flags
    assert decide_bm(8).bm_empty is False  # m - 4 a square
    assert decide_bm(49).bm_empty is False  # m a square
    r = decide_bm(-32)
    assert r.bm_empty is None and "out_of_method" in r.flags


def test_small_m_real_image_flagged():
    r = decide_bm(-8)
    assert "beyond_paper" in r.flags


def test_report_json_fields():
    doc = decide_bm(45).to_json()
    for key in ("m", "class", "solvable", "relevant_places", "images", "bm_empty", "sa_prime",
                "wa_prime", "kernel_ok", "flags"):
        assert key in doc
    assert doc["relevant_places"] == ["inf", "2", "3", "5", "41"]
    assert doc["approximation_certificate"]["wa_class"] == [1, 1, 2]
    json.dumps(doc)


def test_m45_certificate():
    cert = approximation_certificate(45)
    assert sa_wa_certificates(45) == (41, 41)
    assert cert.wa_witness == (1, 1, 2)
    pt, i = cert.sa_witness
    assert (pt, i) == ((0, 5, 15), 2)
    assert (markoff_poly(*pt) - 45) % 41 == 0
    u = Point3.of(*pt, domain=Zmod(41))
    assert inv_alpha_i_minus(45, u, i, Place(41)) == 1 / 2
    assert inv_alpha(45, Point3.of(1, 1, 2, domain=Zmod(41)), Place(41)) == 1 / 2


def test_certificate_absent():
    assert sa_wa_certificates(8) == (None, None)
    assert sa_wa_certificates(151) == (None, None)
    assert sa_wa_certificates(49 + 4) == (None, None)  # 7^2 even valuation


def test_kernel_examples():
    assert kernel_constraint_check(-14)
    assert not kernel_constraint_check(45)
    assert kernel_constraint_check(5)
    assert len(KERNEL_GROUP) == 16


def test_family_examples():
    f = analyze_family(1456)
    assert f.tag == "4+12d^2" and f.d == 11 and f.predicted_bm_empty is True
    f = analyze_family(-46)
    assert f.tag == "4-2d^2" and f.predicted_bm_empty is None
    assert analyze_family(104) is None
    f = analyze_family(342)
    assert f.tag == "4+2l^2" and f.predicted_bm_empty is False
    f = analyze_family(19224)
    assert f.tag == "4+20d^2" and f.d == 31 and f.predicted_bm_empty is True
    # d = 1 gives m = 2, which has the point (1, 1, 0)
    assert analyze_family(2).predicted_bm_empty is None


def _family_members(B):
    out = set()
    d = 1
    while 2 * d * d <= B + 4:
        out.update({4 + 2 * d * d, 4 - 2 * d * d})
        if 12 * d * d <= B:
            out.add(4 + 12 * d * d)
        if 20 * d * d <= B:
            out.add(4 + 20 * d * d)
        d += 1
    return sorted(m for m in out if abs(m) <= B)


def test_family_agreement():
    matched = 0
    for m in _family_members(10**5):
        f = analyze_family(m)
        if f is None or f.predicted_bm_empty is None:
            continue
        rep = decide_bm(m)
        assert rep.bm_empty == f.predicted_bm_empty, (m, f)
        matched += 1
    assert matched >= 20


def test_soundness_against_points():
    for m, u in sorted(reduced_sweep(2000).items()):
        assert markoff_poly(*u) == m
        rep = decide_bm(m)
        assert rep.solvability.adelically_soluble
        if rep.m_class.tag == "TranscendentalException":
            assert rep.bm_empty is None
        else:
            assert rep.bm_empty is False, m


def test_kernel_constraint_over_range():
    for m in range(-2000, 2001):
        if m in (0, 4):
            continue
        if decide_bm(m).bm_empty:
            assert squarefree_kernel(m - 4) in KERNEL_GROUP


def test_order_independence():
    for m in (-14, 45, 1456, 342):
        base = decide_bm(m)
        imgs = {v: place_image(m, v) for v in reversed(relevant_places(m))}
        again = decide_bm(m, images=imgs)
        assert again.bm_empty == base.bm_empty
        assert again.zero_choice == base.zero_choice
        assert again.to_json() == base.to_json()


def test_sumset_and_choice():
    assert sumset([{(0, 0, 1)}, {(0, 0, 1)}]) == {ZERO}
    assert zero_sum_choice({INF: {(1, 0, 0)}, Place(3): {(0, 1, 0)}}) is None
    images = {INF: set(ALL_VECTORS), Place(3): {(0, 1, 0)}}
    assert zero_sum_choice(images) == {INF: (0, 1, 0), Place(3): (0, 1, 0)}


def _capped(img, keep):
    vecs = [v for v in img.vectors if v in keep]
    return LocalImage(img.place, frozenset(vecs), {v: img.witnesses[v] for v in vecs},
                      "depth_capped_partial")


def test_partial_image_is_inconclusive():
    # obstructed m: losing vectors cannot create a zero sum, so the answer is open
    m = -14
    imgs = {v: place_image(m, v) for v in relevant_places(m)}
    imgs[Place(3)] = _capped(imgs[Place(3)], imgs[Place(3)].vectors)
    with pytest.raises(Inconclusive):
        decide_bm(m, images=imgs)


def test_partial_image_with_zero_sum_decides():
    m = 45
    imgs = {v: place_image(m, v) for v in relevant_places(m)}
    imgs[Place(41)] = _capped(imgs[Place(41)], {ZERO, (1, 1, 1)})
    rep = decide_bm(m, images=imgs)
    assert rep.bm_empty is False and rep.zero_choice is not None
