"""Census of all |m| <= B and the counting utilities around it."""

from __future__ import annotations

import csv
import io
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .brauer import classify_m, transcendental_parameter
from .errors import Inconclusive, RepresentationMismatch
from .obstruction import KERNEL_GROUP, decide_bm
from .padic import legendre
from .points import reduced_sweep

SCHEMA_VERSION = "markoff-bm/census/1"
DESK_BOUND = 10**6
CSV_HEADER = ("m", "class", "solvable", "bm_empty", "sa_prime", "kernel_ok", "point", "flags")
SERIES_KEYS = ("obstructed", "adelically_insoluble", "point_found", "no_point_found",
               "wa_not_certified", "inconclusive", "out_of_method")


@dataclass(frozen=True)
class CensusConfig:
    audit_rate: float = 0.01
    seed: int = 0
    threads: int = 1
    breakpoints: tuple = ()


@dataclass(frozen=True)
class CensusRow:
    m: int
    tag: str
    solvable: bool | None
    bm_empty: bool | None
    status: str  # decided, insoluble, out_of_method, inconclusive, singular
    sa_prime: int | None
    kernel_ok: bool
    point: tuple | None
    route: str
    flags: tuple = ()

    def bm_cell(self) -> str:
        if self.bm_empty is None:
            return self.status
        return "true" if self.bm_empty else "false"

    def csv_cells(self) -> list[str]:
        return [
            str(self.m), self.tag,
            "" if self.solvable is None else str(self.solvable).lower(),
            self.bm_cell(),
            "" if self.sa_prime is None else str(self.sa_prime),
            str(self.kernel_ok).lower(),
            "" if self.point is None else " ".join(map(str, self.point)),
            ";".join(self.flags),
        ]

    def to_json(self) -> dict:
        return {"m": self.m, "class": self.tag, "solvable": self.solvable,
                "bm_empty": self.bm_empty, "status": self.status, "sa_prime": self.sa_prime,
                "kernel_ok": self.kernel_ok,
                "point": list(self.point) if self.point else None,
                "route": self.route, "flags": list(self.flags)}


@dataclass
class CountSeries:
    breakpoints: list
    counts: dict  # key -> list of counts, one per breakpoint

    def to_json(self) -> dict:
        return {"breakpoints": list(self.breakpoints),
                "counts": {k: list(v) for k, v in sorted(self.counts.items())}}


@dataclass
class CensusResult:
    B: int
    rows: list
    series: CountSeries
    audit: dict = field(default_factory=dict)

    def kernel_exceptions(self) -> list[int]:
        return [r.m for r in self.rows if r.bm_empty and not r.kernel_ok]

    def summary(self) -> dict:
        obstructed = [r for r in self.rows if r.bm_empty]
        return {
            "schema_version": SCHEMA_VERSION,
            "B": self.B,
            "rows": len(self.rows),
            "series": self.series.to_json(),
            "kernel_check": {"obstructed": len(obstructed),
                             "exceptions": self.kernel_exceptions()},
            "audit": self.audit,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_cells())
        return buf.getvalue()

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.rows)


# ---------------------------------------------------------------------------
# sieves


def smallest_prime_factor(n: int) -> np.ndarray:
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in range(2, math.isqrt(n) + 1):
        if spf[p] == 0:
            block = spf[p * p::p]
            block[block == 0] = p
    idx = np.flatnonzero(spf == 0)
    spf[idx] = idx
    return spf


def _factor_with(spf: np.ndarray, n: int) -> list[tuple[int, int]]:
    out = []
    while n > 1:
        p = int(spf[n])
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out.append((p, e))
    return out


def count_restricted(x: int, n: int, R) -> int:
    """#{d <= x : every prime p | d has p mod n in R}, by sieving out bad primes."""
    R = {r % n for r in R}
    if not R or any(math.gcd(r, n) != 1 for r in R):
        raise ValueError("R must be a nonempty set of units mod n")
    if x < 1:
        return 0
    ok = np.ones(x + 1, dtype=bool)
    ok[0] = False
    spf = smallest_prime_factor(x)
    primes = np.flatnonzero(spf[2:] == np.arange(2, x + 1)) + 2
    for p in primes.tolist():
        if p % n not in R:
            ok[p::p] = False
    return int(ok.sum())


# ---------------------------------------------------------------------------
# the census


def _square_at(p: int, e: int, unit: int) -> bool:
    return e % 2 == 0 and legendre(unit % p, p) == 1


def _fast_row(m: int, spf: np.ndarray, points: dict) -> tuple[CensusRow, bool]:
    """Row from the cheap rules; the flag asks for a full image computation."""
    cls = classify_m(m)
    tag = cls.tag
    point = points.get(m)
    if tag == "Singular":
        return CensusRow(m, tag, None, None, "singular", None, False, None, "singular"), False
    D = m - 4
    fac = _factor_with(spf, abs(D))
    sign = -1 if D < 0 else 1
    kernel = sign * math.prod(p for p, e in fac if e % 2)
    kernel_ok = kernel in KERNEL_GROUP
    sa = next((p for p, e in fac if p > 3 and e % 2), None) if cls.is_generic else None
    solvable = m % 4 != 3 and m % 9 not in (3, 6)
    base = dict(m=m, tag=tag, solvable=solvable, sa_prime=sa, kernel_ok=kernel_ok, point=point)
    if not solvable:
        return CensusRow(bm_empty=None, status="insoluble", route="local_rule", **base), False
    if tag in ("RationalBrauer", "ObviousPoint"):
        return CensusRow(bm_empty=False, status="decided", route=tag.lower(), **base), False
    if tag == "TranscendentalException":
        return CensusRow(bm_empty=None, status="out_of_method", route="classification",
                         flags=("out_of_method",), **base), False
    if point is not None:
        return CensusRow(bm_empty=False, status="decided", route="integral_point", **base), False
    for p, e in fac:
        if p > 5 and not _square_at(p, e, abs(D) // p**e * sign):
            return CensusRow(bm_empty=False, status="decided", route="large_prime_nonsquare",
                             **base), False
    return CensusRow(bm_empty=None, status="pending", route="images", **base), True


def _full_row(m: int) -> dict:
    try:
        rep = decide_bm(m)
    except Inconclusive:
        return {"bm_empty": None, "status": "inconclusive", "flags": ("inconclusive",)}
    return {"bm_empty": rep.bm_empty, "status": "decided" if rep.decided else "out_of_method",
            "flags": tuple(sorted(set(rep.flags)))}


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) < 64:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=32))


def _with(row: CensusRow, res: dict) -> CensusRow:
    return CensusRow(row.m, row.tag, row.solvable, res["bm_empty"], res["status"], row.sa_prime,
                     row.kernel_ok, row.point, row.route, row.flags + tuple(res["flags"]))


def iter_m(B: int):
    for m in range(-B, B + 1):
        yield m


def run_census(B: int, cfg: CensusConfig | None = None) -> CensusResult:
    """Classify every |m| <= B; rows come out in increasing m."""
    cfg = cfg or CensusConfig()
    if B > DESK_BOUND:
        raise ValueError(f"B = {B} exceeds the desk bound {DESK_BOUND}")
    spf = smallest_prime_factor(B + 4)
    points = reduced_sweep(B)
    rows: list[CensusRow] = []
    pending: list[int] = []
    for m in iter_m(B):
        row, need = _fast_row(m, spf, points)
        rows.append(row)
        if need:
            pending.append(len(rows) - 1)
    results = _map(_full_row, [rows[i].m for i in pending], cfg.threads)
    for i, res in zip(pending, results):
        rows[i] = _with(rows[i], res)

    # audit: recompute a seeded sample of fast-path verdicts from local images
    fast = [i for i, r in enumerate(rows)
            if r.route in ("integral_point", "large_prime_nonsquare") and r.bm_empty is not None]
    rng = random.Random(cfg.seed)
    k = min(len(fast), math.ceil(cfg.audit_rate * len(fast))) if cfg.audit_rate > 0 else 0
    sample = sorted(rng.sample(fast, k)) if k else []
    checks = _map(_full_row, [rows[i].m for i in sample], cfg.threads)
    mismatches = [rows[i].m for i, res in zip(sample, checks)
                  if res["bm_empty"] is not None and res["bm_empty"] != rows[i].bm_empty]
    if mismatches:
        raise RepresentationMismatch(f"fast path disagrees with local images at m = {mismatches[:10]}")
    audit = {"rate": cfg.audit_rate, "sampled": len(sample), "mismatches": mismatches,
             "full_computations": len(pending)}
    breakpoints = sorted(set(cfg.breakpoints) | {B})
    return CensusResult(B, rows, count_series(rows, breakpoints), audit)


def count_series(rows, breakpoints) -> CountSeries:
    counts = {k: [0] * len(breakpoints) for k in SERIES_KEYS}
    for r in rows:
        keys = []
        if r.status == "insoluble":
            keys.append("adelically_insoluble")
        if r.bm_empty:
            keys.append("obstructed")
        if r.point is not None:
            keys.append("point_found")
        elif r.solvable and r.bm_empty is False:
            keys.append("no_point_found")
        if r.tag == "Generic" and r.sa_prime is None:
            keys.append("wa_not_certified")
        if r.status in ("inconclusive", "out_of_method"):
            keys.append(r.status)
        for j, b in enumerate(breakpoints):
            if abs(r.m) <= b:
                for key in keys:
                    counts[key][j] += 1
    return CountSeries(list(breakpoints), counts)


# ---------------------------------------------------------------------------
# growth fits


@dataclass(frozen=True)
class GrowthFit:
    c: float
    exponents: tuple
    residuals: tuple  # relative, one per breakpoint

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


def growth_fit(series: CountSeries, key: str, exponent_pair=(0.5, -0.5)) -> GrowthFit:
    """Least-squares c in count ~ c B^a (log B)^b, with relative residuals."""
    B = np.array(series.breakpoints, dtype=float)
    y = np.array(series.counts[key], dtype=float)
    if len(B) < 3:
        raise ValueError("need at least three breakpoints")
    if np.any(y <= 0):
        raise ValueError("degenerate series: zero counts")
    a, b = exponent_pair
    g = B**a * np.log(B) ** b
    c = float(np.dot(y, g) / np.dot(g, g))
    res = tuple(float(x) for x in (y - c * g) / y)
    return GrowthFit(c, (a, b), res)


def obstruction_candidates(B: int) -> list[int]:
    """m with |m| <= B whose m - 4 passes the large-prime test, as a cross-check list."""
    spf = smallest_prime_factor(B + 4)
    out = []
    for m in range(-B, B + 1):
        if m in (0, 4):
            continue
        D = m - 4
        sign = -1 if D < 0 else 1
        if all(p <= 5 or _square_at(p, e, abs(D) // p**e * sign) for p, e in _factor_with(spf, abs(D))):
            out.append(m)
    return out


__all__ = [
    "CensusConfig", "CensusRow", "CountSeries", "CensusResult", "GrowthFit",
    "run_census", "count_series", "count_restricted", "growth_fit",
    "smallest_prime_factor", "obstruction_candidates", "transcendental_parameter",
]
