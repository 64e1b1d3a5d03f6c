"""Integral points: box search, descent by Vieta moves, emptiness certificates."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .padic import is_square
from .surface import default_budget

Triple = tuple[int, int, int]


@dataclass(frozen=True)
class SearchConfig:
    height: int = 10
    budget: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.height < 2:
            raise ValueError("height bound must be at least 2")

    @property
    def max_work(self) -> int:
        return default_budget() if self.budget is None else self.budget


@dataclass(frozen=True)
class ReducedPoint:
    coordinates: Triple

    @property
    def norm(self) -> int:
        return sum(x * x for x in self.coordinates)


def _isqrt_exact(n: int) -> int | None:
    if n < 0:
        return None
    r = math.isqrt(n)
    return r if r * r == n else None


def third_coordinates(m: int, u1: int, u2: int) -> list[int]:
    """Integer roots u3 of u3^2 - u1 u2 u3 + u1^2 + u2^2 - m = 0."""
    b = u1 * u2
    s = _isqrt_exact(b * b - 4 * (u1 * u1 + u2 * u2 - m))
    if s is None or (b + s) % 2:
        return []
    return sorted({(b + s) // 2, (b - s) // 2})


def box_search(m: int, cfg: SearchConfig) -> list[Triple]:
    """All integer points with max |u_i| <= H, sorted."""
    H = cfg.height
    if (2 * H + 1) ** 2 > cfg.max_work:
        raise BudgetExceeded(f"box of height {H} exceeds budget {cfg.max_work}")
    out = set()
    for u1 in range(-H, H + 1):
        for u2 in range(-H, H + 1):
            for u3 in third_coordinates(m, u1, u2):
                if abs(u3) <= H:
                    out.add((u1, u2, u3))
    return sorted(out)


def _move_gain(u: Triple, i: int) -> int:
    j, k = [x for x in range(3) if x != i]
    new = u[j] * u[k] - u[i]
    return u[i] * u[i] - new * new


def is_reduced(u: Triple) -> bool:
    """No Vieta move strictly decreases |u_i|."""
    return all(_move_gain(u, i) <= 0 for i in range(3))


def descend(u) -> ReducedPoint:
    """Apply the move with the largest norm decrease until none decreases it."""
    u = tuple(int(x) for x in u)
    while True:
        gains = [_move_gain(u, i) for i in range(3)]
        best = max(range(3), key=lambda i: (gains[i], -i))
        if gains[best] <= 0:
            return ReducedPoint(u)
        j, k = [x for x in range(3) if x != best]
        v = list(u)
        v[best] = u[j] * u[k] - u[best]
        u = tuple(v)


@dataclass(frozen=True)
class EmptinessCertificate:
    status: str  # empty_certified, nonempty, not_applicable
    witness: Triple | None = None
    ball_bound: int | None = None
    shell_checked: bool = False

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "witness": list(self.witness) if self.witness else None,
            "ball_bound": self.ball_bound,
            "shell_checked": self.shell_checked,
        }


def _points_in_ball(m: int, bound: int, budget: int) -> list[Triple]:
    R = math.isqrt(bound)
    if (2 * R + 1) ** 2 > budget:
        raise BudgetExceeded(f"ball of norm {bound} exceeds budget {budget}")
    out = []
    for u1 in range(-R, R + 1):
        rest = bound - u1 * u1
        r2 = math.isqrt(rest)
        for u2 in range(-r2, r2 + 1):
            for u3 in third_coordinates(m, u1, u2):
                if u1 * u1 + u2 * u2 + u3 * u3 <= bound:
                    out.append((u1, u2, u3))
    return sorted(out)


def certify_empty(m: int, budget: int | None = None) -> EmptinessCertificate:
    """Decide U_m(Z) = {} for m > 4 nonsquare from the points of norm <= 3m.

    A reduced point of such a surface has norm <= m; the shell m < norm <= 3m
    is checked to descend below m, guarding that bound.
    """
    if m <= 4 or is_square(m):
        return EmptinessCertificate("not_applicable")
    budget = default_budget() if budget is None else budget
    bound = 3 * m
    pts = _points_in_ball(m, bound, budget)
    shell_ok = True
    for u in pts:
        n = sum(x * x for x in u)
        if n > m and descend(u).norm > m:
            shell_ok = False
    reduced = [u for u in pts if is_reduced(u)]
    if reduced:
        w = min(reduced, key=lambda u: (sum(x * x for x in u), u))
        return EmptinessCertificate("nonempty", w, bound, shell_ok)
    return EmptinessCertificate("empty_certified" if shell_ok else "not_applicable",
                                None, bound, shell_ok)


def orbit_sample(u, n: int, seed: int = 0, budget: int = 100_000) -> list[Triple]:
    """n distinct points reached from u by random Vieta move words.

    Returns fewer than n points when the orbit stalls within the budget.
    """
    rng = random.Random(seed)
    start = tuple(int(x) for x in u)
    seen = {start}
    out: list[Triple] = []
    cur = start
    steps = 0
    while len(out) < n and steps < budget:
        steps += 1
        i = rng.randrange(3)
        j, k = [x for x in range(3) if x != i]
        nxt = list(cur)
        nxt[i] = cur[j] * cur[k] - cur[i]
        cur = tuple(nxt)
        # keep coordinates from blowing up: restart from the seed now and then
        if max(abs(x) for x in cur) > 10**12:
            cur = start
            continue
        if cur not in seen:
            seen.add(cur)
            out.append(cur)
    return out


def reduced_sweep(B: int) -> dict[int, Triple]:
    """One reduced integral point for every m with |m| <= B that has one.

    Up to permutations and even sign changes a triple is (a, b, c) or
    (-a, b, c) with 0 <= a <= b <= c. The second kind is always reduced and
    has m = a^2 + b^2 + c^2 + abc. For the first kind with a >= 1, reducedness
    means c <= ab/2, which needs a >= 3 (a = 2 only gives m = 4); then m
    decreases in c on [b, ab/2].
    """
    have = np.zeros(2 * B + 1, dtype=bool)
    found: dict[int, Triple] = {}

    def take(ms: np.ndarray, first: int, second: int, cs: np.ndarray):
        ok = (ms >= -B) & (ms <= B) & (ms != 0) & (ms != 4)
        ok[ok] = ~have[ms[ok] + B]
        if not ok.any():
            return
        vals, idx = np.unique(ms[ok], return_index=True)
        cs_ok = cs[ok]
        have[vals + B] = True
        for mm, i in zip(vals.tolist(), idx.tolist()):
            found[mm] = (first, second, int(cs_ok[i]))

    R = math.isqrt(B)
    for b in range(R + 1):  # (0, b, c)
        cs = np.arange(b, math.isqrt(max(B - b * b, 0)) + 1, dtype=np.int64)
        take(b * b + cs * cs, 0, b, cs)
    a = 1
    while 3 * a * a + a**3 <= B:  # (-a, b, c)
        b = a
        while 2 * b * b + a * a + a * b * b <= B:
            # a^2 + b^2 + c^2 + abc <= B
            disc = (a * b) ** 2 - 4 * (a * a + b * b - B)
            hi = (-a * b + math.isqrt(disc)) // 2
            cs = np.arange(b, hi + 1, dtype=np.int64)
            take(a * a + b * b + cs * cs + a * b * cs, -a, b, cs)
            b += 1
        a += 1
    a = 3
    while a * a - (a - 2) * a * a >= -B:  # (a, b, c), b <= c <= ab/2
        b = a
        while a * a - (a - 2) * b * b >= -B:
            hi = a * b // 2
            disc = (a * b) ** 2 - 4 * (a * a + b * b + B)
            if disc >= 0:
                hi = min(hi, (a * b - math.isqrt(disc)) // 2)
            if hi >= b:
                cs = np.arange(b, hi + 1, dtype=np.int64)
                take(a * a + b * b + cs * cs - a * b * cs, a, b, cs)
            b += 1
        a += 1
    return found
