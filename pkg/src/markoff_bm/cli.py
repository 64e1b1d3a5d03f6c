"""markoff-bm: local invariants, obstruction decisions, point search and census."""

from __future__ import annotations

import argparse
import json
import sys

from .brauer import local_invariant_image
from .census import CensusConfig, run_census
from .errors import (
    BudgetExceeded,
    DepthCapExceeded,
    Inconclusive,
    MarkoffError,
    RepresentationMismatch,
)
from .obstruction import decide_bm
from .padic import Place
from .points import SearchConfig, box_search, certify_empty, descend

EXIT_OK, EXIT_USAGE, EXIT_OPEN, EXIT_INTERNAL = 0, 1, 2, 3
SCHEMA = "markoff-bm/cli/1"


class UsageError(Exception):
    pass


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _place(text: str) -> Place:
    try:
        return Place.parse(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="markoff-bm", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--out", help="write the main output to this path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=_positive, default=1)

    p = sub.add_parser("analyze", help="decide the obstruction for one m")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--height", type=_positive, default=10, help="box height for the point search")
    p.add_argument("--certify", action="store_true", help="also certify emptiness (m > 4)")
    common(p)

    p = sub.add_parser("invariants", help="local invariant image at one place")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-p", "--place", type=_place, required=True)
    p.add_argument("--depth-cap", type=_positive)
    p.add_argument("--method", choices=("enumerate", "scaled", "auto"), default="enumerate")
    common(p)

    p = sub.add_parser("search", help="integral points in a box")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--height", type=_positive, default=10)
    p.add_argument("--certify", action="store_true")
    common(p)

    p = sub.add_parser("census", help="classify every |m| <= B")
    p.add_argument("-B", type=_positive, required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv", help="--json implies jsonl")
    p.add_argument("--summary", help="path for the summary JSON")
    p.add_argument("--audit-rate", type=float, default=0.01)
    p.add_argument("--breakpoints", type=_positive, nargs="*", default=())
    common(p)

    p = sub.add_parser("verify", help="run the built-in oracle matrix")
    p.add_argument("--all", action="store_true", required=True)
    common(p)
    return ap


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cmd_analyze(args) -> int:
    if args.m in (0, 4):
        raise UsageError(f"singular: the surface is singular for m = {args.m}")
    rep = decide_bm(args.m)
    pts = box_search(args.m, SearchConfig(height=args.height))
    points = {"height": args.height, "found": [list(u) for u in pts[:20]], "count": len(pts)}
    if args.certify:
        points.update(certify_empty(args.m).to_json())
    rep.points = points
    if pts and rep.bm_empty:
        raise RepresentationMismatch(f"integral point {pts[0]} on an obstructed surface")
    fam = rep.family
    if fam and fam.predicted_bm_empty is not None and rep.decided and fam.predicted_bm_empty != rep.bm_empty:
        raise RepresentationMismatch(f"family {fam.tag} predicts {fam.predicted_bm_empty}")
    doc = rep.to_json()
    if args.json:
        _emit(_dump(doc), args.out)
    else:
        lines = [
            f"m = {args.m}  class {doc['class']}",
            f"adelically soluble: {doc['solvable']['adelically_soluble']}",
            f"relevant places: {', '.join(doc['relevant_places'])}",
        ]
        for v, img in doc["images"].items():
            lines.append(f"  image at {v}: {len(img['vectors'])} vectors ({img['completeness']})")
        lines += [
            f"bm_empty: {doc['bm_empty']}",
            f"sa_prime: {doc['sa_prime']}  wa_prime: {doc['wa_prime']}",
            f"kernel in <-1,2,3,5>: {doc['kernel_ok']}",
            f"points with max|u_i| <= {args.height}: {len(pts)}" + (f", e.g. {pts[0]}" if pts else ""),
        ]
        if "status" in points:
            lines.append(f"emptiness: {points['status']}")
        if doc["flags"]:
            lines.append(f"flags: {', '.join(doc['flags'])}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_invariants(args) -> int:
    img = local_invariant_image(args.m, args.place, depth_cap=args.depth_cap, strict=True,
                                method=args.method)
    doc = {"schema_version": SCHEMA, "m": args.m, **img.to_json()}
    _emit(_dump(doc), args.out)
    return EXIT_OK


def cmd_search(args) -> int:
    pts = box_search(args.m, SearchConfig(height=args.height, seed=args.seed))
    doc = {"schema_version": SCHEMA, "m": args.m, "height": args.height,
           "points": [list(u) for u in pts],
           "reduced": sorted({tuple(descend(u).coordinates) for u in pts})}
    if args.certify:
        doc["certificate"] = certify_empty(args.m).to_json()
    if args.json:
        _emit(_dump(doc), args.out)
    else:
        lines = [f"{len(pts)} points with max|u_i| <= {args.height}"]
        lines += [" ".join(map(str, u)) for u in pts[:50]]
        if args.certify:
            lines.append(doc["certificate"]["status"])
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_census(args) -> int:
    cfg = CensusConfig(audit_rate=args.audit_rate, seed=args.seed, threads=args.threads,
                       breakpoints=tuple(args.breakpoints))
    res = run_census(args.B, cfg)
    fmt = "jsonl" if args.json else args.format
    _emit(res.to_csv() if fmt == "csv" else res.to_jsonl(), args.out)
    summary = _dump(res.summary())
    path = args.summary or (args.out + ".summary.json" if args.out else None)
    if path:
        with open(path, "w") as fh:
            fh.write(summary)
    else:
        sys.stderr.write(summary)
    return EXIT_INTERNAL if res.kernel_exceptions() else EXIT_OK


def cmd_verify(args) -> int:
    from .harness import run_verification

    checks = run_verification()
    if args.json:
        doc = {"schema_version": SCHEMA,
               "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in checks]}
        _emit(_dump(doc), args.out)
    else:
        _emit("".join(c.line() + "\n" for c in checks), args.out)
    return EXIT_OK if all(c.ok for c in checks) else EXIT_INTERNAL


COMMANDS = {"analyze": cmd_analyze, "invariants": cmd_invariants, "search": cmd_search,
            "census": cmd_census, "verify": cmd_verify}


def _fail(code: int, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit": code},
                                sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (Inconclusive, DepthCapExceeded, BudgetExceeded) as exc:
        return _fail(EXIT_OPEN, exc)
    except RepresentationMismatch as exc:
        return _fail(EXIT_INTERNAL, exc)
    except MarkoffError as exc:
        return _fail(EXIT_INTERNAL, exc)


if __name__ == "__main__":
    sys.exit(main())
