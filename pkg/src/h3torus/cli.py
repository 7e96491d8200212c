"""Command line interface; every subcommand prints one JSON object on stdout
(or, with --text, the same fields as plain lines).

Exit codes: 0 success (and, for ``verify``, all cells passed), 1 verification
failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys

from .groups import FinAbGroup, parse_group
from .zlinalg import FgAbGroup

COEFFS = ("trivial", "norm-one", "regular", "flasque-T", "sym2-T")


class InputError(Exception):
    pass


def _group(s: str) -> FinAbGroup:
    try:
        G = parse_group(s)
    except ValueError as e:
        raise InputError(f"bad group {s!r}: {e}") from e
    return G


def _coefficients(G: FinAbGroup, name: str):
    from . import glattice as gl

    if name == "trivial":
        return gl.trivial_lattice(G)
    if name == "norm-one":
        return gl.norm_one_lattice(G)[0]
    if name == "regular":
        return gl.regular_lattice(G)
    fr = gl.flasque_resolution(G)
    if name == "flasque-T":
        return fr.T
    if name == "sym2-T":
        return gl.sym2(fr.T)
    raise InputError(f"unknown coefficients {name!r}")


def cmd_cup_coker(args) -> tuple[dict, int]:
    from .cohomres import cup_coker_2_2_4

    G = _group(args.group)
    A = cup_coker_2_2_4(G)
    return {"group": list(G.invariant_factors), **A.to_json()}, 0


def cmd_h3nr(args) -> tuple[dict, int]:
    from .classfield import LocalData
    from .h3nr import unramified_h3

    G = _group(args.group)
    if args.local is not None and args.h3 is not None:
        raise InputError("give at most one of --local and --h3")
    arith = None
    if args.local is not None:
        try:
            arith = LocalData.from_json(args.local)
        except (ValueError, KeyError, TypeError) as e:
            raise InputError(f"bad local data: {e}") from e
        if arith.n != G.order:
            raise InputError(f"local data has n={arith.n} but |G|={G.order}")
    elif args.h3 is not None:
        try:
            orders = [int(x) for x in args.h3.split(",") if x.strip()]
        except ValueError as e:
            raise InputError(f"bad --h3 {args.h3!r}") from e
        if any(o < 1 for o in orders):
            raise InputError("--h3 orders must be positive")
        arith = FgAbGroup.from_cyclics(orders)
    return unramified_h3(G, arith, lattice_method=args.method).to_json(), 0


def cmd_cohomology(args) -> tuple[dict, int]:
    from .cohomres import cohomology_group, small_resolution

    G = _group(args.group)
    if not 0 <= args.degree <= 4:
        raise InputError("degree must be in 0..4")
    L = _coefficients(G, args.coeff)
    A = cohomology_group(small_resolution(G, max(args.degree, 1)), L, args.degree)
    return {"group": list(G.invariant_factors), "coefficients": args.coeff, "lattice_rank": L.rank,
            "degree": args.degree, **A.to_json()}, 0


def cmd_dec(args) -> tuple[dict, int]:
    from .decomp import s2_mod_dec_flasque
    from .glattice import flasque_resolution

    G = _group(args.group)
    fr = flasque_resolution(G)
    A = s2_mod_dec_flasque(fr)
    return {"group": list(G.invariant_factors), "T_rank": fr.T.rank, **A.to_json()}, 0


def cmd_brauer(args) -> tuple[dict, int]:
    from .h3nr import brauer_nr, sha2_omega

    G = _group(args.group)
    A = brauer_nr(G)
    out = {"group": list(G.invariant_factors), **A.to_json()}
    code = 0
    if args.cross_check:
        B = sha2_omega(G)
        out["sha2_omega"] = B.to_json()
        out["agree"] = A == B
        code = 0 if A == B else 1
    return out, code


def cmd_verify(args) -> tuple[dict, int]:
    from .h3nr import VerifyOptions, verify_lemmas

    if args.max_order < 1:
        raise InputError("--max-order must be positive")
    opts = VerifyOptions(include_table_groups=args.include_table_groups, fault=args.fault)
    recs = verify_lemmas(args.max_order, opts)
    ok = all(r.passed for r in recs)
    return {"max_order": args.max_order, "all_passed": ok, "cells": len(recs),
            "failures": sum(not r.passed for r in recs), "records": [r.to_json() for r in recs]}, 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="h3torus", description=__doc__.splitlines()[0])
    p.add_argument("--indent", type=int, default=None, help="pretty-print JSON")
    p.add_argument("--text", action="store_true", help="print key: value lines instead of JSON")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("cup-coker", help="coker of H^2 x H^2 -> H^4 with Z coefficients")
    s.add_argument("--group", required=True, help="invariant factors, e.g. 3,3,3")
    s.set_defaults(fn=cmd_cup_coker)

    s = sub.add_parser("h3nr", help="unramified H^3 of the norm-one torus")
    s.add_argument("--group", required=True)
    s.add_argument("--local", help='JSON, e.g. {"n":9,"local_degrees":[3,3]}')
    s.add_argument("--h3", help="H^3(G,K^*) given directly as cyclic orders, e.g. 3")
    s.add_argument("--method", default="closed-form", choices=("closed-form", "cup", "dec"))
    s.set_defaults(fn=cmd_h3nr)

    s = sub.add_parser("cohomology", help="H^i(G, L)")
    s.add_argument("--group", required=True)
    s.add_argument("--coeff", default="trivial", choices=COEFFS)
    s.add_argument("--degree", type=int, required=True)
    s.set_defaults(fn=cmd_cohomology)

    s = sub.add_parser("dec", help="S^2(T)^G / Dec for the flasque lattice T")
    s.add_argument("--group", required=True)
    s.set_defaults(fn=cmd_dec)

    s = sub.add_parser("verify", help="run the lemma suite")
    s.add_argument("--max-order", type=int, default=9)
    s.add_argument("--include-table-groups", action="store_true")
    s.add_argument("--fault", choices=("n-sequence",), help="inject a fault (negative control)")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("brauer", help="unramified Brauer group H^1(G, T)")
    s.add_argument("--group", required=True)
    s.add_argument("--cross-check", action="store_true", help="also compute the Sha^2_omega(W) route")
    s.set_defaults(fn=cmd_brauer)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        out, code = args.fn(args)
    except InputError as e:
        print(json.dumps({"error": str(e)}), file=sys.stderr)
        return 2
    print(_as_text(out) if args.text else json.dumps(out, indent=args.indent))
    return code


def _as_text(out: dict) -> str:
    lines = []
    for k, v in out.items():
        if k == "records":
            for r in v:
                mark = "ok  " if r["passed"] else "FAIL"
                lines.append(f"  {mark} {r['lemma']} [{r['group']}] {r.get('detail', '')}".rstrip())
        else:
            lines.append(f"{k}: {json.dumps(v)}")
    return "\n".join(lines)


if __name__ == "__main__":
    sys.exit(main())
