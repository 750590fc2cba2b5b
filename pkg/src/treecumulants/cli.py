"""Command-line interface.

Subcommands wire the library into file-based workflows: ``cumulants``,
``certify``, ``recover``, ``forward``, ``invariants``, ``metric``, and
``sample``.  Trees are read from Newick files; tables and parameters are
JSON.  In exact mode decimal strings in input files are parsed as exact
rationals, which is what makes the equality families decidable.

Exit codes: 0 for success (and certificate PASS / feasible recovery),
1 for a semantic FAIL verdict, 2 for usage or format errors.
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from fractions import Fraction

from . import __version__
from .flattenings import cumulant_flattening, flatten, minor_residuals_3x3, rank_leq
from .membership import certify
from .metrics import correlations, four_point_check, tree_metric_map
from .models import ThetaParams, forward, sample_theta
from .moments import (
    EXACT,
    FLOAT,
    central_to_cumulants,
    labels_of,
    noncentral_to_central,
    probs_to_noncentral,
    table_from_json,
    table_to_json,
)
from .recovery import recover
from .trees import TreeError, parse_newick

PASS_EXIT, FAIL_EXIT, ERROR_EXIT = 0, 1, 2


class CliError(Exception):
    """Bad input or usage; maps to exit code 2."""


def _read_tree(path: str, root: int | None):
    with open(path) as fh:
        tree = parse_newick(fh.read())
    if root is not None:
        if root not in tree.nodes:
            raise CliError(f"--root {root} is not a node of the tree")
        tree = tree.with_root(root)
    return tree


def _read_table(path: str, mode: str):
    with open(path) as fh:
        doc = json.load(fh)
    return table_from_json(doc, mode=mode)


def _num_out(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _subset_key(mask: int) -> str:
    labels = labels_of(mask)
    return ",".join(str(x) for x in labels) if labels else ""


def _moment_doc(ms) -> dict:
    return {_subset_key(mask): _num_out(v) for mask, v in ms.items()}


def _emit(doc, args) -> None:
    if args.format == "json":
        print(json.dumps(doc, indent=2, default=float))
    else:
        _emit_text(doc)


def _emit_text(doc, indent: int = 0) -> None:
    pad = "  " * indent
    if isinstance(doc, dict):
        for key, val in doc.items():
            if isinstance(val, (dict, list)):
                print(f"{pad}{key}:")
                _emit_text(val, indent + 1)
            else:
                print(f"{pad}{key}: {val}")
    elif isinstance(doc, list):
        for val in doc:
            if isinstance(val, (dict, list)):
                _emit_text(val, indent + 1)
            else:
                print(f"{pad}- {val}")
    else:
        print(f"{pad}{doc}")


# ---------------------------------------------------------------------- #
# Subcommands
# ---------------------------------------------------------------------- #


def cmd_cumulants(args) -> int:
    tree = _read_tree(args.tree, args.root)
    table = _read_table(args.table, args.mode)
    lam = probs_to_noncentral(table)
    mu = noncentral_to_central(lam)
    kappa = central_to_cumulants(tree, mu)
    doc = {
        "n": table.n,
        "mode": args.mode,
        "means": {str(i): _num_out(lam.mean(i)) for i in range(1, table.n + 1)},
        "noncentral": _moment_doc(lam),
        "central": _moment_doc(mu),
        "cumulants": _moment_doc(kappa),
    }
    _emit(doc, args)
    return PASS_EXIT


def cmd_certify(args) -> int:
    tree = _read_tree(args.tree, args.root)
    table = _read_table(args.table, args.mode)
    tol = Fraction(args.tol) if args.mode == EXACT else float(args.tol)
    cert = certify(tree, table, tol=tol, refine=args.refine)
    doc = cert.to_json()
    if args.format == "text":
        lines = {
            "verdict": cert.verdict,
            "mode": cert.mode,
            "notes": cert.notes,
            "failures": [r.to_json() for r in cert.failures()],
        }
        _emit_text(lines)
    else:
        _emit(doc, args)
    return PASS_EXIT if cert.passed else FAIL_EXIT


def cmd_recover(args) -> int:
    tree = _read_tree(args.tree, args.root)
    table = _read_table(args.table, args.mode)
    tol = Fraction(args.tol) if args.mode == EXACT else float(args.tol)
    result = recover(tree, table, tol=tol)
    _emit(result.to_json(), args)
    return PASS_EXIT if result.feasible else FAIL_EXIT


def cmd_forward(args) -> int:
    tree = _read_tree(args.tree, args.root)
    with open(args.params) as fh:
        doc = json.load(fh)
    theta = ThetaParams.from_json(doc, mode=args.mode)
    table = forward(tree, theta)
    _emit(table_to_json(table), args)
    return PASS_EXIT


def cmd_invariants(args) -> int:
    tree = _read_tree(args.tree, args.root)
    table = _read_table(args.table, args.mode)
    lam = probs_to_noncentral(table)
    kappa = central_to_cumulants(tree, noncentral_to_central(lam))
    edges = []
    for split in tree.edge_splits():
        flat = flatten(table, split)
        max3, _ = minor_residuals_3x3(flat)
        nflat = cumulant_flattening(tree, kappa, split.edge)
        rank2_ok, _ = rank_leq(flat.matrix, 2, mode=args.mode, tol=float(args.tol))
        rank1_ok, _ = rank_leq(nflat.matrix, 1, mode=args.mode, tol=float(args.tol))
        edges.append(
            {
                "edge": list(split.edge),
                "split": [sorted(split.block_a), sorted(split.block_b)],
                "max_3x3_minor": float(max3),
                "table_rank_le_2": rank2_ok,
                "cumulant_rank_le_1": rank1_ok,
            }
        )
    _emit({"edges": edges}, args)
    return PASS_EXIT


def cmd_metric(args) -> int:
    tree = _read_tree(args.tree, args.root)
    table = _read_table(args.table, args.mode)
    mu = noncentral_to_central(probs_to_noncentral(table))
    try:
        rho = correlations(mu)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    delta = tree_metric_map(rho)
    reports = four_point_check(delta, tol=float(args.tol))
    ok = all(r["satisfied"] for r in reports)
    failures = [
        {"quadruple": list(r["quadruple"]), "pairing": list(map(list, r["pairing"]))}
        for r in reports
        if not r["satisfied"]
    ]
    if args.format == "csv":
        print(",".join([""] + [str(i) for i in range(1, table.n + 1)]))
        for i in range(1, table.n + 1):
            row = [str(i)]
            for j in range(1, table.n + 1):
                d = delta.delta(i, j)
                row.append("inf" if math.isinf(d) else repr(d))
            print(",".join(row))
        return PASS_EXIT if ok else FAIL_EXIT
    doc = {
        "distances": {f"{i},{j}": _num_out(d) for (i, j), d in delta.items()},
        "four_point": {"satisfied": ok, "failures": failures},
    }
    _emit(doc, args)
    return PASS_EXIT if ok else FAIL_EXIT


def cmd_sample(args) -> int:
    tree = _read_tree(args.tree, args.root)
    rng = random.Random(args.seed)
    theta = sample_theta(tree, rng, mode=args.mode)
    table = forward(tree, theta)
    doc = {"theta": theta.to_json(), "table": table_to_json(table)}
    _emit(doc, args)
    return PASS_EXIT


# ---------------------------------------------------------------------- #
# Parser
# ---------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecum",
        description="Tree cumulants, membership certificates, and latent recovery "
        "for binary hidden tree models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, table=True, params=False):
        p.add_argument("--tree", required=True, help="Newick file with leaves 1..n")
        if table:
            p.add_argument("--table", required=True, help="JSON joint table")
        if params:
            p.add_argument("--params", required=True, help="JSON parameter file")
        p.add_argument("--mode", choices=(EXACT, FLOAT), default=EXACT)
        p.add_argument("--tol", default="0", help="tolerance (default 0 exact, use e.g. 1e-9 for float)")
        p.add_argument("--root", type=int, default=None, help="root node id")
        p.add_argument("--refine", action="store_true", help="allow trivalent refinement")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "text", "csv"), default="json")

    common(sub.add_parser("cumulants", help="moment and cumulant coordinates of a table"))
    common(sub.add_parser("certify", help="run the membership certificate"))
    common(sub.add_parser("recover", help="recover latent parameters"))
    common(sub.add_parser("forward", help="leaf law of given parameters"), table=False, params=True)
    common(sub.add_parser("invariants", help="flattening ranks and minors"))
    common(sub.add_parser("metric", help="distance matrix and four-point check"))
    common(sub.add_parser("sample", help="draw parameters and their leaf law"), table=False)
    return parser


HANDLERS = {
    "cumulants": cmd_cumulants,
    "certify": cmd_certify,
    "recover": cmd_recover,
    "forward": cmd_forward,
    "invariants": cmd_invariants,
    "metric": cmd_metric,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.mode == FLOAT and args.tol == "0":
        args.tol = "1e-9"
    try:
        return HANDLERS[args.command](args)
    except (CliError, TreeError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main())
