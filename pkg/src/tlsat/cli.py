"""Command line: ``tlsat sat|model|xpath|translate|crosscheck``.

Exit codes
  sat, model       0 satisfiable, 1 unsatisfiable, 2 error, 3 resources exhausted
  xpath            0 the relation holds, 1 it fails (counterexample printed), 2, 3 as above
  crosscheck       0 solver and oracle agree, 1 they disagree, 2, 3 as above
  translate        0 on success, 2 on error
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from tlsat.formula import (
    FormulaError, NormalFormError, ParseError, annotate_counting, ch_translate, nnf,
    parse_formula, to_text, universe_of,
)
from tlsat.lean import LeanError, build_lean
from tlsat.semantics import TreeModel, evaluate, oracle_sat
from tlsat.solver import EXHAUSTED, SAT, Limits, SolveResult, SolverError, k_bound, solve
from tlsat.xpath import (
    XPathError, desugar_position, encode_treetype, parse_treetype, parse_xpath, translate,
    xpath_contains, xpath_disjoint, xpath_empty, xpath_equiv,
)

EXIT_OK, EXIT_NO, EXIT_ERROR, EXIT_EXHAUSTED = 0, 1, 2, 3

log = logging.getLogger("tlsat.cli")


class UsageError(ValueError):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--limit-rounds", type=_positive_int, metavar="N", help="stop after N rounds")
    common.add_argument("--limit-st", type=_positive_int, metavar="N",
                        help="stop when more than N candidate tree classes are kept")
    common.add_argument("--timeout", type=_positive_float, metavar="SECONDS")
    common.add_argument("--format", choices=("text", "json", "dot"), default="text")

    p = argparse.ArgumentParser(prog="tlsat", description="Satisfiability for a tree logic with counting.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, text in (("sat", "decide satisfiability"), ("model", "print a satisfying tree")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("formula", nargs="?", help="formula text ('-' reads standard input)")
        s.add_argument("--file", help="read the formula from a file")
        s.add_argument("--marks", default="", help="comma-separated propositions that are free marks")

    x = sub.add_parser("xpath", parents=[common], help="decide relations between XPath expressions")
    x.add_argument("mode", choices=("contains", "equiv", "disjoint", "empty"))
    x.add_argument("e1")
    x.add_argument("e2", nargs="?")
    x.add_argument("--schema", metavar="FILE", help="tree type file constraining the documents")
    x.add_argument("--general-position", action="store_true",
                   help="rewrite position() with document order even on child steps")

    t = sub.add_parser("translate", parents=[common], help="show intermediate forms")
    t.add_argument("kind", choices=("formula", "xpath", "type"))
    t.add_argument("text")
    t.add_argument("--general-position", action="store_true")

    c = sub.add_parser("crosscheck", parents=[common], help="compare the solver with bounded enumeration")
    c.add_argument("formula", nargs="?")
    c.add_argument("--file")
    c.add_argument("--oracle-bound", type=_positive_int, default=5, metavar="N",
                   help="largest tree size enumerated by the oracle")
    c.add_argument("--marks", default="")
    return p


def _limits(args) -> Limits:
    return Limits(max_rounds=args.limit_rounds, max_st=args.limit_st, timeout=args.timeout)


def _read_formula(args) -> str:
    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            return fh.read()
    if args.formula in (None, "-"):
        return sys.stdin.read()
    return args.formula


def _marks(args) -> list[str]:
    return [m.strip() for m in args.marks.split(",") if m.strip()]


def render_tree(model: TreeModel) -> str:
    """Indented n-ary view; siblings of the root (a hedge) are listed too."""
    lines: list[str] = []

    def visit(i: int | None, depth: int) -> None:
        while i is not None:
            text = model.labels[i]
            if model.marks[i]:
                text += " {" + ",".join(sorted(model.marks[i])) + "}"
            lines.append(f"{'  ' * depth}{i}: {text}")
            visit(model.fc[i], depth + 1)
            i = model.ns[i]

    visit(model.root, 0)
    return "\n".join(lines)


def _print_result(r: SolveResult, fmt: str, model_only: bool = False) -> None:
    if fmt == "json":
        print(json.dumps(r.model.to_json() if model_only and r.model else r.to_json(), indent=2))
        return
    if fmt == "dot":
        if r.model is not None:
            print(r.model.to_dot())
        else:
            print(f"// {r.status}")
        return
    if not model_only:
        print(r.status)
        if r.reason:
            print(f"reason: {r.reason}")
        print(f"rounds: {r.rounds}")
    if r.model is not None:
        if not model_only:
            print(f"witness: {r.witness} (path from root: {' '.join(m.value for m in r.path) or 'empty'})")
        print(render_tree(r.model))


def _status_code(r: SolveResult) -> int:
    if r.status == SAT:
        return EXIT_OK
    if r.status == EXHAUSTED:
        return EXIT_EXHAUSTED
    return EXIT_NO


def cmd_sat(text: str, limits: Limits, fmt: str = "text", marks: Sequence[str] = (),
            model_only: bool = False) -> int:
    f = parse_formula(text)
    r = solve(f, limits, marks=marks)
    _print_result(r, fmt, model_only)
    return _status_code(r)


def cmd_xpath(mode: str, e1: str, e2: str | None, limits: Limits, fmt: str = "text",
              schema: str | None = None, general_position: bool = False) -> int:
    if mode == "empty":
        if e2 is not None:
            raise UsageError("'empty' takes one expression")
    elif e2 is None:
        raise UsageError(f"'{mode}' takes two expressions")
    x1 = desugar_position(parse_xpath(e1), not general_position)
    x2 = desugar_position(parse_xpath(e2), not general_position) if e2 is not None else None
    tt = parse_treetype(schema) if schema is not None else None
    if mode == "contains":
        v = xpath_contains(x1, x2, tt, limits)
    elif mode == "equiv":
        v = xpath_equiv(x1, x2, tt, limits)
    elif mode == "disjoint":
        v = xpath_disjoint(x1, x2, tt, limits)
    else:
        v = xpath_empty(x1, tt, limits)
    if fmt == "json":
        print(json.dumps(v.to_json(), indent=2))
    elif fmt == "dot" and v.counterexample is not None:
        print(v.counterexample.to_dot())
    else:
        verdict = {True: "HOLDS", False: "FAILS", None: "RESOURCE_EXHAUSTED"}[v.holds]
        print(f"{mode}: {verdict}")
        if v.detail:
            print(f"reason: {v.detail}")
        if v.counterexample is not None:
            print(f"context node: {v.context}; offending node: {v.node}")
            print(render_tree(v.counterexample))
    if v.holds is None:
        return EXIT_EXHAUSTED
    return EXIT_OK if v.holds else EXIT_NO


def cmd_translate(kind: str, text: str, fmt: str = "text", general_position: bool = False) -> int:
    out: dict = {}
    if kind == "formula":
        f = parse_formula(text)
        ch = ch_translate(f)
        g = nnf(ch)
        annotated, au = annotate_counting(g, universe_of(g))
        lean = build_lean(annotated, au)
        out = {
            "formula": to_text(f), "ch": to_text(ch), "nnf": to_text(g),
            "annotated": to_text(annotated), "k": k_bound(annotated),
            "lean": [to_text(x) for x in lean.formulas],
        }
    elif kind == "xpath":
        e = parse_xpath(text)
        d = desugar_position(e, not general_position)
        tr = translate(d)
        out = {
            "expression": str(e), "desugared": str(d), "formula": to_text(tr.formula),
            "selected": to_text(tr.local), "nominals": list(tr.marks),
            "constraints": [to_text(c) for c in tr.constraints],
        }
    else:
        tt = parse_treetype(text)
        out = {"type": text, "formula": to_text(encode_treetype(tt))}
    if fmt == "json":
        print(json.dumps(out, indent=2))
    else:
        for key, value in out.items():
            if isinstance(value, list):
                print(f"{key}:")
                for i, v in enumerate(value):
                    print(f"  {i:3d}  {v}")
            else:
                print(f"{key}: {value}")
    return EXIT_OK


def cmd_crosscheck(text: str, bound: int, limits: Limits, fmt: str = "text",
                   marks: Sequence[str] = ()) -> int:
    f = parse_formula(text)
    r = solve(f, limits, marks=marks)
    if r.status == EXHAUSTED:
        _print_result(r, fmt)
        return EXIT_EXHAUSTED
    u = universe_of(nnf(ch_translate(f)), marks=marks)
    witness = oracle_sat(f, u, bound, list(marks))
    if r.status == SAT:
        verified = bool(evaluate(f, r.model))
        agree = verified and (witness is not None or r.model.size > bound)
        verdict = "AGREE(SAT)" if agree and witness is not None else (
            "AGREE(SAT-beyond-bound)" if agree else "DISAGREE")
    else:
        agree = witness is None
        verdict = "AGREE(UNSAT-within-bound)" if agree else "DISAGREE"
    if fmt == "json":
        out = {"verdict": verdict, "solver": r.to_json(),
               "oracle": witness.to_json() if witness is not None else None, "bound": bound}
        print(json.dumps(out, indent=2))
    else:
        print(verdict)
        print(f"solver: {r.status} in {r.rounds} rounds")
        if r.model is not None:
            print(render_tree(r.model))
        print(f"oracle (trees up to {bound} nodes): {'model found' if witness else 'no model'}")
        if witness is not None:
            print(render_tree(witness))
    return EXIT_OK if agree else EXIT_NO


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("TLSAT_LOG")
    if level:
        logging.basicConfig(level=level.upper(), stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    try:
        limits = _limits(args)
        if args.command in ("sat", "model"):
            return cmd_sat(_read_formula(args), limits, args.format, _marks(args),
                           model_only=args.command == "model")
        if args.command == "xpath":
            schema = None
            if args.schema:
                with open(args.schema, encoding="utf-8") as fh:
                    schema = fh.read()
            return cmd_xpath(args.mode, args.e1, args.e2, limits, args.format, schema,
                             args.general_position)
        if args.command == "translate":
            return cmd_translate(args.kind, args.text, args.format, args.general_position)
        return cmd_crosscheck(_read_formula(args), args.oracle_bound, limits, args.format, _marks(args))
    except (ParseError, FormulaError, NormalFormError, XPathError, LeanError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, SolverError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
