"""The ``cofix`` command.

Exit status: 0 on pass, 1 on a failing verdict, 2 on unreadable or invalid
input.  ``--json`` switches to machine-readable reports; ``--seed`` fixes
every randomised routine, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import random
import sys
from fractions import Fraction
from typing import Callable

from cofix import formats
from cofix.automata import (
    accepts,
    bounded_verdict,
    check_acceptance_invariant,
    check_model_invariant,
    greatest_acceptance_map,
    greatest_model_map,
    reachable_states,
    sigma_bu,
)
from cofix.fixpoint import DomainError, coincidence_check
from cofix.formats import FORMAT, FormatError
from cofix.lattice import LatticeTypeError, PowersetLattice, UnitInterval, check_lattice_laws, format_rational
from cofix.liveness import (
    PROB_SIGNATURE,
    UNIT,
    check_submartingale,
    greatest_submartingale,
    reach_probability,
    sigma_ptr,
)
from cofix.terms import DEFAULT_CAP, EnumerationCapError, SchemaError
from cofix.verdict import ERROR, THEOREM_BACKED, Verdict

INPUT_ERRORS = (FormatError, SchemaError, DomainError, LatticeTypeError, EnumerationCapError)


class Report:
    """What a subcommand produces: an exit code, a JSON body and text lines."""

    def __init__(self, command: str, verdict: Verdict | None = None, **fields):
        self.body = {"format": FORMAT, "command": command}
        if verdict is not None:
            self.body["verdict"] = verdict.to_json()
        self.body.update(fields)
        self.verdict = verdict
        self.lines: list[str] = []
        self.code = 0 if verdict is None or verdict.ok else 1

    def say(self, line: str) -> "Report":
        self.lines.append(line)
        return self


def _verdict_line(v: Verdict) -> str:
    if v.ok:
        return f"PASS [{v.confidence}] {v.detail}".rstrip()
    return f"FAIL [{v.confidence}] at {v.location}, condition {v.condition}: {v.detail}"


def _write_witness(args, doc: dict, report: Report) -> None:
    if args.out:
        formats.write_json(args.out, doc)
        report.body["witness_file"] = args.out
        report.say(f"witness written to {args.out}")
    else:
        report.body["witness"] = doc
        report.say(formats.dumps(doc).rstrip())


# -- liveness ---------------------------------------------------------------

def _prob_tree(path: str):
    return formats.term_from_doc(formats.read_json(path), PROB_SIGNATURE)


def cmd_liveness_prob(args) -> Report:
    p = reach_probability(_prob_tree(args.tree))
    return Report("liveness prob", probability=format_rational(p)).say(format_rational(p))


def cmd_liveness_check(args) -> Report:
    t = _prob_tree(args.tree)
    f = formats.witness_from_doc(formats.read_json(args.witness), "submartingale", UNIT)
    v = check_submartingale(t, f)
    r = Report("liveness check", v)
    if v.ok:
        r.body["lower_bound"] = format_rational(f[t.node])
    return r.say(_verdict_line(v))


def cmd_liveness_synth(args) -> Report:
    t = _prob_tree(args.tree)
    f = greatest_submartingale(t)
    v = Verdict.passed(f"greatest submartingale, root value {format_rational(f[t.node])}")
    r = Report("liveness synth", v, lower_bound=format_rational(f[t.node])).say(_verdict_line(v))
    _write_witness(args, formats.witness_to_doc("submartingale", f), r)
    return r


# -- tree automata ----------------------------------------------------------

def cmd_ta_accept(args) -> Report:
    tdoc = formats.read_json(args.tree)
    A = formats.bottom_up_from_doc(formats.read_json(args.automaton), formats.tree_signature(tdoc))
    t = formats.term_from_doc(tdoc, A.signature)
    if args.witness:
        f = formats.witness_from_doc(formats.read_json(args.witness), "acceptance", A.lattice)
        v = check_acceptance_invariant(A, t, f)
        return Report("ta accept", v).say(_verdict_line(v))
    if args.synth:
        f = greatest_acceptance_map(A, t)
        if A.accept in f[t.node]:
            v = Verdict.passed("acceptance invariant found")
            r = Report("ta accept", v).say(_verdict_line(v))
            _write_witness(args, formats.witness_to_doc("acceptance", f), r)
            return r
        v = Verdict.failed(t.node, "root", f"no acceptance invariant exists: the greatest candidate "
                                           f"omits {A.accept} at the root")
        return Report("ta accept", v, greatest=formats.witness_to_doc("acceptance", f)).say(_verdict_line(v))
    states = reachable_states(A, t)
    if accepts(A, t):
        v = Verdict.passed("the automaton accepts the tree")
    else:
        v = Verdict.failed(t.node, "root", f"root reaches {A.lattice.sorted_list(states)}, "
                                           f"which omits {A.accept}")
    return Report("ta accept", v, root_states=A.lattice.encode(states)).say(_verdict_line(v))


def cmd_ta_modelcheck(args) -> Report:
    cdoc = formats.read_json(args.system)
    C0 = formats.generative_from_doc(cdoc)
    A = formats.bottom_up_from_doc(formats.read_json(args.automaton), C0.signature)
    C = formats.generative_from_doc(cdoc, A.signature)
    if args.witness:
        f = formats.witness_from_doc(formats.read_json(args.witness), "model", A.lattice)
        v = check_model_invariant(A, C, f)
        return Report("ta modelcheck", v).say(_verdict_line(v))
    if args.bounded is not None:
        v, cex = bounded_verdict(A, C, args.bounded, args.cap)
        r = Report("ta modelcheck", v).say(_verdict_line(v))
        if cex is not None:
            r.body["counterexample"] = formats.term_to_json(cex)
        return r
    f = greatest_model_map(A, C)
    if A.accept in f[C.init]:
        v = Verdict.passed("model-checking invariant found: every finite generated tree is accepted")
        r = Report("ta modelcheck", v).say(_verdict_line(v))
        _write_witness(args, formats.witness_to_doc("model", f), r)
        return r
    v = Verdict.failed(C.init, "initial", f"no model-checking invariant exists: the greatest "
                                          f"candidate omits {A.accept} at {C.init}")
    r = Report("ta modelcheck", v, greatest=formats.witness_to_doc("model", f)).say(_verdict_line(v))
    bv, cex = bounded_verdict(A, C, args.height, args.cap)
    r.body["bounded"] = bv.to_json()
    if cex is not None:
        r.body["counterexample"] = formats.term_to_json(cex)
        r.say(f"refuted [{bv.confidence}]: generated tree {cex} is not accepted")
    else:
        note = (f"inconclusive: every generated tree of height <= {args.height} is accepted, "
                f"but no invariant certifies the unbounded property")
        r.body["note"] = note
        r.say(note)
    return r


# -- demos and lattices -----------------------------------------------------

def _parse_samples(text: str) -> list[Fraction]:
    try:
        return [Fraction(s) for s in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise FormatError("--samples", f"cannot read {text!r} as comma-separated rationals") from None


def cmd_demo_coincidence(args) -> Report:
    sig = formats.signature_from_doc(formats.read_json(args.signature))
    choice = args.sigma.removeprefix("sigma=")
    if choice == "ptr":
        for c in sig.constructors:
            if c.name not in PROB_SIGNATURE or PROB_SIGNATURE.get(c.name) != c:
                raise FormatError("signature", f"constructor {c.name!r} is not part of the "
                                               "probabilistic tree signature")
        sigma = sigma_ptr
    elif choice.startswith("bu:"):
        sigma = sigma_bu(formats.bottom_up_from_doc(formats.read_json(choice[3:]), sig))
    else:
        raise FormatError("sigma", f"expected sigma=ptr or sigma=bu:FILE, got {args.sigma!r}")
    samples = _parse_samples(args.samples)
    attr_samples = {c.name: samples for c in sig.constructors if c.schema.kind == "prob"}
    report = coincidence_check(sigma, sig, args.height, attr_samples, args.cap, seed=args.seed)
    body = report.to_json()
    if not args.table:
        body.pop("fixed_point")
    r = Report("demo coincidence", **{k: v for k, v in body.items() if k != "format"})
    r.code = 0 if report.passed else 1
    r.say(f"monotone: {_verdict_line(report.monotone)}")
    for s in report.stages:
        r.say(f"stage {s.stage}: {s.terms} trees, lfp = fold: {_yes(s.lfp_matches_fold)}, "
              f"gfp = fold: {_yes(s.gfp_matches_fold)}")
    r.say(f"lfp converged after {report.lfp_iterations} steps, gfp after {report.gfp_iterations}")
    r.say(f"lfp = gfp: {_yes(report.unique)}, fixed point = fold: {_yes(report.matches_fold)}")
    r.say("PASS" if report.passed else "FAIL")
    return r


def _yes(b: bool) -> str:
    return "yes" if b else "NO"


def cmd_lattice_laws(args) -> Report:
    l = formats.lattice_from_doc(formats.read_json(args.lattice))
    rng = random.Random(args.seed)
    if isinstance(l, PowersetLattice):
        carrier = list(l.top)
        exhaustive = len(carrier) <= 6
        if exhaustive:
            samples = list(l.elements())
        else:
            samples = [frozenset(q for q in carrier if rng.random() < 0.5) for _ in range(args.random or 64)]
        how = f"{len(samples)} subsets"
    else:
        assert isinstance(l, UnitInterval)
        exhaustive = False
        samples = l.grid(args.grid)
        for _ in range(args.random):
            den = rng.randint(1, 100)
            samples.append(Fraction(rng.randint(0, den), den))
        how = f"{args.grid}-point grid plus {args.random} random rationals"
    law_report = check_lattice_laws(l, samples)
    failures = law_report.failures()
    laws = {law: ("pass" if w is None else [l.encode(x) for x in w]) for law, w in law_report.results.items()}
    if failures:
        law = next(iter(failures))
        v = Verdict.failed(law, "lattice-law", f"counterexample {laws[law]}")
    else:
        v = Verdict.passed(f"all {len(laws)} laws hold on {how}",
                           THEOREM_BACKED if exhaustive else f"sampled({len(samples)})")
    r = Report("lattice laws", v, laws=laws)
    for law, outcome in laws.items():
        r.say(f"{law}: {'pass' if outcome == 'pass' else 'FAIL ' + str(outcome)}")
    return r.say(_verdict_line(v))


# -- wiring -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="print a JSON report")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for randomised routines (default 0)")

    parser = argparse.ArgumentParser(prog="cofix", description="Fixed-point checkers for trees and tree automata.")
    parser.add_argument("--json", action="store_true", help="print a JSON report")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomised routines (default 0)")
    groups = parser.add_subparsers(dest="group", required=True)

    def leaf(sub, name: str, handler: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(handler=handler)
        return p

    live = groups.add_parser("liveness", help="probabilistic trees and submartingales").add_subparsers(
        dest="action", required=True)
    p = leaf(live, "prob", cmd_liveness_prob, "print the probability of reaching a check node")
    p.add_argument("tree")
    p = leaf(live, "check", cmd_liveness_check, "check a submartingale witness")
    p.add_argument("tree")
    p.add_argument("witness")
    p = leaf(live, "synth", cmd_liveness_synth, "compute the greatest submartingale")
    p.add_argument("tree")
    p.add_argument("--out", help="write the witness to this file")

    ta = groups.add_parser("ta", help="tree automata").add_subparsers(dest="action", required=True)
    p = leaf(ta, "accept", cmd_ta_accept, "decide whether an automaton accepts a tree")
    p.add_argument("automaton")
    p.add_argument("tree")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--witness", help="check this acceptance invariant")
    mode.add_argument("--synth", action="store_true", help="synthesise an acceptance invariant")
    p.add_argument("--out", help="write a synthesised witness to this file")
    p = leaf(ta, "modelcheck", cmd_ta_modelcheck,
             "decide whether every tree a system generates is accepted (synthesis by default)")
    p.add_argument("automaton")
    p.add_argument("system")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--witness", help="check this model-checking invariant")
    mode.add_argument("--synth", action="store_true", help="synthesise an invariant (the default)")
    mode.add_argument("--bounded", type=_positive, metavar="H", help="check generated trees up to height H")
    p.add_argument("--height", type=_positive, default=4,
                   help="bounded search height used when synthesis fails (default 4)")
    p.add_argument("--cap", type=_positive, default=DEFAULT_CAP, help="tree enumeration cap")
    p.add_argument("--out", help="write a synthesised witness to this file")

    demo = groups.add_parser("demo", help="demonstrations").add_subparsers(dest="action", required=True)
    p = leaf(demo, "coincidence", cmd_demo_coincidence,
             "compare both Kleene chains with fold on all trees up to a height")
    p.add_argument("signature")
    p.add_argument("sigma", help="sigma=ptr or sigma=bu:AUTOMATON.json")
    p.add_argument("--height", type=_positive, required=True)
    p.add_argument("--samples", default="1/2", help="edge weights for probabilistic constructors")
    p.add_argument("--cap", type=_positive, default=DEFAULT_CAP, help="tree enumeration cap")
    p.add_argument("--table", action="store_true", help="include the fixed-point table in JSON output")

    lat = groups.add_parser("lattice", help="lattice utilities").add_subparsers(dest="action", required=True)
    p = leaf(lat, "laws", cmd_lattice_laws, "check the lattice laws on samples")
    p.add_argument("lattice")
    p.add_argument("--grid", type=_positive, default=9, help="grid points for the unit interval (default 9)")
    p.add_argument("--random", type=int, default=0, help="extra random samples")
    return parser


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    command = f"{args.group} {args.action}"
    try:
        report = args.handler(args)
    except INPUT_ERRORS as exc:
        print(f"cofix: error: {exc}", file=sys.stderr)
        if args.json:
            err = Verdict(ERROR, detail=str(exc))
            sys.stdout.write(formats.dumps({"format": FORMAT, "command": command, "verdict": err.to_json()}))
        return 2
    if args.json:
        sys.stdout.write(formats.dumps(report.body))
    else:
        for line in report.lines:
            print(line)
    return report.code


if __name__ == "__main__":
    sys.exit(main())
