import json
import random
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

from cofix import formats
from cofix.automata import (
    check_acceptance_invariant,
    check_model_invariant,
    delta_f,
    random_bottom_up,
    random_generative,
    random_tree,
)
from cofix.cli import main
from cofix.liveness import check_submartingale, greatest_submartingale, random_prob_tree
from cofix.terms import Signature, node_index

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "formats" / "examples"
GA = Signature.of(a=0, g=2)


def ex(name):
    return str(EXAMPLES / name)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def dump(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_prob_of_leaf(capsys):
    assert run(capsys, "liveness", "prob", ex("leaf_tree.json")) == (0, "0/1\n", "")


def test_prob_json(capsys):
    code, out, _ = run(capsys, "liveness", "prob", ex("prob_tree.json"), "--json")
    assert code == 0 and json.loads(out)["probability"] == "2/3"


def test_accept_synth_emits_witness_that_rechecks(capsys, tmp_path):
    w = tmp_path / "w.json"
    code, out, _ = run(capsys, "ta", "accept", ex("ga_automaton.json"), ex("ga_tree.json"), "--synth", "--out", w)
    assert code == 0 and w.exists()
    assert json.loads(w.read_text())["witness"] == {"n0": ["qF"], "n1": ["q0"], "n2": ["q0"]}
    assert run(capsys, "ta", "accept", ex("ga_automaton.json"), ex("ga_tree.json"), "--witness", w)[0] == 0


def test_accept_without_out_prints_witness(capsys):
    code, out, _ = run(capsys, "ta", "accept", ex("ga_automaton.json"), ex("ga_tree.json"), "--synth", "--json")
    assert code == 0
    assert json.loads(out)["witness"]["kind"] == "acceptance"


def test_accept_rejection(capsys, tmp_path):
    t = dump(tmp_path / "t.json", {"format": "cofix/1", "term": {"ctor": "a"}})
    code, out, _ = run(capsys, "ta", "accept", ex("ga_automaton.json"), t, "--json")
    assert code == 1
    v = json.loads(out)["verdict"]
    assert (v["status"], v["location"], v["condition"]) == ("fail", "n0", "root")
    assert run(capsys, "ta", "accept", ex("ga_automaton.json"), t, "--synth")[0] == 1


def test_bad_acceptance_witness_fails(capsys, tmp_path):
    w = dump(tmp_path / "w.json", {"format": "cofix/1", "kind": "acceptance",
                                   "witness": {"n0": ["qF"], "n1": ["qF"], "n2": ["q0"]}})
    code, out, _ = run(capsys, "ta", "accept", ex("ga_automaton.json"), ex("ga_tree.json"), "--witness", w, "--json")
    assert code == 1
    v = json.loads(out)["verdict"]
    assert (v["location"], v["condition"]) == ("n0", "step")


def test_liveness_synth_round_trip(capsys, tmp_path):
    w = tmp_path / "sm.json"
    assert run(capsys, "liveness", "synth", ex("prob_tree.json"), "--out", w)[0] == 0
    code, out, _ = run(capsys, "liveness", "check", ex("prob_tree.json"), w, "--json")
    assert code == 0 and json.loads(out)["lower_bound"] == "2/3"


def test_liveness_check_failure(capsys, tmp_path):
    w = dump(tmp_path / "w.json", {"format": "cofix/1", "kind": "submartingale",
                                   "witness": {n: "1/1" for n in ["r", "c", "l1", "l2", "q", "c2", "l3", "l4", "l5"]}})
    code, out, _ = run(capsys, "liveness", "check", ex("prob_tree.json"), w, "--json")
    assert code == 1
    v = json.loads(out)["verdict"]
    assert (v["location"], v["condition"]) == ("l1", "leaf-zero")


def test_modelcheck_synth_round_trip(capsys, tmp_path):
    w = tmp_path / "m.json"
    assert run(capsys, "ta", "modelcheck", ex("ga_system_automaton.json"), ex("ga_system.json"), "--out", w)[0] == 0
    assert run(capsys, "ta", "modelcheck", ex("ga_system_automaton.json"), ex("ga_system.json"), "--witness", w)[0] == 0


def test_modelcheck_refutation_reports_counterexample(capsys):
    code, out, _ = run(capsys, "ta", "modelcheck", ex("ga_automaton.json"), ex("ga_system.json"), "--json")
    body = json.loads(out)
    assert code == 1
    assert body["verdict"]["confidence"] == "theorem-backed"
    assert body["bounded"]["confidence"] == "bounded(4)"
    assert body["counterexample"] == {"ctor": "a", "children": []}


def test_modelcheck_bounded_mode(capsys):
    code, out, _ = run(capsys, "ta", "modelcheck", ex("ga_system_automaton.json"), ex("ga_system.json"),
                       "--bounded", "3", "--json")
    assert code == 0 and json.loads(out)["verdict"]["confidence"] == "bounded(3)"


def test_modelcheck_inconclusive_when_language_is_empty(capsys, tmp_path):
    A = dump(tmp_path / "A.json", {"format": "cofix/1", "states": ["qF"], "accept": "qF", "delta": {"a": ["qF"]},
                                   "signature": [{"name": "a", "arity": 0}, {"name": "g", "arity": 2}]})
    C = dump(tmp_path / "C.json", {"format": "cofix/1", "states": ["x0"], "init": "x0", "c": {"x0": ["g(x0,x0)"]}})
    code, out, _ = run(capsys, "ta", "modelcheck", A, C, "--json")
    body = json.loads(out)
    assert code == 1
    assert "counterexample" not in body
    assert body["note"].startswith("inconclusive")
    assert body["bounded"]["status"] == "pass"


def test_demo_coincidence_bu(capsys):
    code, out, _ = run(capsys, "demo", "coincidence", ex("ga_signature.json"), "sigma=bu:" + ex("ga_automaton.json"),
                       "--height", "3")
    assert code == 0
    assert [l for l in out.splitlines() if l.startswith("stage")] == [
        "stage 1: 1 trees, lfp = fold: yes, gfp = fold: yes",
        "stage 2: 2 trees, lfp = fold: yes, gfp = fold: yes",
        "stage 3: 5 trees, lfp = fold: yes, gfp = fold: yes",
    ]
    assert out.rstrip().endswith("PASS")


def test_demo_coincidence_ptr_json_table(capsys):
    code, out, _ = run(capsys, "demo", "coincidence", ex("prob_signature.json"), "sigma=ptr", "--height", "2",
                       "--samples", "1/3", "--json", "--table")
    body = json.loads(out)
    assert code == 0 and body["passed"]
    assert body["fixed_point"]["query[1/3](leaf,leaf)"] == "0/1"
    assert body["fixed_point"]["check[1/3](leaf,leaf)"] == "1/1"


def test_demo_rejects_bad_sigma(capsys):
    assert run(capsys, "demo", "coincidence", ex("ga_signature.json"), "sigma=ptr", "--height", "2")[0] == 2
    assert run(capsys, "demo", "coincidence", ex("ga_signature.json"), "sigma=xyz", "--height", "2")[0] == 2


def test_lattice_laws(capsys):
    assert run(capsys, "lattice", "laws", ex("powerset_lattice.json"))[0] == 0
    code, out, _ = run(capsys, "lattice", "laws", ex("unit_lattice.json"), "--json", "--random", "5")
    body = json.loads(out)
    assert code == 0 and body["verdict"]["confidence"] == "sampled(14)"
    assert set(body["laws"].values()) == {"pass"}


def test_malformed_json_exits_2_with_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "cofix/1",\n "term": {"ctor": }}')
    code, out, err = run(capsys, "liveness", "prob", bad)
    assert code == 2 and f"{bad}:2:" in err


def test_schema_violation_exits_2_with_field(capsys, tmp_path):
    t = dump(tmp_path / "t.json", {"format": "cofix/1", "term": {"ctor": "query", "attrs": {"p": 0.5},
                                                                 "children": [{"ctor": "leaf"}, {"ctor": "leaf"}]}})
    code, out, err = run(capsys, "liveness", "prob", t, "--json")
    assert code == 2 and "term.attrs.p" in err
    assert json.loads(out)["verdict"]["status"] == "error"


def test_incomplete_witness_exits_2(capsys, tmp_path):
    w = dump(tmp_path / "w.json", {"format": "cofix/1", "kind": "acceptance", "witness": {"n0": ["qF"]}})
    assert run(capsys, "ta", "accept", ex("ga_automaton.json"), ex("ga_tree.json"), "--witness", w)[0] == 2


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "liveness")[0] == 2
    assert run(capsys, "ta", "accept", "x.json")[0] == 2
    assert run(capsys, "demo", "coincidence", "s.json", "sigma=ptr", "--height", "0")[0] == 2


def test_flags_accepted_before_or_after_subcommand(capsys):
    a = run(capsys, "--json", "--seed", "4", "lattice", "laws", ex("unit_lattice.json"), "--random", "3")
    b = run(capsys, "lattice", "laws", ex("unit_lattice.json"), "--random", "3", "--json", "--seed", "4")
    assert a == b and a[0] == 0


def test_byte_identical_reports_under_fixed_seed(capsys):
    commands = [
        ["lattice", "laws", ex("unit_lattice.json"), "--random", "20", "--seed", "9", "--json"],
        ["demo", "coincidence", ex("prob_signature.json"), "sigma=ptr", "--height", "3", "--samples", "1/2,1/5",
         "--seed", "9", "--json", "--table"],
        ["ta", "modelcheck", ex("ga_automaton.json"), ex("ga_system.json"), "--json"],
    ]
    for argv in commands:
        first = run(capsys, *argv)
        assert run(capsys, *argv) == first


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cofix", "liveness", "prob", ex("leaf_tree.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "0/1\n"


# -- self-consistency of failing verdicts ---------------------------------
#
# Each helper re-derives one named condition at one location from scratch.

def submartingale_violated(t, f, node, condition):
    n = node_index(t)[node]
    v = f[node]
    if condition == "range":
        return not (isinstance(v, Fraction) and 0 <= v <= 1)
    if condition == "leaf-zero":
        return n.ctor == "leaf" and v != 0
    if condition == "submartingale":
        p, q = n.attrs
        return n.ctor == "query" and v > p * f[n.children[0].node] + q * f[n.children[1].node]
    return False


def acceptance_violated(A, t, f, node, condition):
    n = node_index(t)[node]
    if condition == "range":
        return not f[node] <= set(A.states)
    if condition == "leaf":
        return not n.children and not f[node] <= A.delta.get((n.ctor,), set())
    if condition == "step":
        allowed = set()
        for q1 in f[n.children[0].node]:
            for q2 in f[n.children[1].node]:
                allowed |= A.delta.get((n.ctor, q1, q2), set())
        return not f[node] <= allowed
    if condition == "root":
        return node == t.node and A.accept not in f[node]
    return False


def model_violated(A, C, f, x, condition):
    if condition == "range":
        return not f[x] <= set(A.states)
    if condition == "closure":
        return any(not f[x] <= delta_f(A, f, letter) for letter in C.c[x])
    if condition == "initial":
        return x == C.init and A.accept not in f[x]
    return False


def test_failing_verdicts_are_self_consistent():
    rng = random.Random(77)
    fails = 0
    for _ in range(200):
        t = random_prob_tree(rng, 5)
        best = greatest_submartingale(t)
        f = {n: min(Fraction(1), v + Fraction(rng.randint(-2, 2), 8)) for n, v in best.items()}
        v = check_submartingale(t, f)
        if not v.ok:
            fails += 1
            assert submartingale_violated(t, f, v.location, v.condition)
    for _ in range(200):
        A = random_bottom_up(rng, GA, rng.randint(1, 3))
        t = random_tree(rng, GA, 4)
        f = {n: frozenset(q for q in A.states if rng.random() < 0.4) for n in node_index(t)}
        v = check_acceptance_invariant(A, t, f)
        if not v.ok:
            fails += 1
            assert acceptance_violated(A, t, f, v.location, v.condition)
        C = random_generative(rng, GA, rng.randint(1, 3))
        g = {x: frozenset(q for q in A.states if rng.random() < 0.5) for x in C.states}
        v = check_model_invariant(A, C, g)
        if not v.ok:
            fails += 1
            assert model_violated(A, C, g, v.location, v.condition)
    assert fails > 100


def test_cli_failures_are_self_consistent(capsys, tmp_path):
    rng = random.Random(5)
    checked = 0
    for i in range(30):
        A = random_bottom_up(rng, GA, 2)
        t = random_tree(rng, GA, 3)
        f = {n: frozenset(q for q in A.states if rng.random() < 0.5) for n in node_index(t)}
        a = dump(tmp_path / f"A{i}.json", formats.bottom_up_to_doc(A))
        tt = dump(tmp_path / f"t{i}.json", formats.term_to_doc(t))
        w = dump(tmp_path / f"w{i}.json", {"format": "cofix/1", "kind": "acceptance",
                                           "witness": {n: sorted(v) for n, v in f.items()}})
        code, out, _ = run(capsys, "ta", "accept", a, tt, "--witness", w, "--json")
        v = json.loads(out)["verdict"]
        if code == 1:
            checked += 1
            assert acceptance_violated(A, t, f, v["location"], v["condition"])
    assert checked > 5
