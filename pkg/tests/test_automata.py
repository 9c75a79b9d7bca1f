import itertools
import random

import pytest

from cofix.automata import (
    BottomUpTA,
    GenerativeTA,
    accepts,
    check_acceptance_invariant,
    check_model_invariant,
    delta_f,
    generate_trees,
    greatest_acceptance_map,
    greatest_model_map,
    model_check_bounded,
    oracle_root_states,
    oracle_runs,
    random_bottom_up,
    random_generative,
    random_tree,
    reachable_states,
    synth_acceptance_invariant,
    synth_model_invariant,
)
from cofix.fixpoint import DomainError
from cofix.terms import EnumerationCapError, SchemaError, Signature, enumerate_terms, number_nodes, parse_term, preorder
from oracles import brute_force_runs

GA = Signature.of(a=0, g=2)
GAB = Signature.of(a=0, b=0, g=2)


def fs(*xs):
    return frozenset(xs)


def T(text, sig=GA):
    return number_nodes(parse_term(text, sig))


def ta(delta, states=("q0", "q1"), accept="q1", sig=GA):
    return BottomUpTA(sig, states, delta, accept)


A1 = ta({("a",): {"q0"}, ("g", "q0", "q0"): {"q1"}})


# -- bottom-up automata ----------------------------------------------------

def test_reachable_examples():
    assert reachable_states(A1, T("a")) == fs("q0")
    assert reachable_states(A1, T("g(a,a)")) == fs("q1")
    dead = ta({("g", "q0", "q0"): {"q1"}})
    for t in enumerate_terms(GA, 3):
        assert reachable_states(dead, t) == fs()


def test_oracle_run_examples():
    two = ta({("a",): {"q0", "q1"}})
    assert len(oracle_runs(two, T("a"))) == 2
    assert oracle_runs(ta({("a",): {"q0"}}), T("g(a,a)")) == []
    assert oracle_runs(A1, T("g(a,a)")) == [{"n0": "q1", "n1": "q0", "n2": "q0"}]


def test_pruned_runs_match_literal_enumeration():
    rng = random.Random(6)
    for _ in range(60):
        A = random_bottom_up(rng, GAB, rng.randint(1, 3), density=0.5)
        t = random_tree(rng, GAB, 3)
        key = lambda r: sorted(r.items())
        assert sorted(oracle_runs(A, t), key=key) == sorted(brute_force_runs(A, t), key=key)


def test_run_cap():
    A = ta({("a",): {"q0", "q1"}, ("g", "q0", "q0"): {"q0", "q1"}, ("g", "q0", "q1"): {"q0", "q1"},
            ("g", "q1", "q0"): {"q0", "q1"}, ("g", "q1", "q1"): {"q0", "q1"}})
    with pytest.raises(EnumerationCapError):
        oracle_runs(A, T("g(g(a,a),g(a,a))"), cap=10)


def test_accepts_examples():
    assert accepts(A1, T("g(a,a)"))
    assert not accepts(A1, T("a"))
    never = ta({("a",): {"q0"}, ("g", "q0", "q0"): {"q0"}})
    assert not any(accepts(never, t) for t in enumerate_terms(GA, 4))


def test_automaton_validation():
    with pytest.raises(SchemaError):
        ta({("a",): {"q0"}}, accept="q9")
    with pytest.raises(SchemaError):
        ta({("g", "q0"): {"q0"}})
    with pytest.raises(SchemaError):
        ta({("a",): {"q7"}})
    with pytest.raises(SchemaError):
        ta({("z",): {"q0"}})


# -- acceptance invariants -------------------------------------------------

def test_acceptance_checker_examples():
    t = T("g(a,a)")
    sub = {n.node: reachable_states(A1, n) for n in preorder(t)}
    assert check_acceptance_invariant(A1, t, sub).ok
    v = check_acceptance_invariant(A1, t, {n: fs() for n in sub})
    assert (v.location, v.condition) == ("n0", "root")
    A = ta({("a",): {"q0", "q1"}, ("g", "q0", "q0"): {"q1"}})
    t2 = T("g(a,g(a,a))")
    assert reachable_states(A, t2) < fs("q0", "q1")
    f = {n.node: reachable_states(A, n) for n in preorder(t2)}
    f[t2.node] = fs("q0", "q1")
    v = check_acceptance_invariant(A, t2, f)
    assert (v.location, v.condition) == ("n0", "step")


def test_acceptance_leaf_condition_and_domain():
    t = T("g(a,a)")
    v = check_acceptance_invariant(A1, t, {"n0": fs("q1"), "n1": fs("q0", "q1"), "n2": fs("q0")})
    assert (v.location, v.condition) == ("n1", "leaf")
    with pytest.raises(DomainError):
        check_acceptance_invariant(A1, t, {"n0": fs("q1")})
    v = check_acceptance_invariant(A1, t, {"n0": fs("q5"), "n1": fs(), "n2": fs()})
    assert (v.location, v.condition) == ("n0", "range")


def test_synthesised_acceptance_invariant():
    t = T("g(a,a)")
    f = synth_acceptance_invariant(A1, t)
    assert f.as_dict() == {"n0": fs("q1"), "n1": fs("q0"), "n2": fs("q0")}
    assert synth_acceptance_invariant(A1, T("g(g(a,a),a)")) is None


def random_acceptance_candidate(A, t, rng):
    """Satisfies the leaf and step inclusions by construction."""
    f = {}
    for n in reversed(list(preorder(t))):
        allowed = A.step_sets(n.ctor, [f[c.node] for c in n.children])
        f[n.node] = frozenset(q for q in allowed if rng.random() < 0.6)
    return f


def test_sampled_invariants_are_dominated_and_sound():
    rng = random.Random(14)
    passing = 0
    for _ in range(150):
        A = random_bottom_up(rng, GAB, rng.randint(1, 3), density=0.5)
        t = random_tree(rng, GAB, 4)
        best = greatest_acceptance_map(A, t)
        for _ in range(5):
            f = random_acceptance_candidate(A, t, rng)
            assert all(f[n] <= best[n] for n in f)
            if check_acceptance_invariant(A, t, f).ok:
                passing += 1
                assert accepts(A, t)
    assert passing > 20


# -- generative automata and model checking --------------------------------

def gen(c, states=("x0",), init="x0", sig=GA):
    return GenerativeTA(sig, states, {x: {tuple(l) for l in ls} for x, ls in c.items()}, init)


def test_generate_trees_examples():
    only_a = gen({"x0": [("a",)]})
    for h in (1, 3, 5):
        assert generate_trees(only_a, h) == [parse_term("a", GA)]
    rec = gen({"x0": [("a",), ("g", "x0", "x0")]})
    assert set(generate_trees(rec, 2)) == {parse_term("a", GA), parse_term("g(a,a)", GA)}
    assert len(generate_trees(rec, 3)) == 5
    loop = gen({"x0": [("g", "x0", "x0")]})
    assert generate_trees(loop, 4) == []


def test_generate_trees_matches_filtered_enumeration():
    rng = random.Random(31)
    everything = enumerate_terms(GAB, 3)
    for _ in range(30):
        C = random_generative(rng, GAB, rng.randint(1, 3))
        got = set(generate_trees(C, 3))
        assert got == {t for t in everything if _generated_by(C, t, C.init)}


def _generated_by(C, t, x):
    return any(l[0] == t.ctor and len(l) - 1 == len(t.children)
               and all(_generated_by(C, c, y) for c, y in zip(t.children, l[1:]))
               for l in C.c[x])


def test_generate_trees_cap():
    rec = gen({"x0": [("a",), ("g", "x0", "x0")]})
    with pytest.raises(EnumerationCapError):
        generate_trees(rec, 5, cap=100)


def test_delta_f_examples():
    A = ta({("a",): {"q0"}, ("g", "q0", "q0"): {"q1"}})
    f = {"x1": fs("q0"), "x2": fs("q0"), "x3": fs()}
    assert delta_f(A, f, ("a",)) == fs("q0")
    assert delta_f(A, f, ("g", "x3", "x2")) == fs()
    assert delta_f(A, f, ("g", "x1", "x2")) == fs("q1")


def test_model_checker_examples():
    A = ta({("a",): {"qF"}}, states=("q0", "qF"), accept="qF")
    C = gen({"x0": [("a",)]})
    assert check_model_invariant(A, C, {"x0": fs("qF")}).ok
    v = check_model_invariant(A, C, {"x0": fs()})
    assert (v.location, v.condition) == ("x0", "initial")
    idle = gen({"x0": []})
    assert check_model_invariant(A, idle, {"x0": fs("q0", "qF")}).ok
    with pytest.raises(DomainError):
        check_model_invariant(A, C, {})


def test_model_closure_failure():
    A = ta({("a",): {"q0"}}, states=("q0", "qF"), accept="qF")
    v = check_model_invariant(A, gen({"x0": [("a",)]}), {"x0": fs("qF")})
    assert (v.location, v.condition) == ("x0", "closure")


def test_model_synthesis_examples():
    A = ta({("a",): {"qF"}}, states=("q0", "qF"), accept="qF")
    f = synth_model_invariant(A, gen({"x0": [("a",)]}))
    assert "qF" in f["x0"]
    empty = ta({}, states=("q0", "qF"), accept="qF")
    assert synth_model_invariant(empty, gen({"x0": [("a",)]})) is None
    states = ("q0", "qF")
    A3 = ta({("a",): {"q0", "qF"}, **{("g", p, q): {"qF"} for p in states for q in states}},
            states=states, accept="qF")
    C3 = gen({"x0": [("a",), ("g", "x0", "x0")]})
    f = synth_model_invariant(A3, C3)
    assert f is not None and "qF" in f["x0"]
    assert check_model_invariant(A3, C3, f).ok
    assert model_check_bounded(A3, C3, 4) == (True, None)


def test_bounded_examples():
    C = gen({"x0": [("a",)]})
    assert model_check_bounded(ta({("a",): {"q1"}}), C, 3) == (True, None)
    ok, cex = model_check_bounded(ta({("a",): {"q0"}}), C, 3)
    assert not ok and cex == parse_term("a", GA)


def all_maps(A, C):
    subsets = list(A.lattice.elements())
    for vals in itertools.product(subsets, repeat=len(C.states)):
        yield dict(zip(C.states, vals))


def test_greatest_model_invariant_dominates_exhaustively():
    rng = random.Random(41)
    for _ in range(40):
        A = random_bottom_up(rng, GA, rng.randint(1, 3), density=0.45)
        C = random_generative(rng, GA, rng.randint(1, 3))
        best = greatest_model_map(A, C)
        synth = synth_model_invariant(A, C)
        for f in all_maps(A, C):
            v = check_model_invariant(A, C, f)
            if v.ok or v.condition == "initial":
                assert all(f[x] <= best[x] for x in C.states)
            if synth is None:
                assert not v.ok


def test_passing_model_invariants_are_sound():
    rng = random.Random(43)
    checked = 0
    for _ in range(60):
        A = random_bottom_up(rng, GA, rng.randint(1, 3), density=0.5)
        C = random_generative(rng, GA, rng.randint(1, 3))
        for f in all_maps(A, C):
            if check_model_invariant(A, C, f).ok:
                checked += 1
                assert model_check_bounded(A, C, 4)[0]
                break
    assert checked > 5


def test_generative_validation():
    with pytest.raises(SchemaError):
        gen({"x0": [("g", "x0")]})
    with pytest.raises(SchemaError):
        gen({"x0": [("g", "x0", "x9")]})
    with pytest.raises(SchemaError):
        gen({"x0": [("a",)]}, init="x5")
    with pytest.raises(SchemaError):
        gen({"x0": [("a",)], "x8": []})


def test_root_projection_example():
    assert oracle_root_states(A1, parse_term("g(a,a)", GA)) == fs("q1")


def test_invariant_search_misses_vacuous_systems():
    # no finite tree is generated, so every tree is accepted, yet no invariant exists
    A = BottomUpTA(GA, ("q0", "qF"), {("a",): {"q0"}, ("g", "q0", "q0"): {"qF"}}, "qF")
    C = GenerativeTA(GA, ("x0",), {"x0": {("g", "x0", "x0")}}, "x0")
    assert generate_trees(C, 6) == []
    assert model_check_bounded(A, C, 6) == (True, None)
    assert synth_model_invariant(A, C) is None


def test_invariant_search_misses_mixed_successors():
    # x1 yields a or b, whose state sets are disjoint; every generated tree is still accepted
    A = BottomUpTA(GAB, ("p", "r", "qF"),
                   {("a",): {"p"}, ("b",): {"r"}, **{("g", x, y): {"qF"} for x in "pr" for y in "pr"}}, "qF")
    C = GenerativeTA(GAB, ("x0", "x1"), {"x0": {("g", "x1", "x1")}, "x1": {("a",), ("b",)}}, "x0")
    trees = generate_trees(C, 5)
    assert len(trees) == 4 and all(accepts(A, number_nodes(t)) for t in trees)
    assert model_check_bounded(A, C, 5) == (True, None)
    assert greatest_model_map(A, C).as_dict() == {"x0": fs(), "x1": fs()}
    assert synth_model_invariant(A, C) is None
