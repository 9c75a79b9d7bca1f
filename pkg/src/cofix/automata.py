"""Bottom-up tree automata as specifications, generative tree automata as
systems, and top-down invariant witnesses for acceptance and model checking.

Transition keys are tuples ``(ctor, q1, ..., qk)``; a nullary letter is
``(ctor,)``.  Missing transitions mean the empty set.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from cofix.fixpoint import DomainError, PredicateMap, gfp, make_transformer
from cofix.lattice import PowersetLattice
from cofix.terms import (
    DEFAULT_CAP,
    Constructor,
    EnumerationCapError,
    MonotoneAlgebra,
    SchemaError,
    Signature,
    Term,
    check_term,
    fold,
    node_index,
    number_nodes,
    preorder,
)
from cofix.verdict import Verdict, bounded

EMPTY: frozenset = frozenset()

Letter = tuple  # (ctor, *states)


def format_letter(letter: Letter) -> str:
    ctor, *args = letter
    return f"{ctor}({','.join(args)})" if args else ctor


def _fmt_set(s) -> str:
    return "{" + ",".join(sorted(s)) + "}"


@dataclass(frozen=True, eq=False)
class BottomUpTA:
    signature: Signature
    states: tuple[str, ...]
    delta: Mapping[Letter, frozenset]
    accept: str
    lattice: PowersetLattice = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "lattice", PowersetLattice(self.states))
        if self.accept not in self.states:
            raise SchemaError(f"accepting state {self.accept!r} is not a state")
        known = set(self.states)
        delta = {}
        for key, targets in self.delta.items():
            ctor, *args = key
            c = self.signature.get(ctor)
            if len(args) != c.arity:
                raise SchemaError(f"transition {format_letter(key)}: {ctor!r} has arity {c.arity}")
            bad = [q for q in (*args, *targets) if q not in known]
            if bad:
                raise SchemaError(f"transition {format_letter(key)} mentions unknown state {bad[0]!r}")
            if targets:
                delta[tuple(key)] = frozenset(targets)
        object.__setattr__(self, "delta", delta)

    def step(self, ctor: str, states: Sequence[str] = ()) -> frozenset:
        return self.delta.get((ctor, *states), EMPTY)

    def step_sets(self, ctor: str, sets: Sequence[frozenset]) -> frozenset:
        """Union of ``step`` over every choice of one state from each set."""
        if not sets:
            return self.delta.get((ctor,), EMPTY)
        out = set()
        for qs in itertools.product(*sets):
            out |= self.delta.get((ctor, *qs), EMPTY)
        return frozenset(out)


def sigma_bu(A: BottomUpTA) -> MonotoneAlgebra:
    """Evaluate a node to the set of states some run can reach there."""
    return MonotoneAlgebra(A.lattice, A.signature,
                           lambda ctor, attrs, kids: A.step_sets(ctor, kids),
                           "builtin:sigma_bu")


def reachable_states(A: BottomUpTA, t: Term) -> frozenset:
    check_term(A.signature, t)
    return fold(sigma_bu(A), t)


def accepts(A: BottomUpTA, t: Term) -> bool:
    return A.accept in reachable_states(A, t)


def _postorder(t: Term) -> list[Term]:
    return list(reversed(list(_rev_pre(t))))


def _rev_pre(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(n.children)


def oracle_runs(A: BottomUpTA, t: Term, cap: int = DEFAULT_CAP) -> list[dict[str, str]]:
    """Every run of ``A`` over ``t`` as a node-id to state labelling.

    Labellings are built node by node in postorder and a branch is dropped as
    soon as the node just labelled violates its local run condition.  Trees
    without node ids are numbered first.
    """
    check_term(A.signature, t)
    if t.node is None:
        t = number_nodes(t)
    order = _postorder(t)
    node_ids = [n.node for n in order]
    pos = {id(n): i for i, n in enumerate(order)}
    kids = [[pos[id(c)] for c in n.children] for n in order]
    label: list[str | None] = [None] * len(order)
    runs: list[dict[str, str]] = []

    def extend(i: int):
        if i == len(order):
            if len(runs) >= cap:
                raise EnumerationCapError(f"more than {cap} runs")
            runs.append(dict(zip(node_ids, label)))
            return
        n = order[i]
        allowed = A.step(n.ctor, [label[j] for j in kids[i]])
        for q in A.states:
            if q in allowed:
                label[i] = q
                extend(i + 1)
        label[i] = None

    extend(0)
    return runs


def oracle_root_states(A: BottomUpTA, t: Term, cap: int = DEFAULT_CAP) -> frozenset:
    if t.node is None:
        t = number_nodes(t)
    return frozenset(run[t.node] for run in oracle_runs(A, t, cap))


def _as_mapping(f):
    return f.as_dict() if isinstance(f, PredicateMap) else f


def _check_domain(f: Mapping, domain: Sequence[str], what: str):
    missing = [x for x in domain if x not in f]
    if missing:
        raise DomainError(f"witness has no value for {what} {missing[0]!r}")
    extra = [x for x in f if x not in set(domain)]
    if extra:
        raise DomainError(f"witness names {what} {extra[0]!r}, which does not exist")


def check_acceptance_invariant(A: BottomUpTA, t: Term,
                               f: PredicateMap | Mapping[str, frozenset]) -> Verdict:
    """Leaf and step inclusions at every node (preorder), then the root condition."""
    check_term(A.signature, t)
    nodes = node_index(t)
    f = _as_mapping(f)
    _check_domain(f, list(nodes), "node")
    carrier = frozenset(A.states)
    for n in preorder(t):
        v = f[n.node]
        if not isinstance(v, frozenset) or not v <= carrier:
            return Verdict.failed(n.node, "range", f"{v!r} is not a set of states of the automaton")
    for n in preorder(t):
        v = f[n.node]
        if not n.children:
            allowed = A.step(n.ctor)
            if not v <= allowed:
                return Verdict.failed(n.node, "leaf",
                                      f"{_fmt_set(v)} is not inside delta({n.ctor}) = {_fmt_set(allowed)}")
        else:
            allowed = A.step_sets(n.ctor, [f[c.node] for c in n.children])
            if not v <= allowed:
                return Verdict.failed(n.node, "step",
                                      f"{_fmt_set(v)} is not inside {_fmt_set(allowed)}, the states "
                                      f"{n.ctor} reaches from its children's sets")
    if A.accept not in f[t.node]:
        return Verdict.failed(t.node, "root", f"accepting state {A.accept} not in {_fmt_set(f[t.node])}")
    return Verdict.passed("the automaton accepts the tree")


def _unfold_nodes(nodes: Mapping[str, Term]):
    def unfold(n):
        sub = nodes[n]
        return sub.ctor, sub.attrs, [c.node for c in sub.children]
    return unfold


def greatest_acceptance_map(A: BottomUpTA, t: Term) -> PredicateMap:
    """Greatest node map satisfying the leaf and step inclusions."""
    check_term(A.signature, t)
    nodes = node_index(t)
    T = make_transformer(sigma_bu(A), list(nodes), _unfold_nodes(nodes))
    T.monotone_checked = True  # unions over larger sets are larger
    result = gfp(T, max_iter=len(nodes) + 2)
    assert result.converged
    return result.value


def synth_acceptance_invariant(A: BottomUpTA, t: Term) -> PredicateMap | None:
    f = greatest_acceptance_map(A, t)
    return f if A.accept in f[t.node] else None


# -- generative automata and model checking ---------------------------------

@dataclass(frozen=True, eq=False)
class GenerativeTA:
    signature: Signature
    states: tuple[str, ...]
    c: Mapping[str, frozenset]
    init: str

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if self.init not in self.states:
            raise SchemaError(f"initial state {self.init!r} is not a state")
        known = set(self.states)
        c = {}
        for x in self.states:
            letters = self.c.get(x, EMPTY)
            for letter in letters:
                ctor, *args = letter
                arity = self.signature.get(ctor).arity
                if len(args) != arity:
                    raise SchemaError(f"state {x}: letter {format_letter(letter)} needs {arity} successors")
                bad = [y for y in args if y not in known]
                if bad:
                    raise SchemaError(f"state {x}: letter {format_letter(letter)} mentions unknown state {bad[0]!r}")
            c[x] = tuple(sorted(tuple(a) for a in letters))
        unknown = [x for x in self.c if x not in known]
        if unknown:
            raise SchemaError(f"transitions given for unknown state {unknown[0]!r}")
        object.__setattr__(self, "c", c)


def generate_trees(C: GenerativeTA, max_height: int, cap: int = DEFAULT_CAP,
                   start: str | None = None) -> list[Term]:
    """Every tree of height at most ``max_height`` that ``C`` generates from
    ``start`` (default: the initial state), ordered by height."""
    if max_height < 1:
        raise ValueError("max_height must be positive")
    langs: dict[str, list[Term]] = {x: [] for x in C.states}
    for _ in range(max_height):
        nxt = {}
        for x in C.states:
            budget = sum(_product_size([langs[y] for y in letter[1:]]) for letter in C.c[x])
            if budget > cap:
                raise EnumerationCapError(f"state {x}: {budget} candidate trees exceeds cap {cap}")
            found: dict[Term, None] = {}
            for letter in C.c[x]:
                ctor, *args = letter
                for kids in itertools.product(*(langs[y] for y in args)):
                    found.setdefault(Term(ctor, kids))
            nxt[x] = sorted(found, key=_height_key)
        langs = nxt
    return langs[start if start is not None else C.init]


def _product_size(lists) -> int:
    n = 1
    for l in lists:
        n *= len(l)
    return n


def _height_key(t: Term) -> int:
    return 1 + max((_height_key(c) for c in t.children), default=0)


def delta_f(A: BottomUpTA, f: PredicateMap | Mapping[str, frozenset], letter: Letter) -> frozenset:
    """States ``A`` can reach on ``letter`` when each successor state ``x``
    stands for the set ``f(x)``."""
    ctor, *xs = letter
    return A.step_sets(ctor, [f[x] for x in xs])


def check_model_invariant(A: BottomUpTA, C: GenerativeTA,
                          f: PredicateMap | Mapping[str, frozenset]) -> Verdict:
    f = _as_mapping(f)
    _check_domain(f, C.states, "state")
    carrier = frozenset(A.states)
    for x in C.states:
        if not isinstance(f[x], frozenset) or not f[x] <= carrier:
            return Verdict.failed(x, "range", f"{f[x]!r} is not a set of states of the automaton")
    for x in C.states:
        for letter in C.c[x]:
            allowed = delta_f(A, f, letter)
            if not f[x] <= allowed:
                return Verdict.failed(x, "closure",
                                      f"{_fmt_set(f[x])} is not inside delta_f({format_letter(letter)}) "
                                      f"= {_fmt_set(allowed)}")
    if A.accept not in f[C.init]:
        return Verdict.failed(C.init, "initial", f"accepting state {A.accept} not in {_fmt_set(f[C.init])}")
    return Verdict.passed("every finite tree the system generates is accepted")


def closure_algebra(A: BottomUpTA, C: GenerativeTA) -> tuple[MonotoneAlgebra, dict]:
    """The map ``f |-> (x |-> intersection of delta_f(a) over a in c(x))`` as a
    monotone algebra with one constructor per system state.

    Returns the algebra and, per state, the ordered successor list used as
    that constructor's children.
    """
    succs: dict[str, list[str]] = {}
    plans: dict[str, list[tuple[str, tuple[int, ...]]]] = {}
    for x in C.states:
        ys = sorted({y for letter in C.c[x] for y in letter[1:]}, key=C.states.index)
        pos = {y: i for i, y in enumerate(ys)}
        succs[x] = ys
        plans[x] = [(letter[0], tuple(pos[y] for y in letter[1:])) for letter in C.c[x]]
    top = A.lattice.top

    def evaluate(x, attrs, vals):
        out = top
        for ctor, idx in plans[x]:
            out = out & A.step_sets(ctor, [vals[i] for i in idx])
        return out

    sig = Signature(tuple(Constructor(x, len(succs[x])) for x in C.states))
    return MonotoneAlgebra(A.lattice, sig, evaluate, "builtin:closure"), succs


def greatest_model_map(A: BottomUpTA, C: GenerativeTA) -> PredicateMap:
    """Greatest ``f`` satisfying the closure condition, by Kleene iteration from top."""
    sigma, succs = closure_algebra(A, C)
    T = make_transformer(sigma, C.states, lambda x: (x, None, succs[x]))
    T.monotone_checked = True  # intersections of unions of monotone lookups
    result = gfp(T, max_iter=len(C.states) * len(A.states) + 2)
    assert result.converged
    return result.value


def synth_model_invariant(A: BottomUpTA, C: GenerativeTA) -> PredicateMap | None:
    f = greatest_model_map(A, C)
    return f if A.accept in f[C.init] else None


def model_check_bounded(A: BottomUpTA, C: GenerativeTA, max_height: int,
                        cap: int = DEFAULT_CAP) -> tuple[bool, Term | None]:
    """Check acceptance of every generated tree of height at most ``max_height``.

    Returns ``(True, None)`` or ``(False, first rejected tree)``.
    """
    for t in generate_trees(C, max_height, cap):
        if not accepts(A, t):
            return False, t
    return True, None


def bounded_verdict(A: BottomUpTA, C: GenerativeTA, max_height: int,
                    cap: int = DEFAULT_CAP) -> tuple[Verdict, Term | None]:
    ok, cex = model_check_bounded(A, C, max_height, cap)
    if ok:
        return Verdict.passed(f"all generated trees of height <= {max_height} accepted",
                              confidence=bounded(max_height)), None
    return Verdict.failed(str(cex), "rejected", "generated tree not accepted",
                          confidence=bounded(max_height)), cex


# -- random instances -------------------------------------------------------

def random_bottom_up(rng: random.Random, sig: Signature, n_states: int,
                     density: float = 0.35) -> BottomUpTA:
    states = tuple(f"q{i}" for i in range(n_states))
    delta = {}
    for c in sig.constructors:
        for args in itertools.product(states, repeat=c.arity):
            targets = frozenset(q for q in states if rng.random() < density)
            if targets:
                delta[(c.name, *args)] = targets
    return BottomUpTA(sig, states, delta, rng.choice(states))


def random_generative(rng: random.Random, sig: Signature, n_states: int,
                      max_letters: int = 3) -> GenerativeTA:
    states = tuple(f"x{i}" for i in range(n_states))
    c = {}
    for x in states:
        letters = set()
        for _ in range(rng.randint(0, max_letters)):
            ctor = rng.choice(sig.constructors)
            letters.add((ctor.name, *(rng.choice(states) for _ in range(ctor.arity))))
        c[x] = frozenset(letters)
    return GenerativeTA(sig, states, c, states[0])


def random_tree(rng: random.Random, sig: Signature, max_height: int, stop: float = 0.3) -> Term:
    leaves = sig.nullary
    inner = [c for c in sig.constructors if c.arity > 0]

    def go(depth: int) -> Term:
        if depth >= max_height or not inner or rng.random() < stop:
            return Term(rng.choice(leaves).name)
        c = rng.choice(inner)
        return Term(c.name, [go(depth + 1) for _ in range(c.arity)])

    return number_nodes(go(1))
