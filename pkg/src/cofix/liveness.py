"""Probabilistic liveness on finite probabilistic binary trees.

A tree is built from ``leaf`` and the binary constructors ``check`` (a goal
node) and ``query`` (an ordinary coin toss), each internal node carrying
its edge pair ``(p, 1 - p)``.  A submartingale is a node valuation that is
0 on leaves and at a ``query`` node at most the expected value of its
children; its root value lower-bounds the probability of reaching a
``check`` node.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Mapping, Sequence

from cofix.fixpoint import DomainError, PredicateMap, gfp, make_transformer
from cofix.lattice import UnitInterval, format_rational
from cofix.terms import (
    PROB,
    Constructor,
    EdgePair,
    MonotoneAlgebra,
    Signature,
    Term,
    check_term,
    fold,
    node_index,
    number_nodes,
    preorder,
)
from cofix.verdict import Verdict

LEAF, CHECK, QUERY = "leaf", "check", "query"

PROB_SIGNATURE = Signature((
    Constructor(LEAF, 0),
    Constructor(CHECK, 2, PROB),
    Constructor(QUERY, 2, PROB),
))

UNIT = UnitInterval()


ZERO, ONE = Fraction(0), Fraction(1)


def _evaluate_ptr(ctor, attrs, kids):
    if ctor == LEAF:
        return ZERO
    if ctor == CHECK:
        return ONE
    a, b = kids
    if a == b:
        return a
    p, q = attrs
    return p * a + q * b


sigma_ptr = MonotoneAlgebra(UNIT, PROB_SIGNATURE, _evaluate_ptr, "builtin:sigma_ptr")


def leaf(node: str | None = None) -> Term:
    return Term(LEAF, (), None, node)


def check(p, left: Term, right: Term, node: str | None = None) -> Term:
    return Term(CHECK, (left, right), EdgePair(Fraction(p)), node)


def query(p, left: Term, right: Term, node: str | None = None) -> Term:
    return Term(QUERY, (left, right), EdgePair(Fraction(p)), node)


def validate(t: Term) -> Term:
    return check_term(PROB_SIGNATURE, t)


def reach_probability(t: Term) -> Fraction:
    """Probability of eventually reaching a ``check`` node from the root."""
    return fold(sigma_ptr, t)


def oracle_reach_probability(t: Term) -> Fraction:
    """Sum of path weights to every ``check`` node with no ``check`` ancestor."""
    total = Fraction(0)
    stack = [(t, Fraction(1))]
    while stack:
        n, weight = stack.pop()
        if n.ctor == CHECK:
            total += weight
        elif n.ctor == QUERY:
            p, q = n.attrs
            stack.append((n.children[0], weight * p))
            stack.append((n.children[1], weight * q))
    return total


def _as_mapping(f) -> Mapping:
    return f.as_dict() if isinstance(f, PredicateMap) else f


def check_submartingale(t: Term, f: PredicateMap | Mapping[str, Fraction]) -> Verdict:
    """Check that every value is a rational in [0, 1], then the two
    submartingale conditions at every node, in preorder.

    ``check`` nodes are unconstrained.  Raises :class:`DomainError` when ``f``
    does not cover exactly the nodes of ``t``.
    """
    nodes = node_index(t)
    f = _as_mapping(f)
    missing = [n for n in nodes if n not in f]
    if missing:
        raise DomainError(f"witness has no value for node {missing[0]!r}")
    extra = [n for n in f if n not in nodes]
    if extra:
        raise DomainError(f"witness names node {extra[0]!r}, which is not in the tree")
    for n in preorder(t):
        v = f[n.node]
        if not isinstance(v, (Fraction, int)) or isinstance(v, bool) or not 0 <= v <= 1:
            return Verdict.failed(n.node, "range", f"value {v!r} is not a rational in [0, 1]")
    for n in preorder(t):
        v = f[n.node]
        if n.ctor == LEAF and v != 0:
            return Verdict.failed(n.node, "leaf-zero", f"leaf has value {format_rational(Fraction(v))}, must be 0")
        if n.ctor == QUERY:
            (p, q), (l, r) = n.attrs, n.children
            expected = p * f[l.node] + q * f[r.node]
            if v > expected:
                return Verdict.failed(
                    n.node, "submartingale",
                    f"{format_rational(Fraction(v))} > {format_rational(p)}*{format_rational(Fraction(f[l.node]))}"
                    f" + {format_rational(q)}*{format_rational(Fraction(f[r.node]))}"
                    f" = {format_rational(expected)}")
    return Verdict.passed(f"root value {format_rational(Fraction(f[t.node]))} lower-bounds the reach probability")


def _unfold_nodes(nodes: Mapping[str, Term]):
    def unfold(n):
        sub = nodes[n]
        return sub.ctor, sub.attrs, [c.node for c in sub.children]
    return unfold


def greatest_submartingale(t: Term) -> PredicateMap:
    """The greatest submartingale, with ``check`` nodes set to 1.

    Computed as the greatest fixed point of the transformer over the tree's
    own nodes; it equals the reach probability of each subtree.
    """
    nodes = node_index(t)
    T = make_transformer(sigma_ptr, list(nodes), _unfold_nodes(nodes))
    T.monotone_checked = True  # sigma_ptr is a convex combination
    result = gfp(T, max_iter=len(nodes) + 2)
    assert result.converged
    return result.value


# -- random corpus ----------------------------------------------------------

DEFAULT_GRID = tuple(Fraction(i, 6) for i in range(7))


def random_prob_tree(rng: random.Random, max_height: int = 8, stop: float = 0.35,
                     check_rate: float = 0.2, grid: Sequence[Fraction] = DEFAULT_GRID) -> Term:
    """A random tree of height at most ``max_height`` with node ids ``n0, n1, ...``.

    Each position becomes a leaf with probability ``stop`` (always at the
    height limit); internal nodes are ``check`` with probability
    ``check_rate``.  Edge weights come from ``grid``.
    """
    def go(depth: int) -> Term:
        if depth >= max_height or rng.random() < stop:
            return leaf()
        p = rng.choice(grid)
        kids = (go(depth + 1), go(depth + 1))
        return (check if rng.random() < check_rate else query)(p, *kids)

    return number_nodes(go(1))


def perturb(t: Term, f: PredicateMap, rng: random.Random, repair: bool = False) -> dict[str, Fraction]:
    """Scale every node value by an independent random factor in [0, 1].

    With ``repair`` the factor at a ``query`` node is lowered to the smallest
    factor of its children, which keeps the submartingale inequality intact.
    The result is a candidate only; callers re-check it.
    """
    factors: dict[str, Fraction] = {}
    for n in reversed(list(preorder(t))):
        den = rng.randint(1, 10)
        r = Fraction(rng.randint(0, den), den)
        if repair and n.ctor == QUERY:
            r = min([r] + [factors[c.node] for c in n.children])
        factors[n.node] = r
    return {n: f[n] * factors[n] for n in f.domain}


def passing_perturbations(t: Term, rng: random.Random, count: int,
                          max_attempts: int = 1000) -> list[dict[str, Fraction]]:
    """Up to ``count`` perturbed witnesses that pass :func:`check_submartingale`.

    Alternates plain and repaired perturbations; every candidate is re-checked
    and failures are discarded.
    """
    best = greatest_submartingale(t)
    out = []
    for attempt in range(max_attempts):
        if len(out) == count:
            break
        cand = perturb(t, best, rng, repair=attempt % 2 == 1)
        if check_submartingale(t, cand).ok:
            out.append(cand)
    return out
