"""Predicate transformers induced by a monotone algebra, Kleene iteration from
either end of the lattice, and the executable least/greatest fixed-point
coincidence over a finite, decompose-closed set of trees.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Mapping, NamedTuple, Sequence

from cofix.lattice import Lattice, LatticeTypeError, PowersetLattice, UnitInterval, Value
from cofix.terms import (
    DEFAULT_CAP,
    MonotoneAlgebra,
    Signature,
    decompose,
    enumerate_layers,
    fold_all,
    sample_attrs,
)
from cofix.verdict import Verdict

log = logging.getLogger(__name__)


class DomainError(ValueError):
    """A predicate or transformer refers to a point outside its domain."""


class PredicateMap:
    """A total assignment of lattice values to a finite, ordered domain."""

    __slots__ = ("lattice", "domain", "values", "_index")

    def __init__(self, lattice: Lattice, domain: Sequence[Hashable], values: Sequence[Value],
                 _index: dict | None = None):
        self.lattice = lattice
        self.domain = tuple(domain)
        self.values = tuple(values)
        if len(self.domain) != len(self.values):
            raise DomainError("domain and values differ in length")
        self._index = _index

    @classmethod
    def from_mapping(cls, lattice: Lattice, mapping: Mapping[Hashable, Value],
                     domain: Sequence[Hashable] | None = None) -> "PredicateMap":
        """Build from a mapping, checking totality over ``domain`` and that every
        value lies in ``lattice``."""
        if domain is None:
            domain = list(mapping)
        missing = [x for x in domain if x not in mapping]
        if missing:
            raise DomainError(f"no value for {missing[0]!r}")
        extra = set(mapping) - set(domain)
        if extra:
            raise DomainError(f"value given for {sorted(map(str, extra))[0]!r}, which is outside the domain")
        return cls(lattice, domain, [lattice.check(mapping[x]) for x in domain])

    @classmethod
    def constant(cls, lattice: Lattice, domain: Sequence[Hashable], value: Value) -> "PredicateMap":
        domain = tuple(domain)
        return cls(lattice, domain, (value,) * len(domain))

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {x: i for i, x in enumerate(self.domain)}
        return self._index

    def __getitem__(self, x):
        try:
            return self.values[self.index[x]]
        except KeyError:
            raise DomainError(f"{x!r} is outside the domain") from None

    def __contains__(self, x) -> bool:
        return x in self.index

    def __len__(self) -> int:
        return len(self.domain)

    def items(self):
        return zip(self.domain, self.values)

    def as_dict(self) -> dict:
        return dict(self.items())

    def __eq__(self, other):
        if not isinstance(other, PredicateMap):
            return NotImplemented
        return (self.lattice == other.lattice and self.domain == other.domain
                and self.values == other.values)

    def __repr__(self):
        body = ", ".join(f"{x}: {v}" for x, v in itertools.islice(self.items(), 6))
        more = ", ..." if len(self) > 6 else ""
        return f"PredicateMap({{{body}{more}}})"

    def leq(self, other: "PredicateMap") -> bool:
        """Pointwise order; both maps must share a domain."""
        if self.domain != other.domain:
            raise DomainError("pointwise comparison of maps over different domains")
        le = self.lattice.leq
        return all(le(a, b) for a, b in zip(self.values, other.values))

    def restrict(self, keys: Iterable[Hashable]) -> "PredicateMap":
        keys = tuple(keys)
        return PredicateMap(self.lattice, keys, [self[x] for x in keys])


class Transformer:
    """``step(g)(x) = sigma(c, attrs, [g(s) for s in successors])`` where
    ``unfold(x) = (c, attrs, successors)``.

    Built by :func:`make_transformer`.  Points are addressed by their position
    in ``domain``; iteration reads only the previous iterate.
    """

    def __init__(self, sigma: MonotoneAlgebra, domain: tuple, shapes: list, plan: list,
                 index: dict):
        self.sigma = sigma
        self.domain = domain
        self.monotone_checked = False
        self._shapes = shapes
        self._plan = plan
        self._index = index

    @property
    def lattice(self) -> Lattice:
        return self.sigma.lattice

    def step(self, g: PredicateMap) -> PredicateMap:
        if g.domain != self.domain:
            raise DomainError("iterate is not over the transformer's domain")
        ev = self.sigma.evaluate
        vals = g.values
        out = []
        for sid, succ in self._plan:
            ctor, attrs = self._shapes[sid]
            out.append(ev(ctor, attrs, tuple(vals[j] for j in succ)))
        return PredicateMap(self.lattice, self.domain, out, self._index)

    def verify_monotone(self, sample_count: int = 200, seed: int = 0) -> Verdict:
        verdict = check_monotone(self.sigma, sample_count, seed)
        self.monotone_checked = verdict.ok
        return verdict


def make_transformer(sigma: MonotoneAlgebra, domain: Iterable[Hashable],
                     unfold: Callable[[Hashable], tuple[str, Any, Sequence[Hashable]]]) -> Transformer:
    domain = tuple(domain)
    index = {x: i for i, x in enumerate(domain)}
    if len(index) != len(domain):
        raise DomainError("domain has repeated points")
    shape_ids: dict = {}
    shapes: list = []
    plan = []
    for x in domain:
        ctor, attrs, succ = unfold(x)
        sigma.signature.get(ctor)
        key = (ctor, attrs)
        sid = shape_ids.get(key)
        if sid is None:
            sid = shape_ids[key] = len(shapes)
            shapes.append(key)
        try:
            plan.append((sid, tuple(index[s] for s in succ)))
        except KeyError as exc:
            raise DomainError(f"successor {exc.args[0]!s} of {x!s} escapes the domain") from None
    return Transformer(sigma, domain, shapes, plan, index)


class _Run:
    """Kleene iterates kept as lists of value ids into a shared intern table.

    Distinct values are few compared to domain points, and ``sigma`` is pure,
    so each (shape, child value ids) combination is evaluated once.
    """

    def __init__(self, T: Transformer):
        self.T = T
        self.table: list[Value] = []
        self._ids: dict = {}
        self._memo: dict = {}

    def intern(self, v: Value) -> int:
        i = self._ids.get(v)
        if i is None:
            i = self._ids[v] = len(self.table)
            self.table.append(v)
        return i

    def step(self, cur: list[int]) -> list[int]:
        memo = self._memo
        out = []
        append = out.append
        for sid, succ in self.T._plan:
            if len(succ) == 2:
                key = (sid, cur[succ[0]], cur[succ[1]])
            else:
                key = (sid, *[cur[j] for j in succ])
            r = memo.get(key)
            if r is None:
                r = memo[key] = self._evaluate(key)
            append(r)
        return out

    def _evaluate(self, key: tuple) -> int:
        ctor, attrs = self.T._shapes[key[0]]
        table = self.table
        return self.intern(self.T.sigma.evaluate(ctor, attrs, tuple([table[i] for i in key[1:]])))

    def chain(self, start: Value, max_iter: int, keep: bool,
              same: Callable[[list[int], list[int]], bool] | None = None):
        cur = [self.intern(start)] * len(self.T.domain)
        chain = [cur] if keep else None
        for k in range(max_iter):
            nxt = self.step(cur)
            if (same(cur, nxt) if same else nxt == cur):
                return cur, k, True, chain
            cur = nxt
            if keep:
                chain.append(cur)
        return cur, max_iter, False, chain

    def materialize(self, ids: list[int]) -> PredicateMap:
        table = self.table
        return PredicateMap(self.T.lattice, self.T.domain, [table[i] for i in ids], self.T._index)


class FixpointResult(NamedTuple):
    value: PredicateMap
    iterations: int
    converged: bool


def _iterate(T: Transformer, start: Value, max_iter: int,
             tolerance: Fraction | float | None) -> FixpointResult:
    if not T.monotone_checked:
        log.warning("iterating a transformer whose algebra has not been checked for monotonicity")
    run = _Run(T)
    same = None
    if tolerance is not None:
        table = run.table

        def same(a, b):
            return all(abs(table[i] - table[j]) <= tolerance for i, j in zip(a, b))

    ids, k, converged, _ = run.chain(start, max_iter, False, same)
    return FixpointResult(run.materialize(ids), k, converged)


def lfp(T: Transformer, max_iter: int = 1000,
        tolerance: Fraction | float | None = None) -> FixpointResult:
    """Iterate from bottom until two consecutive iterates are equal.

    ``iterations`` counts productive steps: the returned map is the
    ``iterations``-th iterate.  Exact equality unless ``tolerance`` is given,
    which is meant only for float-valued user algebras.
    """
    return _iterate(T, T.lattice.bot, max_iter, tolerance)


def gfp(T: Transformer, max_iter: int = 1000,
        tolerance: Fraction | float | None = None) -> FixpointResult:
    """Dual of :func:`lfp`, iterating from top."""
    return _iterate(T, T.lattice.top, max_iter, tolerance)


def kleene_chain(T: Transformer, start: Value, max_iter: int) -> list[PredicateMap]:
    """``[g_0, g_1, ...]`` up to the first repeat (inclusive of the fixed point)."""
    run = _Run(T)
    _, _, _, chain = run.chain(start, max_iter, True)
    return [run.materialize(ids) for ids in chain]


# -- monotonicity -----------------------------------------------------------

_EXHAUSTIVE_LIMIT = 20_000


def _random_value(l: Lattice, rng: random.Random) -> Value:
    if isinstance(l, PowersetLattice):
        return frozenset(q for q in l.states if rng.random() < 0.5)
    if isinstance(l, UnitInterval):
        den = rng.randint(1, 12)
        return Fraction(rng.randint(0, den), den)
    raise TypeError(f"no sampler for lattice {l!r}")


def _random_above(l: Lattice, v: Value, rng: random.Random) -> Value:
    if isinstance(l, PowersetLattice):
        return v | _random_value(l, rng)
    den = rng.randint(1, 12)
    return v + (1 - v) * Fraction(rng.randint(0, den), den)


def _ordered_pairs(l: PowersetLattice) -> list[tuple[frozenset, frozenset]]:
    elems = l.elements()
    return [(a, b) for a in elems for b in elems if a <= b]


def _fmt(v: Value) -> str:
    if isinstance(v, frozenset):
        return "{" + ",".join(sorted(v)) + "}"
    return str(v)


def check_monotone(sigma: MonotoneAlgebra, sample_count: int = 200, seed: int = 0) -> Verdict:
    """Look for ``v <= v'`` pointwise with ``sigma(c, a, v) > sigma(c, a, v')``.

    Exhaustive for small powerset lattices and attribute-free or labelled
    constructors; otherwise ``sample_count`` random cases per constructor,
    reproducible from ``seed``.  A verification aid, not a proof.
    """
    rng = random.Random(seed)
    l = sigma.lattice
    sampled_any = False
    total = 0
    pairs = _ordered_pairs(l) if isinstance(l, PowersetLattice) and len(l.states) <= 4 else None
    for c in sigma.signature.constructors:
        exhaustive = (pairs is not None and c.schema.kind != "prob"
                      and len(pairs) ** c.arity <= _EXHAUSTIVE_LIMIT)
        if exhaustive:
            attrs_choices = [None] if c.schema.kind == "none" else list(c.schema.labels)
            cases = ((a, tuple(p[0] for p in combo), tuple(p[1] for p in combo))
                     for a in attrs_choices
                     for combo in itertools.product(pairs, repeat=c.arity))
        else:
            sampled_any = True
            cases = []
            for _ in range(sample_count):
                lo = tuple(_random_value(l, rng) for _ in range(c.arity))
                hi = tuple(_random_above(l, v, rng) for v in lo)
                cases.append((sample_attrs(c, rng), lo, hi))
        for attrs, lo, hi in cases:
            total += 1
            try:
                a, b = l.check(sigma(c.name, attrs, lo)), l.check(sigma(c.name, attrs, hi))
            except LatticeTypeError as exc:
                return Verdict.failed(c.name, "in-lattice", f"attrs={attrs!r}: {exc}")
            if not l.leq(a, b):
                return Verdict.failed(
                    c.name, "monotone",
                    f"attrs={attrs!r}: children {[_fmt(v) for v in lo]} <= {[_fmt(v) for v in hi]} "
                    f"but values {_fmt(a)} > {_fmt(b)}")
    how = f"sampled, seed {seed}" if sampled_any else "exhaustive"
    return Verdict.passed(f"{total} ordered cases ({how})",
                          confidence=f"sampled({total})" if sampled_any else "theorem-backed")


# -- coincidence ------------------------------------------------------------

@dataclass
class StageResult:
    stage: int
    terms: int
    lfp_matches_fold: bool
    gfp_matches_fold: bool

    @property
    def passed(self) -> bool:
        return self.lfp_matches_fold and self.gfp_matches_fold


@dataclass
class CoincidenceReport:
    height_bound: int
    term_count: int
    monotone: Verdict
    lfp_iterations: int
    gfp_iterations: int
    lfp_converged: bool
    gfp_converged: bool
    stages: list[StageResult]
    lfp_increasing: bool
    gfp_decreasing: bool
    lfp_below_gfp: bool
    unique: bool
    matches_fold: bool
    fixed_point: PredicateMap = field(repr=False)

    @property
    def passed(self) -> bool:
        return (self.monotone.ok and self.lfp_converged and self.gfp_converged
                and all(s.passed for s in self.stages) and self.lfp_increasing
                and self.gfp_decreasing and self.lfp_below_gfp and self.unique and self.matches_fold)

    def to_json(self) -> dict:
        enc = self.fixed_point.lattice.encode
        return {
            "format": "cofix/1",
            "passed": self.passed,
            "height_bound": self.height_bound,
            "term_count": self.term_count,
            "monotone": self.monotone.to_json(),
            "lfp": {"iterations": self.lfp_iterations, "converged": self.lfp_converged,
                    "increasing": self.lfp_increasing},
            "gfp": {"iterations": self.gfp_iterations, "converged": self.gfp_converged,
                    "decreasing": self.gfp_decreasing},
            "lfp_below_gfp": self.lfp_below_gfp,
            "unique": self.unique,
            "matches_fold": self.matches_fold,
            "stages": [{"stage": s.stage, "terms": s.terms, "lfp": s.lfp_matches_fold,
                        "gfp": s.gfp_matches_fold} for s in self.stages],
            "fixed_point": {str(t): enc(v) for t, v in self.fixed_point.items()},
        }


def _pointwise(run: _Run, a: list[int], b: list[int]) -> bool:
    table, le = run.table, run.T.lattice.leq
    seen: set = set()
    for i, j in zip(a, b):
        if i != j and (i, j) not in seen:
            if not le(table[i], table[j]):
                return False
            seen.add((i, j))
    return True


def coincidence_check(sigma: MonotoneAlgebra, sig: Signature, height_bound: int,
                      attr_samples: Mapping[str, Sequence] | None = None,
                      cap: int = DEFAULT_CAP, monotone_samples: int = 200,
                      seed: int = 0) -> CoincidenceReport:
    """Run both Kleene chains of the decompose transformer over all trees of
    height at most ``height_bound`` and compare them with ``fold``.

    Stage ``i`` of each chain must agree with ``fold`` on the trees of height
    at most ``i``; both chains must reach the same fixed point.
    """
    layers = enumerate_layers(sig, height_bound, attr_samples, cap)
    terms = [t for layer in layers for t in layer]
    monotone = check_monotone(sigma, monotone_samples, seed)
    T = make_transformer(sigma, terms, decompose)
    T.monotone_checked = monotone.ok
    run = _Run(T)
    budget = height_bound + 2
    lo_ids, lo_k, lo_conv, lo_chain = run.chain(sigma.lattice.bot, budget, True)
    hi_ids, hi_k, hi_conv, hi_chain = run.chain(sigma.lattice.top, budget, True)
    folded = [run.intern(v) for v in fold_all(sigma, terms)]

    stages = []
    upto = 0
    for i, layer in enumerate(layers, start=1):
        upto += len(layer)
        lo_i = lo_chain[min(i, len(lo_chain) - 1)]
        hi_i = hi_chain[min(i, len(hi_chain) - 1)]
        stages.append(StageResult(i, upto, lo_i[:upto] == folded[:upto], hi_i[:upto] == folded[:upto]))

    return CoincidenceReport(
        height_bound=height_bound,
        term_count=len(terms),
        monotone=monotone,
        lfp_iterations=lo_k,
        gfp_iterations=hi_k,
        lfp_converged=lo_conv,
        gfp_converged=hi_conv,
        stages=stages,
        lfp_increasing=all(_pointwise(run, a, b) for a, b in zip(lo_chain, lo_chain[1:])),
        gfp_decreasing=all(_pointwise(run, b, a) for a, b in zip(hi_chain, hi_chain[1:])),
        lfp_below_gfp=_pointwise(run, lo_ids, hi_ids),
        unique=lo_ids == hi_ids,
        matches_fold=lo_ids == folded,
        fixed_point=run.materialize(lo_ids),
    )
