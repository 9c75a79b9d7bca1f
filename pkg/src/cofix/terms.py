"""Ranked signatures, finite trees over them, folds and bounded enumeration."""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

from cofix.lattice import Lattice, Value, format_rational, parse_rational

DEFAULT_CAP = 10**6


class SchemaError(ValueError):
    """A term, attribute payload or signature is malformed."""


class EnumerationCapError(RuntimeError):
    """Bounded enumeration would produce more objects than allowed."""


@dataclass(frozen=True)
class AttrSchema:
    kind: str = "none"  # "none" | "prob" | "labels"
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("none", "prob", "labels"):
            raise SchemaError(f"unknown attribute schema {self.kind!r}")
        if self.kind == "labels" and not self.labels:
            raise SchemaError("a label schema needs at least one label")


NO_ATTRS = AttrSchema()
PROB = AttrSchema("prob")


class EdgePair:
    """Edge weights ``(p, 1 - p)`` of a probabilistic node; unpacks like a pair."""

    __slots__ = ("p", "q", "_hash")

    def __init__(self, p: Fraction | int):
        self.p = p = Fraction(p)
        self.q = 1 - p
        self._hash = hash(("edge", p))

    def __iter__(self):
        yield self.p
        yield self.q

    def __eq__(self, other):
        if isinstance(other, EdgePair):
            return self.p == other.p
        return NotImplemented

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"EdgePair({format_rational(self.p)}, {format_rational(self.q)})"


@dataclass(frozen=True)
class Constructor:
    name: str
    arity: int
    schema: AttrSchema = NO_ATTRS

    def __post_init__(self):
        if not isinstance(self.arity, int) or self.arity < 0:
            raise SchemaError(f"constructor {self.name!r} has bad arity {self.arity!r}")


@dataclass(frozen=True)
class Signature:
    """A ranked alphabet; each constructor may carry an attribute payload."""

    constructors: tuple[Constructor, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        ctors = tuple(self.constructors)
        object.__setattr__(self, "constructors", ctors)
        by_name = {}
        for c in ctors:
            if c.name in by_name:
                raise SchemaError(f"duplicate constructor {c.name!r}")
            by_name[c.name] = c
        object.__setattr__(self, "_by_name", by_name)
        if not any(c.arity == 0 for c in ctors):
            object.__setattr__(
                self, "warnings",
                self.warnings + ("signature has no nullary constructor: there are no finite trees",),
            )

    @classmethod
    def of(cls, **arities: int) -> "Signature":
        """Attribute-free signature, e.g. ``Signature.of(a=0, g=2)``."""
        return cls(tuple(Constructor(n, k) for n, k in arities.items()))

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> Constructor:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown constructor {name!r}") from None

    @property
    def nullary(self) -> tuple[Constructor, ...]:
        return tuple(c for c in self.constructors if c.arity == 0)

    def union(self, other: "Signature") -> "Signature":
        ctors = list(self.constructors)
        for c in other.constructors:
            if c.name in self:
                if self.get(c.name) != c:
                    raise SchemaError(f"constructor {c.name!r} declared twice with different arity/schema")
            else:
                ctors.append(c)
        return Signature(tuple(ctors))

    def validate_attrs(self, name: str, attrs: Any) -> Any:
        """Check an attribute payload and return its canonical form.

        Probabilistic payloads may be given as ``p`` alone, as ``(p, q)`` or as
        an :class:`EdgePair`, which is the canonical form.
        """
        schema = self.get(name).schema
        if schema.kind == "none":
            if attrs is not None:
                raise SchemaError(f"constructor {name!r} takes no attributes, got {attrs!r}")
            return None
        if schema.kind == "labels":
            if attrs not in schema.labels:
                raise SchemaError(f"constructor {name!r}: label {attrs!r} not in {list(schema.labels)}")
            return attrs
        if isinstance(attrs, EdgePair):
            p, q = attrs.p, None
        elif isinstance(attrs, tuple):
            if len(attrs) != 2:
                raise SchemaError(f"constructor {name!r}: edge pair must have two weights")
            p, q = attrs
        else:
            p, q = attrs, None
        if isinstance(p, bool) or not isinstance(p, (Fraction, int)):
            raise SchemaError(f"constructor {name!r}: edge weight {p!r} is not an exact rational")
        p = Fraction(p)
        if not 0 <= p <= 1:
            raise SchemaError(f"constructor {name!r}: edge weight {p} outside [0, 1]")
        if q is not None and Fraction(q) + p != 1:
            raise SchemaError(f"constructor {name!r}: edge weights {p} and {q} do not sum to 1")
        return attrs if isinstance(attrs, EdgePair) else EdgePair(p)


class Term:
    """A finite tree.  Equality and hashing ignore node identifiers."""

    __slots__ = ("ctor", "attrs", "children", "node", "_hash")

    def __init__(self, ctor: str, children: Sequence["Term"] = (), attrs: Any = None,
                 node: str | None = None):
        self.ctor = ctor
        self.children = tuple(children)
        self.attrs = attrs
        self.node = node
        self._hash = None

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        return (hash(self) == hash(other) and self.ctor == other.ctor
                and self.attrs == other.attrs and self.children == other.children)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ctor, self.attrs, tuple(hash(c) for c in self.children)))
        return self._hash

    def __str__(self):
        head = self.ctor
        if self.attrs is not None:
            head += f"[{_format_attrs(self.attrs)}]"
        if self.children:
            head += "(" + ",".join(str(c) for c in self.children) + ")"
        return head

    def __repr__(self):
        return f"Term({str(self)!r})"


def _format_attrs(attrs) -> str:
    if isinstance(attrs, EdgePair):
        return format_rational(attrs.p)
    return str(attrs)


def check_term(sig: Signature, t: Term) -> Term:
    """Validate constructors, arities and attributes of every node of ``t``."""
    for n in preorder(t):
        c = sig.get(n.ctor)
        if len(n.children) != c.arity:
            raise SchemaError(f"node {n.node or n.ctor}: {n.ctor!r} expects {c.arity} children, "
                              f"got {len(n.children)}")
        if sig.validate_attrs(n.ctor, n.attrs) != n.attrs:
            raise SchemaError(f"node {n.node or n.ctor}: attributes {n.attrs!r} not in canonical form")
    return t


def preorder(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def height(t: Term) -> int:
    return 1 + max((height(c) for c in t.children), default=0)


def size(t: Term) -> int:
    return sum(1 for _ in preorder(t))


def number_nodes(t: Term, prefix: str = "n") -> Term:
    """Copy of ``t`` with fresh node ids ``n0, n1, ...`` in preorder."""
    counter = itertools.count()

    def go(n: Term) -> Term:
        node = f"{prefix}{next(counter)}"
        return Term(n.ctor, [go(c) for c in n.children], n.attrs, node)

    return go(t)


def node_index(t: Term) -> dict[str, Term]:
    """Map node id to the subtree rooted there; ids must be present and unique."""
    out: dict[str, Term] = {}
    for n in preorder(t):
        if n.node is None:
            raise SchemaError(f"node {n} has no id")
        if n.node in out:
            raise SchemaError(f"duplicate node id {n.node!r}")
        out[n.node] = n
    return out


def decompose(t: Term) -> tuple[str, Any, tuple[Term, ...]]:
    return t.ctor, t.attrs, t.children


def reassemble(ctor: str, attrs: Any, children: Sequence[Term]) -> Term:
    return Term(ctor, children, attrs)


@dataclass(frozen=True)
class MonotoneAlgebra:
    """An evaluation rule from a constructor, its attributes and the values of
    its children to a lattice value.  ``evaluate`` must be pure; monotonicity
    in the child values is checked by :func:`cofix.fixpoint.check_monotone`.
    """

    lattice: Lattice
    signature: Signature
    evaluate: Callable[[str, Any, tuple], Value]
    provenance: str = "user"

    def __call__(self, ctor: str, attrs: Any, child_values: tuple) -> Value:
        return self.evaluate(ctor, attrs, child_values)


def fold(sigma: MonotoneAlgebra, t: Term) -> Value:
    """The unique algebra map out of the trees: evaluate bottom-up."""
    sigma.signature.get(t.ctor)
    return sigma.evaluate(t.ctor, t.attrs, tuple(fold(sigma, c) for c in t.children))


def fold_all(sigma: MonotoneAlgebra, terms: Iterable[Term]) -> list[Value]:
    """``fold`` over many terms, evaluating each shared subterm object once."""
    memo: dict[int, Value] = {}
    keep: list[Term] = []
    ev = sigma.evaluate
    known = sigma.signature.get

    def go(t: Term) -> Value:
        v = memo.get(id(t))
        if v is None:
            known(t.ctor)
            v = memo[id(t)] = ev(t.ctor, t.attrs, tuple([go(c) for c in t.children]))
            keep.append(t)
        return v

    out = []
    for t in terms:
        v = memo.get(id(t))
        if v is None:
            try:
                kids = tuple([memo[id(c)] for c in t.children])
            except KeyError:
                v = go(t)
            else:
                known(t.ctor)
                v = memo[id(t)] = ev(t.ctor, t.attrs, kids)
                keep.append(t)
        out.append(v)
    return out


# -- enumeration ------------------------------------------------------------

def _attr_choices(sig: Signature, c: Constructor,
                  attr_samples: Mapping[str, Sequence] | None) -> list:
    if attr_samples and c.name in attr_samples:
        return [sig.validate_attrs(c.name, a) for a in attr_samples[c.name]]
    if c.schema.kind == "none":
        return [None]
    if c.schema.kind == "labels":
        return list(c.schema.labels)
    raise SchemaError(f"constructor {c.name!r} has rational attributes: supply attr_samples for it")


def count_terms(sig: Signature, max_height: int,
                attr_samples: Mapping[str, Sequence] | None = None) -> list[int]:
    """Projected ``|trees of height <= i|`` for ``i = 1..max_height``."""
    choices = {c.name: len(_attr_choices(sig, c, attr_samples)) for c in sig.constructors}
    leaves = sum(choices[c.name] for c in sig.nullary)
    counts = [leaves]
    for _ in range(max_height - 1):
        prev = counts[-1]
        counts.append(leaves + sum(choices[c.name] * prev**c.arity
                                   for c in sig.constructors if c.arity > 0))
    return counts


def enumerate_layers(sig: Signature, max_height: int,
                     attr_samples: Mapping[str, Sequence] | None = None,
                     cap: int = DEFAULT_CAP) -> list[list[Term]]:
    """Trees grouped by exact height: ``layers[i]`` holds those of height ``i + 1``.

    Subterm objects are shared between layers, so the result is a DAG.
    """
    if max_height < 1:
        raise ValueError("max_height must be positive")
    if not sig.nullary:
        return [[] for _ in range(max_height)]
    projected = count_terms(sig, max_height, attr_samples)
    if projected[-1] > cap:
        raise EnumerationCapError(f"{projected[-1]} trees of height <= {max_height} exceeds cap {cap}")
    choices = {c.name: _attr_choices(sig, c, attr_samples) for c in sig.constructors}
    layers = [[Term(c.name, (), a) for c in sig.nullary for a in choices[c.name]]]
    everything = list(layers[0])
    for _ in range(max_height - 1):
        fresh_from = len(everything) - len(layers[-1])
        layer = []
        for c in sig.constructors:
            if c.arity == 0:
                continue
            for idx in itertools.product(range(len(everything)), repeat=c.arity):
                if max(idx) < fresh_from:
                    continue
                kids = tuple(everything[i] for i in idx)
                layer.extend(Term(c.name, kids, a) for a in choices[c.name])
        layers.append(layer)
        everything.extend(layer)
    return layers


def enumerate_terms(sig: Signature, max_height: int,
                    attr_samples: Mapping[str, Sequence] | None = None,
                    cap: int = DEFAULT_CAP) -> list[Term]:
    """All trees of height at most ``max_height``, ordered by height."""
    return [t for layer in enumerate_layers(sig, max_height, attr_samples, cap) for t in layer]


def sample_attrs(c: Constructor, rng: random.Random) -> Any:
    if c.schema.kind == "none":
        return None
    if c.schema.kind == "labels":
        return rng.choice(c.schema.labels)
    den = rng.randint(1, 12)
    return EdgePair(Fraction(rng.randint(0, den), den))


# -- textual notation -------------------------------------------------------

_TOKEN = re.compile(r"\s*([^\s()\[\],]+|[()\[\],])")


def parse_term(text: str, sig: Signature | None = None) -> Term:
    """Parse ``g(a,a)`` or ``query[1/3](check[1/2](leaf,leaf),leaf)``."""
    tokens = _TOKEN.findall(text)
    if "".join(tokens) != re.sub(r"\s+", "", text):
        raise SchemaError(f"cannot tokenize {text!r}")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise SchemaError(f"expected {expected or 'a token'} at position {pos} in {text!r}")
        pos += 1
        return tok

    def term() -> Term:
        name = take()
        if name in "()[],":
            raise SchemaError(f"expected a constructor name in {text!r}, got {name!r}")
        attrs = None
        if peek() == "[":
            take("[")
            raw = take()
            take("]")
            if sig is None:
                raise SchemaError("attributes need a signature to be interpreted")
            kind = sig.get(name).schema.kind
            attrs = parse_rational(raw) if kind == "prob" else raw
        kids = []
        if peek() == "(":
            take("(")
            kids.append(term())
            while peek() == ",":
                take(",")
                kids.append(term())
            take(")")
        if sig is not None:
            attrs = sig.validate_attrs(name, attrs)
        return Term(name, kids, attrs)

    t = term()
    if pos != len(tokens):
        raise SchemaError(f"trailing input in {text!r}")
    if sig is not None:
        check_term(sig, t)
    return t
