"""Complete lattices of truth values.

Two instances are built in: the powerset of a finite state set ordered by
inclusion, and the unit interval of exact rationals.  Values are plain
Python objects (``frozenset`` of state names, ``fractions.Fraction``) so they
compare, hash and serialize canonically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

Value = Union[frozenset, Fraction]


class LatticeTypeError(TypeError):
    """A value does not belong to the lattice it was used with."""


def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str | int) -> Fraction:
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise ValueError(f"expected a rational string like '1/2', got {text!r}")
    return Fraction(text)


class Lattice:
    """Base class; subclasses supply the order and the binary operations."""

    kind: str

    @property
    def bot(self) -> Value:
        raise NotImplementedError

    @property
    def top(self) -> Value:
        raise NotImplementedError

    def check(self, v: object) -> Value:
        """Return ``v`` if it is an element of this lattice, else raise."""
        raise NotImplementedError

    def leq(self, a: Value, b: Value) -> bool:
        raise NotImplementedError

    def join2(self, a: Value, b: Value) -> Value:
        raise NotImplementedError

    def meet2(self, a: Value, b: Value) -> Value:
        raise NotImplementedError

    def join(self, xs: Iterable[Value]) -> Value:
        out = self.bot
        for x in xs:
            out = self.join2(out, self.check(x))
        return out

    def meet(self, xs: Iterable[Value]) -> Value:
        out = self.top
        for x in xs:
            out = self.meet2(out, self.check(x))
        return out

    def to_json(self) -> dict:
        raise NotImplementedError

    def encode(self, v: Value):
        raise NotImplementedError

    def decode(self, raw) -> Value:
        raise NotImplementedError


@dataclass(frozen=True)
class PowersetLattice(Lattice):
    """Subsets of a finite carrier ordered by inclusion."""

    states: tuple[str, ...]
    kind: str = field(default="powerset", init=False)

    def __post_init__(self):
        states = tuple(self.states)
        if len(set(states)) != len(states):
            raise ValueError(f"duplicate states in powerset carrier: {states}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_carrier", frozenset(states))

    @property
    def bot(self) -> frozenset:
        return frozenset()

    @property
    def top(self) -> frozenset:
        return self._carrier

    def check(self, v):
        if not isinstance(v, frozenset):
            raise LatticeTypeError(f"powerset value must be a frozenset, got {type(v).__name__}")
        if not v <= self._carrier:
            raise LatticeTypeError(f"{sorted(v - self._carrier)} not in carrier {list(self.states)}")
        return v

    def leq(self, a, b):
        return self.check(a) <= self.check(b)

    def join2(self, a, b):
        return self.check(a) | self.check(b)

    def meet2(self, a, b):
        return self.check(a) & self.check(b)

    def elements(self) -> list[frozenset]:
        """Every subset of the carrier, smallest first."""
        out = []
        for r in range(len(self.states) + 1):
            out.extend(frozenset(c) for c in itertools.combinations(self.states, r))
        return out

    def sorted_list(self, v: frozenset) -> list[str]:
        order = {q: i for i, q in enumerate(self.states)}
        return sorted(v, key=order.__getitem__)

    def to_json(self):
        return {"kind": "powerset", "states": list(self.states)}

    def encode(self, v):
        return self.sorted_list(self.check(v))

    def decode(self, raw):
        if not isinstance(raw, list) or not all(isinstance(q, str) for q in raw):
            raise LatticeTypeError(f"expected a list of state names, got {raw!r}")
        return self.check(frozenset(raw))


@dataclass(frozen=True)
class UnitInterval(Lattice):
    """Exact rationals in [0, 1] under the numeric order."""

    kind: str = field(default="unit_interval", init=False)

    @property
    def bot(self) -> Fraction:
        return Fraction(0)

    @property
    def top(self) -> Fraction:
        return Fraction(1)

    def check(self, v):
        if isinstance(v, bool) or not isinstance(v, (Fraction, int)):
            raise LatticeTypeError(f"unit-interval value must be a Fraction, got {type(v).__name__}")
        if not 0 <= v <= 1:
            raise LatticeTypeError(f"{v} lies outside [0, 1]")
        return Fraction(v)

    def leq(self, a, b):
        return self.check(a) <= self.check(b)

    def join2(self, a, b):
        return max(self.check(a), self.check(b))

    def meet2(self, a, b):
        return min(self.check(a), self.check(b))

    def grid(self, n: int) -> list[Fraction]:
        """``n`` evenly spaced points from 0 to 1 inclusive."""
        return [Fraction(i, n - 1) for i in range(n)]

    def to_json(self):
        return {"kind": "unit_interval"}

    def encode(self, v):
        return format_rational(self.check(v))

    def decode(self, raw):
        try:
            return self.check(parse_rational(raw))
        except (ValueError, ZeroDivisionError) as exc:
            raise LatticeTypeError(str(exc)) from None


def lattice_from_json(raw: dict) -> Lattice:
    kind = raw.get("kind")
    if kind == "powerset":
        states = raw.get("states")
        if not isinstance(states, list) or not all(isinstance(q, str) for q in states):
            raise ValueError("powerset lattice needs a list of state names under 'states'")
        return PowersetLattice(tuple(states))
    if kind == "unit_interval":
        return UnitInterval()
    raise ValueError(f"unknown lattice kind {kind!r}")


# -- law checking -----------------------------------------------------------

LAWS = (
    "leq_reflexive",
    "leq_antisymmetric",
    "leq_transitive",
    "join_associative",
    "join_commutative",
    "join_idempotent",
    "meet_associative",
    "meet_commutative",
    "meet_idempotent",
    "absorption",
    "bot_neutral",
    "top_neutral",
    "order_compatible",
    "join_monotone",
    "meet_monotone",
)


@dataclass
class LawReport:
    """Per-law outcome: ``None`` when the law held on every sample, else the
    first violating sample tuple."""

    results: dict[str, tuple | None]

    @property
    def passed(self) -> bool:
        return all(w is None for w in self.results.values())

    def failures(self) -> dict[str, tuple]:
        return {law: w for law, w in self.results.items() if w is not None}


def check_lattice_laws(l: Lattice, samples: Sequence[Value]) -> LawReport:
    samples = [l.check(s) for s in samples]
    results: dict[str, tuple | None] = {law: None for law in LAWS}

    def fail(law, *witness):
        if results[law] is None:
            results[law] = witness

    j, m, le = l.join2, l.meet2, l.leq
    for a in samples:
        if not le(a, a):
            fail("leq_reflexive", a)
        if j(a, a) != a:
            fail("join_idempotent", a)
        if m(a, a) != a:
            fail("meet_idempotent", a)
        if j(a, l.bot) != a:
            fail("bot_neutral", a)
        if m(a, l.top) != a:
            fail("top_neutral", a)
    for a, b in itertools.product(samples, repeat=2):
        if le(a, b) and le(b, a) and a != b:
            fail("leq_antisymmetric", a, b)
        if j(a, b) != j(b, a):
            fail("join_commutative", a, b)
        if m(a, b) != m(b, a):
            fail("meet_commutative", a, b)
        if j(a, m(a, b)) != a or m(a, j(a, b)) != a:
            fail("absorption", a, b)
        if le(a, b) != (j(a, b) == b) or le(a, b) != (m(a, b) == a):
            fail("order_compatible", a, b)
    for a, b, c in itertools.product(samples, repeat=3):
        if le(a, b) and le(b, c) and not le(a, c):
            fail("leq_transitive", a, b, c)
        if j(j(a, b), c) != j(a, j(b, c)):
            fail("join_associative", a, b, c)
        if m(m(a, b), c) != m(a, m(b, c)):
            fail("meet_associative", a, b, c)
        if le(a, b):
            if not le(j(a, c), j(b, c)):
                fail("join_monotone", a, b, c)
            if not le(m(a, c), m(b, c)):
                fail("meet_monotone", a, b, c)
    return LawReport(results)
