"""Reading and writing the ``cofix/1`` JSON formats.

Every loader raises :class:`FormatError` naming the offending field, so the
command line can report it and exit with status 2.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from pathlib import Path
from typing import Any

from cofix.automata import BottomUpTA, GenerativeTA, format_letter
from cofix.fixpoint import PredicateMap
from cofix.lattice import Lattice, UnitInterval, format_rational, lattice_from_json
from cofix.terms import (
    AttrSchema,
    Constructor,
    EdgePair,
    SchemaError,
    Signature,
    Term,
    number_nodes,
    preorder,
)

FORMAT = "cofix/1"


class FormatError(ValueError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(str(path), exc.strerror or str(exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise FormatError(str(path), "top level must be a JSON object")
    if doc.get("format") != FORMAT:
        raise FormatError(f"{path}: format", f"expected {FORMAT!r}, got {doc.get('format')!r}")
    return doc


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def _expect(cond: bool, where: str, message: str):
    if not cond:
        raise FormatError(where, message)


def _str_list(raw, where: str) -> list[str]:
    _expect(isinstance(raw, list) and all(isinstance(x, str) for x in raw), where,
            "expected a list of strings")
    return raw


def _rational(raw, where: str) -> Fraction:
    _expect(isinstance(raw, (str, int)) and not isinstance(raw, bool), where,
            f"expected a rational string such as \"1/2\", got {raw!r}")
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise FormatError(where, f"cannot read {raw!r} as a rational") from None


# -- lattices and signatures ------------------------------------------------

def lattice_from_doc(doc: dict) -> Lattice:
    raw = doc.get("lattice")
    _expect(isinstance(raw, dict), "lattice", "missing lattice object")
    try:
        return lattice_from_json(raw)
    except ValueError as exc:
        raise FormatError("lattice", str(exc)) from None


def lattice_to_doc(l: Lattice) -> dict:
    return {"format": FORMAT, "lattice": l.to_json()}


def _schema_from_json(raw, where: str) -> AttrSchema:
    if raw is None or raw == "none":
        return AttrSchema()
    if raw == "prob":
        return AttrSchema("prob")
    if isinstance(raw, dict) and set(raw) == {"labels"}:
        return AttrSchema("labels", tuple(_str_list(raw["labels"], f"{where}.labels")))
    raise FormatError(where, f"attribute schema must be \"none\", \"prob\" or {{\"labels\": [...]}}, got {raw!r}")


def _schema_to_json(s: AttrSchema):
    if s.kind == "labels":
        return {"labels": list(s.labels)}
    return s.kind


def signature_from_json(raw, where: str = "signature") -> Signature:
    _expect(isinstance(raw, list), where, "expected a list of constructors")
    ctors = []
    for i, entry in enumerate(raw):
        at = f"{where}[{i}]"
        _expect(isinstance(entry, dict), at, "expected an object with name and arity")
        name, arity = entry.get("name"), entry.get("arity")
        _expect(isinstance(name, str) and name != "", f"{at}.name", "expected a non-empty string")
        _expect(isinstance(arity, int) and not isinstance(arity, bool) and arity >= 0,
                f"{at}.arity", "expected a non-negative integer")
        ctors.append(Constructor(name, arity, _schema_from_json(entry.get("attrs"), f"{at}.attrs")))
    try:
        return Signature(tuple(ctors))
    except SchemaError as exc:
        raise FormatError(where, str(exc)) from None


def signature_to_json(sig: Signature) -> list:
    return [{"name": c.name, "arity": c.arity, "attrs": _schema_to_json(c.schema)}
            for c in sig.constructors]


def signature_from_doc(doc: dict) -> Signature:
    _expect("signature" in doc, "signature", "missing")
    return signature_from_json(doc["signature"])


# -- terms ------------------------------------------------------------------

def _node_from_json(raw, sig: Signature, where: str) -> Term:
    _expect(isinstance(raw, dict), where, "expected a node object")
    ctor = raw.get("ctor")
    _expect(isinstance(ctor, str), f"{where}.ctor", "expected a constructor name")
    _expect(ctor in sig, f"{where}.ctor", f"unknown constructor {ctor!r}")
    c = sig.get(ctor)
    node = raw.get("node")
    _expect(node is None or isinstance(node, str), f"{where}.node", "node id must be a string")
    attrs_raw = raw.get("attrs")
    if c.schema.kind == "none":
        _expect(attrs_raw in (None, {}), f"{where}.attrs", f"{ctor!r} takes no attributes")
        attrs = None
    elif c.schema.kind == "prob":
        _expect(isinstance(attrs_raw, dict) and "p" in attrs_raw, f"{where}.attrs",
                f"{ctor!r} needs an edge weight {{\"p\": \"num/den\"}}")
        p = _rational(attrs_raw["p"], f"{where}.attrs.p")
        attrs = (p, _rational(attrs_raw["q"], f"{where}.attrs.q")) if "q" in attrs_raw else p
    else:
        _expect(isinstance(attrs_raw, dict) and "label" in attrs_raw, f"{where}.attrs",
                f"{ctor!r} needs a label {{\"label\": ...}}")
        attrs = attrs_raw["label"]
    try:
        attrs = sig.validate_attrs(ctor, attrs)
    except SchemaError as exc:
        raise FormatError(f"{where}.attrs", str(exc)) from None
    kids = raw.get("children", [])
    _expect(isinstance(kids, list), f"{where}.children", "expected a list")
    _expect(len(kids) == c.arity, f"{where}.children",
            f"{ctor!r} has arity {c.arity} but {len(kids)} children are given")
    return Term(ctor, [_node_from_json(k, sig, f"{where}.children[{i}]") for i, k in enumerate(kids)],
                attrs, node)


def term_from_json(raw, sig: Signature, where: str = "term") -> Term:
    """Read a tree; if no node carries an id, ids ``n0, n1, ...`` are assigned."""
    t = _node_from_json(raw, sig, where)
    ids = [n.node for n in preorder(t)]
    if all(i is None for i in ids):
        return number_nodes(t)
    _expect(all(i is not None for i in ids), where, "either every node or no node must carry an id")
    seen: set[str] = set()
    for i in ids:
        _expect(i not in seen, where, f"duplicate node id {i!r}")
        seen.add(i)
    return t


def term_from_doc(doc: dict, sig: Signature) -> Term:
    raw = doc["term"] if "term" in doc else {k: v for k, v in doc.items() if k != "format"}
    return term_from_json(raw, sig)


def tree_signature(doc: dict) -> Signature:
    """Attribute-free signature of the constructors a tree document uses."""
    raw = doc["term"] if "term" in doc else doc
    arities: dict[str, int] = {}
    stack = [(raw, "term")]
    while stack:
        node, where = stack.pop()
        _expect(isinstance(node, dict), where, "expected a node object")
        ctor, kids = node.get("ctor"), node.get("children", [])
        _expect(isinstance(ctor, str), f"{where}.ctor", "expected a constructor name")
        _expect(isinstance(kids, list), f"{where}.children", "expected a list")
        prev = arities.setdefault(ctor, len(kids))
        _expect(prev == len(kids), where, f"constructor {ctor!r} used with arities {prev} and {len(kids)}")
        stack.extend((k, f"{where}.children[{i}]") for i, k in enumerate(kids))
    return Signature(tuple(Constructor(n, k) for n, k in arities.items()))


def term_to_json(t: Term) -> dict:
    out: dict[str, Any] = {}
    if t.node is not None:
        out["node"] = t.node
    out["ctor"] = t.ctor
    if isinstance(t.attrs, EdgePair):
        out["attrs"] = {"p": format_rational(t.attrs.p)}
    elif t.attrs is not None:
        out["attrs"] = {"label": t.attrs}
    out["children"] = [term_to_json(c) for c in t.children]
    return out


def term_to_doc(t: Term) -> dict:
    return {"format": FORMAT, "term": term_to_json(t)}


# -- automata ---------------------------------------------------------------

_LETTER = re.compile(r"^\s*([^\s(),]+)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def parse_letter(text: str, where: str = "letter") -> tuple:
    """``"g(q0,q1)"`` becomes ``("g", "q0", "q1")``; ``"a"`` becomes ``("a",)``."""
    m = _LETTER.match(text) if isinstance(text, str) else None
    _expect(m is not None, where, f"cannot read {text!r} as a letter like a or g(q0,q1)")
    name, args = m.group(1), m.group(2)
    if args is None:
        return (name,)
    parts = [a.strip() for a in args.split(",")]
    _expect(all(parts), where, f"empty argument in {text!r}")
    return (name, *parts)


def _signature_for(doc: dict, letters: list[tuple], extra: Signature | None, where: str) -> Signature:
    sig = signature_from_json(doc["signature"], f"{where}.signature") if "signature" in doc else None
    inferred: dict[str, int] = {}
    for letter in letters:
        if sig is not None and letter[0] in sig:
            continue
        prev = inferred.setdefault(letter[0], len(letter) - 1)
        _expect(prev == len(letter) - 1, where,
                f"constructor {letter[0]!r} used with arities {prev} and {len(letter) - 1}")
    try:
        out = Signature(tuple(Constructor(n, k) for n, k in inferred.items()))
        if sig is not None:
            out = sig.union(out)
        if extra is not None:
            out = out.union(extra)
    except SchemaError as exc:
        raise FormatError(where, str(exc)) from None
    return out


def bottom_up_from_doc(doc: dict, extra: Signature | None = None, where: str = "automaton") -> BottomUpTA:
    """Read a bottom-up automaton.  The signature is the declared one (if any)
    plus constructors inferred from the transition keys plus ``extra``."""
    states = _str_list(doc.get("states"), f"{where}.states")
    accept = doc.get("accept")
    if isinstance(accept, list):
        _expect(len(accept) == 1, f"{where}.accept",
                "exactly one accepting state is supported; add a fresh state qF and copy every "
                "transition into an old accepting state so that it also targets qF")
        accept = accept[0]
    _expect(isinstance(accept, str), f"{where}.accept", "expected a state name")
    delta_raw = doc.get("delta", {})
    _expect(isinstance(delta_raw, dict), f"{where}.delta", "expected an object")
    delta = {}
    for key, targets in delta_raw.items():
        letter = parse_letter(key, f"{where}.delta[{key!r}]")
        delta[letter] = frozenset(_str_list(targets, f"{where}.delta[{key!r}]"))
    sig = _signature_for(doc, list(delta), extra, where)
    try:
        return BottomUpTA(sig, tuple(states), delta, accept)
    except SchemaError as exc:
        raise FormatError(where, str(exc)) from None


def bottom_up_to_doc(A: BottomUpTA) -> dict:
    return {
        "format": FORMAT,
        "signature": signature_to_json(A.signature),
        "states": list(A.states),
        "accept": A.accept,
        "delta": {format_letter(k): A.lattice.sorted_list(v) for k, v in sorted(A.delta.items())},
    }


def generative_from_doc(doc: dict, extra: Signature | None = None, where: str = "system") -> GenerativeTA:
    states = _str_list(doc.get("states"), f"{where}.states")
    init = doc.get("init")
    _expect(isinstance(init, str), f"{where}.init", "expected a state name")
    c_raw = doc.get("c", {})
    _expect(isinstance(c_raw, dict), f"{where}.c", "expected an object")
    c = {}
    for x, letters in c_raw.items():
        at = f"{where}.c[{x!r}]"
        c[x] = frozenset(parse_letter(a, at) for a in _str_list(letters, at))
    sig = _signature_for(doc, [a for ls in c.values() for a in ls], extra, where)
    try:
        return GenerativeTA(sig, tuple(states), c, init)
    except SchemaError as exc:
        raise FormatError(where, str(exc)) from None


def generative_to_doc(C: GenerativeTA) -> dict:
    return {
        "format": FORMAT,
        "signature": signature_to_json(C.signature),
        "states": list(C.states),
        "init": C.init,
        "c": {x: [format_letter(a) for a in C.c[x]] for x in C.states},
    }


# -- witnesses --------------------------------------------------------------

WITNESS_KINDS = ("submartingale", "acceptance", "model")


def witness_to_doc(kind: str, f: PredicateMap) -> dict:
    return {"format": FORMAT, "kind": kind,
            "witness": {str(x): f.lattice.encode(v) for x, v in f.items()}}


def witness_from_doc(doc: dict, kind: str, lattice: Lattice) -> dict:
    """Read a witness table as a plain mapping; totality is checked by the checker."""
    _expect(doc.get("kind", kind) == kind, "kind", f"expected a {kind} witness, got {doc.get('kind')!r}")
    raw = doc.get("witness")
    _expect(isinstance(raw, dict), "witness", "expected an object mapping ids to values")
    out = {}
    for key, value in raw.items():
        if isinstance(lattice, UnitInterval):
            out[key] = _rational(value, f"witness[{key!r}]")
        else:
            out[key] = frozenset(_str_list(value, f"witness[{key!r}]"))
    return out
