"""Readers and writers for the ground-program dialect and for WCNF.

Ground dialect, one statement per ``.``::

    a | c :- not b, not d.
    d :- not not d.
    :- sum{ 2: not s2, 1: s4 } >= 2.
    :~ d. [1@2]
    % comment

WCNF follows the classic DIMACS ``p wcnf <vars> <clauses> <top>`` layout.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    FALSE,
    FALSE_NAME,
    Aggregate,
    AtomTable,
    Literal,
    Program,
    Rule,
    WeakConstraint,
    WeakConstraintSet,
    choice,
    constraint,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.line = line
        self.column = column


@dataclass
class ParsedInstance:
    program: Program
    weak: WeakConstraintSet = field(default_factory=WeakConstraintSet)
    visible: frozenset = frozenset()
    dialect: str = "asp"

    @property
    def atoms(self) -> AtomTable:
        return self.program.atoms


# -- ground ASP ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<name>@?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<num>-?\d+)
  | (?P<op>:-|:~|<=|>=|!=|<>|==|[<>=|,.:{}\[\]@\#;])
    """,
    re.VERBOSE,
)

_REL_ALIASES = {"<>": "!=", "==": "="}


def _tokenize(text: str):
    pos, line, line_start = 0, 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            out.append((kind, value, line, m.start() - line_start + 1))
        nl = value.count("\n")
        if nl:
            line += nl
            line_start = m.start() + value.rindex("\n") + 1
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


class _AspParser:
    def __init__(self, text: str) -> None:
        self.toks = _tokenize(text)
        self.i = 0
        self.program = Program()
        self.weak = WeakConstraintSet()

    # token helpers
    def peek(self, offset: int = 0):
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def error(self, msg: str, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok[2], tok[3])

    def take(self, value: str | None = None, kind: str | None = None):
        tok = self.peek()
        if value is not None and tok[1] != value:
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        if kind is not None and tok[0] != kind:
            raise self.error(f"expected {kind}, found {tok[1] or 'end of input'!r}")
        self.i += 1
        return tok

    def at(self, value: str) -> bool:
        return self.peek()[1] == value

    def atom(self) -> int:
        tok = self.take(kind="name")
        if tok[1] == "not":
            raise self.error("'not' cannot be an atom name", tok)
        return self.program.atoms.add(tok[1])

    def number(self) -> int:
        tok = self.take(kind="num")
        value = int(tok[1])
        if value < 0:
            raise self.error("negative numbers are not allowed", tok)
        return value

    # grammar
    def parse(self) -> ParsedInstance:
        while self.peek()[0] != "eof":
            self.statement()
        visible = frozenset(self.program.atoms.atoms())
        return ParsedInstance(self.program, self.weak, visible, "asp")

    def statement(self) -> None:
        if self.at(":~"):
            self.take()
            body = self.body(stop=".")
            self.take(".")
            self.take("[")
            wtok = self.peek()
            weight = self.number()
            level = 1
            if self.at("@"):
                self.take()
                level = self.number()
            self.take("]")
            if weight < 1 or level < 1:
                raise self.error("weak constraint weight and level must be positive", wtok)
            self.weak.add(WeakConstraint(body, weight, level))
            return
        head: set[int] = set()
        if not self.at(":-"):
            head.add(self.atom())
            while self.at("|") or self.at(";"):
                self.take()
                head.add(self.atom())
        body: tuple = ()
        if self.at(":-"):
            self.take()
            body = self.body(stop=".")
        self.take(".")
        self.program.add(Rule(frozenset(head), body))

    def body(self, stop: str) -> tuple:
        out = []
        if self.at(stop):
            return ()
        out.append(self.element())
        while self.at(","):
            self.take()
            out.append(self.element())
        return tuple(out)

    def literal(self) -> Literal:
        depth = 0
        while self.peek()[1] == "not" and self.peek(1)[0] == "name":
            self.take()
            depth += 1
        return Literal(self.atom(), depth)

    def element(self):
        if self.at("#"):
            self.take()
        tok = self.peek()
        if tok[0] == "name" and tok[1] in ("sum", "count") and self.peek(1)[1] == "{":
            return self.aggregate(tok[1])
        return self.literal()

    def aggregate(self, kind: str) -> Aggregate:
        self.take()
        self.take("{")
        elements = []
        if not self.at("}"):
            while True:
                if kind == "sum":
                    w = self.number()
                    self.take(":")
                else:
                    w = 1
                elements.append((w, self.literal()))
                if self.at(","):
                    self.take()
                    continue
                break
        self.take("}")
        rel_tok = self.take(kind="op")
        rel = _REL_ALIASES.get(rel_tok[1], rel_tok[1])
        if rel not in ("<", "<=", ">=", ">", "=", "!="):
            raise self.error(f"expected aggregate relation, found {rel_tok[1]!r}", rel_tok)
        bound = self.number()
        if self.peek()[1] in ("<", "<=", ">=", ">", "=", "!=", "<>", "=="):
            raise self.error("aggregate with more than one relation")
        return Aggregate(tuple(elements), rel, bound)


def parse_ground_asp(text) -> ParsedInstance:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _AspParser(text).parse()


# -- WCNF ----------------------------------------------------------------------

def _negated_clause_body(clause: list[int], atoms: AtomTable) -> tuple:
    body = []
    for lit in clause:
        a = atoms.add(f"x{abs(lit)}")
        # falsifying v means v is false: "not x_v"; falsifying -v means x_v
        body.append(Literal(a, 1) if lit > 0 else Literal(a, 0))
    return tuple(body)


def parse_wcnf(text) -> ParsedInstance:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    header = None
    numbers: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("p"):
            parts = stripped.split()
            if header is not None:
                raise ParseError("duplicate header", lineno, 1)
            if len(parts) != 5 or parts[1] != "wcnf":
                raise ParseError("malformed header, expected 'p wcnf <vars> <clauses> <top>'", lineno, 1)
            try:
                header = tuple(int(x) for x in parts[2:])
            except ValueError:
                raise ParseError("malformed header numbers", lineno, 1) from None
            continue
        if header is None:
            raise ParseError("clause before header", lineno, 1)
        for tok in stripped.split():
            try:
                numbers.append((int(tok), lineno))
            except ValueError:
                raise ParseError(f"bad token {tok!r}", lineno, 1) from None
    if header is None:
        raise ParseError("missing header")
    nvars, _, top = header
    if top < 1:
        raise ParseError("top weight must be positive")

    program = Program()
    atoms = program.atoms
    for v in range(1, nvars + 1):
        atoms.add(f"x{v}")
    weak = WeakConstraintSet()
    clause: list[int] = []
    weight = None
    for value, lineno in numbers:
        if weight is None:
            weight = value
            if weight <= 0:
                raise ParseError("clause weight must be positive", lineno, 1)
            if weight > top:
                raise ParseError(f"clause weight {weight} exceeds top {top}", lineno, 1)
            continue
        if value != 0:
            if abs(value) > nvars:
                raise ParseError(f"variable {abs(value)} exceeds declared count", lineno, 1)
            clause.append(value)
            continue
        body = _negated_clause_body(clause, atoms)
        if weight == top:
            program.add(constraint(*body))
        else:
            weak.add(WeakConstraint(body, weight, 1))
        clause, weight = [], None
    if weight is not None:
        raise ParseError("unterminated clause")
    for v in range(1, nvars + 1):
        program.add(choice(atoms.index[f"x{v}"]))
    visible = frozenset(atoms.index[f"x{v}"] for v in range(1, nvars + 1))
    return ParsedInstance(program, weak, visible, "wcnf")


def detect_dialect(text: str) -> str:
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        if s.startswith("c ") or s == "c":
            continue
        return "wcnf" if s.startswith("p ") and "wcnf" in s.split() else "asp"
    return "asp"


def parse(text, dialect: str | None = None) -> ParsedInstance:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    dialect = dialect or detect_dialect(text)
    return parse_wcnf(text) if dialect == "wcnf" else parse_ground_asp(text)


def read_instance(path: str, dialect: str | None = None) -> ParsedInstance:
    import sys

    if path == "-":
        return parse(sys.stdin.read(), dialect)
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), dialect)


# -- writing -------------------------------------------------------------------

def format_literal(lit: Literal, atoms: AtomTable) -> str:
    return "not " * lit.negation + atoms.name(lit.atom)


def format_element(el, atoms: AtomTable) -> str:
    if isinstance(el, Literal):
        return format_literal(el, atoms)
    if el.kind == "count" and el.elements:
        inner = ", ".join(format_literal(l, atoms) for _, l in el.elements)
        return f"count{{ {inner} }} {el.relation} {el.bound}"
    inner = ", ".join(f"{w}: {format_literal(l, atoms)}" for w, l in el.elements)
    return f"sum{{ {inner} }} {el.relation} {el.bound}".replace("{  }", "{ }")


def format_rule(rule: Rule, atoms: AtomTable) -> str:
    body = ", ".join(format_element(el, atoms) for el in rule.body)
    if rule.is_constraint:
        return f":- {body}." if body else ":- ."
    head = " | ".join(sorted(atoms.name(a) for a in rule.head))
    return f"{head} :- {body}." if body else f"{head}."


def format_weak(wc: WeakConstraint, atoms: AtomTable) -> str:
    body = ", ".join(format_element(el, atoms) for el in wc.body)
    return f":~ {body}. [{wc.weight}@{wc.level}]"


def serialize_program(instance: ParsedInstance) -> str:
    atoms = instance.program.atoms
    lines = [format_rule(r, atoms) for r in instance.program.rules]
    lines += [format_weak(wc, atoms) for wc in instance.weak]
    return "".join(line + "\n" for line in lines)


def structure(instance: ParsedInstance):
    """Name-based canonical form, used for round-trip comparison."""
    atoms = instance.program.atoms

    def lit(l: Literal):
        return (atoms.name(l.atom), l.negation)

    def el(e):
        if isinstance(e, Literal):
            return lit(e)
        return ("agg", tuple((w, lit(l)) for w, l in e.elements), e.relation, e.bound)

    rules = [
        (tuple(sorted(atoms.name(a) for a in r.head)), tuple(el(e) for e in r.body))
        for r in instance.program.rules
    ]
    weak = [(tuple(el(e) for e in wc.body), wc.weight, wc.level) for wc in instance.weak]
    return rules, weak


__all__ = [
    "FALSE",
    "FALSE_NAME",
    "ParseError",
    "ParsedInstance",
    "parse",
    "parse_ground_asp",
    "parse_wcnf",
    "read_instance",
    "serialize_program",
    "structure",
]
