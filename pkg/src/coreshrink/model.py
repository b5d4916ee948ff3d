"""Ground programs with weak constraints, and their exact semantics.

Atoms are dense integer ids held by an :class:`AtomTable`; id 0 is the
false constant ``_false``.  Everything in this module is a plain value
type except :class:`Program`, whose rule list grows while an optimizer runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence, Union

FALSE = 0
FALSE_NAME = "_false"

RELATIONS = ("<", "<=", ">=", ">", "=", "!=")


class StructuralError(ValueError):
    """A rule or literal references something the program does not know."""


class CapacityError(RuntimeError):
    """A brute-force routine was asked to work beyond its size guard."""


class AtomTable:
    """Name <-> id registry.  Id 0 is always the false constant."""

    def __init__(self) -> None:
        self.names: list[str] = [FALSE_NAME]
        self.index: dict[str, int] = {FALSE_NAME: FALSE}

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, atom: int) -> bool:
        return 0 <= atom < len(self.names)

    def add(self, name: str) -> int:
        """Return the id of ``name``, registering it if needed."""
        atom = self.index.get(name)
        if atom is None:
            atom = len(self.names)
            self.names.append(name)
            self.index[name] = atom
        return atom

    def fresh(self, name: str) -> int:
        if name in self.index:
            raise StructuralError(f"atom {name!r} already exists")
        return self.add(name)

    def name(self, atom: int) -> str:
        return self.names[atom]

    def atoms(self) -> range:
        """Ids of all proper atoms (the false constant excluded)."""
        return range(1, len(self.names))

    def copy(self) -> "AtomTable":
        other = AtomTable()
        other.names = list(self.names)
        other.index = dict(self.index)
        return other


@dataclass(frozen=True, order=True)
class Literal:
    atom: int
    negation: int = 0  # 0 = a, 1 = not a, 2 = not not a

    def __post_init__(self) -> None:
        if self.negation > 2:
            object.__setattr__(self, "negation", 1 if self.negation % 2 else 2)
        elif self.negation < 0:
            raise ValueError("negation depth must be nonnegative")

    @property
    def negated(self) -> bool:
        return self.negation > 0

    def negate(self) -> "Literal":
        return Literal(self.atom, self.negation + 1)


def top() -> Literal:
    """The always-true literal ``not _false``."""
    return Literal(FALSE, 1)


@dataclass(frozen=True)
class Aggregate:
    elements: tuple[tuple[int, Literal], ...]
    relation: str
    bound: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple((int(w), l) for w, l in self.elements))
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.bound < 0 or any(w < 0 for w, _ in self.elements):
            raise ValueError("aggregate weights and bound must be nonnegative")

    @property
    def kind(self) -> str:
        return "count" if all(w == 1 for w, _ in self.elements) else "sum"

    @property
    def literals(self) -> tuple[Literal, ...]:
        return tuple(l for _, l in self.elements)


BodyElement = Union[Literal, Aggregate]


def compare(value: int, relation: str, bound: int) -> bool:
    if relation == "<":
        return value < bound
    if relation == "<=":
        return value <= bound
    if relation == ">=":
        return value >= bound
    if relation == ">":
        return value > bound
    if relation == "=":
        return value == bound
    return value != bound


@dataclass(frozen=True)
class Rule:
    head: frozenset
    body: tuple = ()

    def __post_init__(self) -> None:
        head = frozenset(self.head)
        if len(head) > 1:
            head = head - {FALSE}
        if not head:
            head = frozenset({FALSE})
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "body", tuple(self.body))

    @property
    def is_constraint(self) -> bool:
        return self.head == {FALSE}

    @property
    def is_disjunctive(self) -> bool:
        return len(self.head) > 1

    def atoms(self) -> set[int]:
        out = set(self.head) - {FALSE}
        for el in self.body:
            if isinstance(el, Literal):
                out.add(el.atom)
            else:
                out.update(l.atom for l in el.literals)
        out.discard(FALSE)
        return out

    def positive_body(self) -> set[int]:
        return {el.atom for el in self.body if isinstance(el, Literal) and el.negation == 0}


def constraint(*body: BodyElement) -> Rule:
    return Rule(frozenset({FALSE}), body)


def choice(atom: int) -> Rule:
    """``atom <- not not atom``"""
    return Rule(frozenset({atom}), (Literal(atom, 2),))


class Program:
    """A list of ground rules over a shared atom table."""

    def __init__(self, atoms: AtomTable | None = None, rules: Iterable[Rule] = ()) -> None:
        self.atoms = atoms if atoms is not None else AtomTable()
        self.rules: list[Rule] = []
        for r in rules:
            self.add(r)

    def add(self, rule: Rule) -> None:
        for a in rule.atoms():
            if a not in self.atoms:
                raise StructuralError(f"rule references unknown atom id {a}")
        self.rules.append(rule)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def copy(self) -> "Program":
        p = Program(self.atoms.copy())
        p.rules = list(self.rules)
        return p

    def occurring_atoms(self) -> set[int]:
        out: set[int] = set()
        for r in self.rules:
            out |= r.atoms()
        return out


@dataclass(frozen=True)
class WeakConstraint:
    body: tuple
    weight: int = 1
    level: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", tuple(self.body))
        if self.weight < 1 or self.level < 1:
            raise ValueError("weak constraint weight and level must be positive")


@dataclass
class WeakConstraintSet:
    """Multiset of weak constraints; identity is the insertion index."""

    items: list[WeakConstraint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def add(self, wc: WeakConstraint) -> int:
        self.items.append(wc)
        return len(self.items) - 1

    def levels(self) -> list[int]:
        """Distinct levels, greatest first."""
        return sorted({wc.level for wc in self.items}, reverse=True)

    def at_level(self, level: int) -> list[tuple[int, WeakConstraint]]:
        return [(i, wc) for i, wc in enumerate(self.items) if wc.level == level]

    def __add__(self, other: "WeakConstraintSet") -> "WeakConstraintSet":
        return WeakConstraintSet(self.items + other.items)


# -- satisfaction --------------------------------------------------------------

def eval_literal(interp, lit: Literal, atoms: AtomTable | None = None) -> bool:
    if atoms is not None and lit.atom not in atoms:
        raise StructuralError(f"unknown atom id {lit.atom}")
    present = lit.atom in interp
    return present if lit.negation != 1 else not present


def aggregate_sum(interp, agg: Aggregate) -> int:
    return sum(w for w, l in agg.elements if eval_literal(interp, l))


def eval_aggregate(interp, agg: Aggregate) -> bool:
    return compare(aggregate_sum(interp, agg), agg.relation, agg.bound)


def eval_element(interp, el: BodyElement) -> bool:
    if isinstance(el, Literal):
        return eval_literal(interp, el)
    return eval_aggregate(interp, el)


def body_holds(interp, body: Sequence[BodyElement]) -> bool:
    return all(eval_element(interp, el) for el in body)


def satisfies_rule(interp, rule: Rule) -> bool:
    if not body_holds(interp, rule.body):
        return True
    return any(a in interp for a in rule.head)


def is_model(interp, program: Iterable[Rule]) -> bool:
    return all(satisfies_rule(interp, r) for r in program)


def reduct(program: Program, interp) -> Program:
    """Drop rules whose body fails in ``interp``; rewrite negated literals.

    Satisfied negated literals become the true constant and are omitted,
    unsatisfied ones become ``_false``.  Aggregates are kept verbatim.
    """
    out = Program(program.atoms)
    for r in program.rules:
        if not body_holds(interp, r.body):
            continue
        body = []
        for el in r.body:
            if isinstance(el, Literal) and el.negated:
                if not eval_literal(interp, el):
                    body.append(Literal(FALSE))
            else:
                body.append(el)
        out.rules.append(Rule(r.head, tuple(body)))
    return out


STABILITY_GUARD = 20


def is_stable(program: Program, interp, guard: int = STABILITY_GUARD) -> bool:
    """Reference stability check by subset search over ``interp``."""
    interp = frozenset(interp)
    if FALSE in interp or not is_model(interp, program.rules):
        return False
    if len(interp) > guard:
        raise CapacityError(f"interpretation has {len(interp)} atoms, guard is {guard}")
    red = reduct(program, interp).rules
    members = sorted(interp)
    for size in range(len(members)):
        for sub in combinations(members, size):
            if is_model(frozenset(sub), red):
                return False
    return True


# -- costs ---------------------------------------------------------------------

def cost(weak: WeakConstraintSet | Iterable[WeakConstraint], level: int, interp) -> int:
    return sum(wc.weight for wc in weak if wc.level == level and body_holds(interp, wc.body))


def cost_vector(weak: WeakConstraintSet, interp, levels: Iterable[int] | None = None) -> dict[int, int]:
    if levels is None:
        levels = weak.levels()
    return {l: cost(weak, l, interp) for l in levels}


def vector_precedes(j: dict[int, int], i: dict[int, int]) -> bool:
    """Lexicographic strict order on cost vectors, greatest level first."""
    for level in sorted(set(j) | set(i), reverse=True):
        a, b = j.get(level, 0), i.get(level, 0)
        if a != b:
            return a < b
    return False


def precedes(j, i, weak: WeakConstraintSet) -> bool:
    levels = weak.levels()
    return vector_precedes(cost_vector(weak, j, levels), cost_vector(weak, i, levels))


def level_tuple(vec: dict[int, int], levels: Sequence[int]) -> tuple[int, ...]:
    return tuple(vec.get(l, 0) for l in levels)
