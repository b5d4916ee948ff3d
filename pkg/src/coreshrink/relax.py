"""Relaxation of weak constraints into soft atoms, core relaxation, level compilation."""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    Aggregate,
    AtomTable,
    Literal,
    Rule,
    WeakConstraint,
    WeakConstraintSet,
    choice,
    constraint,
)

INT64_MAX = 2**63 - 1


@dataclass
class RelaxationOutput:
    added_rules: list[Rule] = field(default_factory=list)
    soft_atoms: list[int] = field(default_factory=list)


@dataclass
class SoftRegistry:
    """Soft atoms, their origins and the weight function ``w``."""

    atoms: AtomTable
    entries: dict[int, tuple[str, int]] = field(default_factory=dict)
    weight: dict[int, int] = field(default_factory=dict)
    original: set[int] = field(default_factory=set)
    counter: int = 0
    cores: int = 0

    def fresh(self, origin: tuple[str, int]) -> int:
        while True:
            self.counter += 1
            name = f"@soft_{self.counter}"
            if name not in self.atoms.index:
                break
        atom = self.atoms.fresh(name)
        self.entries[atom] = origin
        return atom

    def w(self, atom: int) -> int:
        return self.weight.get(atom, 0)

    def total(self) -> int:
        return sum(self.weight.values())

    def derived(self) -> set[int]:
        return set(self.entries) - self.original


def relax_level(weak: WeakConstraintSet, level: int, registry: SoftRegistry) -> RelaxationOutput:
    items = weak.at_level(level)
    if not items:
        raise ValueError(f"no weak constraints at level {level}")
    out = RelaxationOutput()
    for idx, wc in items:
        s = registry.fresh(("weak", idx))
        registry.original.add(s)
        registry.weight[s] = wc.weight
        out.added_rules.append(constraint(*wc.body, Literal(s)))
        out.added_rules.append(choice(s))
        out.soft_atoms.append(s)
    return out


def relax_core(core, stratum: int, registry: SoftRegistry) -> tuple[RelaxationOutput, int]:
    """Replace ``stratum`` units of weight on ``core`` by ``len(core) - 1`` new softs."""
    core = list(core)
    for p in core:
        if registry.w(p) < stratum:
            raise AssertionError(f"core atom {p} has weight {registry.w(p)} < stratum {stratum}")
    n = len(core) - 1
    registry.cores += 1
    out = RelaxationOutput()
    for p in core:
        registry.weight[p] -= stratum
    fresh = [registry.fresh(("core", registry.cores)) for _ in range(max(n, 0))]
    for s in fresh:
        registry.weight[s] = stratum
        out.added_rules.append(choice(s))
    for a, b in zip(fresh, fresh[1:]):
        out.added_rules.append(constraint(Literal(a), Literal(b, 1)))
    elements = [(1, Literal(p)) for p in core] + [(1, Literal(s, 1)) for s in fresh]
    if core:
        out.added_rules.append(constraint(Aggregate(tuple(elements), "<", n)))
    out.soft_atoms = fresh
    return out, stratum


def compile_levels(weak: WeakConstraintSet) -> WeakConstraintSet:
    """Fold all levels into level 1 by scaling weights, preserving the optimum set."""
    items = list(weak.items)
    while True:
        levels = sorted({wc.level for wc in items})
        if levels in ([], [1]):
            return WeakConstraintSet(items)
        s = 1 + sum(wc.weight for wc in items if wc.level == 1)
        nxt = next(l for l in levels if l >= 2)
        new = []
        for wc in items:
            if wc.level == nxt:
                w = wc.weight * s
                if w > INT64_MAX:
                    raise OverflowError(f"compiled weight {w} exceeds 64-bit range")
                wc = WeakConstraint(wc.body, w, 1)
            new.append(wc)
        items = new
