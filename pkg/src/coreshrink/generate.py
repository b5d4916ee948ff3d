"""Small random ground programs with weak constraints, for testing and benchmarks."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .model import Aggregate, Literal, Program, Rule, WeakConstraint, WeakConstraintSet, choice, constraint
from .textio import ParsedInstance


@dataclass
class GenConfig:
    max_atoms: int = 10
    max_rules: int = 15
    max_levels: int = 3
    max_weight: int = 4
    max_weak: int = 8
    choice_prob: float = 0.6
    aggregate_prob: float = 0.25
    disjunctive_prob: float = 0.0


def _literal(rng: random.Random, n: int) -> Literal:
    return Literal(rng.randint(1, n), rng.choice((0, 0, 1)))


def random_instance(seed: int, cfg: GenConfig | None = None) -> ParsedInstance:
    cfg = cfg or GenConfig()
    rng = random.Random(seed)
    program = Program()
    n = rng.randint(2, cfg.max_atoms)
    for i in range(1, n + 1):
        program.atoms.add(f"p{i}")
    for a in range(1, n + 1):
        if rng.random() < cfg.choice_prob:
            program.add(choice(a))
    for _ in range(rng.randint(0, cfg.max_rules)):
        body = tuple(_literal(rng, n) for _ in range(rng.randint(0, 3)))
        kind = rng.random()
        if kind < 0.3:
            if rng.random() < cfg.aggregate_prob:
                lits = tuple((rng.randint(1, 3), _literal(rng, n)) for _ in range(rng.randint(1, 4)))
                total = sum(w for w, _ in lits)
                rel = rng.choice(("<", "<=", ">=", ">", "=", "!="))
                agg = Aggregate(lits, rel, rng.randint(0, total))
                body = body[:1] + (agg,) if rng.random() < 0.5 else (agg,)
            if body:
                program.add(constraint(*body))
            continue
        head = {rng.randint(1, n)}
        if rng.random() < cfg.disjunctive_prob:
            head.add(rng.randint(1, n))
        program.add(Rule(frozenset(head), body))
    weak = WeakConstraintSet()
    levels = list(range(1, rng.randint(1, cfg.max_levels) + 1))
    for _ in range(rng.randint(1, cfg.max_weak)):
        body = tuple(_literal(rng, n) for _ in range(rng.randint(1, 2)))
        weak.add(WeakConstraint(body, rng.randint(1, cfg.max_weight), rng.choice(levels)))
    return ParsedInstance(program, weak, frozenset(program.atoms.atoms()), "asp")
