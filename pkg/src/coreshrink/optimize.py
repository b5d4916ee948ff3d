"""Model-guided and core-guided optimum stable model search.

``run_linsu`` is linear search sat-unsat; ``run_one`` is core-guided search
with the ONE relaxation, hardening, stratification, an optional disjoint
cores phase and optional core shrinking.  Both stream events (see
:mod:`coreshrink.report`) through a callable ``events(kind, **payload)``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

from . import report as ev
from .cdcl import CdclOracle
from .model import Aggregate, Literal, Program, WeakConstraintSet, choice, constraint, cost, cost_vector
from .oracle_ref import COHERENT, INCOHERENT, UNKNOWN, Budget, Deadline, RefOracle
from .relax import SoftRegistry, compile_levels, relax_core, relax_level
from .textio import ParsedInstance

ALGORITHMS = ("linsu", "one")
SHRINK_VARIANTS = ("none", "linear", "progression")
ORACLES = ("cdcl", "enum")


@dataclass(frozen=True)
class StrategyConfig:
    algorithm: str = "one"
    shrink: str = "none"
    disjoint_cores: bool = False
    stratification: bool = True
    compile_levels: bool = False
    shrink_budget: Budget = Budget("seconds", 10)
    oracle: str = "cdcl"
    core_mode: str = "raw"  # enum oracle only
    seed: int = 0
    timeout: float | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.shrink not in SHRINK_VARIANTS:
            raise ValueError(f"unknown shrink variant {self.shrink!r}")
        if self.oracle not in ORACLES:
            raise ValueError(f"unknown oracle {self.oracle!r}")
        if self.algorithm == "linsu" and (self.shrink != "none" or self.disjoint_cores or not self.stratification):
            raise ValueError("shrinking, disjoint cores and stratification options apply to 'one' only")

    @property
    def name(self) -> str:
        if self.algorithm == "linsu":
            parts = ["linsu"]
        else:
            parts = ["one"]
            if self.shrink != "none":
                parts.append({"linear": "lshr", "progression": "pshr"}[self.shrink])
            if self.disjoint_cores:
                parts.append("disj")
            if not self.stratification:
                parts.append("nostrat")
        if self.compile_levels:
            parts.append("compiled")
        return "+".join(parts) + f"/{self.oracle}"


def strategy_matrix(oracle: str = "cdcl", **kw) -> list[StrategyConfig]:
    """The eight strategies: linSU, ONE x shrink x disjoint cores, ONE unstratified."""
    out = [StrategyConfig("linsu", oracle=oracle, **kw)]
    for disj in (False, True):
        for shrink in SHRINK_VARIANTS:
            out.append(StrategyConfig("one", shrink, disj, oracle=oracle, **kw))
    out.append(StrategyConfig("one", stratification=False, oracle=oracle, **kw))
    return out


@dataclass
class OptResult:
    status: str  # OPTIMUM, SATISFIABLE, INCOHERENT, UNKNOWN
    model: frozenset | None
    cost: dict
    lb_vector: dict
    levels: list = field(default_factory=list)
    names: list = field(default_factory=list)


@dataclass
class ShrinkState:
    core: tuple
    m: Fraction = Fraction(-1)
    pr: Fraction = Fraction(1)
    calls: int = 0
    budget_hits: int = 0
    probes: list = field(default_factory=list)


class Incoherent(Exception):
    pass


def _null_events(kind, **payload):
    return None


def make_oracle(program: Program, cfg: StrategyConfig, deadline=None):
    base = Program(program.atoms, program.rules)
    if cfg.oracle == "enum":
        return RefOracle(base, cfg.core_mode, deadline=deadline)
    return CdclOracle(base, seed=cfg.seed, deadline=deadline)


class OptState:
    """Mutable ledger of one run: program, weights, bounds, best model."""

    def __init__(self, instance: ParsedInstance, cfg: StrategyConfig, events=None) -> None:
        self.cfg = cfg
        self.events = events or _null_events
        self.program = Program(instance.program.atoms.copy(), instance.program.rules)
        self.weak: WeakConstraintSet = instance.weak
        if cfg.compile_levels:
            self.weak = compile_levels(self.weak)
        self.levels = self.weak.levels()
        self.visible = frozenset(instance.visible)
        self.registry = SoftRegistry(self.program.atoms)
        self.deadline = time.monotonic() + cfg.timeout if cfg.timeout is not None else None
        self.oracle = make_oracle(self.program, cfg, self.deadline)
        self.level: int | None = None
        self.lb = 0
        self.ub = math.inf
        self.stratum = math.inf
        self.best: frozenset | None = None
        self.done: dict[int, int] = {}
        self.hardened: list[int] = []
        self.act_counter = 0
        self.last_relaxation = None

    # -- program and oracle --------------------------------------------------------
    def add_rule(self, rule) -> None:
        self.program.add(rule)
        self.oracle.add_rule(rule)

    def add_rules(self, rules) -> None:
        for r in rules:
            self.add_rule(r)

    def solve(self, assumptions, budget=None):
        if self.deadline is not None and time.monotonic() >= self.deadline:
            raise Deadline
        return self.oracle.solve(list(assumptions), budget)

    # -- bounds ----------------------------------------------------------------------
    def cost_of(self, model, level=None) -> int:
        return cost(self.weak, self.level if level is None else level, model)

    def cost_tuple(self, model) -> tuple:
        vec = cost_vector(self.weak, model, self.levels)
        return tuple(vec[l] for l in self.levels)

    def lb_tuple(self) -> tuple:
        return tuple(self.done.get(l, self.lb if l == self.level else 0) for l in self.levels)

    def _payload(self, **extra) -> dict:
        d = {"level": self.level, "lb": self.lb, "ub": self.ub, "levels": self.levels}
        d.update(extra)
        return d

    def check(self) -> None:
        assert self.lb <= self.ub, (self.lb, self.ub)

    def on_model(self, model: frozenset) -> bool:
        """Record a model of the working program; True if it improved ub."""
        self.events(ev.MODEL, **self._payload(size=len(model)))
        c = self.cost_of(model)
        if c >= self.ub:
            return False
        self.best = model & self.visible
        self.ub = c
        self.check()
        self.events(ev.UB_IMPROVED, **self._payload(cost=self.cost_tuple(self.best)))
        return True

    def raise_lb(self, amount: int) -> None:
        if amount <= 0:
            return
        self.lb += amount
        self.check()
        self.events(ev.LB_IMPROVED, **self._payload(lb_vector=self.lb_tuple()))

    def hardening(self) -> None:
        if self.ub == math.inf:
            return
        for p, w in list(self.registry.weight.items()):
            if w > 0 and self.lb + w > self.ub:
                self.add_rule(constraint(Literal(p, 1)))
                self.registry.weight[p] = 0
                self.hardened.append(p)

    def finish_level(self) -> None:
        self.done[self.level] = self.ub
        self.events(ev.LEVEL_DONE, **self._payload())

    def result(self, status: str) -> OptResult:
        model = self.best
        names = []
        cost_vec = {}
        if model is not None:
            cost_vec = cost_vector(self.weak, model, self.levels)
            names = [self.program.atoms.name(a) for a in sorted(model)]
        lb_vec = {l: v for l, v in zip(self.levels, self.lb_tuple())}
        if status == "OPTIMUM":
            assert cost_vec == lb_vec, (cost_vec, lb_vec)
        return OptResult(status, model, cost_vec, lb_vec, list(self.levels), names)


def hardening(st: OptState) -> None:
    st.hardening()


# -- core shrinking ------------------------------------------------------------

def shrink_core(core, variant: str, budget: Budget, solve_with_budget: Callable, on_model=None, events=None) -> ShrinkState:
    """Budgeted prefix probing of ``core``; returns the final state.

    ``variant`` is ``"progression"`` (probe sizes double, then the progression
    restarts past the covered prefix) or ``"linear"`` (sizes grow by one).
    """
    if variant not in ("linear", "progression"):
        raise ValueError(f"unknown shrink variant {variant!r}")
    events = events or _null_events
    st = ShrinkState(tuple(core))
    while True:
        hi = math.floor(st.m + st.pr)
        probe = st.core[: hi + 1]
        verdict = solve_with_budget(list(probe), budget)
        st.calls += 1
        st.probes.append(len(probe))
        if verdict.status == INCOHERENT:
            st.core = tuple(verdict.core)
        elif verdict.status == COHERENT:
            if on_model is not None:
                on_model(verdict.model)
        else:
            st.budget_hits += 1
            events(ev.BUDGET_HIT, probe=len(probe))
        n = len(st.core)
        if st.m + 2 * st.pr >= n - 1:
            st.m += st.pr
            st.pr = Fraction(1, 2)
        if st.m + 2 * st.pr < n - 1:
            st.pr = 2 * st.pr if variant == "progression" else st.pr + 1
            continue
        return st


# -- linear search sat-unsat -----------------------------------------------------

def _linsu_level(st: OptState, level: int) -> None:
    st.level, st.lb = level, 0
    out = relax_level(st.weak, level, st.registry)
    st.add_rules(out.added_rules)
    elements = tuple((st.registry.w(s), Literal(s, 1)) for s in out.soft_atoms)
    if st.best is None:
        st.ub = 1 + sum(w for w, _ in elements)
    else:
        st.ub = st.cost_of(st.best)
    while True:
        st.act_counter += 1
        act = st.program.atoms.fresh(f"@act_{st.act_counter}")
        st.add_rule(choice(act))
        st.add_rule(constraint(Literal(act), Aggregate(elements, ">=", st.ub)))
        verdict = st.solve([act])
        st.add_rule(constraint(Literal(act)))  # retire the bound
        if verdict.status == COHERENT:
            st.on_model(verdict.model)
            continue
        if st.best is None:
            raise Incoherent
        st.add_rule(constraint(Aggregate(elements, "!=", st.ub)))
        st.raise_lb(st.ub - st.lb)
        st.finish_level()
        return


def run_linsu(instance: ParsedInstance, cfg: StrategyConfig, events=None) -> OptResult:
    return optimize(instance, replace(cfg, algorithm="linsu"), events)


# -- ONE -------------------------------------------------------------------------

def _next_stratum(st: OptState) -> int:
    if not st.cfg.stratification:
        return 1
    below = [w for w in st.registry.weight.values() if 0 < w < st.stratum]
    return max(below, default=0)


def _assumptions(st: OptState, original_only: bool = False) -> list[int]:
    floor = max(st.stratum, 1)
    return [
        p for p, w in st.registry.weight.items()
        if w >= floor and (not original_only or p in st.registry.original)
    ]


def _process_core(st: OptState, core) -> None:
    core = tuple(core)
    if not core:
        assert st.best is None, "empty core although a model is known"
        raise Incoherent
    st.events(ev.CORE_FOUND, **st._payload(size=len(core), core=core))
    if st.cfg.shrink != "none":
        shrunk = shrink_core(
            core,
            st.cfg.shrink,
            st.cfg.shrink_budget,
            st.oracle.solve_with_budget,
            on_model=st.on_model,
            events=st.events,
        )
        st.events(ev.CORE_SHRUNK, **st._payload(before=len(core), after=len(shrunk.core), calls=shrunk.calls))
        core = shrunk.core
        if not core:
            raise Incoherent
    amount = st.stratum if st.cfg.stratification else min(st.registry.w(p) for p in core)
    out, inc = relax_core(core, amount, st.registry)
    st.last_relaxation = (core, out)
    st.add_rules(out.added_rules)
    st.raise_lb(inc)
    st.hardening()


def disjoint_cores_phase(st: OptState) -> None:
    while True:
        verdict = st.solve(_assumptions(st, original_only=True))
        if verdict.status == INCOHERENT:
            _process_core(st, verdict.core)
            continue
        if st.on_model(verdict.model):
            st.hardening()
        return


def _one_level(st: OptState, level: int) -> None:
    st.level, st.lb, st.ub, st.stratum = level, 0, math.inf, math.inf
    out = relax_level(st.weak, level, st.registry)
    st.add_rules(out.added_rules)
    if st.best is not None:
        st.ub = st.cost_of(st.best)
        st.hardening()
    while True:
        st.stratum = _next_stratum(st)
        st.events(ev.STRATUM, **st._payload(stratum=st.stratum))
        if st.cfg.disjoint_cores:
            disjoint_cores_phase(st)
        while True:
            verdict = st.solve(_assumptions(st))
            if verdict.status == INCOHERENT:
                _process_core(st, verdict.core)
                continue
            if st.on_model(verdict.model):
                st.hardening()
            break
        if not any(1 <= w < st.stratum for w in st.registry.weight.values()):
            break
    st.hardening()
    assert st.lb == st.ub, (st.lb, st.ub)
    st.finish_level()


def run_one(instance: ParsedInstance, cfg: StrategyConfig, events=None) -> OptResult:
    return optimize(instance, replace(cfg, algorithm="one"), events)


# -- driver ----------------------------------------------------------------------

def optimize(instance: ParsedInstance, cfg: StrategyConfig, events=None, state_out: list | None = None) -> OptResult:
    """Run ``cfg`` on ``instance``; timeouts and interrupts return the best so far."""
    st = OptState(instance, cfg, events)
    if state_out is not None:
        state_out.append(st)
    status = "OPTIMUM"
    try:
        if not st.levels:
            verdict = st.solve([])
            if verdict.status != COHERENT:
                raise Incoherent
            st.best = verdict.model & st.visible
            st.events(ev.MODEL, **st._payload(size=len(verdict.model)))
        step = _linsu_level if cfg.algorithm == "linsu" else _one_level
        for level in st.levels:
            step(st, level)
    except Incoherent:
        status = "INCOHERENT"
    except (Deadline, KeyboardInterrupt):
        status = "SATISFIABLE" if st.best is not None else "UNKNOWN"
    res = st.result(status)
    names = [st.program.atoms.name(a) for a in sorted(res.model)] if res.model is not None else None
    st.events(ev.FINAL, **st._payload(status=status, model=names))
    return res


__all__ = [
    "StrategyConfig",
    "OptState",
    "OptResult",
    "ShrinkState",
    "strategy_matrix",
    "make_oracle",
    "shrink_core",
    "hardening",
    "disjoint_cores_phase",
    "optimize",
    "run_linsu",
    "run_one",
    "UNKNOWN",
]
