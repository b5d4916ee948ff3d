"""Reference oracle: exhaustive stable-model search under assumptions.

The search is a depth-first walk over atoms in id order (false branch
first) with light propagation: rule-as-clause inference and support
pruning.  Every classical model reached at a leaf is checked for
stability against the reduct.  It handles disjunction and aggregates
anywhere, and is meant for correctness checks at desk scale.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .model import (
    FALSE,
    CapacityError,
    Literal,
    Program,
    Rule,
    WeakConstraintSet,
    body_holds,
    compare,
    cost_vector,
    is_model,
    vector_precedes,
)

COHERENT = "COHERENT"
INCOHERENT = "INCOHERENT"
UNKNOWN = "UNKNOWN"

DEFAULT_CAP = 128


@dataclass(frozen=True)
class Budget:
    """Limit for one oracle call.

    ``kind`` is ``"seconds"`` (wall clock) or ``"conflicts"``; the reference
    oracle counts search nodes where the CDCL oracle counts conflicts.
    """

    kind: str = "conflicts"
    amount: float = 0

    def __post_init__(self) -> None:
        if self.kind not in ("seconds", "conflicts"):
            raise ValueError(f"unknown budget kind {self.kind!r}")
        if self.amount < 0:
            raise ValueError("budget must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "Budget":
        text = text.strip()
        unit = text[-1:]
        if unit not in ("s", "c"):
            raise ValueError(f"budget {text!r} must end in 's' or 'c'")
        value = float(text[:-1]) if unit == "s" else int(text[:-1])
        return cls("seconds" if unit == "s" else "conflicts", value)


SolveBudget = Budget


@dataclass
class OracleVerdict:
    status: str
    model: frozenset | None = None
    core: tuple | None = None

    def __post_init__(self) -> None:
        if self.status == COHERENT:
            assert self.model is not None and self.core is None
        elif self.status == INCOHERENT:
            assert self.core is not None and self.model is None
        else:
            assert self.model is None and self.core is None


class BudgetExhausted(Exception):
    pass


class Deadline(Exception):
    """Raised when a global wall-clock deadline passes mid-search."""


# -- compiled search structure -------------------------------------------------

class _Compiled:
    """Index of a program for the DFS: occurrence lists and support lists."""

    def __init__(self, program: Program, cap: int) -> None:
        self.n = len(program.atoms) - 1
        if self.n > cap:
            raise CapacityError(f"{self.n} atoms exceed the enumeration cap {cap}")
        self.rules = list(program.rules)
        self.occurs: list[list[int]] = [[] for _ in range(self.n + 1)]
        self.supports: list[list[int]] = [[] for _ in range(self.n + 1)]
        for i, r in enumerate(self.rules):
            for a in r.atoms():
                self.occurs[a].append(i)
            for h in r.head:
                if h != FALSE:
                    self.supports[h].append(i)
        plain = all(r.is_constraint or all(isinstance(e, Literal) for e in r.body) for r in self.rules)
        self.normal = plain and not any(r.is_disjunctive for r in self.rules)
        # non-monotone aggregates in rule bodies can yield unsupported stable models
        self.use_support = plain


def _lit_value(val, lit: Literal):
    if lit.atom == FALSE:
        return lit.negation == 1
    v = val[lit.atom]
    if v is None:
        return None
    return v if lit.negation != 1 else not v


def _elem_value(val, el):
    if isinstance(el, Literal):
        return _lit_value(val, el)
    lo = hi = 0
    for w, l in el.elements:
        v = _lit_value(val, l)
        if v is None:
            hi += w
        elif v:
            lo += w
            hi += w
    if lo == hi:
        return compare(lo, el.relation, el.bound)
    rel, k = el.relation, el.bound
    if rel == ">=":
        return True if lo >= k else (False if hi < k else None)
    if rel == ">":
        return True if lo > k else (False if hi <= k else None)
    if rel == "<=":
        return True if hi <= k else (False if lo > k else None)
    if rel == "<":
        return True if hi < k else (False if lo >= k else None)
    if rel == "=":
        return False if (k < lo or k > hi) else None
    return True if (k < lo or k > hi) else None


def _body_value(val, body):
    unknown = False
    for el in body:
        v = _elem_value(val, el)
        if v is False:
            return False
        if v is None:
            unknown = True
    return None if unknown else True


def _falsify(val, agg):
    """Element literals whose value is forced by requiring ``agg`` to be false."""
    lo = hi = 0
    open_els = []
    for w, l in agg.elements:
        v = _lit_value(val, l)
        if v is None:
            hi += w
            open_els.append((w, l))
        elif v:
            lo += w
            hi += w
    rel, k = agg.relation, agg.bound
    out = []
    for w, l in open_els:
        if rel == ">=" and lo + w >= k or rel == ">" and lo + w > k:
            make = False
        elif rel == "<=" and hi - w <= k or rel == "<" and hi - w < k:
            make = True
        elif rel == "!=" and hi == k:
            make = True
        elif rel == "!=" and lo == k:
            make = False
        else:
            continue
        out.append((l.atom, make if l.negation != 1 else not make))
    return out or None


class _Search:
    def __init__(self, comp: _Compiled, step_limit, deadline) -> None:
        self.c = comp
        self.steps = 0
        self.step_limit = step_limit
        self.deadline = deadline

    def tick(self) -> None:
        self.steps += 1
        if self.step_limit is not None and self.steps > self.step_limit:
            raise BudgetExhausted
        if self.deadline is not None and (self.steps & 63) == 0 and time.monotonic() > self.deadline:
            raise BudgetExhausted

    def propagate(self, val, queue, rules=None) -> bool:
        """Infer forced values; return False on conflict."""
        c = self.c
        pending = set(rules or ())
        for a in queue:
            pending.update(c.occurs[a])
        check_support = set(queue) if c.use_support else set()
        while pending or check_support:
            while pending:
                ri = pending.pop()
                r = c.rules[ri]
                res = self._rule(val, r)
                if res is False:
                    return False
                if res:
                    for a, v in res:
                        if val[a] is None:
                            val[a] = v
                            pending.update(c.occurs[a])
                            if c.use_support:
                                check_support.add(a)
                                for rj in c.occurs[a]:
                                    check_support.update(h for h in c.rules[rj].head if h != FALSE)
                        elif val[a] != v:
                            return False
            while check_support and not pending:
                a = check_support.pop()
                if a == FALSE or val[a] is False:
                    continue
                possible = False
                for ri in c.supports[a]:
                    r = c.rules[ri]
                    if _body_value(val, r.body) is False:
                        continue
                    if any(val[h] is True for h in r.head if h != a):
                        continue
                    possible = True
                    break
                if not possible:
                    if val[a] is True:
                        return False
                    val[a] = False
                    pending.update(c.occurs[a])
                    for rj in c.occurs[a]:
                        check_support.update(h for h in c.rules[rj].head if h != FALSE)
        return True

    @staticmethod
    def _rule(val, r: Rule):
        head_unknown = []
        for h in r.head:
            if h == FALSE:
                continue
            v = val[h]
            if v is True:
                return None
            if v is None:
                head_unknown.append(h)
        if len(head_unknown) > 1:
            return None
        open_el = None
        for el in r.body:
            v = _elem_value(val, el)
            if v is False:
                return None
            if v is None:
                if open_el is not None:
                    return None
                open_el = el
        if open_el is None:
            if not head_unknown:
                return False
            return [(head_unknown[0], True)]
        if head_unknown:
            return None
        if isinstance(open_el, Literal):
            # body forces the single open literal false
            return [(open_el.atom, open_el.negation == 1)]
        return _falsify(val, open_el)


    def leaves(self, val):
        """Yield total classical models (as value lists) below ``val``."""
        self.tick()
        try:
            a = val.index(None, 1)
        except ValueError:
            yield val
            return
        for choice_value in (False, True):
            child = list(val)
            child[a] = choice_value
            if self.propagate(child, [a]):
                yield from self.leaves(child)


def _stable(comp: _Compiled, interp: frozenset, guard: int = 20) -> bool:
    """Stability of a classical model; least-model shortcut for normal programs."""
    active = [r for r in comp.rules if not r.is_constraint and body_holds(interp, r.body)]
    if comp.normal:
        derived: set[int] = set()
        heads = [(next(iter(r.head)), r.positive_body()) for r in active]
        changed = True
        while changed:
            changed = False
            for h, pos in heads:
                if h not in derived and pos <= derived:
                    derived.add(h)
                    changed = True
        return derived == set(interp)
    # any J modelling the reduct contains the closure of single-effective-head rules
    forced: set[int] = set()
    changed = True
    while changed:
        changed = False
        for r in active:
            eff = [h for h in r.head if h in interp]
            if len(eff) == 1 and eff[0] not in forced and all(
                isinstance(e, Literal) and (e.negated or e.atom in forced) for e in r.body
            ):
                forced.add(eff[0])
                changed = True
    rest = sorted(interp - forced)
    if len(rest) > guard:
        raise CapacityError(f"minimality check over {len(rest)} atoms exceeds guard {guard}")
    base = frozenset(forced)
    for size in range(len(rest)):
        for sub in combinations(rest, size):
            if _models_reduct(base | frozenset(sub), active):
                return False
    return True


def _models_reduct(j: frozenset, active: Sequence[Rule]) -> bool:
    """Does ``j`` model the reduct built from ``active`` (rules whose body holds)?"""
    for r in active:
        ok = True
        for el in r.body:
            if isinstance(el, Literal):
                if el.negated:
                    continue  # satisfied in interp, rewritten to true
                if el.atom not in j:
                    ok = False
                    break
            else:
                if not compare(sum(w for w, l in el.elements if _lit_in(j, l)), el.relation, el.bound):
                    ok = False
                    break
        if ok and not any(h in j for h in r.head):
            return False
    return True


def _lit_in(interp, lit: Literal) -> bool:
    present = lit.atom in interp
    return present if lit.negation != 1 else not present


# -- public API ----------------------------------------------------------------

def _search_models(comp: _Compiled, assumptions: Iterable[int], step_limit=None, deadline=None):
    """Generator of stable models containing ``assumptions``, in DFS order."""
    search = _Search(comp, step_limit, deadline)
    val = [None] * (comp.n + 1)
    val[0] = False
    for a in assumptions:
        if a == FALSE:
            return
        val[a] = True
    search.tick()
    if not search.propagate(val, range(1, comp.n + 1), range(len(comp.rules))):
        return
    for leaf in search.leaves(val):
        interp = frozenset(a for a in range(1, comp.n + 1) if leaf[a])
        if is_model(interp, comp.rules) and _stable(comp, interp):
            yield interp


def enumerate_stable(program: Program, cap: int = DEFAULT_CAP) -> set[frozenset]:
    return set(_search_models(_Compiled(program, cap), ()))


class RefOracle:
    """Assumption-based oracle by exhaustive search.

    ``core_mode`` is ``"raw"`` (the whole assumption set is the core unless
    the program alone is incoherent) or ``"minimal"`` (deletion-based).
    """

    def __init__(self, program: Program, core_mode: str = "raw", cap: int = DEFAULT_CAP, deadline=None) -> None:
        if core_mode not in ("raw", "minimal"):
            raise ValueError(f"unknown core mode {core_mode!r}")
        self.program = program
        self.core_mode = core_mode
        self.cap = cap
        self.deadline = deadline
        self.calls = 0
        self._compiled: tuple | None = None
        self._coherent_cache: tuple | None = None

    def add_rule(self, rule: Rule) -> None:
        self.program.add(rule)

    def _key(self):
        return len(self.program.rules), len(self.program.atoms)

    def _comp(self) -> _Compiled:
        key = self._key()
        if self._compiled is None or self._compiled[0] != key:
            self._compiled = (key, _Compiled(self.program, self.cap))
        return self._compiled[1]

    def first_model(self, assumptions, step_limit=None, deadline=None):
        for m in _search_models(self._comp(), assumptions, step_limit, deadline):
            return m
        return None

    def _unbudgeted(self, assumptions):
        try:
            return self.first_model(assumptions, None, self.deadline)
        except BudgetExhausted:
            raise Deadline from None

    def _coherent(self) -> bool:
        key = self._key()
        if self._coherent_cache is None or self._coherent_cache[0] != key:
            self._coherent_cache = (key, self._unbudgeted(()) is not None)
        return self._coherent_cache[1]

    def solve(self, assumptions: Sequence[int] = (), budget: Budget | None = None) -> OracleVerdict:
        self.calls += 1
        assumptions = list(dict.fromkeys(assumptions))
        step_limit = None
        deadline = self.deadline
        if budget is not None:
            if budget.kind == "conflicts":
                step_limit = int(budget.amount)
                if step_limit <= 0:
                    return OracleVerdict(UNKNOWN)
            else:
                end = time.monotonic() + budget.amount
                deadline = end if deadline is None else min(deadline, end)
        try:
            model = self.first_model(assumptions, step_limit, deadline)
        except BudgetExhausted:
            if self.deadline is not None and time.monotonic() > self.deadline:
                raise Deadline from None
            return OracleVerdict(UNKNOWN)
        if model is not None:
            return OracleVerdict(COHERENT, model=model)
        if not assumptions or not self._coherent():
            return OracleVerdict(INCOHERENT, core=())
        core = assumptions
        if self.core_mode == "minimal":
            core = minimize_core(lambda trial: self._unbudgeted(trial) is None, core)
        return OracleVerdict(INCOHERENT, core=tuple(core))

    def solve_with_budget(self, assumptions: Sequence[int], budget: Budget) -> OracleVerdict:
        return self.solve(assumptions, budget)


def minimize_core(is_unsat, core: Sequence[int]) -> list[int]:
    """Deletion-based minimization; keeps the input order.

    ``is_unsat(subset)`` must report whether the subset is still a core.
    """
    core = list(core)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if is_unsat(trial):
            core = trial
        else:
            i += 1
    return core


def solve(program: Program, assumptions: Sequence[int] = (), core_mode: str = "raw", cap: int = DEFAULT_CAP) -> OracleVerdict:
    return RefOracle(program, core_mode, cap).solve(assumptions)


def solve_with_budget(program: Program, assumptions: Sequence[int], budget: Budget, core_mode: str = "raw") -> OracleVerdict:
    return RefOracle(program, core_mode).solve(assumptions, budget)


def optimum_oracle(program: Program, weak: WeakConstraintSet, cap: int = DEFAULT_CAP):
    """All optimum stable models with their cost vector, or ``None`` if incoherent."""
    levels = weak.levels()
    best_vec = None
    best: list[frozenset] = []
    for m in enumerate_stable(program, cap):
        vec = cost_vector(weak, m, levels)
        if best_vec is None or vector_precedes(vec, best_vec):
            best_vec, best = vec, [m]
        elif vec == best_vec:
            best.append(m)
    if best_vec is None:
        return None
    return best_vec, sorted(best, key=sorted)
