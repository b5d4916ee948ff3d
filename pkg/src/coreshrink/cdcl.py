"""Conflict-driven stable-model oracle with assumptions.

The program is encoded by its completion: one body variable per rule,
rule clauses ``body -> head`` and support clauses ``a -> some body``.
Aggregates (in integrity constraints only) become counter-propagated linear
constraints ``sum(c_i * l_i) >= k``.  Total assignments are checked for
stability; an unfounded set yields loop nogoods and search goes on.
Disjunctive rules are supported with a nested minimality check.

Solver literals are ints: ``2*v`` is ``v`` true and ``2*v + 1`` is ``v`` false.
"""
from __future__ import annotations

import heapq
import random
import time
from typing import Sequence

from .model import FALSE, Aggregate, Literal, Program, Rule
from .oracle_ref import COHERENT, INCOHERENT, UNKNOWN, Budget, Deadline, OracleVerdict


class UnsupportedFeature(ValueError):
    pass


def _neg(lit: int) -> int:
    return lit ^ 1


def _luby(i: int) -> int:
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i %= size
    return 1 << seq


class _Linear:
    """``sum(coef * lit) >= bound`` with a running slack."""

    __slots__ = ("lits", "coefs", "bound", "slack", "order")

    def __init__(self, lits: list[int], coefs: list[int], bound: int) -> None:
        self.lits = lits
        self.coefs = coefs
        self.bound = bound
        self.slack = sum(coefs) - bound
        self.order = sorted(range(len(lits)), key=lambda i: -coefs[i])


class SatCore:
    """CDCL engine: clauses, linear constraints, assumptions, final-conflict cores."""

    def __init__(self, seed: int = 0) -> None:
        self.nvars = 0
        self.value: list[int] = []  # -1 unassigned, 0 false, 1 true
        self.level: list[int] = []
        self.reason: list = []
        self.trail_pos: list[int] = []
        self.activity: list[float] = []
        self.phase: list[int] = []
        self.watches: list[list[list[int]]] = []
        self.lin_occ: list[list[tuple[_Linear, int]]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[list[int]] = []
        self.learnts: list[list[int]] = []
        self.linears: list[_Linear] = []
        self.ok = True
        self.var_inc = 1.0
        self.heap: list[tuple[float, int]] = []
        self.rng = random.Random(seed)
        self.conflicts = 0
        self.true_lit = 2 * self.new_var()
        self._enqueue(self.true_lit, None)

    # -- variables ---------------------------------------------------------------
    def new_var(self) -> int:
        v = self.nvars
        self.nvars += 1
        self.value.append(-1)
        self.level.append(0)
        self.reason.append(None)
        self.trail_pos.append(0)
        self.activity.append(self.rng.random() * 1e-5)
        self.phase.append(0)
        self.watches.append([])
        self.watches.append([])
        self.lin_occ.append([])
        self.lin_occ.append([])
        heapq.heappush(self.heap, (-self.activity[v], v))
        return v

    def lit_value(self, lit: int) -> int:
        v = self.value[lit >> 1]
        if v < 0:
            return -1
        return v ^ (lit & 1)

    def decision_level(self) -> int:
        return len(self.trail_lim)

    def _enqueue(self, lit: int, reason) -> None:
        v = lit >> 1
        self.value[v] = 1 - (lit & 1)
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail_pos[v] = len(self.trail)
        self.trail.append(lit)
        for lin, c in self.lin_occ[lit ^ 1]:
            lin.slack -= c

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for i in range(len(self.trail) - 1, start - 1, -1):
            lit = self.trail[i]
            v = lit >> 1
            self.phase[v] = self.value[v]
            self.value[v] = -1
            self.reason[v] = None
            for lin, c in self.lin_occ[lit ^ 1]:
                lin.slack += c
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = min(self.qhead, start)

    # -- constraints -------------------------------------------------------------
    def add_clause(self, lits: Sequence[int]) -> bool:
        """Add a clause at decision level 0.  Returns False once unsatisfiable."""
        assert self.decision_level() == 0
        if not self.ok:
            return False
        out = []
        seen = set()
        for l in lits:
            val = self.lit_value(l)
            if val == 1 or (l ^ 1) in seen:
                return True
            if val == 0 or l in seen:
                continue
            seen.add(l)
            out.append(l)
        if not out:
            self.ok = False
            return False
        if len(out) == 1:
            self._enqueue(out[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self.clauses.append(out)
        self.watches[out[0] ^ 1].append(out)
        self.watches[out[1] ^ 1].append(out)
        return True

    def add_linear(self, lits: Sequence[int], coefs: Sequence[int], bound: int) -> bool:
        """Add ``sum(coefs[i] * lits[i]) >= bound`` at level 0."""
        assert self.decision_level() == 0
        if not self.ok:
            return False
        terms: dict[int, int] = {}
        for l, c in zip(lits, coefs):
            if c <= 0:
                continue
            terms[l] = terms.get(l, 0) + c
        # merge complementary literals: c1*l + c2*~l = min + |c1-c2| * (dominant)
        for l in list(terms):
            if l in terms and (l ^ 1) in terms:
                a, b = terms.pop(l), terms.pop(l ^ 1)
                m = min(a, b)
                bound -= m
                if a > b:
                    terms[l] = a - b
                elif b > a:
                    terms[l ^ 1] = b - a
        # fold level-0 values
        for l in list(terms):
            val = self.lit_value(l)
            if val == 1:
                bound -= terms.pop(l)
            elif val == 0:
                terms.pop(l)
        if bound <= 0:
            return True
        lits2 = list(terms)
        coefs2 = [min(terms[l], bound) for l in lits2]
        if sum(coefs2) < bound:
            self.ok = False
            return False
        if all(c >= bound for c in coefs2):
            return self.add_clause(lits2)
        lin = _Linear(lits2, coefs2, bound)
        self.linears.append(lin)
        for l, c in zip(lits2, coefs2):
            self.lin_occ[l].append((lin, c))
        for i in lin.order:
            if lin.coefs[i] <= lin.slack:
                break
            l = lin.lits[i]
            if self.lit_value(l) < 0:
                self._enqueue(l, None)
        if self._propagate() is not None:
            self.ok = False
        return self.ok

    # -- propagation -------------------------------------------------------------
    def _linear_reason(self, lin: _Linear, implied: int) -> list[int]:
        pos = self.trail_pos[implied >> 1]
        out = [implied]
        for l in lin.lits:
            if l != implied and self.lit_value(l) == 0 and self.trail_pos[l >> 1] < pos:
                out.append(l)
        return out

    def _propagate(self):
        """Unit propagation; returns a conflict clause or None."""
        trail = self.trail
        value = self.value
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = p ^ 1
            ws = self.watches[p]
            i = j = 0
            n = len(ws)
            conflict = None
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                fv = value[first >> 1]
                if fv >= 0 and (fv ^ (first & 1)) == 1:
                    ws[j] = c
                    j += 1
                    continue
                found = False
                for k in range(2, len(c)):
                    l = c[k]
                    lv = value[l >> 1]
                    if lv < 0 or (lv ^ (l & 1)) == 1:
                        c[1], c[k] = l, false_lit
                        self.watches[l ^ 1].append(c)
                        found = True
                        break
                if found:
                    continue
                ws[j] = c
                j += 1
                if fv >= 0:  # first is false
                    conflict = c
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    break
                self._enqueue(first, c)
            del ws[j:]
            if conflict is not None:
                self.qhead = len(trail)
                return conflict
            for lin, _ in self.lin_occ[false_lit]:
                if lin.slack < 0:
                    self.qhead = len(trail)
                    return [l for l in lin.lits if self.lit_value(l) == 0]
                for idx in lin.order:
                    if lin.coefs[idx] <= lin.slack:
                        break
                    l = lin.lits[idx]
                    if value[l >> 1] < 0:
                        self._enqueue(l, ("lin", lin))
        return None

    def _reason_clause(self, v: int) -> list[int]:
        r = self.reason[v]
        if isinstance(r, tuple):
            implied = 2 * v + (1 - self.value[v])
            return self._linear_reason(r[1], implied)
        return r

    # -- analysis ----------------------------------------------------------------
    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[x], x) for x in range(self.nvars) if self.value[x] < 0]
            heapq.heapify(self.heap)
        elif self.value[v] < 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _analyze(self, confl: list[int]) -> tuple[list[int], int]:
        seen = set()
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        cur = self.decision_level()
        lits = confl
        while True:
            for q in lits:
                if p is not None and q == p:
                    continue
                v = q >> 1
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if self.level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while (self.trail[idx] >> 1) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter <= 0:
                break
            lits = self._reason_clause(p >> 1)
        learnt[0] = p ^ 1
        self.var_inc *= 1.05
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda i: self.level[learnt[i] >> 1])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[learnt[1] >> 1]

    def _analyze_final(self, p: int) -> set[int]:
        """Assumption literals responsible for ``p`` being false."""
        out = {p ^ 1}
        if self.decision_level() == 0:
            return out
        seen = {p >> 1}
        for i in range(len(self.trail) - 1, self.trail_lim[0] - 1, -1):
            lit = self.trail[i]
            v = lit >> 1
            if v not in seen:
                continue
            if self.reason[v] is None:
                if self.level[v] > 0:
                    out.add(lit)
            else:
                for q in self._reason_clause(v)[1:]:
                    if self.level[q >> 1] > 0:
                        seen.add(q >> 1)
        return out

    def _learn(self, learnt: list[int]) -> None:
        if len(learnt) == 1:
            self._enqueue(learnt[0], None)
            return
        self.learnts.append(learnt)
        self.watches[learnt[0] ^ 1].append(learnt)
        self.watches[learnt[1] ^ 1].append(learnt)
        self._enqueue(learnt[0], learnt)

    def _attach_falsified(self, clause: list[int]) -> None:
        """Attach a clause that is false under the current assignment."""
        clause.sort(key=lambda l: -self.level[l >> 1])
        self.clauses.append(clause)
        self.watches[clause[0] ^ 1].append(clause)
        self.watches[clause[1] ^ 1].append(clause)

    def _pick_branch(self) -> int:
        heap = self.heap
        while heap:
            _, v = heapq.heappop(heap)
            if self.value[v] < 0:
                return v
        return -1

    # -- search --------------------------------------------------------------------
    def search(self, assumptions: Sequence[int], conflict_limit=None, deadline=None, on_model=None):
        """Return ("sat", None) / ("unsat", core literals) / ("unknown", None).

        ``on_model`` may return a list of clauses falsified by the current total
        assignment; they are added and search continues.
        """
        if not self.ok:
            return "unsat", set()
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return "unsat", set()
        start_conflicts = self.conflicts
        restart = 0
        budget_left = 100 * _luby(restart)
        steps = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                if conflict_limit is not None and self.conflicts - start_conflicts > conflict_limit:
                    self._cancel_until(0)
                    return "unknown", None
                if self.decision_level() == 0:
                    self.ok = False
                    return "unsat", set()
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                self._learn(learnt)
                budget_left -= 1
                continue
            steps += 1
            if deadline is not None and (steps & 127) == 0 and time.monotonic() > deadline:
                self._cancel_until(0)
                return "unknown", None
            if budget_left <= 0 and self.decision_level() > len(assumptions):
                restart += 1
                budget_left = 100 * _luby(restart)
                self._cancel_until(len(assumptions))
                continue
            lvl = self.decision_level()
            if lvl < len(assumptions):
                p = assumptions[lvl]
                val = self.lit_value(p)
                if val == 1:
                    self.trail_lim.append(len(self.trail))
                    continue
                if val == 0:
                    core = self._analyze_final(p ^ 1)
                    self._cancel_until(0)
                    return "unsat", core
                self.trail_lim.append(len(self.trail))
                self._enqueue(p, None)
                continue
            v = self._pick_branch()
            if v < 0:
                extra = on_model() if on_model is not None else None
                if not extra:
                    return "sat", None
                units = [c[0] for c in extra if len(c) == 1]
                if units:
                    self._cancel_until(0)
                    for c in extra:
                        if len(c) > 1:
                            self.add_clause(c)
                    for u in units:
                        if not self.add_clause([u]):
                            return "unsat", set()
                    continue
                for c in extra:
                    self._attach_falsified(c)
                confl = extra[0]
                top = self.level[confl[0] >> 1]
                self.conflicts += 1
                if top == 0:
                    self._cancel_until(0)
                    self.ok = False
                    return "unsat", set()
                if conflict_limit is not None and self.conflicts - start_conflicts > conflict_limit:
                    self._cancel_until(0)
                    return "unknown", None
                self._cancel_until(top)
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                self._learn(learnt)
                continue
            self.trail_lim.append(len(self.trail))
            self._enqueue(2 * v + (1 - self.phase[v]), None)


class CdclOracle:
    """Incremental stable-model oracle over a growing :class:`Program`."""

    def __init__(self, program: Program | None = None, seed: int = 0, deadline=None) -> None:
        self.program = Program(program.atoms if program is not None else None)
        self.seed = seed
        self.deadline = deadline
        self.calls = 0
        self.rebuilds = 0
        self._reset()
        if program is not None:
            for r in program.rules:
                self.add_rule(r)

    @classmethod
    def load(cls, program: Program, seed: int = 0) -> "CdclOracle":
        return cls(program, seed)

    def _reset(self) -> None:
        self.sat = SatCore(self.seed)
        self.var_of: dict[int, int] = {}
        self.atom_of: dict[int, int] = {}
        self.supports: dict[int, list[int]] = {}  # atom -> support literals
        self.closed: set[int] = set()
        self.disjunctive = False
        self.rule_info: list[tuple[Rule, int]] = []  # (rule, body literal) for non-constraints
        self.dirty = False
        self._pending_support: set[int] = set()

    # -- encoding ------------------------------------------------------------------
    def _atom_var(self, atom: int) -> int:
        v = self.var_of.get(atom)
        if v is None:
            v = self.sat.new_var()
            self.var_of[atom] = v
            self.atom_of[v] = atom
            self._pending_support.add(atom)
        return v

    def _lit(self, lit: Literal) -> int:
        if lit.atom == FALSE:
            return self.sat.true_lit ^ (0 if lit.negation == 1 else 1)
        v = self._atom_var(lit.atom)
        return 2 * v + (1 if lit.negation == 1 else 0)

    def _and(self, lits: list[int]) -> int:
        if not lits:
            return self.sat.true_lit
        if len(lits) == 1:
            return lits[0]
        b = 2 * self.sat.new_var()
        for l in lits:
            self.sat.add_clause([b ^ 1, l])
        self.sat.add_clause([b] + [l ^ 1 for l in lits])
        return b

    def _geq(self, terms: list[tuple[int, int]], k: int) -> int:
        """Literal equivalent to ``sum(c * l) >= k``."""
        total = sum(c for c, _ in terms)
        if k <= 0:
            return self.sat.true_lit
        if k > total:
            return self.sat.true_lit ^ 1
        g = 2 * self.sat.new_var()
        lits = [l for _, l in terms]
        coefs = [c for c, _ in terms]
        self.sat.add_linear(lits + [g ^ 1], coefs + [k], k)
        rev = total - k + 1
        self.sat.add_linear([l ^ 1 for l in lits] + [g], coefs + [rev], rev)
        return g

    def _terms(self, agg: Aggregate) -> list[tuple[int, int]]:
        return [(w, self._lit(l)) for w, l in agg.elements if w > 0]

    def _agg_lit(self, agg: Aggregate) -> int:
        t, k, rel = self._terms(agg), agg.bound, agg.relation
        if rel == ">=":
            return self._geq(t, k)
        if rel == ">":
            return self._geq(t, k + 1)
        if rel == "<=":
            return self._geq(t, k + 1) ^ 1
        if rel == "<":
            return self._geq(t, k) ^ 1
        ge, gt = self._geq(t, k), self._geq(t, k + 1)
        eq = self._and([ge, gt ^ 1])
        return eq if rel == "=" else eq ^ 1

    def _forbid_aggregate(self, agg: Aggregate) -> None:
        """Encode ``:- agg.`` directly as linear constraints."""
        t, k, rel = self._terms(agg), agg.bound, agg.relation
        lits = [l for _, l in t]
        coefs = [c for c, _ in t]
        total = sum(coefs)
        neg = [l ^ 1 for l in lits]

        def at_most(m: int) -> None:  # sum <= m
            self.sat.add_linear(neg, coefs, total - m)

        def at_least(m: int) -> None:
            self.sat.add_linear(lits, coefs, m)

        if rel == ">=":
            at_most(k - 1)
        elif rel == ">":
            at_most(k)
        elif rel == "<=":
            at_least(k + 1)
        elif rel == "<":
            at_least(k)
        elif rel == "!=":
            at_least(k)
            at_most(k)
        else:
            self.sat.add_clause([self._geq(t, k) ^ 1, self._geq(t, k + 1)])

    def _check_rule(self, rule: Rule) -> None:
        if not rule.is_constraint and any(isinstance(e, Aggregate) for e in rule.body):
            raise UnsupportedFeature(
                "aggregates are supported only in integrity constraints; use the enumeration oracle"
            )

    def add_rule(self, rule: Rule) -> None:
        self._check_rule(rule)
        self.program.add(rule)
        if self.dirty:
            return
        if any(h in self.closed for h in rule.head):
            self.dirty = True  # completion of a closed atom changes: rebuild lazily
            return
        self._encode(rule)

    def _encode(self, rule: Rule) -> None:
        if rule.is_constraint:
            if len(rule.body) == 1 and isinstance(rule.body[0], Aggregate):
                self._forbid_aggregate(rule.body[0])
                return
            lits = [self._agg_lit(e) if isinstance(e, Aggregate) else self._lit(e) for e in rule.body]
            self.sat.add_clause([l ^ 1 for l in lits])
            return
        body = self._and([self._lit(e) for e in rule.body])
        heads = sorted(rule.head)
        head_lits = [2 * self._atom_var(h) for h in heads]
        self.sat.add_clause([body ^ 1] + head_lits)
        self.rule_info.append((rule, body))
        if len(heads) == 1:
            self.supports.setdefault(heads[0], []).append(body)
        else:
            self.disjunctive = True
            for h in heads:
                others = [2 * self.var_of[o] + 1 for o in heads if o != h]
                self.supports.setdefault(h, []).append(self._and([body] + others))

    def _close_supports(self) -> None:
        for atom in sorted(self._pending_support):
            if atom in self.closed:
                continue
            v = self.var_of[atom]
            self.sat.add_clause([2 * v + 1] + self.supports.get(atom, []))
            self.closed.add(atom)
        self._pending_support.clear()

    def _rebuild(self) -> None:
        rules = list(self.program.rules)
        self._reset()
        self.rebuilds += 1
        for r in rules:
            self._encode(r)

    # -- stability -----------------------------------------------------------------
    def _candidate(self) -> frozenset:
        val = self.sat.value
        return frozenset(a for a, v in self.var_of.items() if val[v] == 1)

    def unfounded_set(self, model: frozenset) -> set[int]:
        """Atoms of ``model`` not derivable in its reduct (empty if stable)."""
        active = [(r, b) for r, b in self.rule_info if self.sat.lit_value(b) == 1]
        if not self.disjunctive:
            derived: set[int] = set()
            pending = [(next(iter(r.head)), r.positive_body()) for r, _ in active]
            changed = True
            while changed:
                changed = False
                rest = []
                for h, pos in pending:
                    if pos <= derived:
                        if h not in derived:
                            derived.add(h)
                            changed = True
                    else:
                        rest.append((h, pos))
                pending = rest
            return set(model) - derived
        return self._disjunctive_unfounded(model, [r for r, _ in active])

    def _disjunctive_unfounded(self, model: frozenset, active: list[Rule]) -> set[int]:
        inner = SatCore(self.seed)
        var = {a: inner.new_var() for a in sorted(model)}
        for r in active:
            clause = [2 * var[a] + 1 for a in r.positive_body()]
            clause += [2 * var[h] for h in r.head if h in var]
            inner.add_clause(clause)
        inner.add_clause([2 * var[a] + 1 for a in var])
        status, _ = inner.search([])
        if status != "sat":
            return set()
        return {a for a, v in var.items() if inner.value[v] != 1}

    def loop_nogoods(self, model: frozenset, unfounded: set[int]) -> list[list[int]]:
        sat = self.sat
        external: list[int] = []
        for r, body in self.rule_info:
            if not (r.head & unfounded) or (r.positive_body() & unfounded):
                continue
            if sat.lit_value(body) == 0:
                external.append(body)
                continue
            other = sorted(h for h in r.head - unfounded if h in model)
            if not other:
                raise AssertionError("external support is active; unfounded set is wrong")
            external.append(2 * self.var_of[other[0]] + 1)
        external = list(dict.fromkeys(external))
        return [[2 * self.var_of[u] + 1] + external for u in sorted(unfounded)]

    def stability_check(self, candidate: frozenset | None = None):
        """``None`` if the current total assignment is stable, else loop nogoods."""
        model = self._candidate() if candidate is None else candidate
        unfounded = self.unfounded_set(model)
        if not unfounded:
            return None
        return self.loop_nogoods(model, unfounded)

    # -- solving -------------------------------------------------------------------
    def solve(self, assumptions: Sequence[int] = (), budget: Budget | None = None) -> OracleVerdict:
        self.calls += 1
        if self.dirty:
            self._rebuild()
        for a in assumptions:
            self._atom_var(a)
        self._close_supports()
        assumptions = list(dict.fromkeys(assumptions))
        lits = [2 * self.var_of[a] for a in assumptions]
        conflict_limit = None
        deadline = self.deadline
        if budget is not None:
            if budget.kind == "conflicts":
                conflict_limit = int(budget.amount)
            else:
                end = time.monotonic() + budget.amount
                deadline = end if deadline is None else min(deadline, end)
        try:
            status, core = self.sat.search(lits, conflict_limit, deadline, self.stability_check)
            model = self._candidate() if status == "sat" else None
        finally:
            self.sat._cancel_until(0)
        if status == "sat":
            return OracleVerdict(COHERENT, model=model)
        if status == "unsat":
            core_atoms = {self.atom_of[l >> 1] for l in core}
            return OracleVerdict(INCOHERENT, core=tuple(a for a in assumptions if a in core_atoms))
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise Deadline
        return OracleVerdict(UNKNOWN)

    def solve_with_budget(self, assumptions: Sequence[int], budget: Budget) -> OracleVerdict:
        return self.solve(assumptions, budget)
