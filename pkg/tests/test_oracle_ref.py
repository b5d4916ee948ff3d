from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import names, relaxed
from coreshrink.generate import GenConfig, random_instance
from coreshrink.model import AtomTable, CapacityError, Literal, Program, choice, constraint, is_stable
from coreshrink.oracle_ref import (
    COHERENT,
    INCOHERENT,
    UNKNOWN,
    Budget,
    RefOracle,
    enumerate_stable,
    minimize_core,
    optimum_oracle,
    solve,
    solve_with_budget,
)


def test_enumerate_example1(pi1_w1):
    models = enumerate_stable(pi1_w1.program)
    assert sorted(names(pi1_w1.atoms, m) for m in models) == [["a"], ["d"]]


def test_enumerate_trivial_cases():
    t = AtomTable()
    a = t.add("a")
    assert enumerate_stable(Program(t, [constraint(Literal(a, 1))])) == set()
    assert enumerate_stable(Program()) == {frozenset()}


def test_example5_level2_model(pi1_w1):
    prog, softs, _ = relaxed(pi1_w1, [2])
    v = solve(prog, [softs[0]])
    assert v.status == COHERENT
    assert names(prog.atoms, v.model) == ["@soft_1", "a"]


def test_example4_cores(pi1_w1):
    prog, softs, _ = relaxed(pi1_w1)
    raw = solve(prog, softs)
    assert raw.status == INCOHERENT and raw.core == tuple(softs)
    minimal = solve(prog, softs, core_mode="minimal")
    assert names(prog.atoms, minimal.core) == ["@soft_1", "@soft_2"]


def test_empty_assumptions_coherent(pi1_w1):
    assert solve(pi1_w1.program, []).status == COHERENT


def test_zero_budget_is_unknown(pi1_w1):
    v = solve_with_budget(pi1_w1.program, [], Budget("conflicts", 0))
    assert v.status == UNKNOWN and v.model is None and v.core is None


def test_incoherent_program_gives_empty_core():
    t = AtomTable()
    a, b = t.add("a"), t.add("b")
    p = Program(t, [choice(b), constraint(Literal(a, 1))])
    v = solve(p, [b])
    assert v.status == INCOHERENT and v.core == ()


def test_capacity_error():
    t = AtomTable()
    for i in range(10):
        t.add(f"p{i}")
    with pytest.raises(CapacityError):
        enumerate_stable(Program(t), cap=5)


def test_budget_parse():
    assert Budget.parse("10s") == Budget("seconds", 10.0)
    assert Budget.parse("100c") == Budget("conflicts", 100)
    with pytest.raises(ValueError):
        Budget.parse("10")
    with pytest.raises(ValueError):
        Budget("steps", 1)


def test_minimize_core_keeps_order():
    unsat = lambda s: {2, 5} <= set(s)
    assert minimize_core(unsat, [1, 2, 3, 5, 7]) == [2, 5]


def test_optimum_oracle_examples(pi1_w1, pi1_w2):
    vec, models = optimum_oracle(pi1_w1.program, pi1_w1.weak)
    assert vec == {2: 0, 1: 2} and [names(pi1_w1.atoms, m) for m in models] == [["a"]]
    vec2, models2 = optimum_oracle(pi1_w2.program, pi1_w2.weak)
    assert vec2 == {1: 1} and len(models2) == 2


def _brute_stable(program):
    atoms = list(program.atoms.atoms())
    return {
        frozenset(s)
        for k in range(len(atoms) + 1)
        for s in combinations(atoms, k)
        if is_stable(program, frozenset(s))
    }


small = GenConfig(max_atoms=7, max_rules=10)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_enumeration_matches_definition(seed, disjunctive):
    cfg = GenConfig(max_atoms=7, max_rules=10, disjunctive_prob=0.3 if disjunctive else 0.0)
    inst = random_instance(seed, cfg)
    assert enumerate_stable(inst.program) == _brute_stable(inst.program)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.data())
def test_core_soundness_and_minimality(seed, data):
    inst = random_instance(seed, small)
    prog = inst.program
    atoms = list(prog.atoms.atoms())
    assumptions = data.draw(st.lists(st.sampled_from(atoms), max_size=4, unique=True))
    models = enumerate_stable(prog)
    for mode in ("raw", "minimal"):
        v = RefOracle(prog, mode).solve(assumptions)
        expected = any(set(assumptions) <= m for m in models)
        assert (v.status == COHERENT) == expected
        if v.status == COHERENT:
            assert v.model in models and set(assumptions) <= v.model
            continue
        assert set(v.core) <= set(assumptions)
        hardened = Program(prog.atoms, prog.rules + [constraint(Literal(p, 1)) for p in v.core])
        assert solve(hardened, []).status == INCOHERENT
        if mode == "minimal":
            for i in range(len(v.core)):
                rest = v.core[:i] + v.core[i + 1:]
                assert any(set(rest) <= m for m in models)
