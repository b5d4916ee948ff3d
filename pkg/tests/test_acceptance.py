"""Acceptance suite: one test per criterion; conftest prints a PASS/FAIL line for each.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import itertools
import math
import random
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from conftest import DATA, load, relaxed  # noqa: E402
from coreshrink.generate import random_instance  # noqa: E402
from coreshrink.optimize import StrategyConfig, optimize, shrink_core, strategy_matrix  # noqa: E402
from coreshrink.oracle_ref import UNKNOWN, Budget, RefOracle, enumerate_stable, optimum_oracle  # noqa: E402
from coreshrink.cdcl import CdclOracle  # noqa: E402
from coreshrink.relax import compile_levels, relax_core  # noqa: E402
from coreshrink.report import CORE_FOUND, EventLog, bench, epsilon, read_csv, write_csv  # noqa: E402
from coreshrink.model import is_stable, reduct  # noqa: E402
from coreshrink.textio import ParsedInstance, format_rule, parse_wcnf, serialize_program, structure  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"
SUITE_SIZE = 500
AMPLE = Budget("conflicts", 10**6)


def _suite():
    return [random_instance(seed) for seed in range(SUITE_SIZE)]


class _Unknown:
    status = UNKNOWN
    model = None
    core = ()


def test_criterion_1_example1_semantics():
    t0 = time.monotonic()
    inst = load("pi1_w1.lp")
    ids = inst.atoms.index
    a, d = ids["a"], ids["d"]
    assert enumerate_stable(inst.program) == {frozenset({a}), frozenset({d})}
    assert structure(ParsedInstance(reduct(inst.program, frozenset({a}))))[0] == [(("a", "c"), ())]
    assert structure(ParsedInstance(reduct(inst.program, frozenset({d}))))[0] == [(("d",), ())]
    assert is_stable(inst.program, frozenset({a})) and not is_stable(inst.program, frozenset({a, d}))
    assert time.monotonic() - t0 < 1


def test_criterion_2_example2_optimum():
    t0 = time.monotonic()
    inst = load("pi1_w1.lp")
    configs = []
    for oracle, mode in (("cdcl", "raw"), ("enum", "raw"), ("enum", "minimal")):
        for cfg in strategy_matrix(oracle, core_mode=mode, shrink_budget=AMPLE):
            configs += [cfg, StrategyConfig(**{**cfg.__dict__, "compile_levels": True})]
    for cfg in configs:
        res = optimize(inst, cfg)
        assert res.status == "OPTIMUM", cfg.name
        assert res.names == ["a"], (cfg.name, res.names)
        if cfg.compile_levels:
            assert res.cost == {1: 2}, cfg.name  # 0 * 6 + 2
        else:
            assert res.cost == {2: 0, 1: 2}, cfg.name
    assert time.monotonic() - t0 < 1


def test_criterion_3_example4_core():
    prog, softs, _ = relaxed(load("pi1_w1.lp"))
    v = RefOracle(prog, "minimal").solve(softs)
    assert set(v.core) == set(softs[:2])


def test_criterion_4_examples5_6_trace():
    inst = load("pi1_w2.lp")
    log = EventLog()
    states = []
    res = optimize(inst, StrategyConfig(oracle="enum", core_mode="raw"), log, states)
    first = log.of(CORE_FOUND)[0].payload["core"]
    atoms = states[0].program.atoms
    assert [atoms.name(p) for p in first] == ["@soft_1", "@soft_2", "@soft_3", "@soft_4"]
    core, out = states[0].last_relaxation
    assert core == first
    assert [format_rule(r, atoms) for r in out.added_rules] == [
        "@soft_5 :- not not @soft_5.",
        "@soft_6 :- not not @soft_6.",
        "@soft_7 :- not not @soft_7.",
        ":- @soft_5, not @soft_6.",
        ":- @soft_6, not @soft_7.",
        ":- count{ @soft_1, @soft_2, @soft_3, @soft_4, not @soft_5, not @soft_6, not @soft_7 } < 3.",
    ]
    assert res.status == "OPTIMUM" and res.lb_vector == res.cost == {1: 1}
    assert states[0].lb == states[0].ub == 1


def test_criterion_5_example7_shrinking():
    prog, softs, _ = relaxed(load("pi1_w2.lp"))
    ref = RefOracle(prog)
    st = shrink_core(softs, "progression", AMPLE, ref.solve_with_budget)
    assert st.probes == [1, 2] and st.core == tuple(softs[:2])

    def kill_pairs(probe, budget):
        return _Unknown() if len(probe) == 2 else ref.solve_with_budget(probe, budget)

    st = shrink_core(softs, "progression", AMPLE, kill_pairs)
    assert st.probes[:2] == [1, 2]
    assert st.core in (tuple(softs[:3]), tuple(softs))
    # real conflict budgets on the CDCL oracle are deterministic
    for amount in (0, 1, 5, 1000):
        runs = set()
        for _ in range(3):
            cd = CdclOracle(prog, seed=0)
            s = shrink_core(softs, "progression", Budget("conflicts", amount), cd.solve_with_budget)
            runs.add((tuple(s.probes), s.core))
        assert len(runs) == 1, amount
    cd = CdclOracle(prog, seed=0)
    s = shrink_core(softs, "progression", Budget("conflicts", 0), cd.solve_with_budget)
    assert s.probes == [1, 2, 3] and s.core == tuple(softs)


def test_criterion_6_shrink_call_bounds():
    t0 = time.monotonic()
    for size in (2, 4, 8, 16, 32, 64):
        k = math.ceil(math.log2(size))
        st = shrink_core(range(size), "progression", AMPLE, lambda p, b: _Unknown())
        assert st.calls <= k * (k + 1) // 2, (size, st.calls)
        assert st.calls == k * (k + 1) // 2
        st = shrink_core(range(size), "linear", AMPLE, lambda p, b: _Unknown())
        assert st.calls <= size, (size, st.calls)
    assert time.monotonic() - t0 < 5


def test_criterion_7_epsilon():
    assert epsilon(0, 0) == 0
    assert epsilon(math.inf, 0) == math.inf and epsilon(math.inf, 7) == math.inf
    assert epsilon(5, 0) == math.inf
    assert epsilon(3, 2) == Fraction(1, 2)
    rng = random.Random(7)
    for _ in range(10_000):
        lb = rng.randint(0, 1000)
        ub = rng.randint(lb, 2000)
        e = epsilon(ub, lb)
        assert e == (Fraction(ub - lb, lb) if lb else (0 if ub == 0 else math.inf))
        assert epsilon(ub + rng.randint(0, 50), lb) >= e
        lb2 = rng.randint(lb, ub)
        assert epsilon(ub, lb2) <= e


def _violations(inst, cfg, vec):
    log = EventLog()
    res = optimize(inst, cfg, log)
    if vec is None:
        return [] if res.status == "INCOHERENT" else [f"{cfg.name}: {res.status} on incoherent"]
    bad = []
    if res.status != "OPTIMUM" or res.cost != vec:
        bad.append(f"{cfg.name}: {res.status} {res.cost} != {vec}")
    for e in log.events:
        p = e.payload
        if p.get("level") is None:
            continue
        opt = vec[p["level"]]
        if not p["lb"] <= opt <= p["ub"]:
            bad.append(f"{cfg.name}: {e.kind} lb={p['lb']} opt={opt} ub={p['ub']}")
    return bad


def test_criterion_8_cross_strategy_equivalence():
    t0 = time.monotonic()
    configs = strategy_matrix("cdcl", shrink_budget=Budget("conflicts", 100)) + strategy_matrix(
        "enum", core_mode="minimal", shrink_budget=Budget("conflicts", 1000)
    )
    bad = []
    for seed, inst in enumerate(_suite()):
        ref = optimum_oracle(inst.program, inst.weak)
        vec = ref[0] if ref else None
        for cfg in configs:
            bad += [f"seed {seed} {b}" for b in _violations(inst, cfg, vec)]
    assert not bad, bad[:10]
    assert time.monotonic() - t0 < 120


def test_criterion_9_level_compilation():
    checked = 0
    for inst in _suite():
        if len(inst.weak.levels()) < 2:
            continue
        checked += 1
        a = optimum_oracle(inst.program, inst.weak)
        b = optimum_oracle(inst.program, compile_levels(inst.weak))
        assert (a is None) == (b is None)
        if a is not None:
            assert set(a[1]) == set(b[1])
    assert checked > 100


def _clauses(n):
    lits = [v for i in range(1, n + 1) for v in (i, -i)]
    out = [(l,) for l in lits]
    out += [(x, y) for x, y in itertools.combinations(lits, 2) if x != -y]
    return out


def _wcnf(n, hard, soft):
    top = 1 + sum(w for _, w in soft)
    lines = [f"p wcnf {n} {len(hard) + len(soft)} {top}"]
    lines += [f"{top} {' '.join(map(str, c))} 0" for c in hard]
    lines += [f"{w} {' '.join(map(str, c))} 0" for c, w in soft]
    return "\n".join(lines) + "\n"


def _brute(n, hard, soft):
    best = None
    for bits in itertools.product([False, True], repeat=n):
        def sat(c):
            return any(bits[abs(l) - 1] == (l > 0) for l in c)

        if all(sat(c) for c in hard):
            cost = sum(w for c, w in soft if not sat(c))
            best = cost if best is None else min(best, cost)
    return best


def _wcnf_cases():
    # n = 2: every labelling of the eight clauses as absent, hard or soft
    cl = _clauses(2)
    for labels in itertools.product((0, 1, 2), repeat=len(cl)):
        hard = [c for c, l in zip(cl, labels) if l == 1]
        soft = [(c, 1 + i % 3) for i, (c, l) in enumerate(zip(cl, labels)) if l == 2]
        yield 2, hard, soft
    # n = 3, 4: every single hard clause against every soft unit weighting, then random mixes
    for n in (3, 4):
        cl = _clauses(n)
        units = [(i,) for i in range(1, n + 1)]
        for h in cl:
            for signs in itertools.product((1, -1), repeat=n):
                soft = [((s * u[0],), 1 + i) for i, (u, s) in enumerate(zip(units, signs))]
                yield n, [h], soft
        rng = random.Random(n)
        for _ in range(400):
            hard = rng.sample(cl, rng.randint(0, 3))
            soft = [(c, rng.randint(1, 4)) for c in rng.sample(cl, rng.randint(1, 6))]
            yield n, hard, soft


def test_criterion_10_wcnf():
    configs = [StrategyConfig(shrink="progression", shrink_budget=Budget("conflicts", 100)), StrategyConfig("linsu")]
    bad = []
    count = 0
    for i, (n, hard, soft) in enumerate(_wcnf_cases()):
        count += 1
        inst = parse_wcnf(_wcnf(n, hard, soft))
        want = _brute(n, hard, soft)
        res = optimize(inst, configs[i % 2])
        if want is None:
            ok = res.status == "INCOHERENT"
        else:
            ok = res.status == "OPTIMUM" and sum(res.cost.values()) == want
        if not ok:
            bad.append((n, hard, soft, want, res.status, res.cost))
    assert not bad, bad[:5]
    assert count > 6561


def _padded_conflicts(k, pairs):
    # ``pairs`` forced conflicts padded with ``k`` satisfiable softs
    lines = []
    for i in range(pairs):
        lines += [f"c{i} :- not not c{i}.", f":~ c{i}. [1@1]", f":~ not c{i}. [1@1]"]
    for j in range(k):
        lines += [f"x{j} :- not not x{j}.", f":~ x{j}. [1@1]"]
    return "\n".join(lines) + "\n"


def test_criterion_11_bench_smoke(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    paths = []
    for k, pairs in ((3, 1), (5, 1), (4, 2), (6, 2)):
        p = tmp / f"pad_{k}_{pairs}.lp"
        p.write_text(_padded_conflicts(k, pairs))
        paths.append(str(p))
    for seed in range(20):
        p = tmp / f"rand_{seed}.lp"
        p.write_text(serialize_program(random_instance(seed)))
        paths.append(str(p))
    budget = Budget("conflicts", 1000)
    strategies = [StrategyConfig(oracle="enum", core_mode="raw", shrink=s, shrink_budget=budget)
                  for s in ("none", "linear", "progression")]
    rows, _ = read_csv(write_csv(bench(paths, strategies)))
    header = write_csv(rows).splitlines()[2].split(",")
    for col in ("cores_found", "core_literals_before", "core_literals_after", "shrink_calls", "budget_hits", "models_found"):
        assert col in header
    by = {(r.instance, r.strategy): r for r in rows}
    for p in paths[:4]:
        plain = by[(p, "one/enum")].stats
        assert plain.core_literals_after > plain.cores_found * 2  # raw cores carry padding
        for name in ("one+lshr/enum", "one+pshr/enum"):
            shr = by[(p, name)].stats
            assert shr.core_literals_after <= plain.core_literals_after, (p, name)
            assert shr.core_literals_after < shr.core_literals_before
    before = sum(by[(p, "one+pshr/enum")].stats.core_literals_before for p in paths)
    after = sum(by[(p, "one+pshr/enum")].stats.core_literals_after for p in paths)
    assert after < before


def test_criterion_12_goldens():
    runs = {
        "example2.out": ["--seed", "0", "--shrink-budget", "20c", str(DATA / "pi1_w1.lp")],
        "example6.out": ["--seed", "0", "--shrink-budget", "20c", str(DATA / "pi1_w2.lp")],
        "example6_enum.out": ["--seed", "0", "--oracle", "enum", "--shrink", "none", str(DATA / "pi1_w2.lp")],
    }
    for name, argv in runs.items():
        proc = subprocess.run([sys.executable, "-m", "coreshrink", *argv], capture_output=True)
        assert proc.returncode == 0
        assert proc.stdout == (GOLDEN / name).read_bytes(), name


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
