import re
from pathlib import Path

import pytest

from coreshrink.model import Program
from coreshrink.relax import SoftRegistry, relax_level
from coreshrink.textio import read_instance

DATA = Path(__file__).resolve().parents[1] / "data"


def load(name):
    return read_instance(str(DATA / name))


@pytest.fixture
def pi1_w1():
    return load("pi1_w1.lp")


@pytest.fixture
def pi1_w2():
    return load("pi1_w2.lp")


def relaxed(instance, levels=None):
    """Program of ``instance`` with every level relaxed; returns (program, softs by name)."""
    prog = Program(instance.atoms.copy(), instance.program.rules)
    reg = SoftRegistry(prog.atoms)
    softs = []
    for level in levels or instance.weak.levels():
        out = relax_level(instance.weak, level, reg)
        for r in out.added_rules:
            prog.add(r)
        softs += out.soft_atoms
    return prog, softs, reg


def names(atoms, interp):
    return sorted(atoms.name(a) for a in interp)


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_criterion_(\d+)_", getattr(rep, "nodeid", ""))
            if m and rep.when == "call" or (m and outcome == "error"):
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines[int(m.group(1))] = f"{verdict} criterion {m.group(1)} ({rep.duration:.2f}s)"
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
