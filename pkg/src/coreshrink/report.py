"""Anytime events, run statistics, the error estimate and the benchmark harness."""
from __future__ import annotations

import csv
import io
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

MODEL = "MODEL"
UB_IMPROVED = "UB_IMPROVED"
LB_IMPROVED = "LB_IMPROVED"
CORE_FOUND = "CORE_FOUND"
CORE_SHRUNK = "CORE_SHRUNK"
BUDGET_HIT = "BUDGET_HIT"
STRATUM = "STRATUM"
LEVEL_DONE = "LEVEL_DONE"
FINAL = "FINAL"

EVENT_KINDS = (MODEL, UB_IMPROVED, LB_IMPROVED, CORE_FOUND, CORE_SHRUNK, BUDGET_HIT, STRATUM, LEVEL_DONE, FINAL)

CSV_VERSION = "# coreshrink-csv v1"


def epsilon(ub, lb: int):
    """Relative error estimate of the best model: ``(ub - lb) / lb``."""
    if ub == math.inf:
        return math.inf
    if lb > ub:
        raise ValueError(f"lb {lb} exceeds ub {ub}")
    if lb == 0:
        return Fraction(0) if ub == 0 else math.inf
    return Fraction(ub - lb, lb)


def format_epsilon(eps) -> str:
    return "inf" if eps == math.inf else str(eps)


def epsilon_percent(eps) -> str:
    return "inf" if eps == math.inf else f"{float(eps) * 100:.2f}%"


@dataclass
class AnytimeEvent:
    at: float
    kind: str
    payload: dict = field(default_factory=dict)


class EventLog:
    """Collects events of one run; optional listeners see each event as it arrives."""

    def __init__(self, *listeners) -> None:
        self.events: list[AnytimeEvent] = []
        self.listeners = list(listeners)
        self.start = time.monotonic()
        self.failed = False

    def __call__(self, kind: str, **payload) -> AnytimeEvent:
        at = max(time.monotonic() - self.start, self.events[-1].at if self.events else 0.0)
        ev = AnytimeEvent(at, kind, payload)
        self.events.append(ev)
        for fn in self.listeners:
            try:
                fn(ev)
            except OSError:
                self.failed = True
        return ev

    def of(self, kind: str) -> list[AnytimeEvent]:
        return [e for e in self.events if e.kind == kind]


@dataclass
class RunStats:
    cores_found: int = 0
    core_literals_before: int = 0
    core_literals_after: int = 0
    shrink_calls: int = 0
    budget_hits: int = 0
    models_found: int = 0
    wall_time: float = 0.0

    @classmethod
    def from_events(cls, events) -> "RunStats":
        st = cls()
        for ev in events:
            if ev.kind == CORE_FOUND:
                st.cores_found += 1
                st.core_literals_before += ev.payload["size"]
                st.core_literals_after += ev.payload["size"]
            elif ev.kind == CORE_SHRUNK:
                st.core_literals_after -= ev.payload["before"] - ev.payload["after"]
                st.shrink_calls += ev.payload["calls"]
            elif ev.kind == BUDGET_HIT:
                st.budget_hits += 1
            elif ev.kind == MODEL:
                st.models_found += 1
            st.wall_time = ev.at
        return st


# -- live text protocol --------------------------------------------------------

def _vec(values) -> str:
    return " ".join(str(v) for v in values)


class ProtocolWriter:
    """Renders events as ``o`` / ``lb`` / ``e`` / ``s`` / ``v`` lines."""

    def __init__(self, out=None) -> None:
        self.out = out if out is not None else sys.stdout

    def write(self, line: str) -> None:
        self.out.write(line + "\n")
        self.out.flush()

    def __call__(self, ev: AnytimeEvent) -> None:
        p = ev.payload
        single = len(p.get("levels", ())) == 1
        if ev.kind == UB_IMPROVED:
            self.write("o " + _vec(p["cost"]))
        elif ev.kind == LB_IMPROVED:
            self.write("lb " + _vec(p["lb_vector"]))
        elif ev.kind == FINAL:
            status = {
                "OPTIMUM": "OPTIMUM FOUND",
                "SATISFIABLE": "SATISFIABLE",
                "INCOHERENT": "UNSATISFIABLE",
                "UNKNOWN": "UNKNOWN",
            }[p["status"]]
            self.write("s " + status)
            if p.get("model") is not None:
                self.write(" ".join(["v"] + list(p["model"])).rstrip())
            return
        else:
            return
        if single:
            self.write("e " + format_epsilon(epsilon(p["ub"], p["lb"])))


# -- benchmark harness ---------------------------------------------------------

CSV_FIELDS = [
    "instance",
    "strategy",
    "status",
    "wall_time",
    "ub",
    "lb",
    "epsilon",
    "cores_found",
    "core_literals_before",
    "core_literals_after",
    "shrink_calls",
    "budget_hits",
    "models_found",
]

TERMINATED = ("OPTIMUM", "INCOHERENT")


@dataclass
class BenchRow:
    instance: str
    strategy: str
    status: str
    wall_time: float = 0.0
    ub: tuple = ()
    lb: tuple = ()
    epsilon: str = ""
    stats: RunStats = field(default_factory=RunStats)

    def as_dict(self) -> dict:
        return {
            "instance": self.instance,
            "strategy": self.strategy,
            "status": self.status,
            "wall_time": f"{self.wall_time:.4f}",
            "ub": " ".join(str(v) for v in self.ub),
            "lb": " ".join(str(v) for v in self.lb),
            "epsilon": self.epsilon,
            "cores_found": self.stats.cores_found,
            "core_literals_before": self.stats.core_literals_before,
            "core_literals_after": self.stats.core_literals_after,
            "shrink_calls": self.stats.shrink_calls,
            "budget_hits": self.stats.budget_hits,
            "models_found": self.stats.models_found,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchRow":
        def vec(s):
            return tuple(int(x) if x != "inf" else math.inf for x in s.split())

        stats = RunStats(
            **{k: int(d[k]) for k in CSV_FIELDS[7:]},
            wall_time=float(d["wall_time"]),
        )
        return cls(d["instance"], d["strategy"], d["status"], float(d["wall_time"]), vec(d["ub"]), vec(d["lb"]), d["epsilon"], stats)


def run_cell(path: str, fmt, cfg, timeout) -> BenchRow:
    from dataclasses import replace

    from .optimize import optimize
    from .textio import ParseError, read_instance

    name = cfg.name
    try:
        inst = read_instance(path, fmt)
    except (OSError, ParseError, UnicodeDecodeError):
        return BenchRow(path, name, "PARSE_ERROR")
    log = EventLog()
    cfg = replace(cfg, timeout=timeout) if timeout is not None else cfg
    res = optimize(inst, cfg, log)
    levels = res.levels
    ub = tuple(res.cost[l] for l in levels) if res.model is not None else tuple(math.inf for _ in levels)
    lb = tuple(res.lb_vector.get(l, 0) for l in levels)
    eps = ""
    if len(levels) == 1:
        eps = format_epsilon(epsilon(ub[0], lb[0]))
    return BenchRow(path, name, res.status, log.events[-1].at, ub, lb, eps, RunStats.from_events(log.events))


def bench(paths, strategies, timeout=None, workers: int = 1, formats=None) -> list[BenchRow]:
    """Run every (instance, strategy) cell; rows come back in matrix order."""
    formats = formats or {}
    cells = [(p, formats.get(p), s) for p in paths for s in strategies]
    if workers <= 1:
        return [run_cell(p, f, s, timeout) for p, f, s in cells]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_cell, p, f, s, timeout) for p, f, s in cells]
        return [fut.result() for fut in futures]


def _ub_key(row: BenchRow):
    return row.ub if row.ub else (math.inf,)


def summarize(rows) -> dict[str, dict[str, int]]:
    """Per-strategy solved and wins counts.

    A strategy wins on an instance when it terminates there, or when nobody
    terminates and its upper bound is the smallest (ties all win).
    """
    strategies = list(dict.fromkeys(r.strategy for r in rows))
    out = {s: {"solved": 0, "wins": 0} for s in strategies}
    by_instance: dict[str, list[BenchRow]] = {}
    for r in rows:
        by_instance.setdefault(r.instance, []).append(r)
    for group in by_instance.values():
        done = [r for r in group if r.status in TERMINATED]
        for r in done:
            out[r.strategy]["solved"] += 1
        if done:
            winners = done
        else:
            valid = [r for r in group if r.status != "PARSE_ERROR"]
            if not valid:
                continue
            best = min(_ub_key(r) for r in valid)
            winners = [r for r in valid if _ub_key(r) == best and best != (math.inf,) * len(best)]
        for r in winners:
            out[r.strategy]["wins"] += 1
    return out


def summary_lines(rows) -> list[str]:
    lines = []
    for s, counts in summarize(rows).items():
        lines.append(f"# summary,{s},solved={counts['solved']},wins={counts['wins']}")
    return lines


def write_csv(rows, out=None) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    buf.write("# wins: terminated, or smallest ub when none terminated; ties all win\n")
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.as_dict())
    for line in summary_lines(rows):
        buf.write(line + "\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_csv(text: str) -> tuple[list[BenchRow], list[str]]:
    body = [l for l in text.splitlines() if l and not l.startswith("#")]
    summary = [l for l in text.splitlines() if l.startswith("# summary,")]
    rows = [BenchRow.from_dict(d) for d in csv.DictReader(body)]
    return rows, summary


def replay(text: str) -> bool:
    """Does the summary block of a CSV follow from its rows?"""
    rows, summary = read_csv(text)
    return summary_lines(rows) == summary


class EventCsvWriter:
    """Streams events to a CSV file: time, kind, level, bounds and details."""

    def __init__(self, path: str) -> None:
        self.fh = open(path, "w", encoding="utf-8", newline="")
        self.fh.write(CSV_VERSION + "\n")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(["at", "kind", "level", "lb", "ub", "detail"])

    def __call__(self, ev: AnytimeEvent) -> None:
        p = ev.payload
        detail = ";".join(
            f"{k}={' '.join(map(str, v)) if isinstance(v, (list, tuple)) else v}"
            for k, v in p.items()
            if k not in ("level", "lb", "ub", "levels")
        )
        self.writer.writerow([f"{ev.at:.6f}", ev.kind, p.get("level", ""), p.get("lb", ""), p.get("ub", ""), detail])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()
