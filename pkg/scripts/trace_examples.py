"""Print the event traces of ONE on the bundled example programs."""
import argparse
from pathlib import Path

from coreshrink.optimize import StrategyConfig, optimize
from coreshrink.report import EventLog
from coreshrink.textio import format_rule, read_instance

DATA = Path(__file__).resolve().parents[1] / "data"


def trace(path, cfg):
    inst = read_instance(str(path))
    log = EventLog()
    states = []
    res = optimize(inst, cfg, log, states)
    atoms = states[0].program.atoms
    print(f"== {path.name} [{cfg.name}]")
    for e in log.events:
        p = dict(e.payload)
        p.pop("levels", None)
        if "core" in p:
            p["core"] = [atoms.name(a) for a in p["core"]]
        print(f"  {e.kind:12} {p}")
    if states[0].last_relaxation:
        print("  last relaxation:")
        for r in states[0].last_relaxation[1].added_rules:
            print("    " + format_rule(r, atoms))
    print(f"  -> {res.status} {res.names} cost={res.cost}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--oracle", choices=("cdcl", "enum"), default="enum")
    ap.add_argument("--shrink", choices=("none", "linear", "progression"), default="none")
    args = ap.parse_args()
    cfg = StrategyConfig(oracle=args.oracle, shrink=args.shrink)
    for name in ("pi1_w1.lp", "pi1_w2.lp"):
        trace(DATA / name, cfg)


if __name__ == "__main__":
    main()
