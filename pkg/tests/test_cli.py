import subprocess
import sys
from pathlib import Path

import pytest

from conftest import DATA
from coreshrink.cli import main
from coreshrink.report import replay

GOLDEN = Path(__file__).parent / "golden"

GOLDENS = {
    "example2.out": ["--seed", "0", "--shrink-budget", "20c", str(DATA / "pi1_w1.lp")],
    "example6.out": ["--seed", "0", "--shrink-budget", "20c", str(DATA / "pi1_w2.lp")],
    "example6_enum.out": ["--seed", "0", "--oracle", "enum", "--shrink", "none", str(DATA / "pi1_w2.lp")],
}


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", sorted(GOLDENS))
def test_goldens(name, capsys):
    code, out, _ = run(GOLDENS[name], capsys)
    assert code == 0
    assert out == (GOLDEN / name).read_text()


def test_exit_codes(tmp_path, capsys):
    unsat = tmp_path / "u.lp"
    unsat.write_text("a :- not a.\n:~ a. [1@1]\n")
    assert run([str(unsat)], capsys)[0] == 20
    code, out, _ = run([str(unsat)], capsys)
    assert out.splitlines()[-1] == "s UNSATISFIABLE"
    assert run(["--timeout", "0", str(DATA / "pi1_w2.lp")], capsys)[0] in (10, 30)


def test_usage_errors(capsys):
    code, _, err = run(["--algorithm", "linsu", "--shrink", "linear", str(DATA / "pi1_w2.lp")], capsys)
    assert code == 2 and "require --algorithm one" in err
    with pytest.raises(SystemExit) as e:
        main(["--shrink-budget", "ten", str(DATA / "pi1_w2.lp")])
    assert e.value.code == 2


def test_parse_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.lp"
    bad.write_text("a.\nb :- not .\n")
    code, out, err = run([str(bad)], capsys)
    assert code == 2 and out == "" and "2:" in err


def test_missing_file(capsys):
    assert run(["/nonexistent/x.lp"], capsys)[0] == 2


def test_wcnf_input(tmp_path, capsys):
    f = tmp_path / "x.wcnf"
    f.write_text("p wcnf 2 4 10\n10 1 2 0\n4 -1 0\n2 -2 0\n1 1 0\n")
    code, out, _ = run([str(f)], capsys)
    assert code == 0
    assert out.splitlines()[-2] == "s OPTIMUM FOUND"
    assert [l for l in out.splitlines() if l.startswith("o ")][-1] == "o 3"
    assert out.splitlines()[-1] == "v x2"
    code, out2, _ = run(["--format", "wcnf", "--algorithm", "linsu", str(f)], capsys)
    assert code == 0 and out2.splitlines()[-1] == "v x2"


def test_stdin():
    text = (DATA / "pi1_w1.lp").read_text()
    proc = subprocess.run([sys.executable, "-m", "coreshrink", "-"], input=text, capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-2:] == ["s OPTIMUM FOUND", "v a"]


def test_events_csv(tmp_path, capsys):
    path = tmp_path / "events.csv"
    code, _, _ = run(["--events-csv", str(path), str(DATA / "pi1_w2.lp")], capsys)
    assert code == 0
    kinds = [l.split(",")[1] for l in path.read_text().splitlines()[2:]]
    assert kinds[-1] == "FINAL" and "CORE_FOUND" in kinds


def test_events_csv_unwritable(capsys):
    code, out, err = run(["--events-csv", "/nonexistent/dir/e.csv", str(DATA / "pi1_w2.lp")], capsys)
    assert code == 0 and "cannot open" in err


def test_bench_manifest(tmp_path, capsys):
    manifest = tmp_path / "m.txt"
    manifest.write_text(f"# instances\n{DATA / 'pi1_w1.lp'}\n{DATA / 'pi1_w2.lp'} asp\n")
    code, out, _ = run(["--bench", str(manifest), "--shrink-budget", "20c"], capsys)
    assert code == 0
    rows = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert len(rows) == 1 + 2 * 8
    assert replay(out)


def test_visible_atoms_only(capsys):
    code, out, _ = run([str(DATA / "pi1_w2.lp")], capsys)
    v = out.splitlines()[-1].split()[1:]
    assert v and all(not a.startswith("@") for a in v)
