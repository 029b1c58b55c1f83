import json
import subprocess
import sys

import pytest

from dushap.cli import build_parser, main


def _strip_version(text):
    return "\n".join(l for l in text.splitlines() if not l.startswith("# version:")
                     and '"version"' not in l)


def test_exact_json(capsys):
    assert main(["exact", "--sizes", "1,2,4", "--game", "sqrt"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["result"]["values"]) == 3
    assert out["manifest"]["seed"] == 0 and "version" in out["manifest"]


def test_du_equals_exact_under_equal_sizes(capsys):
    main(["exact", "--sizes", "2,2,2", "--game", "sqrt"])
    exact = json.loads(capsys.readouterr().out)["result"]["values"]
    main(["estimate", "--method", "du", "--sizes", "2,2,2", "--game", "sqrt"])
    du = json.loads(capsys.readouterr().out)["result"]["values"]
    assert max(abs(a - b) for a, b in zip(exact, du)) <= 1e-12


def test_bench_compare_rows(tmp_path):
    out = tmp_path / "c.csv"
    argv = ["bench", "compare", "--I", "10", "--sizes-dist", "uniform:10:1000",
            "--game", "regression:d=10,sigma=1", "--budget", "10", "--estimations", "3",
            "--repetitions", "2", "--out", str(out)]
    assert main(argv) == 0
    methods = {l.split(",")[1] for l in out.read_text().splitlines()[3:]}
    assert methods == {"mc", "mc-anti", "owen", "du", "dupp"}


@pytest.mark.parametrize("argv, code", [
    (["exact", "--bogus"], 1),
    (["nope"], 1),
    (["exact", "--sizes", "1,x"], 1),
    (["exact"], 1),
    (["exact", "--sizes", "1,2", "--out", "/nonexistent/dir/x.json"], 1),
    (["exact", "--sizes", "1,2", "--game", "mystery"], 1),
    (["exact", "--sizes", ",".join(["1"] * 11), "--form", "permutations"], 2),
    (["oracle", "--d", "5", "--n", "3"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code


SUBCOMMANDS = [["exact"], ["estimate"], ["bench", "compare"], ["converge"], ["bounds"], ["oracle"]]


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_all_flags(cmd, capsys):
    assert main(cmd + ["--help"]) == 0
    text = capsys.readouterr().out
    parser = build_parser()
    node = parser
    for name in cmd:
        node = next(a for a in node._actions if a.__class__.__name__ == "_SubParsersAction").choices[name]
    for action in node._actions:
        for flag in action.option_strings:
            assert flag in text


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nsizes = 1,2,4\ngame = square\n")
    assert main(["exact", "--config", str(cfg)]) == 0
    square = json.loads(capsys.readouterr().out)["result"]["values"]
    assert main(["exact", "--config", str(cfg), "--game", "sqrt"]) == 0
    sqrt = json.loads(capsys.readouterr().out)["result"]["values"]
    assert square != sqrt
    cfg.write_text("wat = 1\n")
    assert main(["exact", "--config", str(cfg)]) == 1


@pytest.mark.parametrize("argv", [
    ["estimate", "--method", "mc", "--sizes", "3,1,4,1,5", "--budget", "7", "--seed", "3",
     "--format", "csv"],
    ["bench", "compare", "--I", "6", "--sizes-dist", "uniform:1:50", "--game", "sqrt",
     "--estimations", "3", "--repetitions", "2", "--seed", "5"],
    ["converge", "--I", "10,20", "--samples", "2000"],
    ["bounds", "--I-grid", "5,10", "--draws", "3"],
])
def test_byte_identical_reruns_across_threads(argv, tmp_path):
    outs = []
    for k, threads in enumerate((1, 1, 4)):
        path = tmp_path / f"o{k}"
        assert main(argv + ["--threads", str(threads), "--out", str(path)]) == 0
        outs.append(_strip_version(path.read_text()))
    assert outs[0] == outs[1] == outs[2]


def test_bounds_single_instance(capsys):
    assert main(["bounds", "--sizes", "1,2,4", "--game", "sqrt"]) == 0
    assert len(json.loads(capsys.readouterr().out)["report"]["du_bound"]) == 3


def test_oracle_output(capsys):
    assert main(["oracle", "--d", "3", "--n", "20,40", "--mc-reps", "50",
                 "--test-samples", "50"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r[0] for r in rows] == [20, 40]


def test_empirical_cli(tmp_path, capsys):
    from dushap.empirical_game import synthetic_classification, write_csv
    path = tmp_path / "s.csv"
    write_csv(path, *synthetic_classification(300, seed=1))
    assert main(["estimate", "--method", "dupp", "--data", str(path), "--sizes", "20,30,40"]) == 0
    assert len(json.loads(capsys.readouterr().out)["result"]["values"]) == 3


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "dushap.cli", "exact", "--sizes", "1,2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and '"values"' in r.stdout
