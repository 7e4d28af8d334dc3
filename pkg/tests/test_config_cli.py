import csv
import hashlib
import json

import pytest

from kleinlab import __version__
from kleinlab.cli import run
from kleinlab.config import ConfigError, parse_config, split_config

SMALL = "n = 20\nsamples = 30\ncheckpoints = 10\n"


def _write(path, text):
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- config parsing ------------------------------------------------------------------

def test_parse_types_and_comments():
    vals = parse_config("# run\ntau = 2.5  # seconds\nsamples = 40\n\ntarget = p-adic:5\nlambda1 = none\n")
    assert vals == {"tau": 2.5, "samples": 40, "target": "p-adic:5", "lambda1": None}
    cfg, extras = split_config(vals, {"n": 7})
    assert cfg.tau == 2.5 and cfg.samples == 40 and cfg.n == 7 and cfg.lambda1 is None
    assert extras == {"target": "p-adic:5"}


@pytest.mark.parametrize("text,line,fragment", [
    ("tau = 1\nbogus = 3\n", 2, "unknown key"),
    ("tau = 1\ntau = 2\n", 2, "duplicate key"),
    ("\n\nsamples = abc\n", 3, "as int"),
    ("samples = 2.5\n", 1, "as int"),
    ("tau = nan\n", 1, "as float"),
    ("just words\n", 1, "key = value"),
])
def test_parse_errors_carry_line(text, line, fragment):
    with pytest.raises(ConfigError) as ei:
        parse_config(text, path="run.cfg")
    assert ei.value.line == line
    assert str(ei.value).startswith(f"run.cfg:{line}:")
    assert fragment in str(ei.value)


def test_config_validation_passes_through():
    with pytest.raises(Exception):
        split_config({"tau": -1.0})


# -- exit codes ------------------------------------------------------------------------

def test_bad_config_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.cfg", "tau = 1\nsamples = abc\n")
    assert run(["lyapunov", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "bad.cfg:2:" in capsys.readouterr().err


def test_missing_minpoly_exit_2(tmp_path, capsys):
    pres = _write(tmp_path / "p.txt", "T: [[1,1],[0,1]]\n")
    assert run(["arithmeticity", "--presentation", pres, "--out", str(tmp_path / "o")]) == 2
    assert "minpoly" in capsys.readouterr().err


def test_inert_place_exit_2(tmp_path):
    cfg = _write(tmp_path / "c.cfg", SMALL)
    assert run(["lyapunov", "--config", cfg, "--target", "p-adic:3", "--out", str(tmp_path / "o")]) == 2


def test_missing_file_exit_2(tmp_path):
    assert run(["lyapunov", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_bad_seed_exit_2(tmp_path):
    assert run(["lyapunov", "--seed", "-1", "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("extra", ["excursion_cap = 3\n", "max_iter = 1\n"])
def test_budget_exit_3(tmp_path, capsys, extra):
    cfg = _write(tmp_path / "c.cfg", SMALL + extra)
    assert run(["lyapunov", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "budget exceeded" in capsys.readouterr().err


def test_short_word_len_exit_2(tmp_path):
    cfg = _write(tmp_path / "c.cfg", "arith_word_len = 2\n")
    assert run(["arithmeticity", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_unclassifiable_exit_1(tmp_path, capsys):
    # twelve terms are too few for the directions to settle
    cfg = _write(tmp_path / "c.cfg", "length = 12\nhausdorff_points = 300\n")
    assert run(["classify-limit", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "Unclassifiable" in capsys.readouterr().err


# -- outputs ---------------------------------------------------------------------------

def test_arithmeticity_zi(tmp_path):
    out = tmp_path / "o"
    assert run(["arithmeticity", "--preset", "bianchi-zi", "--out", str(out)]) == 0
    summ = json.loads((out / "summary.json").read_text())
    assert summ["result"]["verdict"] == "Arithmetic"
    assert summ["version"] == __version__
    assert summ["subcommand"] == "arithmeticity"
    rows = _rows(out / "arithmeticity.csv")
    assert [r["word_len"] for r in rows] == ["3", "4"]


def test_nonintegral_presentation(tmp_path):
    pres = _write(tmp_path / "p.txt", "minpoly: x\nh: [[2, 1], [0, 1/2]]\nv: [[1, 1], [0, 1]]\n")
    out = tmp_path / "o"
    assert run(["arithmeticity", "--presentation", pres, "--out", str(out)]) == 0
    res = json.loads((out / "summary.json").read_text())["result"]
    assert res["verdict"] == "NonArithmetic"
    assert res["witness"]["trace"] == "5/2" and res["witness"]["recheck"]


def test_trivial_rep_slope_zero(tmp_path):
    cfg = _write(tmp_path / "c.cfg", SMALL)
    out = tmp_path / "o"
    assert run(["lyapunov", "--preset", "trivial-rep", "--config", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "summary.json").read_text())["result"]
    assert res["slope"] == 0.0
    assert all(float(r["dist"]) == 0.0 for r in _rows(out / "lyapunov.csv"))


def test_flags_override_config(tmp_path):
    cfg = _write(tmp_path / "c.cfg", SMALL + "seed = 5\ntau = 2\n")
    out = tmp_path / "o"
    assert run(["lyapunov", "--config", cfg, "--seed", "9", "--samples", "32", "--out", str(out)]) == 0
    summ = json.loads((out / "summary.json").read_text())
    assert summ["config"]["seed"] == 9 and summ["manifest"]["seed"] == 9
    assert summ["config"]["samples"] == 32
    assert summ["config"]["tau"] == 2.0        # config beats subcommand default
    assert summ["config"]["checkpoints"] == 10
    assert len({r["sample"] for r in _rows(out / "lyapunov.csv")}) == 32


def test_summary_is_sorted_snake_case(tmp_path):
    cfg = _write(tmp_path / "c.cfg", SMALL)
    out = tmp_path / "o"
    assert run(["lyapunov", "--config", cfg, "--out", str(out)]) == 0
    text = (out / "summary.json").read_text()
    summ = json.loads(text)
    assert list(summ) == sorted(summ)
    assert list(summ["config"]) == sorted(summ["config"])
    for k in list(summ) + list(summ["config"]) + list(summ["result"]):
        assert k == k.lower() and "-" not in k and " " not in k
    assert summ["manifest"]["config_path"] == cfg
    assert len(summ["manifest"]["input_hash"]) == 40


def test_input_hash_tracks_contents(tmp_path):
    pres = tmp_path / "p.txt"
    _write(pres, "minpoly: x**2 + 1\nT: [[1,1],[0,1]]\nS: [[0,-1],[1,0]]\n")
    assert run(["arithmeticity", "--presentation", str(pres), "--out", str(tmp_path / "a")]) == 0
    _write(pres, "minpoly: x**2 + 1\nT: [[1,1],[0,1]]\nS: [[0,-1],[1,0]]\nU: [[1,x],[0,1]]\n")
    assert run(["arithmeticity", "--presentation", str(pres), "--out", str(tmp_path / "b")]) == 0
    ha = json.loads((tmp_path / "a" / "summary.json").read_text())["manifest"]["input_hash"]
    hb = json.loads((tmp_path / "b" / "summary.json").read_text())["manifest"]["input_hash"]
    assert ha != hb


@pytest.mark.parametrize("cmd,extra", [
    ("lyapunov", SMALL),
    ("drift", "n = 10\n"),
    ("inversion-demo", "pairs = 50\n"),
    ("classify-limit", "hausdorff_points = 300\n"),
    ("main-lemma", "n = 10\nsamples = 30\ncheckpoints = 5\n"),
])
def test_csv_byte_identical(tmp_path, cmd, extra):
    cfg = _write(tmp_path / "c.cfg", extra + "seed = 17\n")
    digests = []
    for tag in "ab":
        out = tmp_path / tag
        assert run([cmd, "--config", cfg, "--out", str(out)]) == 0
        name = cmd + ".csv"
        digests.append(hashlib.sha256((out / name).read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_seed_changes_output(tmp_path):
    cfg = _write(tmp_path / "c.cfg", SMALL)
    for s in ("1", "2"):
        assert run(["lyapunov", "--config", cfg, "--seed", s, "--out", str(tmp_path / s)]) == 0
    assert (tmp_path / "1" / "lyapunov.csv").read_bytes() != (tmp_path / "2" / "lyapunov.csv").read_bytes()


def test_catalogue_file(tmp_path):
    cat = _write(tmp_path / "cat.txt",
                 "minpoly: x**2 + 1\nroot: 1j\n"
                 "T: [[1,1],[0,1]]\nU: [[1,x],[0,1]]\nS: [[0,-1],[1,0]]\nL: [[x,0],[0,-x]]\n"
                 "circle: 0 x/2 0\ncircle: 0 (x+1)/2 0\ncircle: 1 0 -2\n")
    cfg = _write(tmp_path / "c.cfg", "samples = 200\n")
    out = tmp_path / "o"
    assert run(["equidist", "--catalogue", cat, "--config", cfg, "--out", str(out)]) == 0
    rows = _rows(out / "equidist.csv")
    assert [r["label"] for r in rows] == ["C0", "C1", "C2"]
