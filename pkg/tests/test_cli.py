import csv
import io
import json

import pytest

from tcba import cli


def run_cli(capsys, *args):
    code = cli.main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "abxp, p_star, q",
    [((0, 0, 0, 0.25), 0.25, 1.0), ((0.25, 0.5, 0.75, 0.3), 0.56, 1.0), ((0, 0, 0, 0.36), 0.25, 2 / 3)],
)
def test_theory(capsys, abxp, p_star, q):
    a, b, x, p = abxp
    code, out, _ = run_cli(capsys, "theory", "--a", str(a), "--b", str(b), "--x", str(x), "--p", str(p))
    d = json.loads(out)
    assert code == 0
    assert set(d) == {"a", "b", "x", "p", "p_star", "q", "q_plus", "q_minus", "discriminant"}
    assert d["p_star"] == pytest.approx(p_star, abs=1e-12) and d["q"] == pytest.approx(q, abs=1e-12)


def test_theory_invalid(capsys):
    code, _, err = run_cli(capsys, "theory", "--a", "0.6", "--b", "0.5")
    assert code == 2 and "exceeds" in err


def test_usage_errors(capsys):
    assert run_cli(capsys)[0] == 2
    assert run_cli(capsys, "frobnicate")[0] == 2
    assert run_cli(capsys, "theory", "--n", "many")[0] == 2


def test_run_all_blockades(capsys, tmp_path):
    summ = tmp_path / "s.csv"
    code, out, _ = run_cli(capsys, "run", "--p", "1", "--n", "5", "--summary", str(summ))
    assert code == 0 and out == ""
    rows = list(csv.DictReader(summ.open()))
    assert len(rows) == 5 and all(r["velocity"] == "0" for r in rows)


def test_run_deterministic(capsys, tmp_path):
    args = ["run", "--a", "0", "--b", "0", "--x", "0", "--p", "0.25", "--n", "100", "--seed", "7"]
    outs = []
    for k in range(2):
        f = tmp_path / f"d{k}.jsonl"
        assert run_cli(capsys, *args, "-o", str(f), "--summary", str(tmp_path / f"s{k}.csv"))[0] == 0
        outs.append((f.read_bytes(), (tmp_path / f"s{k}.csv").read_bytes()))
    assert outs[0] == outs[1] and outs[0][0]
    first = json.loads(outs[0][0].splitlines()[0])
    assert list(first) == ["t", "loc", "kind", "left_id", "right_id", "outcome", "generated_id"]


def test_seed_env_and_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# sample\nn = 50\ntrials=300\np=0.7\nseed=3\n")
    ns = cli.build_parser().parse_args(["estimate", "--config", str(cfg), "--p", "0.6"])
    spec = cli.resolve(ns, env={"TCBA_SEED": "11"})
    assert (spec.n, spec.trials, spec.params.p, spec.seed) == (50, 300, 0.6, 3)
    ns = cli.build_parser().parse_args(["estimate"])
    assert cli.resolve(ns, env={"TCBA_SEED": "11"}).seed == 11
    assert cli.resolve(ns, env={}).seed == 0


def test_config_rejects_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour=blue\n")
    assert run_cli(capsys, "theory", "--config", str(cfg))[0] == 2


def test_estimate_csv(capsys):
    code, out, _ = run_cli(capsys, "estimate", "--p", "0.5", "--n", "50", "--trials", "500", "--threads", "1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["estimand"] == "q" and rows[0]["bias"] == "LowerBound"


def test_estimate_jsonl_theta(capsys):
    code, out, _ = run_cli(capsys, "estimate", "--estimand", "theta", "--n", "30", "--trials", "200",
                           "--format", "jsonl")
    assert code == 0 and json.loads(out)["estimand"] == "theta"


def test_sweep(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--a", "0.125", "--b", "0.75", "--grid", "0.05,0.08,0.1",
                           "--n", "50", "--trials", "200")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == list(cli.SWEEP_HEADER)
    assert [r["q_theory"] for r in rows][:2] == ["1", "1"] and float(rows[2]["q_theory"]) < 1
    assert rows[0]["p_star"] == "0.08"


def test_sweep_ba_range(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--grid", "0.36:0.36:1", "--n", "20", "--trials", "50")
    assert code == 0 and list(csv.DictReader(io.StringIO(out)))[0]["q_theory"] == "0.666667"


@pytest.mark.parametrize("grid", ["", "1.0", "0.2,x"])
def test_sweep_bad_grid(capsys, grid):
    assert run_cli(capsys, "sweep", "--grid", grid)[0] == 2


def test_verify_only(capsys):
    code, out, _ = run_cli(capsys, "verify", "--only", "superadditivity", "--trial-scale", "0.05")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["check_id"] for r in rows] == ["superadditivity_mixed"]


def test_verify_zero_tolerance_fails(capsys):
    code, out, _ = run_cli(capsys, "verify", "--only", "en1", "--trial-scale", "0.02", "--tolerance-scale", "0")
    assert code == 1 and "false" in out


def test_verify_unknown_suite(capsys):
    assert run_cli(capsys, "verify", "--only", "nope")[0] == 2
