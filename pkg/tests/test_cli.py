import csv

import pytest

from plsstop.cli import main, parse_args, read_config


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture()
def gaussian_csv(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--n", "60", "--p", "8", "--sigma4", "1", "--sigma5", "2",
                 "--seed", "7", "--out-dir", str(out)]) == 0
    return out / "dataset_000.csv"


def test_simulate_shape_and_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "--n", "20", "--p", "30", "--seed", "3", "--out-dir", str(d)]) == 0
    rows = _read(a / "dataset_000.csv")
    assert len(rows) == 20 and len(rows[0]) == 31 and "y" in rows[0]
    assert (a / "dataset_000.csv").read_bytes() == (b / "dataset_000.csv").read_bytes()
    assert (a / "dataset_000.json").exists() and (a / "run_config.txt").exists()


def test_simulate_binomial(tmp_path):
    assert main(["simulate", "--n", "40", "--p", "6", "--family", "binomial",
                 "--out-dir", str(tmp_path)]) == 0
    assert {r["y"] for r in _read(tmp_path / "dataset_000.csv")} <= {"0.0", "1.0"}


def test_select_writes_trace(gaussian_csv, tmp_path, capsys):
    out = tmp_path / "sel"
    assert main(["select", str(gaussian_csv), "--criterion", "bicdof", "--out-dir", str(out)]) == 0
    assert capsys.readouterr().out.startswith("K=")
    trace = _read(out / "trace.csv")
    assert list(trace[0])[:3] == ["k", "statistic", "decision"]
    assert "seed = 0" in (out / "run_config.txt").read_text()


def test_select_bootyt_rerun_identical(gaussian_csv, tmp_path):
    outs = [tmp_path / "r1", tmp_path / "r2"]
    for o in outs:
        assert main(["select", str(gaussian_csv), "--criterion", "bootyt", "--alpha", "0.05",
                     "--R", "100", "--seed", "42", "--out-dir", str(o)]) == 0
    assert (outs[0] / "trace.csv").read_bytes() == (outs[1] / "trace.csv").read_bytes()


def test_family_guard_is_usage_error(tmp_path, capsys):
    main(["simulate", "--n", "40", "--p", "6", "--family", "binomial", "--out-dir", str(tmp_path)])
    rc = main(["select", str(tmp_path / "dataset_000.csv"), "--criterion", "q2", "--family", "binomial"])
    assert rc == 1
    assert "criterion q2 requires gaussian family" in capsys.readouterr().err


def test_parse_errors(tmp_path, gaussian_csv, capsys):
    assert main(["select", str(gaussian_csv), "--criterion", "q2", "--response", "target"]) == 2
    assert "'target'" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y\n1,2\n3,oops\n")
    assert main(["select", str(bad), "--criterion", "q2"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_usage_errors():
    assert main(["select"]) == 1
    assert main(["compare", "--no-such-flag"]) == 1
    assert main(["compare", "--criterion", "q2,zzz"]) == 1


def test_partition_count(capsys):
    assert main(["partition-count", "--n", "5", "--q", "2"]) == 0
    assert capsys.readouterr().out.strip() == "10"


def test_robustness_jackknife(tmp_path, capsys):
    main(["simulate", "--n", "30", "--p", "6", "--sigma4", "1", "--sigma5", "1", "--out-dir", str(tmp_path)])
    out = tmp_path / "rob"
    assert main(["robustness", str(tmp_path / "dataset_000.csv"), "--criterion", "bicdof",
                 "--mode", "jackknife", "--out-dir", str(out)]) == 0
    rows = _read(out / "histogram.csv")
    assert sum(int(r["count"]) for r in rows) == 30
    assert capsys.readouterr().out.splitlines()[-1].startswith("mode K=")


def test_robustness_defaults():
    args = parse_args(["robustness", "d.csv", "--criterion", "bootyt"])
    assert args.mode == "bootstrap" and args.B == 100


def test_compare_counts_and_verdicts(tmp_path):
    out = tmp_path / "cmp"
    rc = main(["compare", "--sigma4", "0.01,1", "--sigma5", "0.01", "--datasets", "3",
               "--criterion", "q2,bicdof", "--n", "50", "--p-min", "5", "--p-max", "9",
               "--out-dir", str(out)])
    assert rc == 0
    assert len(_read(out / "grid.csv")) == 12
    verdicts = {r["verdict"] for r in _read(out / "summary.csv")}
    assert verdicts <= {"A_better", "B_better", "no_difference", "insufficient"}


def test_compare_family_refused_up_front(tmp_path):
    assert main(["compare", "--criterion", "cvmc", "--datasets", "2", "--out-dir", str(tmp_path)]) == 1


def test_compare_partial_failure_exit_code(tmp_path, monkeypatch):
    import plsstop.simulation as simulation
    from plsstop.errors import SingularDesign

    real = simulation.run_criterion
    calls = []

    def flaky(spec, data, seed):
        calls.append(1)
        if len(calls) == 2:
            raise SingularDesign("injected")
        return real(spec, data, seed)

    monkeypatch.setattr(simulation, "run_criterion", flaky)
    rc = main(["compare", "--sigma4", "0.01", "--sigma5", "0.01", "--datasets", "3", "--criterion", "bicdof",
               "--n", "40", "--p-min", "5", "--p-max", "6", "--out-dir", str(tmp_path)])
    assert rc == 3
    rows = _read(tmp_path / "grid.csv")
    assert [bool(r["error"]) for r in rows] == [False, True, False]


def test_paper_scale_flag():
    args = parse_args(["compare", "--paper-scale"])
    assert args.datasets == 100 and args.R == 500


def test_config_file_and_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ndatasets = 4\nR = 80\nseed = 9\nsigma4 = 0.5,1.5\n")
    assert read_config(cfg)["R"] == "80"
    args = parse_args(["compare", "--config", str(cfg), "--R", "120"])
    assert args.datasets == 4 and args.R == 120 and args.seed == 9 and args.sigma4 == [0.5, 1.5]
    cfg.write_text("bogus = 1\n")
    assert main(["compare", "--config", str(cfg)]) == 1


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("PLSSTOP_SEED", "123")
    assert parse_args(["simulate"]).seed == 123
    assert parse_args(["simulate", "--seed", "4"]).seed == 4
    monkeypatch.delenv("PLSSTOP_SEED")
    assert parse_args(["simulate"]).seed == 0
