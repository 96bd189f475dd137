import json
from pathlib import Path

import pytest
import yaml

from kochlab import cli, plotting
from kochlab.config import ExperimentConfig, dump_config, load_config, parse_config
from kochlab.errors import ConfigError, DomainError, MalformedInputError
from kochlab.runner import run

SMOKE = Path(__file__).resolve().parents[1] / "configs" / "smoke.yaml"


def write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def test_gamma_out_of_range_exit_2(tmp_path, capsys):
    p = write(tmp_path, {"seed": 1, "roof": {"gamma": 0.6}})
    assert cli.main(["run", "--config", str(p)]) == 2
    assert "config-invalid" in capsys.readouterr().err


@pytest.mark.parametrize("data", [{"roof": {"gamma": 0.2}}, {"seed": 1, "suites": ["nope"]},
                                  {"seed": 1, "unknown_key": 3}, {"seed": 1, "schema_version": 9},
                                  {"seed": 1, "clt": {"component": 7}}])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")


def test_seed_required(capsys):
    assert cli.main(["roof-check"]) == 2


def test_dump_roundtrip():
    cfg = parse_config({"seed": 5, "suites": ["dk0", "denjoy_koksma"]})
    again = parse_config(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert cfg.ordered_suites() == ["denjoy_koksma", "dk0"]


def test_minimal_denjoy_koksma_run(tmp_path, capsys):
    p = write(tmp_path, {"seed": 1, "suites": ["denjoy_koksma"],
                         "denjoy_koksma": {"q_max": 1000, "grid": 50}})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 0
    assert "PASS denjoy_koksma" in capsys.readouterr().out
    csvs = sorted(x.name for x in out.glob("*.csv"))
    assert csvs == ["denjoy_koksma.csv"]
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["suites"][0]["name"] == "denjoy_koksma"
    assert "denjoy_koksma.csv" in rep["artifacts"]


def test_shortcut_subcommand(tmp_path):
    assert cli.main(["roof-check", "--seed", "2", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["suites"][0]["name"] == "roof_check"


def test_budget_exceeded(tmp_path):
    cfg = parse_config({"seed": 1, "suites": ["denjoy_koksma", "dk0"], "time_budget_s": 1e-9,
                        "output_dir": str(tmp_path), "dk0": {"points": 5, "N_exponents": [6, 7]}})
    outcome = run(cfg)
    assert outcome.exit_code == 3
    assert outcome.report["budget_exceeded_after"] == "denjoy_koksma"
    assert len(outcome.report["suites"]) == 1


def test_failing_suite_exit_1(tmp_path):
    # a one-attempt search with an unreachable pass fraction
    p = write(tmp_path, {"seed": 1, "suites": ["tuple_search"],
                         "tuple": {"search": {"attempts": 1, "depths": [4], "g3_samples": 5,
                                              "min_pass_fraction": 1.5}}})
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1


def test_determinism_smoke(tmp_path):
    a, b = tmp_path / "a", tmp_path / "run"
    cfg = load_config(SMOKE, {"output_dir": str(b)})
    run(cfg)
    b.rename(a)
    run(cfg)
    names = sorted(x.name for x in a.iterdir() if x.name != "timings.json")
    assert names == sorted(x.name for x in b.iterdir() if x.name != "timings.json")
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_worker_count_does_not_change_results(tmp_path):
    base = {"seed": 9, "suites": ["clt"], "chunk_size": 20,
            "clt": {"samples": 60, "T_grid": [50], "variance_samples": 20,
                    "correlation_samples": 500, "correlation_tau_max": 3}}
    r1 = run(parse_config(dict(base, output_dir=str(tmp_path / "w1"), workers=1)))
    r2 = run(parse_config(dict(base, output_dir=str(tmp_path / "w2"), workers=2)))
    assert r1.report["suites"] == r2.report["suites"]


def test_cf_command(capsys):
    assert cli.main(["cf", "sqrt2", "--depth", "5"]) == 0
    out = capsys.readouterr()
    lines = out.out.strip().splitlines()
    assert lines[0] == "n,a_n,q_n"
    assert [int(x.split(",")[2]) for x in lines[1:]] == [1, 2, 5, 12, 29, 70]
    assert "class D" in out.err


def test_plot_empty_csv(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("T,fraction\n")
    with pytest.raises(MalformedInputError):
        plotting.plot(p, "decay", tmp_path / "x.svg")
    assert cli.main(["plot", str(p), "--kind", "decay", "--out", str(tmp_path / "x.svg")]) == 2


def test_plot_unknown_kind(tmp_path):
    with pytest.raises(DomainError):
        plotting.plot(tmp_path / "x.csv", "pie", tmp_path / "x.svg")


def test_plots_from_artifacts(tmp_path):
    cfg = load_config(SMOKE, {"output_dir": str(tmp_path), "suites": ["s2_scan", "clt", "an_cover"]})
    run(cfg)
    for src, kind in (("s2_scan.csv", "decay"), ("clt_results.json", "qq"),
                      ("clt_z.csv", "histogram")):
        out = plotting.plot(tmp_path / src, kind, tmp_path / f"again_{kind}.svg")
        text = out.read_text()
        assert text.startswith("<?xml") and "<svg" in text
    assert any(p.name.endswith("_cover.svg") for p in tmp_path.iterdir())


def test_plot_is_deterministic(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("T,fraction\n100,0.5\n1000,0.1\n10000,0.01\n")
    a = plotting.plot(p, "decay", tmp_path / "a.svg").read_bytes()
    b = plotting.plot(p, "decay", tmp_path / "b.svg").read_bytes()
    assert a == b


def test_defaults_are_valid():
    cfg = ExperimentConfig(seed=0)
    assert cfg.tuple.search.depths == list(range(4, 11))
    assert cfg.clt.T_grid == [250, 500, 1000]
