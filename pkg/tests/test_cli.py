import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from papangelou.cli import ConfigError, RunConfig, build_kernel, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

EXPECTED_STATUS = {
    "polya_sum": 0, "remark": 1, "bad_z": 2, "poisson": 0, "polya_sum_battery": 0,
    "polya_difference": 0, "polya_sum_single_site": 0, "gnz_mismatch": 1, "interaction": 0,
    "hard_core": 0, "vanishing_diagonal": 0, "asymmetric": 1, "remark_transform": 1,
}


def test_every_checked_in_config_is_listed():
    assert {p.stem for p in CONFIGS.glob("*.toml")} == set(EXPECTED_STATUS)


@pytest.mark.parametrize("name", sorted(EXPECTED_STATUS))
def test_config_exit_status(name, tmp_path, capsys):
    status = main(["run", "--config", str(CONFIGS / f"{name}.toml"), "--out", str(tmp_path)])
    assert status == EXPECTED_STATUS[name]
    if status != 2:
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["passed"] == (status == 0)


def _run(name, tmp_path, *extra):
    status = main(["run", "--config", str(CONFIGS / f"{name}.toml"), "--out", str(tmp_path),
                   *extra])
    return status, json.loads((tmp_path / "report.json").read_text())


def test_remark_report_contents(tmp_path):
    status, report = _run("remark", tmp_path)
    j, jp = report["tasks"]
    assert j["passed"] and not jp["passed"]
    w = jp["report"]["witness"]
    assert w["values"] == [1, 2] and w["mu"] == {"-1": 1} and w["nu"] == {"1": 1}


def test_bad_config_message(capsys):
    assert main(["run", "--config", str(CONFIGS / "bad_z.toml")]) == 2
    assert "0 < z < 1" in capsys.readouterr().err


def test_stdout_report_without_out(capsys):
    assert main(["check", "--config", str(CONFIGS / "remark.toml"), "--property", "J"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert [t["arg"] for t in report["tasks"]] == ["J"]


def test_subcommand_filters_tasks(tmp_path):
    status = main(["check", "--config", str(CONFIGS / "polya_sum.toml"), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    assert status == 0 and {t["task"] for t in report["tasks"]} == {"check"}


def test_csv_dumps(tmp_path):
    status = main(["sample", "--config", str(CONFIGS / "polya_sum.toml"), "--out", str(tmp_path),
                   "--format", "csv", "--method", "product_form", "--n", "500"])
    assert status == 0
    rows = (tmp_path / "task00_samples.csv").read_text().splitlines()
    assert rows[0] == "a,b,c" and len(rows) == 501


def test_transform_override(tmp_path):
    status = main(["transform", "--config", str(CONFIGS / "polya_sum.toml"), "--out",
                   str(tmp_path), "--method", "exact", "--n", "2000", "--blocks", "a+b,c"])
    report = json.loads((tmp_path / "report.json").read_text())
    assert status == 0 and report["tasks"][0]["map"] == {"a": "a+b", "b": "a+b", "c": "c"}


def test_reports_are_byte_identical_across_runs_and_workers(tmp_path):
    outs = []
    for k, workers in enumerate(["1", "1", "4"]):
        d = tmp_path / str(k)
        main(["run", "--config", str(CONFIGS / "polya_sum.toml"), "--out", str(d),
              "--replicas", "4", "--workers", workers])
        outs.append((d / "report.json").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_describe(capsys):
    assert main(["describe", "polya_sum"]) == 0
    assert "z (rho + mu)" in capsys.readouterr().out
    assert main(["describe", "nope"]) == 2


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["run"])
    assert e.value.code == 2
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[kernel\nname=")
    assert main(["run", "--config", str(bad)]) == 2


@pytest.mark.parametrize("text", [
    '[kernel]\nname = "poisson"\n[space]\nsites = ["a"]\ncolour = 1\n',
    'extra = 1\n[kernel]\nname = "poisson"\n[space]\nsites = ["a"]\n',
    '[kernel]\nname = "poisson"\nrho = 1\nzz = 3\n[space]\nsites = ["a"]\n',
    '[kernel]\nname = "poisson"\n[space]\nsites = ["a"]\n[[tasks]]\ncheck = "A1"\nsample = "exact"\n',
    '[kernel]\nname = "poisson"\n[space]\nsites = ["a"]\n[[tasks]]\ncheck = "A1"\nbogus = 1\n',
    '[kernel]\nname = "poisson"\n[space]\nsites = ["a"]\n[truncation]\ndepth = 3\n',
    '[kernel]\nname = "nope"\n[space]\nsites = ["a"]\n',
    '[kernel]\nname = "poisson"\nrho = [1, 2]\n[space]\nsites = ["a"]\n',
])
def test_unknown_or_invalid_fields_rejected(text, tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(text)
    assert main(["run", "--config", str(p)]) == 2


def test_kernel_specs_build():
    from papangelou import Space
    X = Space(("a", "b"))
    k = build_kernel({"name": "local_reinforcement", "rho": {"a": 1}, "c": {"a": ["1/2", 1]}}, X)
    assert k.intensity((2, 0)) == (Fraction(5, 2), 0)
    k = build_kernel({"name": "interaction", "rho": 1, "phi": [["inf", 0], [0, "inf"]]}, X)
    assert k.intensity((1, 0))[0] == 0
    with pytest.raises(ConfigError):
        build_kernel({"name": "interaction", "rho": 1}, X)
    with pytest.raises(ConfigError):
        build_kernel({"name": "remark"}, X)


names = st.sampled_from(["poisson", "polya_sum"])


@given(st.integers(0, 2 ** 63), st.integers(0, 6), st.integers(1, 8), names)
def test_runconfig_roundtrip(seed, probe, replicas, kernel):
    raw = {"kernel": {"name": kernel, "z": "1/2", "rho": 1}, "space": {"sites": ["a", "b"]},
           "tasks": [{"check": "A1"}, {"gnz": "exact", "n": 10}], "seed": seed,
           "probe_mass": probe, "replicas": replicas,
           "output": {"format": "csv"}}
    cfg = RunConfig.from_dict(raw)
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    for k, v in raw.items():
        assert cfg.to_dict()[k] == v


def test_regime_flag_inherits_config_options(tmp_path, capsys):
    assert main(["extract", "--config", str(CONFIGS / "interaction.toml"),
                 "--regime", "interaction", "--out", str(tmp_path)]) == 0
    assert main(["extract", "--config", str(CONFIGS / "polya_sum.toml"),
                 "--regime", "interaction"]) == 2
    assert "needs f_diagonal" in capsys.readouterr().err
