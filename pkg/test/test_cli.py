import sys
import orjson
import pytest

from ymmodel import defaults

from .helpers import *


@pytest.fixture
def exits(monkeypatch):
    codes = []
    # record instead of exiting
    monkeypatch.setattr(sys, "exit", lambda code=0: codes.append(code))
    return codes


def run_cli(monkeypatch, capsys, *args):
    from ymmodel.cli import main

    monkeypatch.setattr(sys, "argv", ["ymmodel", "--silent", *args])
    main()
    return capsys.readouterr()


def test_cli_indices(monkeypatch, capsys, exits):
    captured = run_cli(monkeypatch, capsys, "indices", "--json")
    json_out = orjson.loads(captured.out)
    assert json_out["count"] == 19
    assert json_out["set"] == "Mprime"
    assert json_out["bound"] == "2"
    first = json_out["indices"][0]
    assert first["beta"] == "1"
    assert first["grade"] == {"r": "-1/2", "s": -1, "u": 0}
    assert first["dim"] == 1
    assert exits == [0]

    captured = run_cli(monkeypatch, capsys, "indices", "--set", "M", "--json")
    assert orjson.loads(captured.out)["count"] == 23

    captured = run_cli(monkeypatch, capsys, "indices", "--bound", "0", "--set", "M", "--json")
    assert [i["beta"] for i in orjson.loads(captured.out)["indices"]] == ["1", "g"]

    # table output
    captured = run_cli(monkeypatch, capsys, "indices")
    assert "β" in captured.out
    assert not captured.out.lstrip().startswith("{")

    # bad index set: usage error
    exits.clear()
    run_cli(monkeypatch, capsys, "indices", "--set", "N")
    assert exits == [2]


def test_cli_bphz_and_lift(monkeypatch, capsys, exits, config_file, temp_dir):
    out_dir = temp_dir / "abelian"
    captured = run_cli(
        monkeypatch, capsys, "bphz", "-c", str(config_file), "--abelian", "-o", str(out_dir), "--closure", "--json"
    )
    json_out = orjson.loads(captured.out)
    assert json_out["c"] == [0.0, 0.0, 0.0, 0.0]
    assert json_out["nsamples"] == 4
    assert json_out["antithetic"] is True
    assert json_out["constants"]["provenance"] == "bphz"
    assert len(json_out["closure"]) == 4
    assert json_out["closure_within"] is True
    constants_file = out_dir / "constants.json"
    assert constants_file.is_file()
    assert orjson.loads(constants_file.read_bytes())["c"] == [0.0, 0.0, 0.0, 0.0]

    lift_dir = temp_dir / "lift"
    captured = run_cli(
        monkeypatch,
        capsys,
        "lift",
        "-c",
        str(config_file),
        "--constants",
        str(constants_file),
        "-s",
        "3",
        "-o",
        str(lift_dir),
        "--json",
    )
    json_out = orjson.loads(captured.out)
    assert json_out["seed"] == 3
    assert json_out["rho"] == 0.9
    assert json_out["constants"]["c"] == [0.0, 0.0, 0.0, 0.0]
    assert json_out["constants"]["provenance"] == "file"
    assert len(json_out["summary"]) == 23
    lifted = [r["beta"] for r in json_out["summary"] if r["beta"] == "1" or "g" in r["beta"]]
    assert (lift_dir / "manifest.json").is_file()
    manifest = orjson.loads((lift_dir / "manifest.json").read_bytes())
    assert sorted(manifest["fields"]) == sorted(lifted)
    for filename in manifest["fields"].values():
        assert (lift_dir / filename).is_file()
    assert exits == [0, 0]


def test_cli_verify(monkeypatch, capsys, exits, config_file, temp_dir):
    args = ["verify", "-c", str(config_file), "--suite", "weight", "--json"]
    first = run_cli(monkeypatch, capsys, *args).out
    second = run_cli(monkeypatch, capsys, *args).out
    assert first == second
    json_out = orjson.loads(first)
    assert json_out["passed"] is True
    assert [s["suite"] for s in json_out["suites"]] == ["weight"]

    out_dir = temp_dir / "verify"
    run_cli(monkeypatch, capsys, "verify", "-c", str(config_file), "--suite", "weight", "-o", str(out_dir))
    assert orjson.loads((out_dir / "report.json").read_bytes())["passed"] is True
    assert exits == [0, 0, 0]


def test_cli_scaling_and_cauchy(monkeypatch, capsys, exits, config_file, temp_dir):
    out_dir = temp_dir / "scaling"
    captured = run_cli(
        monkeypatch, capsys, "scaling", "-c", str(config_file), "--rho", "0.1", "-n", "2", "-o", str(out_dir), "--json"
    )
    json_out = orjson.loads(captured.out)
    assert json_out["beta"] == "g"
    assert len(json_out["lambdas"]) == defaults.scaling_lambdas
    assert json_out["lambdas"][0] == pytest.approx(0.8)
    assert (out_dir / "scaling.csv").is_file()
    assert (out_dir / "scaling.json").is_file()

    captured = run_cli(
        monkeypatch, capsys, "cauchy", "-c", str(config_file), "--source", "smooth", "--halvings", "1", "--json"
    )
    json_out = orjson.loads(captured.out)
    assert json_out["rhos"] == pytest.approx([0.9, 0.45, 0.225])
    assert len(json_out["differences"]) == 2
    assert exits == [0, 0]


def test_cli_langevin(monkeypatch, capsys, exits, config_file, temp_dir):
    out_dir = temp_dir / "langevin"
    captured = run_cli(
        monkeypatch,
        capsys,
        "langevin",
        "-c",
        str(config_file),
        "--coupling",
        "0",
        "--horizon",
        "0.05",
        "--dt",
        "0.01",
        "-g",
        "4",
        "--snapshot-every",
        "5",
        "-o",
        str(out_dir),
        "--json",
    )
    json_out = orjson.loads(captured.out)
    assert json_out["steps"] == 5
    assert json_out["final_time"] == pytest.approx(0.05)
    assert json_out["final_norm"] > 0
    assert json_out["config"]["grid"]["nx"] == 4
    assert [s["file"] for s in json_out["snapshots"]] == ["snapshot_0000.bin", "snapshot_0001.bin"]
    assert (out_dir / "trajectory.csv").is_file()

    captured = run_cli(
        monkeypatch,
        capsys,
        "langevin",
        "-c",
        str(config_file),
        "--coupling",
        "0",
        "--horizon",
        "0.02",
        "--dt",
        "0.01",
        "-g",
        "4",
        "--rho-prime",
        "0.9",
        "--json",
    )
    json_out = orjson.loads(captured.out)
    assert json_out["with_counterterm"] == 0.0
    assert json_out["without_counterterm"] == 0.0
    assert exits == [0, 0]


def test_cli_errors(monkeypatch, capsys, exits, temp_dir):
    bad_config = temp_dir / "bad.conf"
    bad_config.write_text("[grid]\nnx = four\n")
    captured = run_cli(monkeypatch, capsys, "indices", "-c", str(bad_config))
    assert exits == [2]
    assert "line 2" in captured.err
    assert "nx" in captured.err

    exits.clear()
    run_cli(monkeypatch, capsys, "indices", "-c", str(temp_dir / "missing.conf"))
    assert exits == [2]

    exits.clear()
    constants_file = temp_dir / "constants.json"
    constants_file.write_text("{not json")
    good_config = temp_dir / "small.conf"
    good_config.write_text(small_config)
    run_cli(monkeypatch, capsys, "lift", "-c", str(good_config), "--constants", str(constants_file))
    assert exits == [2]

    # a blow-up threshold nothing can stay under
    exits.clear()
    abort_config = temp_dir / "abort.conf"
    abort_config.write_text(small_config + "\n[langevin]\nblowup = 1e-12\n")
    captured = run_cli(
        monkeypatch, capsys, "langevin", "-c", str(abort_config), "--coupling", "0", "--horizon", "0.02", "-g", "4"
    )
    assert exits == [3]
    assert "blow-up" in captured.err
