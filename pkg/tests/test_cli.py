import json

import pytest

from barystab import cli


def _run(tmp_path, *args, name="out"):
    return cli.main(["fig1", "--out", str(tmp_path / name), *args])


def test_fig1_outputs_and_manifest(tmp_path):
    assert _run(tmp_path, "--plot") == 0
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "fig1"
    for name in manifest["outputs"]:
        assert (out / name).exists()
    svg = next(out.glob("*.svg")).read_text()
    assert svg.startswith("<svg") or "<svg" in svg[:200]
    assert not (out / cli.LOCK_NAME).exists()


def test_csv_outputs_are_byte_identical(tmp_path):
    assert _run(tmp_path, "--seed", "5", name="a") == 0
    assert _run(tmp_path, "--seed", "5", name="b") == 0
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_config_errors_exit_2(tmp_path):
    assert _run(tmp_path, "--config", str(tmp_path / "missing.json")) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epsilons": [0.2, 0.1]}))
    assert _run(tmp_path, "--config", str(bad)) == 2
    bad.write_text("[1, 2]")
    assert _run(tmp_path, "--config", str(bad)) == 2


def test_out_of_regime_needs_force(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epsilons": [0.6]}))
    assert _run(tmp_path, "--config", str(cfg)) == 2
    assert _run(tmp_path, "--config", str(cfg), "--force") == 0


def test_held_lock_exits_4(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / cli.LOCK_NAME).write_text("123")
    assert _run(tmp_path) == 4
    assert (out / cli.LOCK_NAME).exists()


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_SEED, "99")
    monkeypatch.setenv(cli.ENV_THREADS, "2")
    cfg = cli.load_config("fig2", None)
    assert cfg.seed == 99 and cfg.threads == 2
    assert cli.load_config("fig2", None, seed=3).seed == 3
    assert cli.load_config("remark-exponent", None).family == "remark"
    monkeypatch.setenv(cli.ENV_SEED, "x")
    assert _run(tmp_path) == 2


def test_plot_slope_annotation(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("x,y\n1,2\n10,20\n")
    assert cli.main(["plot", str(csv), "x", "y"]) == 0
    assert "slope 1.000" in csv.with_suffix(".svg").read_text()


def test_plot_errors(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("x,y\n0,2\n10,20\n")
    assert cli.main(["plot", str(csv), "x", "z"]) == 2
    assert cli.main(["plot", str(csv), "x", "y"]) == 2
    assert cli.main(["plot", str(csv), "x", "y", "--linear"]) == 0
    empty = tmp_path / "e.csv"
    empty.write_text("x,y\n")
    assert cli.main(["plot", str(empty), "x", "y"]) == 2


def test_unknown_subcommand():
    assert cli.run("nope") == 2
    with pytest.raises(SystemExit):
        cli.main(["nope"])
