import json
import math

import pytest

from latticewave.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, EXIT_RUNTIME, main
from latticewave.config import EXPERIMENTS, ConfigError, parse_config
from latticewave.potentials import PowerLaw

SIM = {
    "experiment": "simulate",
    "potential": {"kind": "power_law", "exponent": 6},
    "data": {"kind": "riemann", "u_l": 1, "u_r": 2},
    "N_list": [16, 32],
    "T": 0.05,
    "snapshots": 2,
}


def cfg(**kw):
    d = json.loads(json.dumps(SIM))
    d.update(kw)
    return d


def parse(d, env=None):
    return parse_config(json.dumps(d), env)


def write(tmp_path, d, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def test_parse_defaults():
    c = parse(cfg())
    assert isinstance(c.potential, PowerLaw)
    assert c.dt_auto and c.dt == pytest.approx(min(1e-3, 0.1 / math.sqrt(5 * 16)))
    assert c.snapshots == [0.0, 0.025, 0.05]
    assert c.workers == 1 and c.thresholds == {"energy_drift_max": 1e-4}
    assert c.derived["gap_hull"] == [1.0, 2.0]
    assert len(c.config_hash) == 64 and c.config_hash == parse(cfg()).config_hash


@pytest.mark.parametrize(
    "bad, where",
    [
        ({"bogus": 1}, "bogus"),
        ({"N_list": [32, 16]}, "N_list"),
        ({"N_list": []}, "N_list"),
        ({"T": 0}, "T"),
        ({"experiment": "nope"}, "experiment"),
        ({"params": {"nope": 1}}, "params.nope"),
        ({"thresholds": {"energy_drift_max": "x"}}, "thresholds"),
        ({"potential": {"kind": "power_law", "exponent": 6, "domain": [1.5, 3]}}, "data"),
        ({"snapshots": [0.1, 0.2]}, "snapshots"),
    ],
)
def test_parse_errors_name_field(bad, where):
    with pytest.raises(ConfigError) as ei:
        parse(cfg(**bad))
    assert where in str(ei.value)


def test_malformed_json():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("{not json")


def test_missing_data_for_dynamic():
    d = cfg()
    del d["data"]
    with pytest.raises(ConfigError, match="data"):
        parse(d)


def test_explicit_dt_and_env_workers():
    c = parse(cfg(dt=2e-4, workers=3), env="2")
    assert c.dt == 2e-4 and not c.dt_auto and c.workers == 2
    with pytest.raises(ConfigError):
        parse(cfg(), env="many")


def test_nonconvex_data_rejected_outside_simulate():
    d = cfg(experiment="riemann_compare", data={"kind": "riemann", "u_l": 0, "u_r": 0})
    with pytest.raises(ConfigError, match="W''"):
        parse(d)


def test_cli_pass_and_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, cfg()), "--output-dir", str(out)]) == EXIT_PASS
    text = capsys.readouterr().out
    assert "PASS" in text and "FAIL" not in text
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["experiment"] == "simulate"
    assert {"numpy", "scipy", "python"} <= set(m["versions"])
    assert "timestamp" not in json.dumps(m)
    for f in m["files"]:
        assert (out / f).exists()
    v = json.loads((out / "verdict.json").read_text())
    assert v["pass"] and v["assertions"]
    assert (out / "summary.csv").read_text().startswith("experiment,N,quantity,value")


def test_cli_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    path = write(tmp_path, cfg())
    assert main(["run", path, "--output-dir", str(a)]) == EXIT_PASS
    assert main(["run", path, "--output-dir", str(b)]) == EXIT_PASS
    files = json.loads((a / "manifest.json").read_text())["files"]
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_cli_fail_exit(tmp_path):
    d = cfg(thresholds={"energy_drift_max": 1e-30})
    assert main(["run", write(tmp_path, d), "--output-dir", str(tmp_path / "o")]) == EXIT_FAIL


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["run", write(tmp_path, {"experiment": "simulate", "N_list": []})]) == EXIT_CONFIG
    blow = {"experiment": "blowup", "potential": {"kind": "toda"}, "N_list": [8]}
    assert main(["run", write(tmp_path, blow), "--output-dir", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_runtime_error(tmp_path, capsys):
    # quadratic W has no shock, so the default oscillation window is undefined
    d = cfg(experiment="nonlinear_oscillation", potential={"kind": "quadratic"}, N_list=[16])
    assert main(["run", write(tmp_path, d), "--output-dir", str(tmp_path / "o")]) == EXIT_RUNTIME
    assert "runtime error" in capsys.readouterr().err


def test_cli_validate_and_list(tmp_path, capsys):
    assert main(["validate", write(tmp_path, cfg())]) == EXIT_PASS
    assert capsys.readouterr().out.rstrip().endswith("valid")
    assert main(["list-experiments"]) == EXIT_PASS
    text = capsys.readouterr().out
    assert all(e in text for e in EXPERIMENTS)


def test_cli_figures(tmp_path):
    pytest.importorskip("matplotlib")
    d = cfg(experiment="linear_convergence", potential={"kind": "quadratic"}, N_list=[16, 32], T=0.2, snapshots=4)
    out = tmp_path / "f"
    main(["run", write(tmp_path, d), "--output-dir", str(out), "--figures"])
    pngs = list(out.glob("*.png"))
    assert pngs and all(p.read_bytes()[:4] == b"\x89PNG" for p in pngs)
    assert all(p.name in json.loads((out / "manifest.json").read_text())["files"] for p in pngs)


@pytest.mark.parametrize("path", sorted(__import__("glob").glob(__file__.rsplit("/", 2)[0] + "/configs/*.json")))
def test_sample_configs_validate(path):
    c = parse_config(open(path).read())
    assert c.experiment in EXPERIMENTS
