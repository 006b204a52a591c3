import json
import subprocess
import sys

import pytest

from toruspatterns.config import (TOLERANCE_KEYS, RunConfig, builtin_config_text,
                                  load_config)
from toruspatterns.errors import ConfigError


def test_builtin_configs_load_and_validate():
    cfg = load_config("default")
    assert cfg.params.R == 5.0 and cfg.params.r == 1.0
    assert cfg.params.n_waves == 40
    assert cfg.grid.n_theta % (4 * cfg.params.n_waves) == 0
    fig2 = load_config("figure2")
    assert fig2.params.n_waves == 15
    assert fig2.census_epsilon == 0.2


def test_registry_matches_shipped_configs():
    """Every consumed tolerance is named in the config; no hidden constants."""
    for name in ("default", "figure2"):
        doc = json.loads(builtin_config_text(name))
        assert set(doc["tolerances"]) == set(TOLERANCE_KEYS), name


def test_unknown_keys_rejected():
    doc = json.loads(builtin_config_text("default"))
    doc["extra"] = 1
    with pytest.raises(ConfigError, match="unknown keys"):
        RunConfig.from_dict(doc)
    doc = json.loads(builtin_config_text("default"))
    doc["params"]["typo"] = 2
    with pytest.raises(ConfigError, match="unknown keys"):
        RunConfig.from_dict(doc)
    doc = json.loads(builtin_config_text("default"))
    doc["tolerances"]["mystery_tol"] = 1e-3
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc)


def test_missing_and_invalid_tolerances_rejected():
    doc = json.loads(builtin_config_text("default"))
    del doc["tolerances"]["newton_tol"]
    with pytest.raises(ConfigError, match="missing tolerances"):
        RunConfig.from_dict(doc)
    doc = json.loads(builtin_config_text("default"))
    doc["tolerances"]["newton_tol"] = -1.0
    with pytest.raises(ConfigError, match="positive"):
        RunConfig.from_dict(doc)


def test_grid_wave_compatibility_enforced():
    doc = json.loads(builtin_config_text("default"))
    doc["grid"]["n_theta"] = 512  # not divisible by 4*40
    with pytest.raises(ValueError):
        RunConfig.from_dict(doc)


def test_epsilon_embedding_enforced():
    doc = json.loads(builtin_config_text("default"))
    doc["census"]["epsilon"] = 4.5
    with pytest.raises(ValueError):
        RunConfig.from_dict(doc)


def test_digest_stable_and_sensitive():
    a = load_config("default").digest()
    b = load_config("default").digest()
    assert a == b
    doc = json.loads(builtin_config_text("default"))
    doc["seed"] = 999
    c = RunConfig.from_dict(doc).digest()
    assert c != a


def test_tol_accessor():
    cfg = load_config("default")
    assert cfg.tol("newton_tol") == 1e-11
    with pytest.raises(ConfigError):
        cfg.tol("not_a_tolerance")


def _cli(*args, timeout=300):
    return subprocess.run(
        [sys.executable, "-m", "toruspatterns.cli", *args],
        capture_output=True, text=True, timeout=timeout,
    )


def test_cli_construct_idempotent(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    r1 = _cli("--config", "default", "--out", str(out1), "--quiet", "construct")
    r2 = _cli("--config", "default", "--out", str(out2), "--quiet", "construct")
    assert r1.returncode == 0 and r2.returncode == 0
    for name in ("profile.json", "nonlinearity.csv", "nonlinearity.json",
                 "profile_curve.csv", "threshold.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_invalid_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    r = _cli("--config", str(bad), "construct")
    assert r.returncode == 1
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["error"] == "config"


def test_cli_embedding_violation_exit_code():
    r = _cli("--config", "default", "--epsilon", "4.5", "construct")
    assert r.returncode == 1
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["error"] == "config"


def test_cli_bad_grid_argument():
    r = _cli("--config", "default", "--grid", "abc", "construct")
    assert r.returncode == 1


def test_cli_solver_failure_exit_code(tmp_path):
    """An amplitude beyond the branch fold is a solver failure, exit 2."""
    r = _cli("--config", "default", "--grid", "64x160",
             "--out", str(tmp_path), "--epsilon", "0.05", "--quiet", "steady",
             timeout=600)
    assert r.returncode == 2
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["error"] == "solver"
    assert err["type"] in ("NoConvergence", "SingularJacobian")


def test_cli_steady_writes_artifacts(tmp_path):
    r = _cli("--config", "default", "--grid", "64x160", "--out", str(tmp_path),
             "--epsilon", "0.001", "--quiet", "steady")
    assert r.returncode == 0, r.stderr
    sidecar = json.loads((tmp_path / "steady_0.001.json").read_text())
    assert sidecar["epsilon"] == 0.001
    assert sidecar["residual_norm"] < 1e-11
    assert (tmp_path / "steady_0.001.tpf").exists()
    assert (tmp_path / "steady_0.001.csv").exists()
