import json

import numpy as np
import pytest

from kgres.config import ScenarioConfig
from kgres.condition import check_condition, search_matrix
from kgres.pipeline import git_blob_sha1, read_series, refit, run_scenario, write_series
from kgres.reduced import ReducedSystem
from kgres.scenarios import builtin_scenarios, get_scenario

SMALL = {"time.T": 40.0, "grid.half_length": 60.0, "grid.points": 1024, "diagnostics.fits.window": [10.0, 40.0]}


def small(name="resonant-pair", **extra):
    return get_scenario(name).replace(**{**SMALL, **extra})


def test_git_blob_hash():
    # same value as `git hash-object` on a file holding "hello\n"
    assert git_blob_sha1(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_series_round_trip_is_exact(tmp_path):
    s = {"time": np.array([0.0, 0.1, 1 / 3]), "v": np.array([1e-300, np.pi, -2.5])}
    write_series(tmp_path / "s.csv", s)
    back = read_series(tmp_path / "s.csv")
    for k in s:
        np.testing.assert_array_equal(back[k], s[k])


@pytest.mark.parametrize("cfg", builtin_scenarios(), ids=lambda c: c.name)
def test_builtin_condition_settings(cfg):
    sys_ = ReducedSystem(cfg.masses, cfg.nonlinearity)
    A = cfg.condition.condition_matrix()
    if A is not None:
        rep = check_condition(A, sys_, k=cfg.condition.k)
        assert rep.passed, rep.to_json()
    if cfg.condition.search:
        assert search_matrix(sys_, cfg.condition.k).status == "certified-failure"


def test_run_directory_contents(tmp_path):
    out = run_scenario(small(), tmp_path / "run")
    names = {p.name for p in (tmp_path / "run").iterdir()}
    assert {"config.json", "condition.json", "series.csv", "profile.csv", "report.json", "manifest.json"} <= names
    assert any(n.startswith("state_") and n.endswith(".bin") for n in names)
    assert all(s["status"] == "ok" for s in out.stages.values())
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["diagnostics"]["profile"]["reconstruction_residual"] < 1e-6
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        assert git_blob_sha1((tmp_path / "run" / name).read_bytes()) == digest


def test_determinism(tmp_path):
    cfg = small(**{"diagnostics.profile.enabled": False})
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    for name in ("series.csv", "config.json", "condition.json", "state_40.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_lists_every_default(tmp_path):
    d = {
        "name": "sparse",
        "masses": ["1", "3"],
        "nonlinearity": [{"target": 2, "factors": ["u1", "u1", "u1"], "coeff": 1}],
        "data": {"epsilon": 0.05, "B": 1, "f": [{"kind": "bump"}, {"kind": "zero"}], "g": [{"kind": "zero"}] * 2},
        "grid": {"half_length": 30, "points": 512},
        "time": {"T": 10},
        "diagnostics": {"profile": {"enabled": False}, "fits": {"claim": "none"}},
    }
    cfg = ScenarioConfig.from_dict(d)
    run_scenario(cfg, tmp_path / "sparse")
    manifest = json.loads((tmp_path / "sparse" / "manifest.json").read_text())
    full = cfg.to_dict()
    assert manifest["config"] == full

    def leaves(node, prefix=""):
        if isinstance(node, dict):
            for k, v in node.items():
                yield from leaves(v, f"{prefix}.{k}" if prefix else k)
        else:
            yield prefix

    got = set(leaves(manifest["config"]))
    for path in leaves(full):
        assert path in got
    for key in ("time.dt", "time.observe_every", "diagnostics.profile.kappa", "diagnostics.condition.k", "output"):
        assert key in got
    assert manifest["config_hash"] == git_blob_sha1(cfg.to_text().encode())


def test_failed_stage_skips_the_rest(tmp_path):
    cfg = small("equal-mass-cubic", **{"data.epsilon": 40.0, "diagnostics.profile.enabled": True})
    out = run_scenario(cfg, tmp_path / "boom")
    assert out.stages["solve"]["status"] == "failed" and "blow-up" in out.stages["solve"]["error"]
    assert out.stages["profile"]["status"] == "skipped" and out.stages["fits"]["status"] == "skipped"
    manifest = json.loads((tmp_path / "boom" / "manifest.json").read_text())
    assert manifest["stages"]["solve"]["status"] == "failed"
    assert not out.passed


def test_refit_reproduces_fits(tmp_path):
    out = run_scenario(small(**{"diagnostics.profile.enabled": False}), tmp_path / "r")
    claims, fits = refit(tmp_path / "r")
    assert [c.value for c in claims] == [c.value for c in out.claims if c.name != "structural condition"]
    assert (tmp_path / "r" / "refit.json").exists()
