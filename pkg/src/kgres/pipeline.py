"""Scenario pipeline: condition check, solve, amplitude extraction, fits, artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import analysis
from .analysis import Claim
from .condition import SearchOptions, check_condition, search_matrix
from .config import ScenarioConfig
from .profile import (
    HyperbolicChart,
    WeightFunction,
    energy_diagnostic,
    extract_profile,
    integrate_profile_ode,
    oscillatory_integral_check,
    slow_variation_check,
)
from .reduced import ReducedSystem
from .solver import RunRecord, energy_observer, evolve, leakage_observer, norms_observer, write_snapshot

log = logging.getLogger(__name__)

DECAY_BAND_INF = (0.4, 0.6)
DECAY_BAND_L2 = (-0.1, 0.1)
GROWTH_R2 = 0.9
ODE_MATCH_TOL = 0.15


def git_blob_sha1(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_series(path: Path, series: dict) -> None:
    keys = list(series)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for i in range(len(series[keys[0]])):
            w.writerow([repr(float(series[k][i])) for k in keys])


def read_series(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keys = rows[0]
    vals = np.array([[float(v) for v in r] for r in rows[1:]])
    return {k: vals[:, i] for i, k in enumerate(keys)}


@dataclass
class ScenarioOutcome:
    directory: Path
    config: ScenarioConfig
    claims: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    record: RunRecord | None = None
    diagnostics: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(s["status"] in ("ok", "skipped") for s in self.stages.values())
        return ok and all(c.passed for c in self.claims)


def decay_claims(series: dict, n: int, window=None) -> tuple[list, dict]:
    """Fitted sup-norm and L^2 exponents for ``u``, ``ut`` and ``ux`` of every component."""
    claims, fits = [], {}
    t = series["time"]
    for j in range(1, n + 1):
        for field_ in ("u", "ut", "ux"):
            for p, band in (("Linf", DECAY_BAND_INF), ("L2", DECAY_BAND_L2)):
                key = f"{field_}{j}_{p}"
                fit = analysis.fit_decay(t, series[key], window, fit_gamma=False)
                fits[key] = fit.to_json()
                ok = band[0] <= fit.a <= band[1]
                claims.append(Claim(f"decay exponent {key}", fit.a, f"[{band[0]}, {band[1]}]", ok))
        rep = analysis.lp_interpolation_check(
            t, {"2": series[f"u{j}_L2"], "4": series[f"u{j}_L4"], "inf": series[f"u{j}_Linf"]}, window
        )
        fits[f"u{j}_interpolation"] = rep.to_json()
        claims.append(Claim(f"L^p exponent gap u{j}", rep.gap, "0.5 +- 0.15 with a(4) in between", rep.passed))
    return claims, fits


def fit_claims(cfg: ScenarioConfig, series: dict) -> tuple[list, dict]:
    window = cfg.fits.window or (cfg.T / 8.0, cfg.T)
    n = cfg.masses.n
    claim = cfg.fits.claim
    if claim == "decay":
        return decay_claims(series, n, window)
    if claim == "growth":
        key = f"u{cfg.fits.component}_Linf"
        rep = analysis.growth_correlation(series["time"], series[key], window)
        ok = rep.slope > 0 and rep.r2 > GROWTH_R2
        return [Claim(f"log growth of t^(1/2) {key}", rep.r2, f"slope > 0 and R^2 > {GROWTH_R2}", ok)], {key: rep.to_json()}
    if claim == "bounded":
        claims, fits = [], {}
        for j in range(1, n + 1):
            key = f"u{j}_Linf"
            fit = analysis.fit_decay(series["time"], series[key], window, fit_gamma=False)
            fits[key] = fit.to_json()
            claims.append(Claim(f"t^(1/2) {key} bounded", fit.a, ">= 0.4", fit.a >= 0.4))
        return claims, fits
    return [], {}


def profile_charts(cfg: ScenarioConfig):
    """Wide chart for the amplitude, a dense ``z = 0`` ray, and a narrow chart for the energy.

    The energy chart stays in ``|z| <= energy_Z``: further out the weight
    ``1/chi`` amplifies the still-arriving wave front, and a free solution
    already shows growth of ``E_0`` there on any desk-scale horizon.
    """
    p = cfg.profile
    B = cfg.data.B
    chart = HyperbolicChart.geometric(B, cfg.T, p.tau0, p.ratio, p.Z, p.n_z)
    ray = HyperbolicChart.dense(B, p.ray_tau0, cfg.T + 2 * B, p.ray_dtau)
    energy = HyperbolicChart.geometric(B, cfg.T, p.tau0, p.ratio, p.energy_Z, p.energy_n_z)
    return chart, ray, energy


def profile_diagnostics(cfg: ScenarioConfig, record: RunRecord, chart, ray, energy_chart, A=None) -> tuple[dict, dict]:
    """Amplitude-level diagnostics; returns (summary numbers, trajectories)."""
    chi = WeightFunction(cfg.profile.kappa)
    traj = extract_profile(record, chart, chi, "chart")
    rtraj = extract_profile(record, ray, chi, "ray")
    sup_u = max(float(np.max(np.abs(traj.u))), 1e-300)
    out = {
        "reconstruction_residual": traj.reconstruction_residual() / sup_u,
        "ray_reconstruction_residual": rtraj.reconstruction_residual() / max(float(np.max(np.abs(rtraj.u))), 1e-300),
    }
    try:
        sv = slow_variation_check(rtraj, cfg.data.epsilon)
        out["slow_variation"] = {"sup": sv.sup, "decade_sups": sv.decade_sups, "ratio": sv.ratio, "passed": sv.passed}
    except ValueError as exc:
        sv = None
        out["slow_variation"] = {"skipped": str(exc)}
    en = energy_diagnostic(record, energy_chart, chi, probe_name="energy")
    out["energy"] = {
        "growth_exponent": en.growth_exponent(),
        "tau0": float(en.tau[0]),
        "tau1": float(en.tau[-1]),
        "z_max": float(energy_chart.z[-1]),
        "wide_chart_growth_exponent": energy_diagnostic(record, chart, chi).growth_exponent(),
    }

    # resonant-only profile flow from the extracted amplitude, one decade along the ray
    sys = ReducedSystem(cfg.masses, cfg.nonlinearity)
    t0 = 30.0 if ray.tau[-1] >= 300.0 else ray.tau[0]
    t1 = min(10.0 * t0, ray.tau[-1])
    sel = (ray.tau >= t0 - 1e-9) & (ray.tau <= t1 + 1e-9)
    taus = ray.tau[sel]
    a_pde = rtraj.alpha[:, 0, sel]
    ode = integrate_profile_ode(sys, chi, 0.0, a_pde[:, 0], taus[0], taus[-1], t_eval=taus)
    a_ode = ode.alpha[:, 0, :]
    scale = max(float(np.max(np.linalg.norm(a_pde, axis=0))), 1e-300)
    mismatch = float(np.max(np.linalg.norm(a_pde - a_ode, axis=0)) / scale)
    out["ode_match"] = {"tau0": float(taus[0]), "tau1": float(taus[-1]), "relative_error": mismatch}

    osc = {}
    for b in (0.0, 1.0, 2.0):
        I = oscillatory_integral_check(rtraj, (0, 0, 0, 0), (1, -1, 1, -1), b)
        osc[str(b)] = {"sup": float(np.max(np.abs(I.partial))), "bounded": I.bounded(), "log_slope": I.log_slope()}
        if b == 0.0:
            osc[str(b)]["closed_form_slope"] = I.closed_form_slope()
            osc[str(b)]["slope_ratio"] = I.log_slope() / max(I.closed_form_slope(), 1e-300)
    out["oscillatory"] = osc
    return out, {"chart": traj, "ray": rtraj, "energy": en, "slow": sv, "ode": ode}


def run_scenario(cfg: ScenarioConfig, out_dir=None, workers: int | None = None, keep_record: bool = False) -> ScenarioOutcome:
    """Run every configured stage and write the run directory.

    Stage failures are recorded in the manifest and skip the later stages.
    """
    out = Path(out_dir or cfg.output or f"runs/{cfg.name}")
    out.mkdir(parents=True, exist_ok=True)
    outcome = ScenarioOutcome(out, cfg)
    (out / "config.json").write_text(cfg.to_text(), encoding="utf-8")
    sys = ReducedSystem(cfg.masses, cfg.nonlinearity)
    A = cfg.condition.condition_matrix()
    failed = False

    def stage(name, fn):
        nonlocal failed
        if failed:
            outcome.stages[name] = {"status": "skipped", "error": "earlier stage failed", "seconds": 0.0}
            return None
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # recorded, not raised: the manifest is the report
            log.exception("stage %s failed", name)
            failed = True
            outcome.stages[name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "seconds": time.perf_counter() - t0}
            return None
        outcome.stages[name] = {"status": "ok", "error": None, "seconds": time.perf_counter() - t0}
        return res

    def do_condition():
        body = {}
        if A is not None:
            rep = check_condition(A, sys, k=cfg.condition.k)
            body["check"] = rep.to_json()
            target = "<= 0" if cfg.condition.k == 0 else f"<= -C |Y|^4 omega0^{cfg.condition.k}, C > 0"
            outcome.claims.append(Claim("structural condition", rep.worst_ratio, target, rep.passed))
        if cfg.condition.search:
            res = search_matrix(sys, cfg.condition.k, SearchOptions())
            body["search"] = res.to_json()
        (out / "condition.json").write_text(json.dumps(body, indent=2) + "\n")
        return body

    stage("condition", do_condition)

    charts = profile_charts(cfg) if cfg.profile.enabled else None

    def do_solve():
        probes = {}
        if charts:
            probes = {"chart": charts[0].probe_points(), "ray": charts[1].probe_points(), "energy": charts[2].probe_points()}
        rec = evolve(
            cfg.masses,
            cfg.nonlinearity,
            cfg.data,
            cfg.grid,
            dt=cfg.dt,
            T=cfg.T,
            observers=[norms_observer(), energy_observer(cfg.masses), leakage_observer(cfg.data.B)],
            observe_every=cfg.observe_every,
            probes=probes,
            workers=workers,
        )
        write_series(out / "series.csv", rec.series)
        write_snapshot(out / f"state_{rec.final.t:g}.bin", rec.final)
        if rec.blowup:
            raise RuntimeError(f"blow-up flagged at t = {rec.blowup_time}")
        return rec

    record = stage("solve", do_solve)
    outcome.record = record if keep_record else None

    def do_profile():
        if not charts:
            return None
        summary, trajs = profile_diagnostics(cfg, record, *charts, A=A)
        trajs["chart"].write_csv(out / "profile.csv", A)
        outcome.profile = trajs
        return summary

    if cfg.profile.enabled:
        outcome.diagnostics["profile"] = stage("profile", do_profile)
    else:
        outcome.stages["profile"] = {"status": "skipped", "error": "disabled", "seconds": 0.0}

    def do_fits():
        claims, fits = fit_claims(cfg, record.series)
        outcome.claims.extend(claims)
        return fits

    outcome.diagnostics["fits"] = stage("fits", do_fits)
    analysis.write_report(
        out / "report.json",
        cfg.name,
        outcome.claims,
        {"stages_ok": all(s["status"] != "failed" for s in outcome.stages.values()), "diagnostics": outcome.diagnostics},
    )
    write_manifest(out, cfg, outcome.stages, record)
    return outcome


def write_manifest(out: Path, cfg: ScenarioConfig, stages: dict, record: RunRecord | None) -> dict:
    files = {}
    for p in sorted(out.iterdir()):
        if p.is_file() and p.name != "manifest.json":
            files[p.name] = git_blob_sha1(p.read_bytes())
    config_text = cfg.to_text().encode()
    body = {
        "scenario": cfg.name,
        "config": cfg.to_dict(),
        "config_hash": git_blob_sha1(config_text),
        "run": None
        if record is None
        else {"dt": record.dt, "steps": int(round(record.T / record.dt)), "blowup": record.blowup, "blowup_time": record.blowup_time},
        "stages": stages,
        "files": files,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    (out / "manifest.json").write_text(json.dumps(body, indent=2, default=_json_default) + "\n")
    return body


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def refit(run_dir) -> tuple[list, dict]:
    """Recompute the fit claims of an existing run directory from its config and series.

    The result goes to ``refit.json`` so the hashed files of the run stay untouched.
    """
    run_dir = Path(run_dir)
    cfg = ScenarioConfig.load(run_dir / "config.json")
    series = read_series(run_dir / "series.csv")
    claims, fits = fit_claims(cfg, series)
    analysis.write_report(run_dir / "refit.json", cfg.name, claims, {"refit": True, "diagnostics": {"fits": fits}})
    return claims, fits
