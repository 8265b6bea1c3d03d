"""Acceptance gate: one test (and one summary line) per criterion, at the stated tolerance.

Criteria that cannot be met at desk scale are implemented faithfully and marked
``xfail(strict=True)``; their summary line still reads FAIL.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.fft as sfft

from kgres.algebra import CubicNonlinearity, MassVector, make_term
from kgres.condition import ConditionMatrix, check_condition, condition_value, search_matrix
from kgres.analysis import growth_correlation
from kgres.profile import HyperbolicChart, WeightFunction, energy_diagnostic, integrate_profile_ode
from kgres.reduced import HyperbolaPoint, ReducedSystem, eval_reduced, reduced_oracle, substitution_value
from kgres.scenarios import get_scenario
from kgres.solver import (
    CauchyData,
    Grid1D,
    ProbeSamples,
    RunRecord,
    Shape,
    _series_weights,
    energy_observer,
    evolve,
    light_cone_leakage,
)

from test_reduced import dissipative_pair, four_wave, resonant_pair
from test_solver import Cosine, _pair, bump_data, measured_order

RNG_SEED = 20240611
CHI = WeightFunction(2.0)


def random_suite(seed=RNG_SEED, count=50):
    """Systems with N <= 4, at most six cubic terms and masses p/q with q <= 4; half carry a forced resonance."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(1, 5))
        ms = [Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 5))) for _ in range(n)]
        if i % 2 and n >= 2:
            ms[-1] = sum(ms[int(k)] for k in rng.integers(0, n - 1, size=3))
        ms = sorted(ms)
        terms = []
        for _ in range(int(rng.integers(1, 7))):
            factors = [f"{rng.choice(['u', 'ut', 'ux'])}{int(rng.integers(1, n + 1))}" for _ in range(3)]
            terms.append(make_term(int(rng.integers(0, n)), factors, float(rng.uniform(-2, 2))))
        sys_ = ReducedSystem(MassVector(ms), CubicNonlinearity(n, terms))
        pts = [(float(rng.uniform(-3, 3)), rng.normal(size=n) + 1j * rng.normal(size=n)) for _ in range(10)]
        out.append((sys_, pts))
    return out


def term_scale(sys_, om, Y) -> float:
    """Size of the largest component before cancellation: sum of |term| over all sign patterns."""
    Y = np.abs(np.asarray(Y))
    acc = np.zeros(sys_.n)
    for t in sys_.nonlinearity.terms:
        acc[t.target] += 8 * abs(substitution_value(t, sys_.masses, om)) * np.prod(Y[list(t.indices)])
    return max(float(np.max(acc / sys_.masses.as_float())), 1e-300)


def test_criterion_01_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    resonant = 0
    for sys_, pts in random_suite():
        resonant += any(True for _ in sys_.resonant_terms())
        for z, Y in pts:
            om = HyperbolaPoint(z)
            got = eval_reduced(sys_, om, Y)
            ref = reduced_oracle(sys_, om, Y)
            scale = max(float(np.max(np.abs(ref))), term_scale(sys_, om, Y))
            worst = max(worst, float(np.max(np.abs(got - ref))) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    acceptance("1 oracle equivalence", ok, f"max diff {worst:.2e} of term size (tol 1e-10), {elapsed:.2f} s (< 10 s), {resonant}/50 systems with resonant terms")
    assert ok


def test_criterion_02_displayed_formulas(acceptance):
    rng = np.random.default_rng(RNG_SEED + 1)
    z = rng.uniform(-3, 3, 100)
    om = HyperbolaPoint(z)
    errs = []

    Y = rng.normal(size=(2, 100)) + 1j * rng.normal(size=(2, 100))
    b1, b2 = 0.7, 1.9
    want = np.array([b1 * np.conj(Y[0]) ** 2 * Y[1], b2 / 3 * Y[0] ** 3])
    errs.append(np.max(np.abs(eval_reduced(resonant_pair(b1, b2), om, Y) - want)) / np.max(np.abs(want)))

    Y4 = rng.normal(size=(4, 100)) + 1j * rng.normal(size=(4, 100))
    c = (0.5, 1.0, 2.0, 0.25)
    m = (1.0, 2.0, 3.0, 6.0)
    Yc = np.conj(Y4)
    want = np.array(
        [
            c[0] / m[0] * Yc[1] * Yc[2] * Y4[3],
            c[1] / m[1] * Yc[2] * Y4[3] * Yc[0],
            c[2] / m[2] * Y4[3] * Yc[0] * Yc[1],
            c[3] / m[3] * Y4[0] * Y4[1] * Y4[2],
        ]
    )
    errs.append(np.max(np.abs(eval_reduced(four_wave(c), om, Y4) - want)) / np.max(np.abs(want)))

    w3 = np.cosh(z) ** 3
    a1, a2 = np.abs(Y[0]) ** 2, np.abs(Y[1]) ** 2
    want = np.array(
        [
            -3j * w3 * a1 * Y[0] - 2j * w3 * 9 * a2 * Y[0] + 1j * w3 * 3 * np.conj(Y[0]) ** 2 * Y[1],
            -2j * w3 * a1 * Y[1] - 3j * w3 * 9 * a2 * Y[1] - 1j * w3 / 3 * Y[0] ** 3,
        ]
    )
    errs.append(np.max(np.abs(eval_reduced(dissipative_pair(), om, Y) - want)) / np.max(np.abs(want)))
    ok = max(errs) <= 1e-12
    acceptance("2 displayed reduced formulas", ok, "rel errors " + ", ".join(f"{e:.1e}" for e in errs) + " (tol 1e-12)")
    assert ok


def test_criterion_03_gauge_and_homogeneity(acceptance):
    rng = np.random.default_rng(RNG_SEED + 2)
    worst_g = worst_h = 0.0
    for sys_, pts in random_suite():
        mf = sys_.masses.as_float()
        for z, Y in pts:
            om = HyperbolaPoint(z)
            base = eval_reduced(sys_, om, Y)
            scale = max(float(np.max(np.abs(base))), term_scale(sys_, om, Y))
            theta = rng.uniform(-np.pi, np.pi)
            rot = eval_reduced(sys_, om, np.exp(1j * mf * theta) * Y)
            worst_g = max(worst_g, float(np.max(np.abs(rot - np.exp(1j * mf * theta) * base))) / scale)
            lam = rng.uniform(0.1, 3) * rng.choice([-1, 1])
            hom = eval_reduced(sys_, om, lam * Y)
            worst_h = max(worst_h, float(np.max(np.abs(hom - lam**3 * base))) / (scale * abs(lam) ** 3))
    ok = worst_g <= 1e-12 and worst_h <= 1e-12
    acceptance("3 gauge and homogeneity", ok, f"gauge {worst_g:.1e}, homogeneity {worst_h:.1e} (tol 1e-12)")
    assert ok


def test_criterion_04_condition_checks(acceptance):
    t0 = time.perf_counter()
    r22 = check_condition(ConditionMatrix.diagonal([1.9, 3 * 0.7]), resonant_pair(0.7, 1.9))
    c = (0.5, 1.0, 2.0, 0.25)
    r23 = check_condition(ConditionMatrix.diagonal([1 / (3 * c[0]), 2 / (3 * c[1]), 3 / (3 * c[2]), 6 / c[3]]), four_wave(c))
    r6 = check_condition(ConditionMatrix.diagonal([1, 9]), dissipative_pair(), k=3)
    # independent value: min over s + t = 1 of 3 s^2 + 243 t^2 + 36 s t
    s = np.linspace(0, 1, 100001)
    oracle = float(np.min(3 * s**2 + 243 * (1 - s) ** 2 + 36 * s * (1 - s)))
    forced = four_wave((0.0, 0.0, 0.0, 1.0))
    res = search_matrix(forced)
    cert = float(condition_value(res.matrix, forced, HyperbolaPoint(res.report.worst_z), res.report.worst_y))
    elapsed = time.perf_counter() - t0
    ok = (
        abs(r22.worst_ratio) <= 1e-12
        and abs(r23.worst_ratio) <= 1e-12
        and abs(r6.c_tilde - 3.0) <= 1e-6
        and abs(oracle - 3.0) <= 1e-9
        and not res.success
        and cert > 0
        and elapsed < 60
    )
    acceptance(
        "4 condition checks",
        ok,
        f"pair {r22.worst_ratio:.1e}, four-wave {r23.worst_ratio:.1e}, C~ {r6.c_tilde:.9f} (oracle {oracle:.6f}), "
        f"single forcing search {res.status} with certificate value {cert:.3e}, {elapsed:.1f} s",
    )
    assert ok


def test_criterion_05_solver_verification(acceptance):
    g = Grid1D(np.pi, 256)
    m1 = MassVector([1])
    free1 = CubicNonlinearity(1, [])
    rec = evolve(m1, free1, CauchyData(1.0, np.pi, (Cosine(2.0),), (Shape("zero"),)), g, dt=1e-3, T=10.0, check_horizon=False)
    dispersion = float(np.max(np.abs(rec.final.u[0] - np.cos(np.sqrt(5.0) * 10.0) * np.cos(2 * g.x))))

    rec = evolve(m1, free1, bump_data(), Grid1D(64.0, 1024), dt=1e-3, T=50.0, observers=[energy_observer(m1)], observe_every=5.0)
    e = rec.series["linear_energy"]
    drift = float(np.max(np.abs(e - e[0])) / e[0])

    _, orders = measured_order()

    m, F = _pair()
    rec = evolve(m, F, bump_data(2, eps=0.5), Grid1D(32.0, 8192), T=20.0)
    leak = light_cone_leakage(rec.final, 1.0) / float(np.max(np.abs(rec.final.u)))

    ok = dispersion < 1e-6 and drift < 1e-8 and min(orders) >= 3.8 and leak < 1e-8
    acceptance(
        "5 solver verification",
        ok,
        f"dispersion {dispersion:.1e} (< 1e-6), energy drift {drift:.1e} (< 1e-8), "
        f"RK4 order {min(orders):.2f} (>= 3.8), leakage {leak:.1e} sup (< 1e-8)",
    )
    assert ok


def _decay_fits(outcome):
    return outcome.diagnostics["fits"]


def test_criterion_06a_field_decay_rates(resonant_pair_run, acceptance):
    fits = _decay_fits(resonant_pair_run)
    parts, ok = [], True
    for j in (1, 2):
        a_inf = fits[f"u{j}_Linf"]["a"]
        a_2 = fits[f"u{j}_L2"]["a"]
        ok &= 0.4 <= a_inf <= 0.6 and -0.1 <= a_2 <= 0.1
        parts.append(f"u{j}: a(inf) {a_inf:.3f}, a(2) {a_2:+.4f}")
    wall = resonant_pair_run.diagnostics["wall_seconds"]
    ok &= wall <= 900
    acceptance("6a decay rates of u", ok, "; ".join(parts) + f"; bands 0.5 +- 0.1 and 0 +- 0.1; run {wall:.0f} s (<= 900 s)")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="the sup norms of ut1 and ux1 decay with a fitted exponent near 0.37 on [50, 400]; an exact free "
    "evolution of the same data gives the same value, so the band is not reachable on this horizon",
)
def test_criterion_06b_derivative_decay_rates(resonant_pair_run, acceptance):
    fits = _decay_fits(resonant_pair_run)
    parts, ok = [], True
    for j in (1, 2):
        for f in ("ut", "ux"):
            a_inf = fits[f"{f}{j}_Linf"]["a"]
            a_2 = fits[f"{f}{j}_L2"]["a"]
            good = 0.4 <= a_inf <= 0.6 and -0.1 <= a_2 <= 0.1
            ok &= good
            parts.append(f"{f}{j}: {a_inf:.3f}/{a_2:+.4f}")
    acceptance("6b decay rates of derivatives", ok, "a(inf)/a(2) " + ", ".join(parts) + "; bands 0.5 +- 0.1 and 0 +- 0.1")
    assert ok


def free_derivative_exponent(m=1.0, points=16384):
    """Sup-norm exponent of ut for the exact free evolution of the same bump data (no time stepping)."""
    cfg = get_scenario("resonant-pair")
    g = Grid1D(cfg.grid.half_length, points)
    u0 = cfg.data.epsilon * Shape("bump").evaluate(g.x, 1.0)
    uh = sfft.rfft(u0)
    uh[-1] = 0
    w = np.sqrt(g.k**2 + m * m)
    t = np.arange(50.0, 401.0, 2.0)
    sup = np.array([np.max(np.abs(sfft.irfft(-uh * w * np.sin(w * tt), n=points))) for tt in t])
    return float(-np.polyfit(np.log(t), np.log(sup), 1)[0])


def test_free_derivative_exponent_matches_nonlinear_run(resonant_pair_run):
    """Supports the analysis behind the derivative band: the shortfall is already present without nonlinearity."""
    a_free = free_derivative_exponent()
    a_run = _decay_fits(resonant_pair_run)["ut1_Linf"]["a"]
    assert a_free < 0.4 and abs(a_free - a_run) < 0.02


def test_criterion_07_forced_growth(forced_series, acceptance):
    rep = growth_correlation(forced_series["time"], forced_series["u2_Linf"], (50.0, 400.0))
    ok = rep.slope > 0 and rep.r2 > 0.9
    acceptance("7 forced non-decay control", ok, f"slope {rep.slope:.3e} (> 0), R^2 {rep.r2:.4f} (> 0.9)")
    assert ok


def test_criterion_08_profile_machinery(resonant_pair_run, acceptance):
    prof = resonant_pair_run.diagnostics["profile"]
    recon = prof["reconstruction_residual"]

    rng = np.random.default_rng(RNG_SEED + 3)
    lyap = 0.0
    for sys_, A in ((resonant_pair(), ConditionMatrix.diagonal([1, 3])), (four_wave(), ConditionMatrix.diagonal([1 / 3, 2 / 3, 1, 6]))):
        for z in (0.0, 0.9):
            a0 = 0.3 * (rng.normal(size=sys_.n) + 1j * rng.normal(size=sys_.n))
            L = integrate_profile_ode(sys_, CHI, z, a0, 4.0, 4000.0).lyapunov(A)[0]
            lyap = max(lyap, float(np.max(np.abs(L - L[0])) / L[0]))

    radial = 0.0
    for m, z in ((1, 0.0), (3, 0.6)):
        sys_ = ReducedSystem(MassVector([m]), CubicNonlinearity.from_spec(1, [(1, ["ut1", "ut1", "ut1"], -1.0)]))
        a0 = np.array([0.6 + 0.3j])
        traj = integrate_profile_ode(sys_, CHI, z, a0, 4.0, 1e4, rtol=1e-11, atol=1e-14)
        c = 3 * CHI(z) ** 2 * np.cosh(z) ** 3 * m**2 / 8
        want = abs(a0[0]) ** 2 / (1 + 2 * c * abs(a0[0]) ** 2 * np.log(traj.tau / 4.0))
        radial = max(radial, float(np.max(np.abs(np.abs(traj.alpha[0, 0]) ** 2 - want) / want)))

    ode = prof["ode_match"]
    ok = recon <= 1e-6 and lyap <= 1e-8 and radial <= 1e-8 and ode["relative_error"] <= 0.15
    acceptance(
        "8 profile machinery",
        ok,
        f"(a) reconstruction {recon:.1e} sup (<= 1e-6); (b) Lyapunov drift {lyap:.1e} (<= 1e-8); "
        f"(c) radial closed form {radial:.1e} (<= 1e-8); (d) PDE vs ODE over tau {ode['tau0']:.0f}-{ode['tau1']:.0f}: "
        f"{ode['relative_error']:.3f} (<= 0.15)",
    )
    assert ok


def test_criterion_09_slow_variation_and_oscillation(resonant_pair_run, acceptance):
    prof = resonant_pair_run.diagnostics["profile"]
    sv = prof["slow_variation"]
    osc = prof["oscillatory"]
    ok = (
        "ratio" in sv
        and sv["ratio"] <= 1.5
        and osc["1.0"]["bounded"]
        and osc["2.0"]["bounded"]
        and not osc["0.0"]["bounded"]
        and osc["0.0"]["slope_ratio"] >= 0.8
    )
    acceptance(
        "9 slow variation and oscillatory integrals",
        ok,
        f"decade ratio {sv.get('ratio', float('nan')):.3f} (<= 1.5); b=1 bounded {osc['1.0']['bounded']}, "
        f"b=2 bounded {osc['2.0']['bounded']}; b=0 log slope / closed form {osc['0.0']['slope_ratio']:.3f} (>= 0.8)",
    )
    assert ok


def free_energy_exponent(chart: HyperbolicChart, points=16384):
    """``E_0`` growth exponent of the exact free evolution of the resonant-pair data on ``chart``."""
    cfg = get_scenario("resonant-pair")
    g = Grid1D(cfg.grid.half_length, points)
    t, x = chart.probe_points()
    k = g.k.copy()
    k[-1] = 0.0
    us, uts, uxs = [], [], []
    for m in cfg.masses.as_float():
        uh = sfft.rfft(cfg.data.epsilon * Shape("bump").evaluate(g.x, cfg.data.B))
        uh[-1] = 0.0
        w = np.sqrt(k**2 + m * m)
        wc = uh * _series_weights(points)
        u, ut, ux = (np.zeros(t.size) for _ in range(3))
        for s in range(0, t.size, 256):
            sl = slice(s, s + 256)
            E = np.exp(1j * np.outer(x[sl] + g.half_length, k)) * wc
            C, S = np.cos(np.outer(t[sl], w)), np.sin(np.outer(t[sl], w))
            u[sl] = np.real((C * E).sum(1))
            ut[sl] = np.real((-S * w * E).sum(1))
            ux[sl] = np.real((C * 1j * k * E).sum(1))
        us.append(u)
        uts.append(ut)
        uxs.append(ux)
    probes = {"energy": ProbeSamples(t, x, np.array(us), np.array(uts), np.array(uxs))}
    rec = RunRecord(cfg.masses, CubicNonlinearity(2, []), cfg.data, g, 0.0, cfg.T, None, {}, probes=probes)
    return energy_diagnostic(rec, chart, CHI, probe_name="energy").growth_exponent()


def test_criterion_10_energy_growth(resonant_pair_run, acceptance):
    en = resonant_pair_run.diagnostics["profile"]["energy"]
    cfg = get_scenario("resonant-pair")
    p = cfg.profile
    chart = HyperbolicChart.geometric(cfg.data.B, cfg.T, p.tau0, p.ratio, p.energy_Z, p.energy_n_z)
    delta_free = free_energy_exponent(chart)
    ok = en["growth_exponent"] <= 0.4 and delta_free <= 0.1
    acceptance(
        "10 energy growth",
        ok,
        f"delta {en['growth_exponent']:.3f} (<= 0.4) on |z| <= {en['z_max']:g}, tau {en['tau0']:.1f}-{en['tau1']:.0f}; "
        f"free run delta {delta_free:.3f} (<= 0.1); full |z| <= 3 chart gives {en['wide_chart_growth_exponent']:.2f}",
    )
    assert ok
