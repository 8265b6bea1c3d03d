"""Shared fixtures: the two long reference runs and the acceptance summary."""

from __future__ import annotations

import time

import pytest

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(criterion: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k.split()[0] if c.isdigit()) or 0), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def resonant_pair_run(tmp_path_factory):
    """Full pipeline on the built-in resonant pair (L = 600, M = 16384, T = 400)."""
    from kgres.pipeline import run_scenario
    from kgres.scenarios import get_scenario

    out = tmp_path_factory.mktemp("resonant-pair")
    t0 = time.perf_counter()
    outcome = run_scenario(get_scenario("resonant-pair"), out)
    outcome.diagnostics["wall_seconds"] = time.perf_counter() - t0
    return outcome


@pytest.fixture(scope="session")
def forced_series():
    """Norm series of the forced system on the same box and data, at M = 8192."""
    from kgres.scenarios import get_scenario
    from kgres.solver import evolve, norms_observer

    cfg = get_scenario("forced-resonance").replace(**{"grid.points": 8192})
    rec = evolve(cfg.masses, cfg.nonlinearity, cfg.data, cfg.grid, T=cfg.T, observers=[norms_observer()], observe_every=1.0)
    assert not rec.blowup
    return rec.series
