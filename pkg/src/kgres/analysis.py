"""Decay-exponent fits and per-scenario reports.

Only exponents are estimated; multiplicative constants are absorbed into the
intercept and never interpreted.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

MIN_T = 10.0
MIN_SAMPLES = 20
GAMMA_SPAN = 10.0


class FitError(ValueError):
    pass


@dataclass
class DecayFit:
    """Least-squares fit of ``log y = c - a log t - gamma log log t`` on ``[t_min, t_max]``."""

    t_min: float
    t_max: float
    c: float
    a: float
    gamma: float
    residual: float
    n_samples: int
    gamma_fixed: bool
    a_fixed: bool = False

    def to_json(self) -> dict:
        return asdict(self)


def _window(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise FitError("t and y differ in shape")
    lo, hi = window if window is not None else (t.max() / 8.0, t.max())
    if lo < MIN_T:
        raise FitError(f"window start {lo} below t = {MIN_T}")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < MIN_SAMPLES:
        raise FitError(f"window [{lo}, {hi}] holds {int(sel.sum())} samples, need {MIN_SAMPLES}")
    if np.any(y[sel] <= 0) or not np.all(np.isfinite(y[sel])):
        raise FitError("series must be positive and finite on the window")
    return t[sel], y[sel], float(lo), float(hi)


def fit_decay(t, y, window=None, fit_gamma: bool = True, fixed_a: float | None = None) -> DecayFit:
    """Fit the decay model on ``window`` (default ``[T/8, T]``).

    ``gamma`` is fitted only when ``fit_gamma`` is set and the window spans at
    least a factor ten in ``t``; otherwise it is fixed to zero. ``fixed_a``
    pins the power and fits only ``c`` (and ``gamma``).
    """
    tw, yw, lo, hi = _window(t, y, window)
    gamma_fixed = not fit_gamma or tw.max() / tw.min() < GAMMA_SPAN
    lt = np.log(tw)
    target = np.log(yw)
    cols = [np.ones_like(lt)]
    if fixed_a is None:
        cols.append(-lt)
    else:
        target = target + fixed_a * lt
    if not gamma_fixed:
        cols.append(-np.log(lt))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - target) ** 2)))
    c = float(coef[0])
    a = float(fixed_a) if fixed_a is not None else float(coef[1])
    gamma = 0.0 if gamma_fixed else float(coef[-1])
    return DecayFit(lo, hi, c, a, gamma, res, int(tw.size), bool(gamma_fixed), fixed_a is not None)


@dataclass
class GrowthReport:
    slope: float
    intercept: float
    r2: float
    t_min: float
    t_max: float

    def to_json(self) -> dict:
        return asdict(self)


def growth_correlation(t, y, window=None) -> GrowthReport:
    """Regress ``t^{1/2} y`` on ``log t``; a logarithmic lower bound shows up as positive slope with high R^2."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = window if window is not None else (t.min(), t.max())
    sel = (t >= lo) & (t <= hi) & (t > 0)
    if sel.sum() < 3:
        raise FitError("need at least three samples")
    if np.any(y[sel] <= 0):
        raise FitError("series must be positive on the window")
    X = np.log(t[sel])
    Y = np.sqrt(t[sel]) * y[sel]
    slope, intercept = np.polyfit(X, Y, 1)
    ss_res = np.sum((Y - (slope * X + intercept)) ** 2)
    ss_tot = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return GrowthReport(float(slope), float(intercept), float(r2), float(lo), float(hi))


@dataclass
class InterpolationReport:
    exponents: dict
    gap: float
    middle_ok: bool
    tol: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.gap - 0.5) <= self.tol and self.middle_ok)

    def to_json(self) -> dict:
        return {"exponents": self.exponents, "gap": self.gap, "middle_ok": self.middle_ok, "tol": self.tol, "passed": self.passed}


def lp_interpolation_check(t, series: dict, window=None, tol: float = 0.15) -> InterpolationReport:
    """Fit ``a(p)`` for ``p`` in ``{2, 4, inf}`` and check ``a(inf) - a(2)`` against 1/2.

    ``series`` maps ``2``, ``4`` and ``np.inf`` (or ``'2'``, ``'4'``, ``'inf'``) to norm series.
    """
    key = {str(k).replace("np.", "").lower(): v for k, v in series.items()}
    a = {}
    for p in ("2", "4", "inf"):
        if p not in key:
            raise FitError(f"missing L^{p} series")
        a[p] = fit_decay(t, key[p], window, fit_gamma=False).a
    gap = a["inf"] - a["2"]
    lo, hi = sorted((a["2"], a["inf"]))
    middle_ok = lo - tol <= a["4"] <= hi + tol
    return InterpolationReport(a, float(gap), bool(middle_ok), tol)


@dataclass
class Claim:
    name: str
    value: float | None
    target: str
    passed: bool
    detail: str = ""


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_report(path: Path, scenario: str, claims: list[Claim], extra: dict | None = None) -> dict:
    body = {
        "scenario": scenario,
        "passed": all(c.passed for c in claims),
        "claims": [asdict(c) for c in claims],
    }
    if extra:
        body.update(extra)
    Path(path).write_text(json.dumps(body, indent=2, default=_json_default) + "\n")
    return body
