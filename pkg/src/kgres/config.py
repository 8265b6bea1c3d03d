"""Scenario configuration: a JSON document parsed into validated module inputs.

Every field has a dotted path (``data.f[1].kind``) that error messages quote, and
``ScenarioConfig.to_dict`` writes every default explicitly so a saved config is
complete and parses back to an identical object.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .algebra import CubicNonlinearity, MassVector, make_term, parse_factor
from .condition import ConditionMatrix, ConditionMatrixError
from .solver import CauchyData, Grid1D, Shape

CLAIMS = ("decay", "growth", "bounded", "none")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _get(d: dict, key: str, path: str, kind, default=..., allow_none=False):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return copy.deepcopy(default)
    v = d[key]
    where = f"{path}.{key}" if path else key
    if v is None and allow_none:
        return None
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(where, f"expected a number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(where, f"expected an integer, got {v!r}")
        return v
    if kind is bool:
        if not isinstance(v, bool):
            raise ConfigError(where, f"expected true/false, got {v!r}")
        return v
    if kind is str:
        if not isinstance(v, str):
            raise ConfigError(where, f"expected a string, got {v!r}")
        return v
    if not isinstance(v, kind):
        raise ConfigError(where, f"expected {kind.__name__}, got {type(v).__name__}")
    return v


def _check_keys(d: dict, allowed: set, path: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(path or "<root>", f"unknown field(s) {sorted(extra)}")


def _number(v, where: str) -> float:
    """A real given as a JSON number or an exact ``'p/q'`` string."""
    if isinstance(v, bool):
        raise ConfigError(where, "expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(where, f"cannot parse {v!r} as a number") from None
    raise ConfigError(where, f"expected a number, got {v!r}")


@dataclass(frozen=True)
class ConditionSettings:
    matrix: tuple | None = None  # rows of real numbers (Hermitian real part only) or None
    k: int = 0
    search: bool = False

    def to_dict(self) -> dict:
        return {"matrix": None if self.matrix is None else [list(r) for r in self.matrix], "k": self.k, "search": self.search}

    def condition_matrix(self) -> ConditionMatrix | None:
        return None if self.matrix is None else ConditionMatrix(np.array(self.matrix, dtype=float))


@dataclass(frozen=True)
class ProfileSettings:
    enabled: bool = True
    kappa: float = 2.0
    tau0: float = 3.5
    ratio: float = 1.05
    Z: float = 3.0
    n_z: int = 61
    ray_tau0: float = 3.5
    ray_dtau: float = 0.05
    energy_Z: float = 1.0
    energy_n_z: int = 41

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class FitSettings:
    claim: str = "decay"
    window: tuple | None = None  # default [T/8, T]
    component: int = 2  # 1-based, used by the growth claim

    def to_dict(self) -> dict:
        return {"claim": self.claim, "window": None if self.window is None else list(self.window), "component": self.component}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    masses: MassVector
    nonlinearity: CubicNonlinearity
    data: CauchyData
    grid: Grid1D
    T: float
    dt: float | None = None
    observe_every: float = 1.0
    description: str = ""
    condition: ConditionSettings = field(default_factory=ConditionSettings)
    profile: ProfileSettings = field(default_factory=ProfileSettings)
    fits: FitSettings = field(default_factory=FitSettings)
    output: str | None = None

    # ------------------------------------------------------------------ parsing

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("", "config must be a JSON object")
        _check_keys(d, {"name", "description", "masses", "nonlinearity", "data", "grid", "time", "diagnostics", "output"}, "")
        name = _get(d, "name", "", str)
        description = _get(d, "description", "", str, "")

        raw_m = _get(d, "masses", "", list)
        for i, m in enumerate(raw_m):
            if isinstance(m, float):
                raise ConfigError(f"masses[{i}]", f"floating-point mass {m!r} rejected; write it as a 'p/q' string")
        try:
            masses = MassVector(raw_m)
        except (ValueError, TypeError) as exc:
            raise ConfigError("", str(exc)) from None
        n = masses.n

        terms = []
        for i, t in enumerate(_get(d, "nonlinearity", "", list)):
            p = f"nonlinearity[{i}]"
            _check_keys(t, {"target", "factors", "coeff"}, p)
            target = _get(t, "target", p, int)
            if not 1 <= target <= n:
                raise ConfigError(f"{p}.target", f"component {target} out of range 1..{n}")
            factors = _get(t, "factors", p, list)
            if len(factors) != 3:
                raise ConfigError(f"{p}.factors", "a cubic term needs exactly three factors")
            for q, fac in enumerate(factors):
                try:
                    a, _ = parse_factor(fac) if isinstance(fac, str) else (None, None)
                except ValueError as exc:
                    raise ConfigError(f"{p}.factors[{q}]", str(exc)) from None
                if a is None:
                    raise ConfigError(f"{p}.factors[{q}]", "expected a string like 'ut2'")
                if not 0 <= a < n:
                    raise ConfigError(f"{p}.factors[{q}]", f"component {a + 1} out of range 1..{n}")
            coeff = _number(t.get("coeff", 1.0), f"{p}.coeff")
            terms.append(make_term(target - 1, factors, coeff))
        F = CubicNonlinearity(n, terms)

        dd = _get(d, "data", "", dict)
        _check_keys(dd, {"epsilon", "B", "f", "g"}, "data")
        eps = _get(dd, "epsilon", "data", float)
        if not eps > 0:
            raise ConfigError("data.epsilon", "must be positive")
        B = _get(dd, "B", "data", float, 1.0)
        if not B > 0:
            raise ConfigError("data.B", "must be positive")
        shapes = {}
        for key in ("f", "g"):
            default = [{"kind": "bump"}] * n if key == "f" else [{"kind": "zero"}] * n
            lst = _get(dd, key, "data", list, default)
            if len(lst) != n:
                raise ConfigError(f"data.{key}", f"need {n} shapes, got {len(lst)}")
            out = []
            for i, s in enumerate(lst):
                p = f"data.{key}[{i}]"
                _check_keys(s, {"kind", "amp", "radius", "center", "sigma"}, p)
                kind = _get(s, "kind", p, str, "bump")
                if kind not in ("bump", "gaussian", "zero"):
                    raise ConfigError(f"{p}.kind", f"unknown shape {kind!r} (bump, gaussian, zero)")
                shape = Shape(
                    kind,
                    _get(s, "amp", p, float, 1.0),
                    _get(s, "radius", p, float, None, allow_none=True),
                    _get(s, "center", p, float, 0.0),
                    _get(s, "sigma", p, float, None, allow_none=True),
                )
                r = B if shape.radius is None else shape.radius
                if r <= 0 or abs(shape.center) + r > B * (1 + 1e-12):
                    raise ConfigError(p, f"support |x - {shape.center}| < {r} must lie inside |x| <= B = {B}")
                out.append(shape)
            shapes[key] = tuple(out)
        data = CauchyData(eps, B, shapes["f"], shapes["g"])

        gd = _get(d, "grid", "", dict)
        _check_keys(gd, {"half_length", "points"}, "grid")
        L = _get(gd, "half_length", "grid", float)
        M = _get(gd, "points", "grid", int)
        if M < 4 or M & (M - 1):
            raise ConfigError("grid.points", f"must be a power of two >= 4, got {M}")
        if not L > 0:
            raise ConfigError("grid.half_length", "must be positive")
        grid = Grid1D(L, M)

        td = _get(d, "time", "", dict)
        _check_keys(td, {"T", "dt", "observe_every"}, "time")
        T = _get(td, "T", "time", float)
        if not T > 0:
            raise ConfigError("time.T", "must be positive")
        dt = _get(td, "dt", "time", float, None, allow_none=True)
        if dt is not None and not dt > 0:
            raise ConfigError("time.dt", "must be positive")
        observe_every = _get(td, "observe_every", "time", float, 1.0)
        if not observe_every > 0:
            raise ConfigError("time.observe_every", "must be positive")

        diag = _get(d, "diagnostics", "", dict, {})
        _check_keys(diag, {"condition", "profile", "fits"}, "diagnostics")
        cd = _get(diag, "condition", "diagnostics", dict, {})
        _check_keys(cd, {"matrix", "k", "search"}, "diagnostics.condition")
        raw = cd.get("matrix")
        matrix = None
        if raw is not None:
            if not isinstance(raw, list) or len(raw) != n or any(not isinstance(r, list) or len(r) != n for r in raw):
                raise ConfigError("diagnostics.condition.matrix", f"expected a {n}x{n} array")
            matrix = tuple(
                tuple(_number(v, f"diagnostics.condition.matrix[{i}][{j}]") for j, v in enumerate(r)) for i, r in enumerate(raw)
            )
            try:
                ConditionMatrix(np.array(matrix))
            except ConditionMatrixError as exc:
                raise ConfigError("diagnostics.condition.matrix", str(exc)) from None
        k = _get(cd, "k", "diagnostics.condition", int, 0)
        if k not in (0, 1, 3):
            raise ConfigError("diagnostics.condition.k", "must be 0, 1 or 3")
        cond = ConditionSettings(matrix, k, _get(cd, "search", "diagnostics.condition", bool, False))

        pd = _get(diag, "profile", "diagnostics", dict, {})
        _check_keys(pd, set(ProfileSettings().__dict__), "diagnostics.profile")
        base = ProfileSettings()
        kw = {}
        for key, val in base.__dict__.items():
            kind = type(val)
            kw[key] = _get(pd, key, "diagnostics.profile", kind, val)
        prof = ProfileSettings(**kw)
        if prof.tau0 <= 1 + 2 * B:
            raise ConfigError("diagnostics.profile.tau0", f"must exceed 1 + 2B = {1 + 2 * B}")
        if prof.ray_tau0 <= 1 + 2 * B:
            raise ConfigError("diagnostics.profile.ray_tau0", f"must exceed 1 + 2B = {1 + 2 * B}")
        if prof.kappa < 1:
            raise ConfigError("diagnostics.profile.kappa", "must be >= 1")

        fd = _get(diag, "fits", "diagnostics", dict, {})
        _check_keys(fd, {"claim", "window", "component"}, "diagnostics.fits")
        claim = _get(fd, "claim", "diagnostics.fits", str, "decay")
        if claim not in CLAIMS:
            raise ConfigError("diagnostics.fits.claim", f"must be one of {CLAIMS}")
        window = fd.get("window")
        if window is not None:
            if not isinstance(window, list) or len(window) != 2:
                raise ConfigError("diagnostics.fits.window", "expected [t_min, t_max]")
            window = (_number(window[0], "diagnostics.fits.window[0]"), _number(window[1], "diagnostics.fits.window[1]"))
            if not 0 < window[0] < window[1] <= T:
                raise ConfigError("diagnostics.fits.window", "need 0 < t_min < t_max <= T")
        comp = _get(fd, "component", "diagnostics.fits", int, 2 if n >= 2 else 1)
        if not 1 <= comp <= n:
            raise ConfigError("diagnostics.fits.component", f"out of range 1..{n}")
        fits = FitSettings(claim, window, comp)

        output = _get(d, "output", "", str, None, allow_none=True)
        return cls(name, masses, F, data, grid, T, dt, observe_every, description, cond, prof, fits, output)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ScenarioConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}", exc.msg) from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        p = Path(path)
        return cls.from_text(p.read_text(encoding="utf-8"), str(p))

    # ------------------------------------------------------------------ output

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "masses": self.masses.to_strings(),
            "nonlinearity": self.nonlinearity.to_spec(),
            "data": {
                "epsilon": self.data.epsilon,
                "B": self.data.B,
                "f": [s.to_json() for s in self.data.f],
                "g": [s.to_json() for s in self.data.g],
            },
            "grid": {"half_length": self.grid.half_length, "points": self.grid.points},
            "time": {"T": self.T, "dt": self.dt, "observe_every": self.observe_every},
            "diagnostics": {
                "condition": self.condition.to_dict(),
                "profile": self.profile.to_dict(),
                "fits": self.fits.to_dict(),
            },
            "output": self.output,
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with top-level fields replaced, re-validated through the dict form."""
        d = self.to_dict()
        for key, val in changes.items():
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                node = node[p]
            node[parts[-1]] = val
        return ScenarioConfig.from_dict(d)
