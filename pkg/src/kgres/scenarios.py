"""Built-in scenarios: the example systems with fully specified data, grid and checks."""

from __future__ import annotations

from .config import ScenarioConfig

DEFAULT_GRID = {"half_length": 600.0, "points": 16384}
DEFAULT_TIME = {"T": 400.0, "dt": None, "observe_every": 1.0}


def _term(target, factors, coeff=1.0):
    return {"target": target, "factors": list(factors), "coeff": coeff}


def _base(name, description, masses, terms, *, matrix=None, k=0, claim="decay", component=2, f=None, search=False):
    n = len(masses)
    return {
        "name": name,
        "description": description,
        "masses": masses,
        "nonlinearity": terms,
        "data": {
            "epsilon": 0.01,
            "B": 1.0,
            "f": f if f is not None else [{"kind": "bump"}] * n,
            "g": [{"kind": "zero"}] * n,
        },
        "grid": dict(DEFAULT_GRID),
        "time": dict(DEFAULT_TIME),
        "diagnostics": {
            "condition": {"matrix": matrix, "k": k, "search": search},
            "profile": {"enabled": True},
            "fits": {"claim": claim, "component": component},
        },
    }


def _diag(values):
    n = len(values)
    return [[values[i] if i == j else 0 for j in range(n)] for i in range(n)]


_CUBIC_SELF = [(j, [a, a, f"u{j}"]) for j in (1, 2) for a in ("u1", "u2")]
_DISS_SELF = [(j, [a, a, f"ut{j}"]) for j in (1, 2) for a in ("ut1", "ut2")]


def _raw():
    return [
        _base(
            "resonant-pair",
            "m2 = 3 m1 with F1 = u1^2 u2, F2 = u1^3; the weighted quadratic form with A = diag(1, 3) is conserved "
            "by the resonant flow, so the solution decays like a free wave",
            ["1", "3"],
            [_term(1, ["u1", "u1", "u2"]), _term(2, ["u1", "u1", "u1"])],
            matrix=_diag([1, 3]),
        ),
        _base(
            "four-wave-sum",
            "m4 = m1 + m2 + m3 with F_j the product of the other three fields (unit coefficients)",
            ["1", "2", "3", "6"],
            [
                _term(1, ["u2", "u3", "u4"]),
                _term(2, ["u1", "u3", "u4"]),
                _term(3, ["u1", "u2", "u4"]),
                _term(4, ["u1", "u2", "u3"]),
            ],
            matrix=_diag(["1/3", "2/3", 1, 6]),
        ),
        _base(
            "derivative-coupled",
            "F1 = (ut1)^2 ux2, F2 = (ut2)^2 ux1 at m = (1, 2): no mass resonance, so nothing survives the "
            "reduction and the solution stays free-like",
            ["1", "2"],
            [_term(1, ["ut1", "ut1", "ux2"]), _term(2, ["ut2", "ut2", "ux1"])],
            matrix=_diag([1, 1]),
            claim="bounded",
        ),
        _base(
            "derivative-coupled-equal",
            "the same derivative coupling at equal masses; exploratory only, no blow-up claim is made",
            ["1", "1"],
            [_term(1, ["ut1", "ut1", "ux2"]), _term(2, ["ut2", "ut2", "ux1"])],
            claim="none",
        ),
        _base(
            "forced-resonance",
            "u1 is a free wave of mass 1 and drives u2 (mass 3) through u1^3; the resonant forcing keeps "
            "t^(1/2) |u2|_inf growing like log t",
            ["1", "3"],
            [_term(2, ["u1", "u1", "u1"])],
            claim="growth",
            component=2,
            f=[{"kind": "bump"}, {"kind": "zero"}],
        ),
        _base(
            "equal-mass-cubic",
            "F_j = (u1^2 + u2^2) u_j at m1 = m2; the identity matrix makes the resonant pairing vanish",
            ["1", "1"],
            [_term(j, f) for j, f in _CUBIC_SELF],
            matrix=_diag([1, 1]),
        ),
        _base(
            "equal-mass-dissipative",
            "F_j = -((ut1)^2 + (ut2)^2) ut_j at m1 = m2; strictly dissipative with k = 3",
            ["1", "1"],
            [_term(j, f, -1.0) for j, f in _DISS_SELF],
            matrix=_diag([1, 1]),
            k=3,
        ),
        _base(
            "resonant-dissipative",
            "m2 = 3 m1 with cubic time-derivative damping plus resonant exchange; A = diag(m1^2, m2^2) gives "
            "the strict condition with k = 3",
            ["1", "3"],
            [_term(j, f, -1.0) for j, f in _DISS_SELF]
            + [_term(1, ["ut1", "ut1", "ut2"], -1.0), _term(2, ["ut1", "ut1", "ut1"], 1.0)],
            matrix=_diag([1, 9]),
            k=3,
        ),
        _base(
            "four-wave-forced",
            "m4 = m1 + m2 + m3 but only F4 = u1 u2 u3 is present; no positive matrix satisfies the condition "
            "and the matrix search returns a certificate",
            ["1", "2", "3", "6"],
            [_term(4, ["u1", "u2", "u3"])],
            claim="none",
            search=True,
        ),
    ]


def builtin_scenarios() -> list[ScenarioConfig]:
    return [ScenarioConfig.from_dict(d) for d in _raw()]


def get_scenario(name: str) -> ScenarioConfig:
    for d in _raw():
        if d["name"] == name:
            return ScenarioConfig.from_dict(d)
    names = ", ".join(d["name"] for d in _raw())
    raise KeyError(f"unknown scenario {name!r}; available: {names}")
