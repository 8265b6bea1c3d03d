"""Exact mass vectors, cubic nonlinearities and the mass-resonance table.

Masses are kept as :class:`fractions.Fraction` so that the resonance relation

    m_j = s1 * m_a1 + s2 * m_a2 + s3 * m_a3,   s in {+1, -1}^3

is an exact equality test. Components are indexed from 0 in the Python API;
user-facing labels (``u1``, ``ut2``, ...) are 1-based.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

SIGNS: tuple[tuple[int, int, int], ...] = tuple(itertools.product((1, -1), repeat=3))


class Deriv(IntEnum):
    """Derivative carried by one factor of a cubic monomial."""

    NONE = 0
    DT = 1
    DX = 2

    @property
    def order(self) -> int:
        return 0 if self is Deriv.NONE else 1


_PREFIX = {Deriv.NONE: "u", Deriv.DT: "ut", Deriv.DX: "ux"}
_FACTOR_RE = re.compile(r"^(ut|ux|u)(\d+)$")


def _as_fraction(value, field: str) -> Fraction:
    if isinstance(value, bool):
        raise TypeError(f"{field}: expected a rational, got bool")
    if isinstance(value, float):
        raise TypeError(
            f"{field}: floating-point mass {value!r} rejected; give it as an exact "
            f"rational such as '{Fraction(value).limit_denominator(1000)}'"
        )
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{field}: cannot parse {value!r} as a rational 'p/q'") from exc
    raise TypeError(f"{field}: unsupported type {type(value).__name__}")


@dataclass(frozen=True)
class MassVector:
    """Positive, non-decreasing exact masses."""

    masses: tuple[Fraction, ...]

    def __init__(self, masses: Iterable):
        values = tuple(_as_fraction(m, f"masses[{i}]") for i, m in enumerate(masses))
        if not values:
            raise ValueError("masses: need at least one component")
        for i, m in enumerate(values):
            if m <= 0:
                raise ValueError(f"masses[{i}]: mass must be strictly positive, got {m}")
        for i in range(1, len(values)):
            if values[i] < values[i - 1]:
                raise ValueError(
                    f"masses[{i}]: masses must be sorted non-decreasing ({values[i - 1]} > {values[i]})"
                )
        object.__setattr__(self, "masses", values)

    def __len__(self) -> int:
        return len(self.masses)

    def __getitem__(self, i: int) -> Fraction:
        return self.masses[i]

    def __iter__(self):
        return iter(self.masses)

    @property
    def n(self) -> int:
        return len(self.masses)

    def as_float(self) -> np.ndarray:
        return np.array([float(m) for m in self.masses])

    def scaled(self, r) -> "MassVector":
        r = _as_fraction(r, "scale")
        if r <= 0:
            raise ValueError("scale must be positive")
        return MassVector(m * r for m in self.masses)

    def common_denominator(self) -> int:
        q = 1
        for m in self.masses:
            q = q * m.denominator // math.gcd(q, m.denominator)
        return q

    def to_strings(self) -> list[str]:
        return [str(m) for m in self.masses]


@dataclass(frozen=True, order=True)
class CubicTerm:
    """``coeff * (d^I u_a1)(d^J u_a2)(d^K u_a3)`` contributing to component ``target``.

    Construct via :func:`make_term` to get a canonical factor ordering.
    """

    target: int
    indices: tuple[int, int, int]
    derivs: tuple[Deriv, Deriv, Deriv]
    coeff: float

    @property
    def key(self) -> tuple:
        return (self.target, self.indices, tuple(int(d) for d in self.derivs))

    @property
    def factors(self) -> tuple[tuple[int, Deriv], ...]:
        return tuple(zip(self.indices, self.derivs))

    def label(self) -> str:
        return "*".join(f"{_PREFIX[d]}{a + 1}" for a, d in self.factors)


def parse_factor(text: str) -> tuple[int, Deriv]:
    """Parse ``'u2'``, ``'ut1'`` or ``'ux3'`` into a 0-based (component, derivative)."""
    m = _FACTOR_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad factor {text!r}; expected u<k>, ut<k> or ux<k>")
    prefix, idx = m.groups()
    deriv = {"u": Deriv.NONE, "ut": Deriv.DT, "ux": Deriv.DX}[prefix]
    k = int(idx) - 1
    if k < 0:
        raise ValueError(f"bad factor {text!r}; components are numbered from 1")
    return k, deriv


def make_term(target: int, factors: Sequence, coeff: float) -> CubicTerm:
    """Build a canonical term from three factors.

    Factors may be ``(component, Deriv)`` pairs or strings like ``'ut1'``.
    """
    if len(factors) != 3:
        raise ValueError(f"a cubic term needs exactly 3 factors, got {len(factors)}")
    parsed = []
    for f in factors:
        if isinstance(f, str):
            parsed.append(parse_factor(f))
        else:
            a, d = f
            parsed.append((int(a), Deriv(d)))
    parsed.sort(key=lambda p: (p[0], int(p[1])))
    coeff = float(coeff)
    if not math.isfinite(coeff):
        raise ValueError("term coefficient must be finite")
    return CubicTerm(
        target=int(target),
        indices=tuple(p[0] for p in parsed),
        derivs=tuple(p[1] for p in parsed),
        coeff=coeff,
    )


@dataclass(frozen=True)
class CubicNonlinearity:
    """Canonical list of cubic monomials for an ``n_components`` system."""

    n_components: int
    terms: tuple[CubicTerm, ...]

    def __init__(self, n_components: int, terms: Iterable[CubicTerm]):
        n = int(n_components)
        if n < 1:
            raise ValueError("n_components must be >= 1")
        merged: dict[tuple, float] = {}
        proto: dict[tuple, CubicTerm] = {}
        for t in terms:
            # re-canonicalize so hand-built terms are accepted too
            t = make_term(t.target, t.factors, t.coeff)
            if not 0 <= t.target < n:
                raise ValueError(f"term target {t.target + 1} out of range 1..{n}")
            for a in t.indices:
                if not 0 <= a < n:
                    raise ValueError(f"term factor component {a + 1} out of range 1..{n}")
            merged[t.key] = merged.get(t.key, 0.0) + t.coeff
            proto.setdefault(t.key, t)
        out = []
        for key in sorted(merged):
            c = merged[key]
            if c != 0.0:
                p = proto[key]
                out.append(CubicTerm(p.target, p.indices, p.derivs, c))
        object.__setattr__(self, "n_components", n)
        object.__setattr__(self, "terms", tuple(out))

    @classmethod
    def from_spec(cls, n_components: int, spec: Iterable[tuple[int, Sequence[str], float]]):
        """Build from ``(target, ['u1', 'ut2', ...], coeff)`` with 1-based targets."""
        return cls(n_components, [make_term(j - 1, f, c) for j, f, c in spec])

    def for_target(self, j: int) -> tuple[CubicTerm, ...]:
        return tuple(t for t in self.terms if t.target == j)

    def uses(self, deriv: Deriv) -> bool:
        return any(deriv in t.derivs for t in self.terms)

    def canonical(self) -> "CubicNonlinearity":
        return CubicNonlinearity(self.n_components, self.terms)

    def to_spec(self) -> list[dict]:
        return [
            {
                "target": t.target + 1,
                "factors": [f"{_PREFIX[d]}{a + 1}" for a, d in t.factors],
                "coeff": t.coeff,
            }
            for t in self.terms
        ]


def eval_nonlinearity(F: CubicNonlinearity, u, ut, ux) -> np.ndarray:
    """Evaluate ``F(u, ut, ux)``.

    Inputs have shape ``(N, ...)``; any trailing shape is broadcast, so the same
    routine serves pointwise checks and whole grids. Complex input is allowed.
    """
    u = np.asarray(u)
    ut = np.asarray(ut)
    ux = np.asarray(ux)
    fields = (u, ut, ux)
    dtype = np.result_type(u, ut, ux, np.float64)
    out = np.zeros((F.n_components,) + u.shape[1:], dtype=dtype)
    for t in F.terms:
        prod = t.coeff * fields[t.derivs[0]][t.indices[0]]
        prod = prod * fields[t.derivs[1]][t.indices[1]]
        prod = prod * fields[t.derivs[2]][t.indices[2]]
        out[t.target] += prod
    return out


@dataclass(frozen=True)
class ResonanceTable:
    """Resonant sign triples ``S[j][a]`` for every target j and index triple a."""

    masses: MassVector
    resonant: dict

    def signs(self, j: int, a: tuple[int, int, int]) -> tuple[tuple[int, int, int], ...]:
        return self.resonant[(j, tuple(a))]

    def nonresonant_signs(self, j: int, a: tuple[int, int, int]) -> tuple[tuple[int, int, int], ...]:
        s = set(self.resonant[(j, tuple(a))])
        return tuple(sig for sig in SIGNS if sig not in s)

    def resonant_set(self, j: int) -> list[tuple[int, int, int]]:
        """The index triples a with a non-empty resonant sign set (M_j)."""
        return [a for (jj, a), s in sorted(self.resonant.items()) if jj == j and s]

    def __eq__(self, other) -> bool:
        return isinstance(other, ResonanceTable) and self.resonant == other.resonant

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.resonant.items())))


def resonance_table(m: MassVector) -> ResonanceTable:
    """Enumerate every ``(j, a, sigma)`` and keep exact solutions of the mass relation."""
    n = m.n
    table = {}
    for j in range(n):
        for a in itertools.product(range(n), repeat=3):
            table[(j, a)] = tuple(
                s for s in SIGNS if s[0] * m[a[0]] + s[1] * m[a[1]] + s[2] * m[a[2]] == m[j]
            )
    return ResonanceTable(m, table)
