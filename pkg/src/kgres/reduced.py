"""Reduced (resonant) nonlinearity on the unit hyperbola, and its DFT oracle.

For a cubic term ``C (d^I u_a1)(d^J u_a2)(d^K u_a3)`` the substitution value
replaces each factor by ``1`` (no derivative), ``i w0 m_a`` (time derivative)
or ``-i w1 m_a`` (space derivative) and multiplies by ``C``. The reduced
nonlinearity of component j is

    (1/m_j) sum_terms sub(term) sum_{s in S_j^a} s1^|I| s2^|J| s3^|K| Y_a1^(s1) Y_a2^(s2) Y_a3^(s3)

with ``Y^(+1) = Y`` and ``Y^(-1) = conj(Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    CubicNonlinearity,
    CubicTerm,
    Deriv,
    MassVector,
    ResonanceTable,
    eval_nonlinearity,
    resonance_table,
)


@dataclass(frozen=True)
class HyperbolaPoint:
    """Point ``(cosh z, sinh z)`` of the upper unit hyperbola; ``z`` may be an array."""

    z: np.ndarray | float
    omega0: np.ndarray | float = field(init=False)
    omega1: np.ndarray | float = field(init=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if not np.all(np.isfinite(z)):
            raise ValueError("rapidity must be finite")
        if z.ndim == 0:
            z = float(z)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "omega0", np.cosh(z))
        object.__setattr__(self, "omega1", np.sinh(z))


def _signed_conj(Y: np.ndarray, sign: int) -> np.ndarray:
    return Y if sign > 0 else np.conj(Y)


def _sign_weight(term: CubicTerm, sigma) -> int:
    w = 1
    for s, d in zip(sigma, term.derivs):
        if d is not Deriv.NONE:
            w *= s
    return w


def substitution_value(term: CubicTerm, m: MassVector, omega: HyperbolaPoint):
    """``C * prod(factor value)`` with u -> 1, ut -> i w0 m_a, ux -> -i w1 m_a."""
    val = term.coeff + 0j
    for a, d in term.factors:
        if d is Deriv.DT:
            val = val * (1j * omega.omega0 * float(m[a]))
        elif d is Deriv.DX:
            val = val * (-1j * omega.omega1 * float(m[a]))
    return val


def omega_coefficient(term: CubicTerm, m: MassVector, omega: HyperbolaPoint):
    """Profile-equation coefficient: one eighth of the substitution value."""
    return substitution_value(term, m, omega) / 8.0


@dataclass(frozen=True)
class _TermPlan:
    term: CubicTerm
    resonant: tuple[tuple[tuple[int, int, int], int], ...]  # (sigma, sign weight)
    nonresonant: tuple[tuple[tuple[int, int, int], int, float], ...]  # (sigma, weight, phase rate)


class ReducedSystem:
    """Masses plus nonlinearity with the resonance table rebuilt from the masses."""

    def __init__(self, masses: MassVector, nonlinearity: CubicNonlinearity):
        if nonlinearity.n_components != masses.n:
            raise ValueError(
                f"nonlinearity has {nonlinearity.n_components} components, masses have {masses.n}"
            )
        self.masses = masses
        self.nonlinearity = nonlinearity
        self.table: ResonanceTable = resonance_table(masses)
        mf = masses.as_float()
        plans = []
        for t in nonlinearity.terms:
            res = tuple((s, _sign_weight(t, s)) for s in self.table.signs(t.target, t.indices))
            nonres = tuple(
                (s, _sign_weight(t, s), float(sum(si * mf[a] for si, a in zip(s, t.indices)) - mf[t.target]))
                for s in self.table.nonresonant_signs(t.target, t.indices)
            )
            plans.append(_TermPlan(t, res, nonres))
        self._plans = tuple(plans)
        self._mf = mf

    @property
    def n(self) -> int:
        return self.masses.n

    def resonant_terms(self, j: int | None = None):
        """Yield ``(term, [(sigma, weight), ...])`` for terms with resonant signs."""
        for p in self._plans:
            if p.resonant and (j is None or p.term.target == j):
                yield p.term, list(p.resonant)


def _triple(Y, term: CubicTerm, sigma) -> np.ndarray:
    a1, a2, a3 = term.indices
    return _signed_conj(Y[a1], sigma[0]) * _signed_conj(Y[a2], sigma[1]) * _signed_conj(Y[a3], sigma[2])


def eval_reduced(sys: ReducedSystem, omega: HyperbolaPoint, Y) -> np.ndarray:
    """Reduced nonlinearity ``F^red(omega, Y)``.

    ``Y`` has shape ``(N,)`` or ``(N, ...)``; ``omega.z`` must broadcast against
    the trailing shape.
    """
    Y = np.asarray(Y, dtype=complex)
    shape = np.broadcast_shapes(Y.shape[1:], np.shape(omega.z))
    out = np.zeros((sys.n,) + shape, dtype=complex)
    for p in sys._plans:
        if not p.resonant:
            continue
        sub = substitution_value(p.term, sys.masses, omega)
        acc = 0j
        for sigma, w in p.resonant:
            acc = acc + w * _triple(Y, p.term, sigma)
        out[p.term.target] += sub * acc
    return out / sys._mf.reshape((-1,) + (1,) * len(shape))


def nonresonant_term(sys: ReducedSystem, omega: HyperbolaPoint, Y, tau: float, chi2: float) -> np.ndarray:
    """Oscillatory (non-resonant) cubic contribution to the profile equation."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if chi2 < 0:
        raise ValueError("chi2 must be non-negative")
    Y = np.asarray(Y, dtype=complex)
    shape = np.broadcast_shapes(Y.shape[1:], np.shape(omega.z))
    out = np.zeros((sys.n,) + shape, dtype=complex)
    for p in sys._plans:
        if not p.nonresonant:
            continue
        om = omega_coefficient(p.term, sys.masses, omega)
        acc = 0j
        for sigma, w, rate in p.nonresonant:
            acc = acc + w * _triple(Y, p.term, sigma) * np.exp(1j * rate * tau)
        out[p.term.target] += om * acc
    scale = -1j * chi2 / (sys._mf * tau)
    return out * scale.reshape((-1,) + (1,) * len(shape))


def reduced_oracle(sys: ReducedSystem, omega: HyperbolaPoint, Y) -> np.ndarray:
    """Brute-force ``F^red`` from the Fourier coefficient of the full cubic term.

    With integer masses ``mu = q m`` and ``theta = q phi``, the map
    ``phi -> F_j(Re(Y e^{i mu phi}), -w0 Im(m Y e^{i mu phi}), w1 Im(m Y e^{i mu phi}))``
    is a trigonometric polynomial of degree ``<= 3 max(mu)``. Its coefficient at
    ``e^{i mu_j phi}`` is read off by an exact DFT and scaled by ``8/m_j``.
    Only a single hyperbola point and a single ``Y`` are supported.
    """
    Y = np.asarray(Y, dtype=complex)
    if Y.shape != (sys.n,) or np.ndim(omega.z) != 0:
        raise ValueError("oracle evaluates one point at a time")
    q = sys.masses.common_denominator()
    mu = np.array([int(m * q) for m in sys.masses])
    deg = 3 * int(mu.max())
    n_samples = 8 * deg + 1
    phi = 2.0 * np.pi * np.arange(n_samples) / n_samples
    mf = sys._mf
    wave = Y[:, None] * np.exp(1j * mu[:, None] * phi[None, :])
    u = wave.real
    mw = (mf[:, None] * wave).imag
    ut = -omega.omega0 * mw
    ux = omega.omega1 * mw
    values = eval_nonlinearity(sys.nonlinearity, u, ut, ux)
    out = np.empty(sys.n, dtype=complex)
    for j in range(sys.n):
        coef = np.mean(values[j] * np.exp(-1j * mu[j] * phi))
        out[j] = 8.0 * coef / mf[j]
    return out


def describe_reduced(sys: ReducedSystem) -> list[dict]:
    """Symbolic listing of ``F^red``: one entry per (term, resonant sign triple).

    Each entry carries the target, the monomial with its conjugation pattern and
    the coefficient written as ``coeff * (i w0)^p (-i w1)^q * mass factor / m_j``.
    """
    rows = []
    for term, signs in sys.resonant_terms():
        n_dt = sum(1 for d in term.derivs if d is Deriv.DT)
        n_dx = sum(1 for d in term.derivs if d is Deriv.DX)
        mass_factor = 1
        for a, d in term.factors:
            if d is not Deriv.NONE:
                mass_factor *= sys.masses[a]
        mass_factor /= sys.masses[term.target]
        for sigma, w in signs:
            pattern = "*".join(
                (f"Y{a + 1}" if s > 0 else f"conj(Y{a + 1})") for a, s in zip(term.indices, sigma)
            )
            rows.append(
                {
                    "target": term.target + 1,
                    "source": term.label(),
                    "signs": list(sigma),
                    "monomial": pattern,
                    "coefficient": term.coeff * w,
                    "mass_factor": str(mass_factor),
                    "i_omega0_power": n_dt,
                    "minus_i_omega1_power": n_dx,
                }
            )
    return rows
