"""Hyperbolic coordinates, amplitude extraction and the limiting profile ODE.

Inside the light cone we use ``t + 2B = tau cosh z``, ``x = tau sinh z`` and write
``u_j = chi(z) v_j / sqrt(tau)``. The complex amplitude

    alpha_j = exp(-i m_j tau) (v_j - (i / m_j) d_tau v_j)

satisfies ``Re(alpha_j exp(i m_j tau)) = v_j`` identically and, to leading order,

    d alpha / d tau = -(i chi^2 / (8 tau)) F^red(omega(z), alpha).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .condition import ConditionMatrix
from .reduced import HyperbolaPoint, ReducedSystem, eval_reduced, nonresonant_term
from .solver import OutOfHorizon, RunRecord


class ProfileIntegrationError(RuntimeError):
    pass


class ResolutionError(ValueError):
    """Sampling too coarse for the requested oscillation frequency."""


@dataclass(frozen=True)
class WeightFunction:
    """``chi(z) = cosh(z)^(-kappa)``; bounded by ``2^kappa exp(-kappa |z|)`` with ``|chi'| <= kappa chi``."""

    kappa: float = 2.0

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")

    @property
    def C0(self) -> float:
        return 2.0**self.kappa

    def __call__(self, z):
        return np.cosh(z) ** (-self.kappa)

    def derivative(self, z):
        return -self.kappa * np.tanh(z) * self(z)


@dataclass(frozen=True)
class HyperbolicChart:
    """Tensor mesh of rapidities ``z`` and proper times ``tau``."""

    B: float
    z: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if tau.size == 0 or z.size == 0:
            raise ValueError("chart needs at least one z and one tau")
        if not tau[0] > 1 + 2 * self.B:
            raise ValueError(f"tau0 = {tau[0]} must exceed 1 + 2B = {1 + 2 * self.B}")
        if np.any(np.diff(tau) <= 0):
            raise ValueError("tau samples must be strictly increasing")
        if np.any(np.diff(z) <= 0):
            raise ValueError("z nodes must be strictly increasing")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "tau", tau)

    @property
    def tau0(self) -> float:
        return float(self.tau[0])

    @classmethod
    def geometric(cls, B: float, T: float, tau0: float = 3.5, ratio: float = 1.05, Z: float = 3.0, n_z: int = 61):
        """Geometric ``tau`` samples ``tau0 r^n`` up to the largest value whose mesh stays below time ``T``."""
        tau_max = (T + 2 * B) / np.cosh(Z)
        if tau_max <= tau0:
            raise ValueError(f"horizon T = {T} too short for tau0 = {tau0} at Z = {Z}")
        n = int(np.floor(np.log(tau_max / tau0) / np.log(ratio) + 1e-12)) + 1
        return cls(B, np.linspace(-Z, Z, n_z), tau0 * ratio ** np.arange(n))

    @classmethod
    def dense(cls, B: float, tau0: float, tau1: float, dtau: float = 0.05, z=(0.0,)):
        n = int(round((tau1 - tau0) / dtau)) + 1
        return cls(B, np.asarray(z, dtype=float), np.linspace(tau0, tau1, n))

    def to_tx(self, tau, z):
        tau = np.asarray(tau, dtype=float)
        return tau * np.cosh(z) - 2 * self.B, tau * np.sinh(z)

    def from_tx(self, t, x):
        s = np.asarray(t, dtype=float) + 2 * self.B
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) >= s):
            raise OutOfHorizon("point outside the shifted light cone |x| < t + 2B")
        return np.sqrt((s - x) * (s + x)), np.arctanh(x / s)

    def mesh(self):
        """``(Z, T)`` arrays of tau and z."""
        return np.meshgrid(self.tau, self.z)

    def probe_points(self):
        """Flattened ``(t, x)`` of the mesh in ``(z, tau)`` row-major order."""
        tau, z = self.mesh()
        t, x = self.to_tx(tau, z)
        return t.ravel(), x.ravel()

    @property
    def t_max(self) -> float:
        return float(self.tau[-1] * np.cosh(np.max(np.abs(self.z))) - 2 * self.B)


@dataclass
class ProfileTrajectory:
    """Amplitudes ``alpha`` of shape ``(N, Z, T)`` on a ``(z, tau)`` mesh."""

    source: str
    tau: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    masses: np.ndarray
    chi: WeightFunction
    u: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.tau) <= 0):
            raise ValueError("tau must be strictly increasing")

    def v(self) -> np.ndarray:
        """``Re(alpha e^{i m tau})``."""
        return np.real(self.alpha * np.exp(1j * self.masses[:, None, None] * self.tau[None, None, :]))

    def reconstruct(self) -> np.ndarray:
        """``chi(z) / sqrt(tau) Re(alpha e^{i m tau})``."""
        return self.chi(self.z)[None, :, None] / np.sqrt(self.tau)[None, None, :] * self.v()

    def reconstruction_residual(self) -> float:
        if self.u is None:
            raise ValueError("trajectory carries no field samples")
        return float(np.max(np.abs(self.reconstruct() - self.u)))

    def lyapunov(self, A: ConditionMatrix) -> np.ndarray:
        """``<alpha, A alpha>`` on the mesh, shape ``(Z, T)``."""
        return A.quadratic(self.alpha)

    def write_csv(self, path: Path, A: ConditionMatrix | None = None) -> None:
        n = self.alpha.shape[0]
        header = ["tau", "z"]
        for j in range(n):
            header += [f"re_alpha{j + 1}", f"im_alpha{j + 1}"]
        header.append("abs_alpha")
        if A is not None:
            header.append("lyapunov")
        L = self.lyapunov(A) if A is not None else None
        norm = np.sqrt(np.sum(np.abs(self.alpha) ** 2, axis=0))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for iz, z in enumerate(self.z):
                for it, tau in enumerate(self.tau):
                    row = [repr(float(tau)), repr(float(z))]
                    for j in range(n):
                        a = self.alpha[j, iz, it]
                        row += [repr(float(a.real)), repr(float(a.imag))]
                    row.append(repr(float(norm[iz, it])))
                    if L is not None:
                        row.append(repr(float(L[iz, it])))
                    w.writerow(row)


def _v_and_dtau(u, ut, ux, tau, z, chi: WeightFunction):
    """``v`` and ``d_tau v`` from field samples; arrays broadcast as ``(N, Z, T)``."""
    c = chi(z)[None, :, None]
    st = np.sqrt(tau)[None, None, :]
    w0 = np.cosh(z)[None, :, None]
    w1 = np.sinh(z)[None, :, None]
    v = st * u / c
    dv = u / (2 * st * c) + (st / c) * (w0 * ut + w1 * ux)
    return v, dv


def _chart_samples(record: RunRecord, chart: HyperbolicChart, probe_name: str):
    if probe_name not in record.probes:
        raise OutOfHorizon(f"run record has no probe set {probe_name!r}; add chart.probe_points() to evolve")
    p = record.probes[probe_name]
    t, x = chart.probe_points()
    if p.t.shape != t.shape or not (np.allclose(p.t, t, rtol=0, atol=1e-12) and np.allclose(p.x, x, rtol=0, atol=1e-12)):
        raise ValueError(f"probe set {probe_name!r} was not sampled on this chart")
    if np.any(np.isnan(p.u)):
        raise OutOfHorizon(f"probe set {probe_name!r} has unfilled points (run ended early?)")
    shape = (p.u.shape[0], chart.z.size, chart.tau.size)
    return p.u.reshape(shape), p.ut.reshape(shape), p.ux.reshape(shape)


def extract_profile(record: RunRecord, chart: HyperbolicChart, chi: WeightFunction, probe_name: str = "chart") -> ProfileTrajectory:
    """Amplitude ``alpha`` on the chart mesh from a run that probed ``chart.probe_points()``."""
    u, ut, ux = _chart_samples(record, chart, probe_name)
    v, dv = _v_and_dtau(u, ut, ux, chart.tau, chart.z, chi)
    m = record.masses.as_float()[:, None, None]
    alpha = np.exp(-1j * m * chart.tau[None, None, :]) * (v - (1j / m) * dv)
    return ProfileTrajectory("pde-extracted", chart.tau.copy(), chart.z.copy(), alpha, m[:, 0, 0], chi, u=u)


def integrate_profile_ode(
    sys: ReducedSystem,
    chi: WeightFunction,
    z: float,
    alpha0,
    tau0: float,
    tau1: float,
    include_nonresonant: bool = False,
    t_eval=None,
    rtol: float = 1e-9,
    atol: float = 1e-15,
) -> ProfileTrajectory:
    """Integrate ``d alpha / d tau = -(i chi^2 / 8 tau) F^red(omega(z), alpha) [+ S(tau)]`` by RK45."""
    if not tau1 > tau0 > 0:
        raise ValueError("need tau1 > tau0 > 0")
    alpha0 = np.asarray(alpha0, dtype=complex)
    if alpha0.shape != (sys.n,):
        raise ValueError(f"alpha0 must have shape ({sys.n},)")
    omega = HyperbolaPoint(float(z))
    c2 = float(chi(z)) ** 2

    def rhs(tau, a):
        out = (-1j * c2 / (8.0 * tau)) * eval_reduced(sys, omega, a)
        if include_nonresonant:
            out = out + nonresonant_term(sys, omega, a, tau, c2)
        return out

    if t_eval is None:
        t_eval = np.geomspace(tau0, tau1, 200)
    t_eval = np.asarray(t_eval, dtype=float)
    sol = solve_ivp(rhs, (tau0, tau1), alpha0, method="RK45", t_eval=t_eval, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise ProfileIntegrationError(f"profile ODE failed at z = {z}: {sol.message}")
    alpha = sol.y[:, None, :]
    return ProfileTrajectory(
        "ode-integrated", sol.t, np.array([float(z)]), alpha, sys.masses.as_float(), chi, extra={"nfev": sol.nfev}
    )


# --------------------------------------------------------------------------- diagnostics


@dataclass
class OscillatoryIntegral:
    tau: np.ndarray
    partial: np.ndarray
    b: float
    product: np.ndarray | None = None

    def bounded(self, growth: float = 1.5) -> bool:
        """Sup over the upper half of ``log tau`` at most ``growth`` times the sup over the lower half."""
        mid = np.sqrt(self.tau[0] * self.tau[-1])
        a = np.abs(self.partial)
        lo, hi = a[self.tau <= mid], a[self.tau > mid]
        return bool(hi.max() <= growth * max(lo.max(), 1e-300))

    def log_slope(self) -> float:
        """Least-squares slope of ``|partial|`` against ``log tau``."""
        return float(np.polyfit(np.log(self.tau), np.abs(self.partial), 1)[0])

    def closed_form_slope(self) -> float:
        """Slope in ``log tau`` of the non-oscillating integral with the product frozen at its mean.

        Only meaningful for ``b = 0``, where the derivative in ``log tau`` is the
        product itself.
        """
        if self.product is None:
            raise ValueError("amplitude product not stored")
        return float(abs(np.mean(self.product)))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def oscillatory_integral_check(
    traj: ProfileTrajectory, indices, signs, b: float, z_index: int = 0, points_per_period: int = 32
) -> OscillatoryIntegral:
    """Partial integrals ``int_{tau0}^{tau} prod_k alpha_k^(beta_k) e^{i b s} / s ds``.

    The amplitude product is splined in ``tau``; each sample interval is then
    integrated with 8-point Gauss-Legendre, so the oscillating factor is exact to
    quadrature accuracy as long as the spline itself is resolved.
    """
    if len(indices) != 4 or len(signs) != 4:
        raise ValueError("need four indices and four signs")
    tau = traj.tau
    if tau.size < 4:
        raise ResolutionError("need at least four tau samples")
    if b != 0:
        step = np.max(np.diff(tau))
        if step > 2 * np.pi / abs(b) / points_per_period:
            raise ResolutionError(
                f"tau spacing {step:.3g} too coarse for b = {b}: need <= {2 * np.pi / abs(b) / points_per_period:.3g}"
            )
    prod = np.ones(tau.size, dtype=complex)
    for k, s in zip(indices, signs):
        a = traj.alpha[k, z_index]
        prod = prod * (a if s > 0 else np.conj(a))
    spline = CubicSpline(tau, prod)
    lo, hi = tau[:-1], tau[1:]
    half = 0.5 * (hi - lo)
    nodes = 0.5 * (hi + lo)[:, None] + half[:, None] * _GL_X[None, :]
    vals = spline(nodes) * np.exp(1j * b * nodes) / nodes
    pieces = half * (vals @ _GL_W)
    partial = np.concatenate([[0.0], np.cumsum(pieces)])
    return OscillatoryIntegral(tau.copy(), partial, float(b), prod)


@dataclass
class EnergySeries:
    tau: np.ndarray
    energy: np.ndarray

    def growth_exponent(self) -> float:
        """Least-squares ``delta`` in ``E ~ tau^delta``."""
        return float(np.polyfit(np.log(self.tau), np.log(self.energy), 1)[0])


def energy_diagnostic(
    record: RunRecord, chart: HyperbolicChart, chi: WeightFunction, s: int = 0, probe_name: str = "chart"
) -> EnergySeries:
    """``E_0(tau) = 1/2 sum_j int (d_tau v)^2 + (d_z v / tau)^2 + m_j^2 v^2 dz`` on the chart."""
    if s != 0:
        raise NotImplementedError("only the s = 0 energy is implemented")
    if chart.z.size < 3:
        raise ValueError("energy needs at least three z nodes")
    u, ut, ux = _chart_samples(record, chart, probe_name)
    v, dv = _v_and_dtau(u, ut, ux, chart.tau, chart.z, chi)
    dz = np.gradient(v, chart.z, axis=1)
    m2 = (record.masses.as_float() ** 2)[:, None, None]
    dens = 0.5 * (dv**2 + (dz / chart.tau[None, None, :]) ** 2 + m2 * v**2)
    E = np.trapezoid(dens.sum(axis=0), chart.z, axis=0)
    return EnergySeries(chart.tau.copy(), E)


@dataclass
class SlowVariationReport:
    tau: np.ndarray
    normalized: np.ndarray
    decade_sups: list
    ratio: float
    limit: float

    @property
    def sup(self) -> float:
        return float(np.max(self.normalized))

    @property
    def passed(self) -> bool:
        return bool(self.ratio <= self.limit)


def slow_variation_check(traj: ProfileTrajectory, epsilon: float, limit: float = 1.5) -> SlowVariationReport:
    """``tau |d alpha / d tau| / eps`` by centred differences, then sups per decade of ``tau``.

    ``ratio`` is the largest quotient of consecutive decade sups; a bounded
    quantity gives a ratio near or below one.
    """
    tau = traj.tau
    if tau.size < 3:
        raise ValueError("need at least three tau samples")
    d = (traj.alpha[:, :, 2:] - traj.alpha[:, :, :-2]) / (tau[2:] - tau[:-2])
    val = tau[1:-1] * np.sqrt(np.sum(np.abs(d) ** 2, axis=0)) / epsilon  # (Z, T-2)
    sup_t = val.max(axis=0)
    tc = tau[1:-1]
    n_dec = int(np.floor(np.log10(tc[-1] / tc[0]) + 1e-9))
    if n_dec < 2:
        raise ValueError("slow-variation check needs at least two complete decades of tau")
    sups = []
    for k in range(n_dec):
        sel = (tc >= tc[0] * 10.0**k * (1 - 1e-12)) & (tc <= tc[0] * 10.0 ** (k + 1) * (1 + 1e-12))
        sups.append(float(sup_t[sel].max()))
    ratio = max((b / a for a, b in zip(sups[:-1], sups[1:])), default=1.0)
    return SlowVariationReport(tc, sup_t, sups, float(ratio), limit)
