"""Fourier-collocation RK4 solver for cubic Klein-Gordon systems on a periodic box.

The box ``[-L, L)`` is taken large enough that nothing reaches the boundary
before the final time (finite propagation speed), so periodicity is harmless.

The state is advanced in Fourier space::

    d/dt u^ = ut^,    d/dt ut^ = -(k^2 + m^2) u^ + F^(u, ut, ux)

and the cubic products are formed on a grid of 2M points (zero padding), which
removes all aliasing from triple products of fields band-limited to |k| < k_Nyquist.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .algebra import CubicNonlinearity, Deriv, MassVector, eval_nonlinearity

log = logging.getLogger(__name__)

CFL_DEFAULT = 0.5


class OutOfHorizon(ValueError):
    """A request touches points the light cone may have wrapped onto."""


class CFLViolation(ValueError):
    pass


# --------------------------------------------------------------------------- data


def bump(x, radius: float = 1.0):
    """Smooth compactly supported bump ``exp(1/((x/r)^2 - 1))`` on ``|x| < r``."""
    x = np.asarray(x, dtype=float)
    s = (x / radius) ** 2
    out = np.zeros_like(x)
    inside = s < 1.0
    out[inside] = np.exp(1.0 / (s[inside] - 1.0))
    return out


@dataclass(frozen=True)
class Shape:
    """One initial profile: ``amp * shape((x - center))`` supported in ``|x - center| < radius``.

    ``kind`` is ``'bump'``, ``'gaussian'`` (truncated at ``radius``; ``sigma``
    defaults to ``radius / 4``, so the jump at the cut is ``amp * exp(-8)``) or ``'zero'``.
    """

    kind: str = "bump"
    amp: float = 1.0
    radius: float | None = None
    center: float = 0.0
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("bump", "gaussian", "zero"):
            raise ValueError(f"unknown shape kind {self.kind!r}")

    def evaluate(self, x, B: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero" or self.amp == 0.0:
            return np.zeros_like(x)
        r = B if self.radius is None else self.radius
        if abs(self.center) + r > B * (1 + 1e-12):
            raise ValueError(f"shape support |x - {self.center}| < {r} leaves |x| <= B = {B}")
        y = x - self.center
        if self.kind == "bump":
            return self.amp * bump(y, r)
        sigma = r / 4.0 if self.sigma is None else self.sigma
        out = np.exp(-0.5 * (y / sigma) ** 2)
        out[np.abs(y) >= r] = 0.0
        return self.amp * out

    def to_json(self) -> dict:
        return {"kind": self.kind, "amp": self.amp, "radius": self.radius, "center": self.center, "sigma": self.sigma}


@dataclass(frozen=True)
class CauchyData:
    """``u_j(0) = eps f_j``, ``ut_j(0) = eps g_j`` with all supports in ``|x| <= B``."""

    epsilon: float
    B: float
    f: tuple[Shape, ...]
    g: tuple[Shape, ...]

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.B > 0:
            raise ValueError("support radius B must be positive")
        if len(self.f) != len(self.g):
            raise ValueError("f and g must have one shape per component")

    @property
    def n(self) -> int:
        return len(self.f)

    def sample(self, x) -> tuple[np.ndarray, np.ndarray]:
        u = np.stack([self.epsilon * s.evaluate(x, self.B) for s in self.f])
        ut = np.stack([self.epsilon * s.evaluate(x, self.B) for s in self.g])
        return u, ut

    def with_epsilon(self, epsilon: float) -> "CauchyData":
        return CauchyData(epsilon, self.B, self.f, self.g)


@dataclass(frozen=True)
class Grid1D:
    half_length: float
    points: int

    def __post_init__(self):
        M = self.points
        if M < 4 or M & (M - 1):
            raise ValueError(f"grid points must be a power of two >= 4, got {M}")
        if not self.half_length > 0:
            raise ValueError("half_length must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.points)

    @property
    def k(self) -> np.ndarray:
        return (np.pi / self.half_length) * np.arange(self.points // 2 + 1)


@dataclass(frozen=True)
class FieldState:
    t: float
    u: np.ndarray
    ut: np.ndarray
    grid: Grid1D

    @property
    def n(self) -> int:
        return self.u.shape[0]


# --------------------------------------------------------------------------- spectral helpers


def _deriv_coeffs(grid: Grid1D, uh: np.ndarray) -> np.ndarray:
    k = grid.k.copy()
    k[-1] = 0.0  # Nyquist mode has no odd derivative on the grid
    return 1j * k * uh


def spatial_derivative(state: FieldState, component: int) -> np.ndarray:
    """Exact derivative of the trigonometric interpolant of ``u_component``."""
    uh = sfft.rfft(state.u[component])
    return sfft.irfft(_deriv_coeffs(state.grid, uh), n=state.grid.points)


def _series_weights(M: int) -> np.ndarray:
    w = np.full(M // 2 + 1, 2.0 / M)
    w[0] = w[-1] = 1.0 / M
    return w


def eval_series(grid: Grid1D, coeffs: np.ndarray, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant with rfft ``coeffs`` (``(..., K)``) at points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    E = np.exp(1j * np.outer(x + grid.half_length, grid.k))  # (P, K)
    wc = coeffs * _series_weights(grid.points)
    return np.real(wc @ E.T)


# --------------------------------------------------------------------------- observers


def observe_norms(state: FieldState, p_list=(2, 4, np.inf)) -> dict[str, float]:
    """Discrete ``L^p`` norms of ``u_j``, ``ut_j`` and ``ux_j``; keys like ``'ux2_L4'``."""
    out = {}
    dx = state.grid.dx
    for j in range(state.n):
        fields = {"u": state.u[j], "ut": state.ut[j], "ux": spatial_derivative(state, j)}
        for name, f in fields.items():
            a = np.abs(f)
            for p in p_list:
                if np.isinf(p):
                    out[f"{name}{j + 1}_Linf"] = float(a.max())
                else:
                    out[f"{name}{j + 1}_L{int(p)}"] = float((np.sum(a**p) * dx) ** (1.0 / p))
    return out


def linear_energy(state: FieldState, masses) -> float:
    """``sum_j int (ut^2 + ux^2 + m_j^2 u^2) / 2 dx`` (conserved when F = 0)."""
    m = np.asarray([float(v) for v in masses])
    e = 0.0
    for j in range(state.n):
        ux = spatial_derivative(state, j)
        e += 0.5 * np.sum(state.ut[j] ** 2 + ux**2 + m[j] ** 2 * state.u[j] ** 2) * state.grid.dx
    return float(e)


def light_cone_leakage(state: FieldState, B: float) -> float:
    """Largest ``|u|`` at grid points strictly outside ``|x| <= t + B`` (plus two cells)."""
    g = state.grid
    edge = state.t + B + 2 * g.dx
    if edge >= g.half_length:
        raise OutOfHorizon(f"t = {state.t} is beyond the box horizon L - B = {g.half_length - B}")
    outside = np.abs(g.x) > edge
    return float(np.max(np.abs(state.u[:, outside]))) if outside.any() else 0.0


Observer = Callable[[FieldState], dict]


def norms_observer(p_list=(2, 4, np.inf)) -> Observer:
    return lambda state: observe_norms(state, p_list)


def energy_observer(masses) -> Observer:
    return lambda state: {"linear_energy": linear_energy(state, masses)}


def leakage_observer(B: float) -> Observer:
    def obs(state):
        try:
            return {"leakage": light_cone_leakage(state, B)}
        except OutOfHorizon:
            return {"leakage": float("nan")}

    return obs


# --------------------------------------------------------------------------- probes and records


@dataclass
class ProbeSamples:
    """Fields interpolated at scattered ``(t, x)`` points; arrays are ``(N, P)``."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    ux: np.ndarray


@dataclass
class RunRecord:
    masses: MassVector
    nonlinearity: CubicNonlinearity
    data: CauchyData
    grid: Grid1D
    dt: float
    T: float
    final: FieldState
    series: dict[str, np.ndarray]
    blowup: bool = False
    blowup_time: float | None = None
    probes: dict[str, ProbeSamples] = field(default_factory=dict)
    snapshots: list[FieldState] = field(default_factory=list)

    @property
    def epsilon(self) -> float:
        return self.data.epsilon


def default_dt(grid: Grid1D, masses: MassVector) -> float:
    return 0.25 * min(grid.dx, 1.0 / float(max(masses)))


def horizon_margin(grid: Grid1D) -> float:
    return max(2.0, 8.0 * grid.dx)


class _Rhs:
    def __init__(self, masses: MassVector, F: CubicNonlinearity, grid: Grid1D):
        self.grid = grid
        self.F = F
        M = grid.points
        self.M = M
        self.K = M // 2 + 1
        m = masses.as_float()
        self.lin = -(grid.k[None, :] ** 2 + m[:, None] ** 2)
        kd = grid.k.copy()
        kd[-1] = 0.0
        self.ik = 1j * kd
        self.need_ut = F.uses(Deriv.DT)
        self.need_ux = F.uses(Deriv.DX)
        self.active = bool(F.terms)

    def _pad(self, ch: np.ndarray) -> np.ndarray:
        P = np.zeros(ch.shape[:-1] + (self.M + 1,), dtype=complex)
        P[..., : self.K - 1] = ch[..., : self.K - 1]
        return 2.0 * sfft.irfft(P, n=2 * self.M, axis=-1)

    def nonlinear(self, uh: np.ndarray, vh: np.ndarray) -> np.ndarray:
        u = self._pad(uh)
        ut = self._pad(vh) if self.need_ut else u
        ux = self._pad(self.ik * uh) if self.need_ux else u
        Fp = eval_nonlinearity(self.F, u, ut, ux)
        Fh = 0.5 * sfft.rfft(Fp, axis=-1)[..., : self.K]
        Fh[..., -1] = 0.0
        return Fh

    def __call__(self, y: np.ndarray) -> np.ndarray:
        uh, vh = y[0], y[1]
        acc = self.lin * uh
        if self.active:
            acc = acc + self.nonlinear(uh, vh)
        return np.stack([vh, acc])


def _hermite(p0, d0, p1, d1, s, h):
    s2, s3 = s * s, s * s * s
    return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * h * d1


class _ProbeSet:
    def __init__(self, name: str, t, x, n: int):
        self.name = name
        self.t = np.asarray(t, dtype=float).ravel()
        self.x = np.asarray(x, dtype=float).ravel()
        if self.t.shape != self.x.shape:
            raise ValueError(f"probe set {name!r}: t and x differ in shape")
        self.order = np.argsort(self.t, kind="stable")
        self.cursor = 0
        P = self.t.size
        self.u = np.full((n, P), np.nan)
        self.ut = np.full((n, P), np.nan)
        self.ux = np.full((n, P), np.nan)

    def fill(self, grid, t0, y0, f0, t1, y1, f1):
        """Interpolate all probes with ``t0 < t <= t1`` (``t >= t0`` on the first interval)."""
        lo = self.cursor
        hi = lo
        while hi < self.order.size and self.t[self.order[hi]] <= t1 + 1e-12:
            hi += 1
        if hi == lo:
            return
        idx = self.order[lo:hi]
        self.cursor = hi
        xs = self.x[idx]
        h = t1 - t0
        s = (self.t[idx] - t0) / h
        ik = 1j * grid.k.copy()
        ik[-1] = 0.0

        def ev(c):
            return eval_series(grid, c, xs)

        u0, v0, a0 = ev(y0[0]), ev(y0[1]), ev(f0[1])
        u1, v1, a1 = ev(y1[0]), ev(y1[1]), ev(f1[1])
        ux0, uxt0 = ev(ik * y0[0]), ev(ik * y0[1])
        ux1, uxt1 = ev(ik * y1[0]), ev(ik * y1[1])
        self.u[:, idx] = _hermite(u0, v0, u1, v1, s, h)
        self.ut[:, idx] = _hermite(v0, a0, v1, a1, s, h)
        self.ux[:, idx] = _hermite(ux0, uxt0, ux1, uxt1, s, h)

    def result(self) -> ProbeSamples:
        return ProbeSamples(self.t, self.x, self.u, self.ut, self.ux)


def evolve(
    masses: MassVector,
    F: CubicNonlinearity,
    data: CauchyData,
    grid: Grid1D,
    dt: float | None = None,
    T: float = 1.0,
    observers: Sequence[Observer] = (),
    observe_every: float | None = None,
    probes: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
    snapshot_times: Sequence[float] = (),
    cfl: float = CFL_DEFAULT,
    blowup_factor: float = 1e3,
    check_horizon: bool = True,
    workers: int | None = None,
) -> RunRecord:
    """Integrate the Cauchy problem to time ``T`` with classical RK4.

    Observers are called on the initial state and then every ``observe_every``
    time units (rounded to whole steps); their dicts become the columns of
    ``record.series`` next to ``time``. ``probes`` maps a name to arrays of
    ``(t, x)`` points where ``u``, ``ut`` and ``ux`` are wanted; they are filled
    by cubic Hermite interpolation in time and exact trigonometric interpolation
    in space.
    """
    n = masses.n
    if F.n_components != n or data.n != n:
        raise ValueError("masses, nonlinearity and data disagree on the number of components")
    if T <= 0:
        raise ValueError("final time must be positive")
    limit = cfl * min(grid.dx, 1.0 / float(max(masses)))
    if dt is None:
        dt = default_dt(grid, masses)
    if dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt = {dt:.4g} exceeds the CFL limit {limit:.4g} (cfl = {cfl})")
    if check_horizon and grid.half_length < data.B + T + horizon_margin(grid):
        raise OutOfHorizon(
            f"half_length {grid.half_length} < B + T + margin = {data.B + T + horizon_margin(grid):.4g}"
        )
    n_steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / n_steps
    stride = n_steps if observe_every is None else max(1, int(round(observe_every / dt)))

    probe_sets = []
    for name, (pt, px) in (probes or {}).items():
        ps = _ProbeSet(name, pt, px, n)
        if ps.t.size and (ps.t.min() < 0 or ps.t.max() > T + 1e-12):
            raise OutOfHorizon(f"probe set {name!r} requests times outside [0, {T}]")
        if ps.t.size and np.max(np.abs(ps.x)) > grid.half_length - horizon_margin(grid):
            raise OutOfHorizon(f"probe set {name!r} requests points outside the box interior")
        probe_sets.append(ps)

    snap_steps = {int(round(ts / dt)): ts for ts in snapshot_times}

    rhs = _Rhs(masses, F, grid)
    with sfft.set_workers(workers or 1):
        u0, ut0 = data.sample(grid.x)
        y = np.stack([sfft.rfft(u0, axis=-1), sfft.rfft(ut0, axis=-1)])
        y[..., -1] = 0.0  # drop the Nyquist mode so ux, energy and evolution stay consistent
        sup0 = max(float(np.max(np.abs(u0))), float(np.max(np.abs(ut0))), 1e-300)
        ceiling = blowup_factor * sup0
        weights = _series_weights(grid.points)

        def physical(t, yy):
            return FieldState(t, sfft.irfft(yy[0], n=grid.points, axis=-1), sfft.irfft(yy[1], n=grid.points, axis=-1), grid)

        rows: list[dict] = []

        def observe(t, yy):
            st = physical(t, yy)
            row = {"time": t}
            for obs in observers:
                row.update(obs(st))
            rows.append(row)
            return st

        snapshots = []
        observe(0.0, y)
        if 0 in snap_steps:
            snapshots.append(physical(0.0, y))
        blowup, blowup_time = False, None
        f_prev = rhs(y)
        y_prev = y
        t = 0.0
        for step in range(1, n_steps + 1):
            k1 = f_prev
            k2 = rhs(y + 0.5 * dt * k1)
            k3 = rhs(y + 0.5 * dt * k2)
            k4 = rhs(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = step * dt
            if not np.all(np.isfinite(y)):
                blowup, blowup_time = True, t
                log.warning("non-finite field at t = %.4g", t)
                break
            bound = float(np.max(np.abs(y) @ weights))
            if bound > ceiling:
                st = physical(t, y)
                if max(np.max(np.abs(st.u)), np.max(np.abs(st.ut))) > ceiling:
                    blowup, blowup_time = True, t
                    log.warning("field exceeded the blow-up ceiling %.3g at t = %.4g", ceiling, t)
                    break
            f_cur = rhs(y)
            for ps in probe_sets:
                ps.fill(grid, t - dt, y_prev, f_prev, t, y, f_cur)
            f_prev, y_prev = f_cur, y
            if step % stride == 0 or step == n_steps:
                observe(t, y)
            if step in snap_steps:
                snapshots.append(physical(t, y))
        final = physical(t, y)

    series = {}
    if rows:
        keys = list(rows[0].keys())
        for key in keys:
            series[key] = np.array([r.get(key, np.nan) for r in rows])
    return RunRecord(
        masses=masses,
        nonlinearity=F,
        data=data,
        grid=grid,
        dt=dt,
        T=T,
        final=final,
        series=series,
        blowup=blowup,
        blowup_time=blowup_time,
        probes={ps.name: ps.result() for ps in probe_sets},
        snapshots=snapshots,
    )


# --------------------------------------------------------------------------- snapshots

_HEADER = struct.Struct("<IIdd")


def write_snapshot(path: Path, state: FieldState) -> None:
    """Little-endian: uint32 N, uint32 M, float64 L, float64 t, then u and ut row-major float64."""
    N, M = state.u.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(N, M, state.grid.half_length, state.t))
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.ut, dtype="<f8").tobytes())


def read_snapshot(path: Path) -> FieldState:
    raw = Path(path).read_bytes()
    N, M, L, t = _HEADER.unpack_from(raw, 0)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * N * M:
        raise ValueError(f"{path}: expected {2 * N * M} values, found {body.size}")
    u = body[: N * M].reshape(N, M).copy()
    ut = body[N * M :].reshape(N, M).copy()
    return FieldState(t, u, ut, Grid1D(L, M))
