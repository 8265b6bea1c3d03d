"""Sampled verification of, and search for, the Hermitian dissipativity matrix.

The pairing is conjugate-linear in its first slot::

    <P, Q> = sum_k conj(P_k) Q_k,      condition value = Im <A Y, F^red(omega, Y)>.

With this convention the strictly dissipative two-mass example evaluates to
``-w0^3 (3|Y1|^4 + 243|Y2|^4 + 36|Y1|^2|Y2|^2)`` for ``A = diag(1, 9)``.

Sampling is not a proof: a pass means no violation was found at the recorded
resolution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import ndtri
from scipy.stats import qmc

from .reduced import HyperbolaPoint, ReducedSystem, eval_reduced

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


class ConditionMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionMatrix:
    entries: np.ndarray
    lam_min: float = field(init=False)
    lam_max: float = field(init=False)

    def __post_init__(self):
        A = np.array(self.entries, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConditionMatrixError(f"matrix must be square, got shape {A.shape}")
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.max(np.abs(A - A.conj().T)) > 1e-12 * scale:
            raise ConditionMatrixError("matrix is not Hermitian")
        A = 0.5 * (A + A.conj().T)
        w = np.linalg.eigvalsh(A)
        if w[0] <= 0:
            raise ConditionMatrixError(f"matrix is not positive definite (smallest eigenvalue {w[0]:.3g})")
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)
        object.__setattr__(self, "lam_min", float(w[0]))
        object.__setattr__(self, "lam_max", float(w[-1]))

    @classmethod
    def diagonal(cls, values) -> "ConditionMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def quadratic(self, Y) -> np.ndarray:
        """``<Y, A Y>`` (real) for ``Y`` of shape ``(N, ...)``."""
        Y = np.asarray(Y, dtype=complex)
        AY = np.tensordot(self.entries, Y, axes=(1, 0))
        return np.real(np.sum(np.conj(Y) * AY, axis=0))

    def to_json(self) -> dict:
        return {"real": self.entries.real.tolist(), "imag": self.entries.imag.tolist()}


def pairing(P, Q) -> np.ndarray:
    """``sum_k conj(P_k) Q_k`` over the leading axis."""
    return np.sum(np.conj(P) * Q, axis=0)


def condition_value(A: ConditionMatrix, sys: ReducedSystem, omega: HyperbolaPoint, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=complex)
    AY = np.tensordot(A.entries, Y, axes=(1, 0))
    return np.imag(pairing(AY, eval_reduced(sys, omega, Y)))


def normalized_ratio(A: ConditionMatrix, sys: ReducedSystem, k: int, z, Y) -> np.ndarray:
    """``condition_value / (w0^k |Y|^4)``; constant along rays ``Y -> lambda Y``."""
    Y = np.asarray(Y, dtype=complex)
    omega = HyperbolaPoint(z)
    norm2 = np.sum(np.abs(Y) ** 2, axis=0)
    return condition_value(A, sys, omega, Y) / (omega.omega0**k * norm2**2)


@dataclass(frozen=True)
class SamplingSpec:
    """Resolution of the sampled check: z nodes, sphere samples and polish effort."""

    z_max: float = 5.0
    n_z: int = 21
    n_y: int = 256
    seed: int = 0
    polish: bool = True
    n_polish: int = 4
    tol: float = DEFAULT_TOL


@dataclass
class ConditionReport:
    kind: str
    k: int
    worst_ratio: float
    worst_z: float
    worst_y: np.ndarray
    samples_used: int
    passed: bool
    tol: float
    resolution: dict

    @property
    def c_tilde(self) -> float | None:
        return None if self.k == 0 else -self.worst_ratio

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "worst_ratio": self.worst_ratio,
            "worst_point": {
                "z": self.worst_z,
                "Y_real": self.worst_y.real.tolist(),
                "Y_imag": self.worst_y.imag.tolist(),
            },
            "c_tilde": self.c_tilde,
            "samples_used": self.samples_used,
            "verdict": "pass" if self.passed else "fail",
            "tol": self.tol,
            "resolution": self.resolution,
        }


_KIND = {0: "nonpositive", 1: "strict_k1", 3: "strict_k3"}


def _extreme_points(n: int) -> np.ndarray:
    """Coordinate vectors, phased pairs and equal-modulus phase patterns."""
    pts = [np.eye(n, dtype=complex)[i] for i in range(n)]
    phases = np.exp(0.5j * np.pi * np.arange(4))
    for i in range(n):
        for j in range(i + 1, n):
            for ph in phases:
                y = np.zeros(n, dtype=complex)
                y[i] = 1.0
                y[j] = ph
                pts.append(y / np.sqrt(2.0))
    if n <= 5:
        grids = np.meshgrid(*([np.arange(4)] * (n - 1)), indexing="ij")
        for idx in zip(*(g.ravel() for g in grids)):
            y = np.ones(n, dtype=complex)
            y[1:] = phases[list(idx)]
            pts.append(y / np.sqrt(n))
    return np.array(pts).T


def sphere_samples(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic points on the unit sphere of C^n, shape ``(n, count + extremes)``."""
    halton = qmc.Halton(d=2 * n, scramble=True, seed=seed)
    u = halton.random(count)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    Y = (g[:, :n] + 1j * g[:, n:]).T
    Y = Y / np.linalg.norm(Y, axis=0)
    return np.concatenate([_extreme_points(n), Y], axis=1)


def _sample_grid(n: int, spec: SamplingSpec):
    z_nodes = np.linspace(-spec.z_max, spec.z_max, spec.n_z)
    Y = sphere_samples(n, spec.n_y, spec.seed)
    Z = np.repeat(z_nodes, Y.shape[1])
    YY = np.tile(Y, (1, z_nodes.size))
    return Z, YY


def _polish(A, sys, k, z0, y0, z_max):
    n = sys.n

    def unpack(x):
        return float(np.clip(x[0], -z_max, z_max)), x[1 : n + 1] + 1j * x[n + 1 :]

    def objective(x):
        z, y = unpack(x)
        if np.linalg.norm(y) < 1e-8:
            return 0.0
        return -float(normalized_ratio(A, sys, k, z, y))

    x0 = np.concatenate([[z0], y0.real, y0.imag])
    bounds = [(-z_max, z_max)] + [(None, None)] * (2 * n)
    res = optimize.minimize(objective, x0, method="Powell", bounds=bounds, options={"xtol": 1e-10, "ftol": 1e-14})
    z, y = unpack(res.x)
    return z, y / np.linalg.norm(y)


def _passes(worst: float, k: int, tol: float) -> bool:
    return worst <= tol if k == 0 else worst < -tol


def check_condition(
    A: ConditionMatrix, sys: ReducedSystem, k: int = 0, spec: SamplingSpec | None = None, extra_points=()
) -> ConditionReport:
    """Largest sampled value of the normalized condition ratio.

    ``k = 0`` checks ``Im<AY, F^red> <= 0``; ``k in {1, 3}`` estimates the constant
    ``C~`` in ``Im<AY, F^red> <= -C~ w0^k |Y|^4`` as ``-worst_ratio``.
    """
    if k not in _KIND:
        raise ValueError(f"k must be 0, 1 or 3, got {k}")
    spec = spec or SamplingSpec()
    if not isinstance(A, ConditionMatrix):
        A = ConditionMatrix(A)
    if A.n != sys.n:
        raise ConditionMatrixError(f"matrix is {A.n}x{A.n} but the system has {sys.n} components")
    Z, Y = _sample_grid(sys.n, spec)
    for z, y in extra_points:
        Z = np.append(Z, z)
        Y = np.concatenate([Y, np.asarray(y, dtype=complex).reshape(-1, 1) / np.linalg.norm(y)], axis=1)
    ratios = normalized_ratio(A, sys, k, Z, Y)
    order = np.argsort(ratios)[::-1]
    best_z, best_y = float(Z[order[0]]), Y[:, order[0]].copy()
    best = float(normalized_ratio(A, sys, k, best_z, best_y))
    if spec.polish:
        for idx in order[: spec.n_polish]:
            z, y = _polish(A, sys, k, float(Z[idx]), Y[:, idx], spec.z_max)
            r = float(normalized_ratio(A, sys, k, z, y))
            if r > best:
                best, best_z, best_y = r, z, y
    return ConditionReport(
        kind=_KIND[k],
        k=k,
        worst_ratio=best,
        worst_z=best_z,
        worst_y=best_y,
        samples_used=int(Z.size),
        passed=_passes(best, k, spec.tol),
        tol=spec.tol,
        resolution={"z_max": spec.z_max, "n_z": spec.n_z, "n_y": spec.n_y, "seed": spec.seed, "polish": spec.polish},
    )


# --------------------------------------------------------------------------- search


@dataclass(frozen=True)
class SearchOptions:
    sampling: SamplingSpec = SamplingSpec()
    diagonal: bool = False
    cond_max: float = 1e3
    max_rounds: int = 25
    max_cuts: int = 400


@dataclass
class SearchResult:
    status: str  # "success" | "certified-failure" | "not-converged"
    matrix: ConditionMatrix
    report: ConditionReport
    lp_value: float
    rounds: int

    @property
    def success(self) -> bool:
        return self.status == "success"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "matrix": self.matrix.to_json(),
            "report": self.report.to_json(),
            "lp_value": self.lp_value,
            "rounds": self.rounds,
        }


def _hermitian_basis(n: int, diagonal: bool) -> list[np.ndarray]:
    basis = []
    for i in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    if not diagonal:
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = E[j, i] = 1.0
                basis.append(E)
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = 1j
                E[j, i] = -1j
                basis.append(E)
    return basis


def _features(sys: ReducedSystem, k: int, Z, Y, basis) -> np.ndarray:
    """Rows: samples; columns: normalized condition value of each basis matrix."""
    omega = HyperbolaPoint(Z)
    F = eval_reduced(sys, omega, Y)
    norm = omega.omega0**k * np.sum(np.abs(Y) ** 2, axis=0) ** 2
    cols = [np.imag(pairing(np.tensordot(E, Y, axes=(1, 0)), F)) / norm for E in basis]
    return np.stack(cols, axis=1)


def search_matrix(sys: ReducedSystem, k: int = 0, options: SearchOptions | None = None) -> SearchResult:
    """Look for ``A`` with ``I <= A <= cond_max I`` satisfying the sampled condition.

    For a fixed sample set the normalized condition value is linear in the real
    parameters of ``A``, so minimizing its worst case is a linear program;
    positive-definiteness bounds are imposed by eigenvector cutting planes.
    New worst points found by :func:`check_condition` are added and the LP is
    re-solved until the check passes (success), the LP itself proves that no
    admissible ``A`` satisfies the sampled condition (certified failure), or the
    round budget runs out (not converged).
    """
    options = options or SearchOptions()
    spec = options.sampling
    n = sys.n
    basis = _hermitian_basis(n, options.diagonal)
    nb = len(basis)
    Z, Y = _sample_grid(n, spec)
    G = _features(sys, k, Z, Y, basis)
    cuts: list[np.ndarray] = []
    kappa = options.cond_max
    bounds = [(1.0, kappa)] * n + [(-kappa, kappa)] * (nb - n) + [(None, None)]
    c = np.zeros(nb + 1)
    c[-1] = 1.0
    target = spec.tol if k == 0 else -spec.tol

    A = lp_value = report = None
    for rnd in range(1, options.max_rounds + 1):
        for _ in range(options.max_cuts):
            rows = [np.concatenate([G, -np.ones((G.shape[0], 1))], axis=1)]
            rhs = [np.zeros(G.shape[0])]
            for v in cuts:
                q = np.array([np.real(np.vdot(v, E @ v)) for E in basis])
                rows.append(np.concatenate([-q, [0.0]])[None, :])
                rhs.append(np.array([-1.0]))
                rows.append(np.concatenate([q, [0.0]])[None, :])
                rhs.append(np.array([kappa]))
            res = optimize.linprog(
                c,
                A_ub=np.concatenate(rows),
                b_ub=np.concatenate(rhs),
                bounds=bounds,
                method="highs",
                options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
            )
            if not res.success:
                raise RuntimeError(f"LP solve failed: {res.message}")
            p = res.x[:nb]
            lp_value = float(res.x[-1])
            M = sum(pi * E for pi, E in zip(p, basis))
            M = 0.5 * (M + M.conj().T)
            w, V = np.linalg.eigh(M)
            if w[0] >= 1.0 - 1e-9 and w[-1] <= kappa * (1 + 1e-9):
                break
            if w[0] < 1.0 - 1e-9:
                cuts.append(V[:, 0])
            if w[-1] > kappa * (1 + 1e-9):
                cuts.append(V[:, -1])
        else:
            raise RuntimeError("positive-definiteness cuts did not converge")
        A = ConditionMatrix(M)
        report = check_condition(A, sys, k, spec)
        log.debug("search round %d: lp=%.3e worst=%.3e", rnd, lp_value, report.worst_ratio)
        if lp_value > target:
            return SearchResult("certified-failure", A, report, lp_value, rnd)
        if report.passed:
            return SearchResult("success", A, report, lp_value, rnd)
        G = np.concatenate([G, _features(sys, k, np.array([report.worst_z]), report.worst_y[:, None], basis)])
    return SearchResult("not-converged", A, report, lp_value, options.max_rounds)
