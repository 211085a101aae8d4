"""Bose-Hubbard ring: fixed-N quantum model and its mean-field limit.

Parameters use ``J = cos(theta)`` and ``g = (L/N) sin(theta)``.  The
mean-field amplitudes are ``phi_j = (q_j + i p_j)/sqrt(2)`` with unit norm.
The quantum Hamiltonian is close to ``N`` times the mean-field energy, so it
generates dynamics on the same time axis as the classical flow.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.special import gammaln

from .dynamics import FixedPoint, stability_spectrum, lambda_from_spectrum
from .errors import ContractError, NoSolutionError, NormalizationError, ResourceError
from .quantum import CoherentState
from .symplectic import ExtraUnknowns, HamiltonianSystem, PhasePoint, canonical_omega

DEFAULT_MAX_DIM = 20_000
#: penalty weight of the energy-shell search
SHELL_PENALTY = 1e6


@dataclass(frozen=True)
class BHParams:
    L: int
    N: int
    theta: float

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 3:
            raise ContractError(f"ring needs L >= 3 sites, got {self.L}")
        if int(self.N) != self.N or self.N < 1:
            raise ContractError(f"particle number must be a positive integer, got {self.N}")
        if not -np.pi < self.theta <= np.pi:
            raise ContractError(f"theta must lie in (-pi, pi], got {self.theta}")

    @property
    def J(self) -> float:
        return float(np.cos(self.theta))

    @property
    def g(self) -> float:
        return float(self.L / self.N * np.sin(self.theta))

    @property
    def hbar_eff(self) -> float:
        return 1.0 / self.N

    def with_theta(self, theta: float) -> "BHParams":
        return BHParams(self.L, self.N, float(theta))


class FockBasis:
    """Occupation tuples of ``N`` bosons on ``L`` sites in lexicographic order."""

    def __init__(self, L: int, N: int):
        self.L, self.N = int(L), int(N)
        occ = [c for c in _compositions(self.N, self.L)]
        self.occupations = np.array(occ, dtype=np.int64).reshape(-1, self.L)
        self.index = {tuple(int(x) for x in row): k for k, row in enumerate(self.occupations)}

    def __len__(self):
        return self.occupations.shape[0]

    @staticmethod
    def expected_size(L: int, N: int) -> int:
        return comb(N + L - 1, L - 1)

    def lookup(self, occupation) -> int:
        return self.index[tuple(int(x) for x in occupation)]


def _compositions(n: int, k: int):
    # ascending lexicographic order: (0, .., 0, n) first
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def write_basis_csv(basis: FockBasis, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"n{j + 1}" for j in range(basis.L)])
        for k, row in enumerate(basis.occupations):
            w.writerow([k] + [int(x) for x in row])


@dataclass(frozen=True)
class BHQuantumModel:
    params: BHParams
    basis: FockBasis
    hamiltonian: np.ndarray
    n_ops: tuple

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def hbar_eff(self) -> float:
        return self.params.hbar_eff

    @property
    def generator(self) -> np.ndarray:
        return self.hamiltonian

    @property
    def operators(self) -> dict:
        return {f"n{j + 1}": op for j, op in enumerate(self.n_ops)}


def hopping_matrix(basis: FockBasis) -> sparse.csr_matrix:
    """``-sum_j (a+_{j+1} a_j + h.c.)`` on the ring, as a sparse matrix."""
    occ = basis.occupations
    L, dim = basis.L, len(basis)
    rows, cols, vals = [], [], []
    for j in range(L):
        k = (j + 1) % L
        src = np.nonzero(occ[:, j] > 0)[0]
        new = occ[src].copy()
        amp = np.sqrt(new[:, j] * (new[:, k] + 1.0))
        new[:, j] -= 1
        new[:, k] += 1
        dst = np.array([basis.lookup(r) for r in new], dtype=np.int64)
        rows.append(dst)
        cols.append(src)
        vals.append(-amp)
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    m = sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    return (m + m.T).tocsr()


def build_quantum(params: BHParams, max_dim: int = DEFAULT_MAX_DIM) -> BHQuantumModel:
    """Fixed-N Hamiltonian ``J * hopping + (g/2) sum_j n_j (n_j - 1)``."""
    size = FockBasis.expected_size(params.L, params.N)
    if size > max_dim:
        raise ResourceError(f"basis size {size} exceeds the cap {max_dim}")
    basis = FockBasis(params.L, params.N)
    occ = basis.occupations.astype(float)
    onsite = 0.5 * params.g * np.sum(occ * (occ - 1.0), axis=1)
    h = params.J * hopping_matrix(basis).toarray()
    h[np.diag_indices_from(h)] += onsite
    n_ops = tuple(sparse.diags(occ[:, j]).tocsr() for j in range(params.L))
    return BHQuantumModel(params, basis, h, n_ops)


def phi_of_point(point) -> np.ndarray:
    z = point.coords if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
    L = z.size // 2
    return (z[:L] + 1j * z[L:]) / np.sqrt(2.0)


def point_of_phi(phi) -> PhasePoint:
    phi = np.asarray(phi, dtype=complex)
    return PhasePoint(np.sqrt(2.0) * np.concatenate([phi.real, phi.imag]))


def projected_coherent_state(basis: FockBasis, phi, point=None, tol: float = 1e-12) -> CoherentState:
    """Amplitudes ``sqrt(N!/prod n_j!) prod phi_j^n_j`` on the Fock basis."""
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (basis.L,):
        raise ContractError(f"phi needs {basis.L} components, got shape {phi.shape}")
    if abs(np.linalg.norm(phi) - 1.0) > tol:
        raise NormalizationError(f"|phi| = {np.linalg.norm(phi)!r} differs from 1")
    occ = basis.occupations
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = np.log(np.abs(phi))
        terms = np.where(occ > 0, occ * log_abs, 0.0)
    log_amp = 0.5 * (gammaln(basis.N + 1) - gammaln(occ + 1).sum(axis=1)) + terms.sum(axis=1)
    vec = np.exp(log_amp) * np.exp(1j * (occ @ np.angle(phi)))
    # renormalise away the rounding of the log-domain products
    vec /= np.linalg.norm(vec)
    if point is None:
        point = point_of_phi(phi)
    return CoherentState(vec, point, "projected-coherent")


def mean_field_system(params: BHParams, mu: float = 0.0) -> HamiltonianSystem:
    """Mean-field ring in the frame rotating with frequency ``mu``.

    ``H = -cos(theta) sum_j (q_j q_{j+1} + p_j p_{j+1})
    + (L sin(theta)/8) sum_j (q_j^2 + p_j^2)^2 - (mu/2) sum_j (q_j^2 + p_j^2)``.
    The rotating-frame sign makes ``mu = sin(theta) - 2 cos(theta)`` the
    frequency of the homogeneous solution.
    """
    L = params.L
    c, s = np.cos(params.theta), np.sin(params.theta)
    omega = canonical_omega(L)
    adj = np.zeros((L, L))
    for j in range(L):
        adj[j, (j + 1) % L] = adj[(j + 1) % L, j] = 1.0

    def hamiltonian(z):
        q, p = z[:L], z[L:]
        r = q * q + p * p
        return float(-c * (q @ np.roll(q, -1) + p @ np.roll(p, -1)) + s * L / 8 * r @ r - mu / 2 * r.sum())

    def gradient(z):
        q, p = z[:L], z[L:]
        r = q * q + p * p
        gq = -c * (adj @ q) + (s * L / 2 * r - mu) * q
        gp = -c * (adj @ p) + (s * L / 2 * r - mu) * p
        return np.concatenate([gq, gp])

    def vector_field(z):
        g = gradient(z)
        return np.concatenate([g[L:], -g[:L]])

    def hessian(z):
        q, p = z[:L], z[L:]
        r = q * q + p * p
        h = np.zeros((2 * L, 2 * L))
        h[:L, :L] = -c * adj + np.diag(s * L / 2 * (r + 2 * q * q) - mu)
        h[L:, L:] = -c * adj + np.diag(s * L / 2 * (r + 2 * p * p) - mu)
        cross = np.diag(s * L * q * p)
        h[:L, L:] = cross
        h[L:, :L] = cross
        return h

    def jacobian(z):
        return omega @ hessian(z)

    def rebind(values):
        return mean_field_system(params, float(values[0]))

    def field_derivative(z, values):
        # d/dmu of omega @ grad H = omega @ (-z)
        return (omega @ (-np.asarray(z)))[:, None]

    def constraints(z):
        z = np.asarray(z)
        res = np.array([0.5 * z @ z - 1.0, z[L]])
        jac = np.zeros((2, 2 * L))
        jac[0] = z
        jac[1, L] = 1.0
        return res, jac

    extra = ExtraUnknowns(("mu",), (float(mu),), rebind, field_derivative, constraints)
    return HamiltonianSystem(
        dim_f=L,
        hamiltonian=hamiltonian,
        vector_field=vector_field,
        jacobian=jacobian,
        omega=omega,
        params={"L": L, "N": params.N, "theta": float(params.theta), "mu": float(mu)},
        extra=extra,
        name="bose-hubbard-mean-field",
    )


def norm_of(z) -> float:
    """Mean-field norm ``sum_j (q_j^2 + p_j^2)/2``."""
    z = z.coords if isinstance(z, PhasePoint) else np.asarray(z, dtype=float)
    return float(0.5 * z @ z)


def homogeneous_mu(theta: float) -> float:
    return float(np.sin(theta) - 2 * np.cos(theta))


def homogeneous_point(L: int) -> PhasePoint:
    return PhasePoint(np.concatenate([np.full(L, np.sqrt(2.0 / L)), np.zeros(L)]))


def homogeneous_fixed_point(params: BHParams) -> FixedPoint:
    """Homogeneous solution ``q_j = sqrt(2/L)``, ``p_j = 0`` with its stability data."""
    mu = homogeneous_mu(params.theta)
    sys = mean_field_system(params, mu)
    z = homogeneous_point(params.L)
    spectrum = stability_spectrum(sys, z)
    return FixedPoint(
        point=z,
        params=dict(sys.params),
        spectrum=spectrum,
        lambda_loc=lambda_from_spectrum(spectrum),
        residual_norm=float(np.linalg.norm(sys.vector_field(z.coords))),
        extras={"mu": mu},
        iterations=0,
    )


def instability_window(L: int) -> tuple:
    """Theta range where the homogeneous fixed point is unstable."""
    if int(L) != L or L < 3:
        raise ContractError(f"ring needs L >= 3 sites, got {L}")
    return (-np.pi / 2, float(np.arctan(-1.0 + np.cos(2 * np.pi / L))))


def locate_stability_change(L: int, theta_a: float, theta_b: float, N: int = 1,
                            tol: float = 1e-6) -> float:
    """Bisection for the theta where ``lambda_loc`` of the homogeneous point changes sign."""
    def unstable(theta):
        return homogeneous_fixed_point(BHParams(L, N, theta)).lambda_loc > 0

    ua, ub = unstable(theta_a), unstable(theta_b)
    if ua == ub:
        raise NoSolutionError("stability does not change on the bracket")
    a, b = theta_a, theta_b
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        if unstable(m) == ua:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def energy_shell_point(params: BHParams, mu: float, q1_target: float, z_ref: FixedPoint,
                       penalty: float = SHELL_PENALTY, tol: float = 1e-9) -> PhasePoint:
    """Point nearest to ``z_ref`` with the same energy and norm and a fixed ``q_1``.

    A penalised distance minimisation gives the starting point, then a
    minimum-norm Gauss-Newton correction enforces the two constraints.
    """
    L = params.L
    zr = np.asarray(z_ref.coords, dtype=float)
    q1_ref = zr[0]
    lo, hi = sorted((0.0, q1_ref))
    if not lo - 1e-12 <= q1_target <= hi + 1e-12:
        raise ContractError(f"q1 target {q1_target} outside [0, {q1_ref}]")
    sys = mean_field_system(params, mu)
    e_ref = sys.hamiltonian(zr)
    n_ref = norm_of(zr)

    def full(x):
        return np.concatenate([[q1_target], x])

    def cons(x):
        z = full(x)
        return np.array([sys.hamiltonian(z) - e_ref, norm_of(z) - n_ref])

    def cons_jac(x):
        z = full(x)
        grad_h = -(sys.omega @ sys.vector_field(z))
        return np.vstack([grad_h, z])[:, 1:]

    def objective(x):
        d = full(x) - zr
        r = cons(x)
        return d @ d + penalty * r @ r

    def gradient(x):
        d = full(x) - zr
        return 2 * d[1:] + 2 * penalty * cons_jac(x).T @ cons(x)

    x0 = zr[1:].copy()
    res = minimize(objective, x0, jac=gradient, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
    x = res.x
    for _ in range(50):
        r = cons(x)
        if np.max(np.abs(r)) <= tol:
            break
        x = x - np.linalg.lstsq(cons_jac(x), r, rcond=None)[0]
    r = cons(x)
    if not np.all(np.isfinite(x)) or np.max(np.abs(r)) > tol:
        raise NoSolutionError(f"energy-shell constraints not met, residual {np.max(np.abs(r)):.3e}")
    return PhasePoint(full(x))


__all__ = [
    "BHParams",
    "BHQuantumModel",
    "FockBasis",
    "build_quantum",
    "energy_shell_point",
    "homogeneous_fixed_point",
    "homogeneous_mu",
    "homogeneous_point",
    "hopping_matrix",
    "instability_window",
    "locate_stability_change",
    "mean_field_system",
    "norm_of",
    "phi_of_point",
    "point_of_phi",
    "projected_coherent_state",
    "write_basis_csv",
]
