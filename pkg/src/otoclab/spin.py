"""Two coupled large spins: quantum Hamiltonian, coherent states, classical limit.

Chart: ``(q1, q2, p1, p2)`` with ``q`` the azimuth of the Bloch vector and
``p = n_z``.  Near the poles the chart is singular, so the classical system
also carries an embedding into ``R^3 x R^3`` (two unit vectors) that the
integrators use for long runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import lgamma
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import ChartBoundaryError, ContractError, NormalizationError, ResourceError
from .quantum import CoherentState
from .symplectic import (
    Embedding,
    HamiltonianSystem,
    PhasePoint,
    canonical_omega,
    register_chart_guard,
)

SPIN_CHART = "spin-azimuth-height"
#: chart guard band: |p| must stay below 1 - SPIN_GUARD
SPIN_GUARD = 1e-9
#: dense-model dimension cap
DEFAULT_MAX_DIM = 20_000


@dataclass(frozen=True)
class SpinParams:
    """Model parameters; ``s`` is only needed for the quantum model."""

    J: float
    b_x: float = 0.05
    b_y: float = 0.0
    b_z: float = 0.05
    s: float | None = None

    def __post_init__(self):
        if self.s is not None:
            twice = 2 * self.s
            if twice < 1 or abs(twice - round(twice)) > 1e-12:
                raise ContractError(f"s must be a positive half-integer, got {self.s}")

    @property
    def hbar_eff(self) -> float:
        if self.s is None:
            raise ContractError("hbar_eff needs the spin quantum number s")
        return 1.0 / (self.s + 0.5)

    def with_J(self, J: float) -> "SpinParams":
        return replace(self, J=float(J))

    def with_s(self, s: float) -> "SpinParams":
        return replace(self, s=s)


def _spin_guard(coords: np.ndarray) -> None:
    p = np.asarray(coords)[2:]
    if np.any(np.abs(p) > 1 - SPIN_GUARD):
        raise ChartBoundaryError(f"spin chart requires |p| < 1 - {SPIN_GUARD:g}, got p = {p}")


register_chart_guard(SPIN_CHART, _spin_guard)


def build_classical(params: SpinParams) -> HamiltonianSystem:
    """Classical limit of the two-spin model as a chart-coordinate system."""
    J, bx, by, bz = params.J, params.b_x, params.b_y, params.b_z

    def hamiltonian(z):
        q, p = z[:2], z[2:]
        r = np.sqrt(1 - p * p)
        return float(np.sum(2 * (bx * np.cos(q) * r + by * np.sin(q) * r + bz * p)) + 4 * J * p[0] * p[1])

    def vector_field(z):
        q, p = z[:2], z[2:]
        r = np.sqrt(1 - p * p)
        c, s = np.cos(q), np.sin(q)
        qdot = -2 * p / r * (bx * c + by * s) + 2 * bz + 4 * J * p[::-1]
        pdot = 2 * r * (bx * s - by * c)
        return np.concatenate([qdot, pdot])

    def jacobian(z):
        q, p = z[:2], z[2:]
        r = np.sqrt(1 - p * p)
        c, s = np.cos(q), np.sin(q)
        m = np.zeros((4, 4))
        for i in range(2):
            m[i, i] = -2 * p[i] / r[i] * (-bx * s[i] + by * c[i])
            m[i, 2 + i] = -2 * (bx * c[i] + by * s[i]) / r[i] ** 3
            m[i, 3 - i] = 4 * J
            m[2 + i, i] = 2 * r[i] * (bx * c[i] + by * s[i])
            m[2 + i, 2 + i] = -2 * p[i] / r[i] * (bx * s[i] - by * c[i])
        return m

    return HamiltonianSystem(
        dim_f=2,
        hamiltonian=hamiltonian,
        vector_field=vector_field,
        jacobian=jacobian,
        omega=canonical_omega(2),
        chart_id=SPIN_CHART,
        params={"J": J, "b_x": bx, "b_y": by, "b_z": bz},
        domain_check=_spin_guard,
        periods=(2 * np.pi, 2 * np.pi, 0.0, 0.0),
        embedding=_bloch_embedding(J, np.array([bx, by, bz])),
        name="coupled-spins",
    )


def _cross_matrix(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _cross(a, b):
    # np.cross carries heavy per-call overhead for 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


_EZ = np.array([0.0, 0.0, 1.0])


def _bloch_embedding(J: float, b: np.ndarray) -> Embedding:
    """Two unit Bloch vectors; the flow is ``dn_i/dt = (dH/dn_i) x n_i``."""

    def to_ambient(z):
        q, p = z[:2], z[2:]
        r = np.sqrt(np.clip(1 - p * p, 0.0, None))
        return np.array([r[0] * np.cos(q[0]), r[0] * np.sin(q[0]), p[0],
                         r[1] * np.cos(q[1]), r[1] * np.sin(q[1]), p[1]])

    def from_ambient(y):
        n1, n2 = y[:3] / np.linalg.norm(y[:3]), y[3:] / np.linalg.norm(y[3:])
        return np.array([np.arctan2(n1[1], n1[0]), np.arctan2(n2[1], n2[0]), n1[2], n2[2]])

    bx, by, bz = 2 * b

    def gradients(y):
        return (np.array([bx, by, bz + 4 * J * y[5]]), np.array([bx, by, bz + 4 * J * y[2]]))

    def field(y):
        h1 = bz + 4 * J * y[5]
        h2 = bz + 4 * J * y[2]
        return np.array([
            by * y[2] - h1 * y[1], h1 * y[0] - bx * y[2], bx * y[1] - by * y[0],
            by * y[5] - h2 * y[4], h2 * y[3] - bx * y[5], bx * y[4] - by * y[3],
        ])

    def jacobian(y):
        g1, g2 = gradients(y)
        m = np.zeros((6, 6))
        m[:3, :3] = _cross_matrix(g1)
        m[3:, 3:] = _cross_matrix(g2)
        m[:3, 5] = 4 * J * _cross(_EZ, y[:3])
        m[3:, 2] = 4 * J * _cross(_EZ, y[3:])
        return m

    def hamiltonian(y):
        return float(2 * b @ y[:3] + 2 * b @ y[3:] + 4 * J * y[2] * y[5])

    def pushforward(z):
        q, p = z[:2], z[2:]
        r = np.sqrt(1 - p * p)
        m = np.zeros((6, 4))
        for i in range(2):
            m[3 * i : 3 * i + 3, i] = [-r[i] * np.sin(q[i]), r[i] * np.cos(q[i]), 0.0]
            m[3 * i : 3 * i + 3, 2 + i] = [-p[i] / r[i] * np.cos(q[i]), -p[i] / r[i] * np.sin(q[i]), 1.0]
        return m

    def pullback(y):
        m = np.zeros((4, 6))
        for i in range(2):
            x, yy = y[3 * i], y[3 * i + 1]
            rho2 = x * x + yy * yy
            if rho2 < SPIN_GUARD:
                raise ChartBoundaryError("azimuth undefined at a pole")
            m[i, 3 * i : 3 * i + 2] = [-yy / rho2, x / rho2]
            m[2 + i, 3 * i + 2] = 1.0
        return m

    def project(y):
        return np.concatenate([y[:3] / np.linalg.norm(y[:3]), y[3:] / np.linalg.norm(y[3:])])

    return Embedding(6, to_ambient, from_ambient, field, jacobian, pushforward, pullback,
                     hamiltonian, project)


def spin_matrices(s: float):
    """Dense ``(Sx, Sy, Sz, S+, S-)`` in the ``|s, m>`` basis, ``m = s, ..., -s``."""
    m = np.arange(s, -s - 1, -1.0)
    if m.size != int(round(2 * s + 1)):
        raise ContractError(f"invalid spin {s}")
    splus = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), 1)
    sminus = splus.T.copy()
    sx = (splus + sminus) / 2
    sy = (splus - sminus) / 2j
    sz = np.diag(m)
    return sx, sy, sz, splus, sminus


@dataclass(frozen=True)
class SpinQuantumModel:
    """Dense two-spin Hamiltonian with sparse named observables.

    ``generator`` is ``hamiltonian / hbar_eff``: evolving with it makes
    quantum time coincide with the time of the classical limit.
    """

    params: SpinParams
    dim: int
    hamiltonian: np.ndarray
    operators: dict = field(repr=False)
    hbar_eff: float

    @property
    def generator(self) -> np.ndarray:
        return self.hamiltonian / self.hbar_eff

    @property
    def s(self) -> float:
        return self.params.s


def build_quantum(params: SpinParams, max_dim: int = DEFAULT_MAX_DIM) -> SpinQuantumModel:
    if params.s is None:
        raise ContractError("quantum spin model needs params.s")
    s = params.s
    n = int(round(2 * s + 1))
    dim = n * n
    if dim > max_dim:
        raise ResourceError(f"dimension {dim} exceeds the cap {max_dim}")
    single = [sp.csr_matrix(a) for a in spin_matrices(s)]
    eye = sp.identity(n, format="csr")
    ops = {}
    for label, a in zip(("x", "y", "z", "+", "-"), single):
        ops[f"S{label}1"] = sp.kron(a, eye, format="csr")
        ops[f"S{label}2"] = sp.kron(eye, a, format="csr")
    hbar = params.hbar_eff
    h = 4 * params.J * (ops["Sz1"] @ ops["Sz2"]) * hbar**2
    for i in (1, 2):
        h = h + 2 * hbar * (params.b_x * ops[f"Sx{i}"] + params.b_z * ops[f"Sz{i}"])
        if params.b_y:
            h = h + 2 * hbar * params.b_y * ops[f"Sy{i}"]
    dense = h.toarray()
    if not params.b_y:
        dense = dense.real.copy()
    return SpinQuantumModel(params=params, dim=dim, hamiltonian=dense, operators=ops, hbar_eff=hbar)


def _single_coherent(s: float, q: float, p: float) -> np.ndarray:
    theta = np.arccos(np.clip(p, -1.0, 1.0))
    m = np.arange(s, -s - 1, -1.0)
    k = s - m
    two_s = 2 * s
    log_binom = np.array([lgamma(two_s + 1) - lgamma(kk + 1) - lgamma(two_s - kk + 1) for kk in k])
    c, sn = np.cos(theta / 2), np.sin(theta / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_amp = 0.5 * log_binom + (s + m) * np.log(c) + k * np.log(sn)
    amp = np.where(np.isfinite(log_amp), np.exp(log_amp), 0.0)
    # 0 ** 0 = 1 at the poles
    if sn == 0.0:
        amp[k == 0] = 1.0
    if c == 0.0:
        amp[(s + m) == 0] = np.exp(0.5 * log_binom[(s + m) == 0])
    return amp * np.exp(1j * k * q)


def _single_coherent_printed(s: float, q: float, p: float) -> np.ndarray:
    _, _, _, splus, sminus = spin_matrices(s)
    gen = np.arccos(p) / 2 * (splus * np.exp(1j * q) + sminus * np.exp(-1j * q))
    top = np.zeros(splus.shape[0], dtype=complex)
    top[0] = 1.0
    vec = expm(gen) @ top
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm == 0.0:
        raise NormalizationError("printed coherent-state generator gave a non-normalisable vector")
    return vec / norm


def coherent_state(s: float, point, convention: str = "rotation") -> CoherentState:
    """Product of SU(2) coherent states centred on the chart point.

    ``convention="rotation"`` applies the unitary rotation
    ``exp(theta/2 (S- e^{iq} - S+ e^{-iq}))`` to ``|s, s>`` with
    ``theta = arccos(p)``, which gives ``<S> = s n(q, p)``.
    ``convention="printed"`` exponentiates ``theta/2 (S+ e^{iq} + S- e^{-iq})``
    literally and normalises; that operator is Hermitian, the result is not
    centred on ``(q, p)`` and it is kept only for comparison.
    """
    coords = point.coords if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
    if coords.shape != (4,):
        raise ContractError("two-spin coherent state needs a 4-coordinate point")
    q, p = coords[:2], coords[2:]
    if np.any(np.abs(p) > 1):
        raise NormalizationError(f"|p| must not exceed 1, got {p}")
    single = {"rotation": _single_coherent, "printed": _single_coherent_printed}[convention]
    vec = np.kron(single(s, q[0], p[0]), single(s, q[1], p[1]))
    vec = vec / np.linalg.norm(vec)
    label = f"spin s={s:g} at (q1,q2,p1,p2)=({', '.join(f'{c:.6g}' for c in coords)})"
    return CoherentState(vector=vec, point=PhasePoint(coords, SPIN_CHART), label=label)


def bloch_vector(state: CoherentState, model: SpinQuantumModel, spin: int = 1) -> np.ndarray:
    """``<S_alpha^(i)> / s`` for alpha = x, y, z."""
    psi = state.vector
    out = []
    for alpha in "xyz":
        op = model.operators[f"S{alpha}{spin}"]
        out.append(np.vdot(psi, op @ psi).real / model.s)
    return np.array(out)


def bloch_of_point(point) -> np.ndarray:
    """Unit Bloch vectors ``(n1, n2)`` of a chart point, shape (2, 3)."""
    coords = point.coords if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
    q, p = coords[:2], coords[2:]
    r = np.sqrt(np.clip(1 - p * p, 0.0, None))
    return np.stack([r * np.cos(q), r * np.sin(q), p], axis=1)


def line_sampler(fp, delta_p2_list: Sequence[float]) -> list:
    """Points ``fp + (0, 0, 0, dp2)`` along the p2 direction from a fixed point."""
    base = fp.point if hasattr(fp, "point") else fp
    out = []
    for dp2 in delta_p2_list:
        coords = np.array(base.coords, dtype=float)
        coords[3] += dp2
        _spin_guard(coords)
        out.append(PhasePoint(coords, base.chart_id))
    return out


def find_hyperbolic_fixed_point(params: SpinParams, n_per_axis: int = 13, keep: int = 60):
    """Lowest-energy hyperbolic fixed point reached by Newton from a chart grid scan."""
    from .dynamics import distinct_fixed_points, grid_scan_guesses
    from .errors import NoSolutionError

    sys = build_classical(params)
    edge = 0.95
    guesses = grid_scan_guesses(sys, [-np.pi, -np.pi, -edge, -edge], [np.pi, np.pi, edge, edge],
                                n_per_axis, keep)
    found = [fp for fp in distinct_fixed_points(sys, guesses) if fp.is_hyperbolic]
    if not found:
        raise NoSolutionError(f"no hyperbolic fixed point found at J={params.J}")
    return min(found, key=lambda fp: sys.energy(fp.point))


__all__ = [
    "SPIN_CHART",
    "find_hyperbolic_fixed_point",
    "SpinParams",
    "SpinQuantumModel",
    "bloch_of_point",
    "bloch_vector",
    "build_classical",
    "build_quantum",
    "coherent_state",
    "line_sampler",
    "spin_matrices",
]
