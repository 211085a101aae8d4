"""Phase-space primitives in canonical chart coordinates.

Coordinates are always ordered ``(q1, ..., qf, p1, ..., pf)``.  The matrix
``omega`` stored on a :class:`HamiltonianSystem` is the canonical Poisson
matrix ``[[0, I], [-I, 0]]``; the Hamiltonian vector field is
``omega @ grad H`` so that ``dq/dt = dH/dp`` and ``dp/dt = -dH/dq``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import ChartBoundaryError, ContractError

CANONICAL_CHART = "canonical"

#: default central-difference step on unit-scaled coordinates
FD_STEP = 1e-6


def canonical_omega(dim_f: int) -> np.ndarray:
    """Return the ``2f x 2f`` canonical Poisson matrix ``[[0, I], [-I, 0]]``."""
    eye = np.eye(dim_f)
    zero = np.zeros((dim_f, dim_f))
    return np.block([[zero, eye], [-eye, zero]])


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhasePoint:
    """A point of phase space in the coordinates of chart ``chart_id``."""

    coords: np.ndarray
    chart_id: str = CANONICAL_CHART

    def __post_init__(self):
        coords = _frozen(self.coords)
        if coords.ndim != 1 or coords.size == 0 or coords.size % 2:
            raise ContractError(f"phase point needs an even, non-zero length, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ContractError("phase point has non-finite coordinates")
        object.__setattr__(self, "coords", coords)

    @property
    def dim_f(self) -> int:
        return self.coords.size // 2

    @property
    def q(self) -> np.ndarray:
        return self.coords[: self.dim_f]

    @property
    def p(self) -> np.ndarray:
        return self.coords[self.dim_f :]

    def shifted(self, delta) -> "PhasePoint":
        return PhasePoint(self.coords + np.asarray(delta, dtype=float), self.chart_id)


@dataclass(frozen=True)
class TangentVector:
    """A deviation vector attached to ``base``."""

    base: PhasePoint
    components: np.ndarray

    def __post_init__(self):
        comps = _frozen(self.components)
        if comps.shape != self.base.coords.shape:
            raise ContractError(
                f"tangent vector length {comps.shape} does not match base {self.base.coords.shape}"
            )
        if not np.all(np.isfinite(comps)):
            raise ContractError("tangent vector has non-finite components")
        object.__setattr__(self, "components", comps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def normalized(self) -> "TangentVector":
        n = self.norm
        if n == 0.0:
            raise ContractError("cannot normalise a zero tangent vector")
        return TangentVector(self.base, self.components / n)


@dataclass(frozen=True)
class Embedding:
    """Globally regular ambient coordinates for a chart with singular points.

    ``pushforward(z)`` is the Jacobian of ``to_ambient`` at chart point ``z``
    and ``pullback(y)`` the Jacobian of ``from_ambient`` at ambient point ``y``.
    ``project`` maps an ambient point back onto the embedded manifold.
    """

    dim: int
    to_ambient: Callable[[np.ndarray], np.ndarray]
    from_ambient: Callable[[np.ndarray], np.ndarray]
    field: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    pushforward: Callable[[np.ndarray], np.ndarray]
    pullback: Callable[[np.ndarray], np.ndarray]
    hamiltonian: Callable[[np.ndarray], float]
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class ExtraUnknowns:
    """Additional unknowns (e.g. a frequency) entering a fixed-point search.

    ``rebind(values)`` returns the system with the extra parameters set,
    ``field_derivative(z, values)`` is ``d X / d extra`` (shape ``2f x k``) and
    ``constraints(z)`` returns ``(residuals, jacobian)`` of the side conditions
    that make the augmented system square or overdetermined.
    """

    names: tuple
    values: tuple
    rebind: Callable[[Sequence[float]], "HamiltonianSystem"]
    field_derivative: Callable[[np.ndarray, Sequence[float]], np.ndarray]
    constraints: Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class HamiltonianSystem:
    """A Hamiltonian flow given by its energy, vector field and Jacobian."""

    dim_f: int
    hamiltonian: Callable[[np.ndarray], float]
    vector_field: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    omega: np.ndarray
    chart_id: str = CANONICAL_CHART
    params: Mapping = field(default_factory=dict)
    domain_check: Optional[Callable[[np.ndarray], None]] = None
    periods: Optional[tuple] = None
    embedding: Optional[Embedding] = None
    extra: Optional[ExtraUnknowns] = None
    name: str = "hamiltonian-system"

    def __post_init__(self):
        omega = _frozen(self.omega)
        n = 2 * self.dim_f
        if omega.shape != (n, n):
            raise ContractError(f"omega must be {n}x{n}, got {omega.shape}")
        if not np.allclose(omega, -omega.T, atol=1e-14):
            raise ContractError("omega must be antisymmetric")
        object.__setattr__(self, "omega", omega)

    @property
    def dim(self) -> int:
        return 2 * self.dim_f

    def coords_of(self, z) -> np.ndarray:
        """Coordinates of ``z`` (a PhasePoint or array) after a domain check."""
        if isinstance(z, PhasePoint):
            if z.chart_id != self.chart_id:
                raise ContractError(f"point in chart {z.chart_id!r}, system uses {self.chart_id!r}")
            coords = z.coords
        else:
            coords = np.asarray(z, dtype=float)
        if coords.shape != (self.dim,):
            raise ContractError(f"expected {self.dim} coordinates, got shape {coords.shape}")
        if self.domain_check is not None:
            self.domain_check(coords)
        return coords

    def point(self, coords) -> PhasePoint:
        return PhasePoint(coords, self.chart_id)

    def energy(self, z) -> float:
        return float(self.hamiltonian(self.coords_of(z)))

    def field_at(self, z) -> np.ndarray:
        return np.asarray(self.vector_field(self.coords_of(z)), dtype=float)

    def jacobian_at(self, z) -> np.ndarray:
        return np.asarray(self.jacobian(self.coords_of(z)), dtype=float)

    def wrap(self, coords: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates into ``[-period/2, period/2)`` around zero."""
        if self.periods is None:
            return np.asarray(coords, dtype=float)
        out = np.array(coords, dtype=float)
        for i, period in enumerate(self.periods):
            if period:
                out[..., i] = np.mod(out[..., i] + period / 2, period) - period / 2
        return out


def poisson_bracket_matrix(sys: HamiltonianSystem, monodromy) -> np.ndarray:
    """Matrix of brackets ``{z^mu o phi_t, z^nu}`` from the linearised flow.

    Row ``mu`` and column ``nu``.  Expanding the bracket in canonical
    coordinates gives ``sum_a,b d(z^mu o phi_t)/dz^a omega^{ab} dz^nu/dz^b``,
    i.e. the monodromy multiplied from the right by ``omega``.
    """
    m = np.asarray(monodromy, dtype=float)
    if m.shape != sys.omega.shape:
        raise ContractError(f"monodromy shape {m.shape} does not match omega {sys.omega.shape}")
    return m @ sys.omega


def finite_difference_jacobian(field: Callable, point, step: float = FD_STEP,
                               domain_check: Optional[Callable] = None) -> np.ndarray:
    """Central-difference Jacobian of ``field`` at ``point``.

    ``domain_check`` is applied to every shifted evaluation point so that
    probing across a chart edge raises :class:`ChartBoundaryError`.
    """
    if not step > 0:
        raise ContractError(f"finite-difference step must be positive, got {step}")
    z = point.coords if isinstance(point, PhasePoint) else np.asarray(point, dtype=float)
    if isinstance(point, PhasePoint) and domain_check is None:
        domain_check = CHART_GUARDS.get(point.chart_id)
    f0 = np.atleast_1d(np.asarray(field(z), dtype=float))
    jac = np.empty((f0.size, z.size))
    for j in range(z.size):
        dz = np.zeros_like(z)
        dz[j] = step
        if domain_check is not None:
            domain_check(z + dz)
            domain_check(z - dz)
        jac[:, j] = (np.asarray(field(z + dz)) - np.asarray(field(z - dz))) / (2 * step)
    return jac


def hamiltonian_field_from_gradient(sys: HamiltonianSystem, z, step: float = FD_STEP) -> np.ndarray:
    """``omega @ grad H`` with the gradient taken by central differences."""
    coords = sys.coords_of(z)
    grad = finite_difference_jacobian(lambda x: np.array([sys.hamiltonian(x)]), coords, step,
                                      sys.domain_check)[0]
    return sys.omega @ grad


#: registry of chart guards used when only a PhasePoint is available
CHART_GUARDS: dict = {}


def register_chart_guard(chart_id: str, guard: Callable[[np.ndarray], None]) -> None:
    CHART_GUARDS[chart_id] = guard


def check_in_chart(point: PhasePoint) -> None:
    guard = CHART_GUARDS.get(point.chart_id)
    if guard is not None:
        guard(point.coords)


def symplectic_defect(sys: HamiltonianSystem, monodromy) -> float:
    """Largest entry of ``M omega M^T - omega``; zero for a symplectic ``M``."""
    m = np.asarray(monodromy, dtype=float)
    return float(np.max(np.abs(m @ sys.omega @ m.T - sys.omega)))


__all__ = [
    "CANONICAL_CHART",
    "ChartBoundaryError",
    "Embedding",
    "ExtraUnknowns",
    "FD_STEP",
    "HamiltonianSystem",
    "PhasePoint",
    "TangentVector",
    "canonical_omega",
    "check_in_chart",
    "finite_difference_jacobian",
    "hamiltonian_field_from_gradient",
    "poisson_bracket_matrix",
    "register_chart_guard",
    "symplectic_defect",
]
