"""Trajectories, tangent flows, Lyapunov exponents, fixed points and sections.

Systems that carry an :class:`~otoclab.symplectic.Embedding` are integrated
in the embedding coordinates whenever the chart is not needed explicitly
(plain trajectories, Lyapunov exponents, sections); the monodromy matrix and
Poisson brackets are computed in the chart.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ChartBoundaryError,
    ContinuationBreak,
    ContractError,
    ConvergenceError,
    DegenerateError,
    DegenerateSeedWarning,
    EmptyShellError,
    StiffnessError,
)
from .symplectic import HamiltonianSystem, PhasePoint, TangentVector

#: integrator defaults (embedded Runge-Kutta 5(4))
METHOD = "RK45"
RTOL = 1e-10
ATOL = 1e-10
#: rescale a deviation vector once its norm exceeds this
RENORM_THRESHOLD = 1e6
#: displacement from a fixed point into its chaotic layer
CHAOTIC_OFFSET = 1e-3
#: seeds per Lyapunov estimate
N_SEEDS = 10
#: real parts below this count as zero in a linearisation spectrum
SPECTRAL_FLOOR = 1e-7


def _solve(rhs, t_span, y0, tol, t_eval=None, method=METHOD, events=None, dense=False):
    try:
        sol = solve_ivp(rhs, t_span, y0, method=method, rtol=tol, atol=tol, t_eval=t_eval,
                        events=events, dense_output=dense)
    except FloatingPointError as exc:  # pragma: no cover - depends on errstate
        raise StiffnessError(str(exc)) from exc
    if sol.status == -1:
        if "step size" in sol.message.lower():
            raise StiffnessError(sol.message)
        raise StiffnessError(f"integration failed: {sol.message}")
    return sol


def _use_embedding(sys: HamiltonianSystem, flag: Optional[bool]) -> bool:
    if flag is None:
        return sys.embedding is not None
    if flag and sys.embedding is None:
        raise ContractError(f"system {sys.name!r} has no embedding")
    return flag


def _unwrap(sys: HamiltonianSystem, pts: np.ndarray) -> np.ndarray:
    if sys.periods is None or len(pts) < 2:
        return pts
    out = pts.copy()
    for i, period in enumerate(sys.periods):
        if period:
            out[:, i] = np.unwrap(out[:, i], period=period)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution; ``points`` holds chart coordinates row by row."""

    times: np.ndarray
    points: np.ndarray
    energies: np.ndarray
    chart_id: str = "canonical"

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ContractError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def point(self, k: int) -> PhasePoint:
        return PhasePoint(self.points[k], self.chart_id)

    @property
    def final(self) -> PhasePoint:
        return self.point(-1)


def integrate(sys: HamiltonianSystem, z0, t_max: float, tol: float = RTOL, n_out: int = 1001,
              t_eval=None, use_embedding: Optional[bool] = None, method: str = METHOD) -> Trajectory:
    """Integrate Hamilton's equations from ``z0`` over ``[0, t_max]``."""
    if not tol > 0:
        raise ContractError("tolerance must be positive")
    coords = sys.coords_of(z0)
    if t_eval is None:
        t_eval = np.linspace(0.0, t_max, max(2, n_out))
    t_eval = np.asarray(t_eval, dtype=float)
    if t_max == 0:
        return Trajectory(np.array([0.0]), coords[None, :].copy(),
                          np.array([sys.hamiltonian(coords)]), sys.chart_id)
    if _use_embedding(sys, use_embedding):
        emb = sys.embedding
        sol = _solve(lambda t, y: emb.field(y), (0.0, t_max), emb.to_ambient(coords), tol, t_eval,
                     method)
        ys = sol.y.T
        pts = _unwrap(sys, np.array([emb.from_ambient(y) for y in ys]))
        energies = np.array([emb.hamiltonian(y) for y in ys])
    else:
        def rhs(t, z):
            if sys.domain_check is not None:
                sys.domain_check(z)
            return sys.vector_field(z)

        sol = _solve(rhs, (0.0, t_max), coords, tol, t_eval, method)
        pts = sol.y.T.copy()
        energies = np.array([sys.hamiltonian(z) for z in pts])
    return Trajectory(sol.t.copy(), pts, energies, sys.chart_id)


def energy_drift_report(traj: Trajectory):
    """``(max relative drift, per-sample relative drift)`` against the first sample."""
    e = np.asarray(traj.energies, dtype=float)
    if e.size == 0:
        raise ContractError("empty trajectory")
    rel = np.abs(e - e[0]) / max(abs(e[0]), 1e-12)
    return float(rel.max()), rel


def write_drift_csv(traj: Trajectory, path) -> None:
    _, rel = energy_drift_report(traj)
    with open(path, "w", newline="") as fh:
        fh.write("# units: dimensionless model time and energy\n")
        w = csv.writer(fh)
        w.writerow(["t", "energy", "rel_drift"])
        for t, e, r in zip(traj.times, traj.energies, rel):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(r))])


def _tangent_rhs(sys: HamiltonianSystem, n_cols: int):
    n = sys.dim

    def rhs(t, y):
        z = y[:n]
        if sys.domain_check is not None:
            sys.domain_check(z)
        m = y[n:].reshape(n, n_cols)
        return np.concatenate([sys.vector_field(z), (sys.jacobian(z) @ m).ravel()])

    return rhs


def variational_flow(sys: HamiltonianSystem, z0, t: float, V0: Optional[TangentVector] = None,
                     tol: float = 1e-12, method: str = METHOD):
    """Flow ``phi_t(z0)`` and monodromy ``M = d phi_t(z0)`` in chart coordinates.

    Returns ``(point, M)``, or ``(point, M, M @ V0)`` when a seed is given.
    """
    coords = sys.coords_of(z0)
    n = sys.dim
    if t == 0:
        m = np.eye(n)
        point = sys.point(coords)
    else:
        y0 = np.concatenate([coords, np.eye(n).ravel()])
        sol = _solve(_tangent_rhs(sys, n), (0.0, t), y0, tol, [t], method)
        y = sol.y[:, -1]
        point = sys.point(y[:n])
        m = y[n:].reshape(n, n)
    if V0 is None:
        return point, m
    return point, m, TangentVector(point, m @ V0.components)


def tangent_flow_series(sys: HamiltonianSystem, z0, times, tol: float = 1e-10, method: str = METHOD):
    """Chart points and monodromy matrices at each of ``times`` (sorted, from 0)."""
    coords = sys.coords_of(z0)
    times = np.asarray(times, dtype=float)
    n = sys.dim
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ContractError("times must be sorted and non-negative")
    y0 = np.concatenate([coords, np.eye(n).ravel()])
    if times[-1] == 0:
        return coords[None, :].copy(), [np.eye(n) for _ in times]
    sol = _solve(_tangent_rhs(sys, n), (0.0, times[-1]), y0, tol, times, method)
    pts = sol.y[:n].T.copy()
    mats = [sol.y[n:, k].reshape(n, n) for k in range(sol.y.shape[1])]
    return pts, mats


def random_seeds(sys: HamiltonianSystem, z0, n: int = N_SEEDS, rng=None) -> list:
    """``n`` uniformly random unit tangent vectors at ``z0``."""
    rng = np.random.default_rng(rng)
    base = sys.point(sys.coords_of(z0))
    raw = rng.normal(size=(n, sys.dim))
    return [TangentVector(base, v / np.linalg.norm(v)) for v in raw]


@dataclass(frozen=True)
class LyapunovEstimate:
    """Maximal Lyapunov exponent averaged over deviation seeds.

    ``per_seed`` holds ``(seed, times, running_estimate)`` per seed;
    ``end_point``/``end_vectors`` are the transported point and (normalised)
    deviation vectors at the horizon.
    """

    value: float
    per_seed: list = field(repr=False)
    horizon: float
    rng_seed: Optional[int] = None
    end_point: Optional[PhasePoint] = field(default=None, repr=False)
    end_vectors: Optional[list] = field(default=None, repr=False)

    @property
    def terminal(self) -> np.ndarray:
        return np.array([curve[-1] for _, _, curve in self.per_seed])

    @property
    def spread(self) -> float:
        return float(np.std(self.terminal))


def lyapunov(sys: HamiltonianSystem, z0, seeds: Sequence[TangentVector], horizon: float,
             chunk: float = 10.0, tol: float = RTOL, renorm_threshold: float = RENORM_THRESHOLD,
             use_embedding: Optional[bool] = None, rng_seed: Optional[int] = None,
             method: str = METHOD) -> LyapunovEstimate:
    """Running estimate ``(1/t) ln(|V(t)| / |V0|)`` for every seed.

    All seeds are integrated together with the base trajectory.  At the end
    of every ``chunk`` of time, vectors whose norm exceeds
    ``renorm_threshold`` are rescaled to unit norm and the logarithm of the
    factor is accumulated.  With an embedding the Euclidean norm of the
    embedding space is used.
    """
    if not seeds:
        raise ContractError("at least one seed is required")
    if not horizon > 0:
        raise ContractError("horizon must be positive")
    coords = sys.coords_of(z0)
    for s in seeds:
        if s.components.shape != coords.shape or not s.norm > 0:
            raise ContractError("seeds must be non-zero tangent vectors of matching length")
    if np.linalg.norm(sys.vector_field(coords)) < 1e-10:
        warnings.warn("starting point is a fixed point; the estimate reflects the local exponent",
                      DegenerateSeedWarning, stacklevel=2)
    k = len(seeds)
    seed_mat = np.array([s.components for s in seeds]).T
    embedded = _use_embedding(sys, use_embedding)
    if embedded:
        emb = sys.embedding
        y = emb.to_ambient(coords)
        vecs = emb.pushforward(coords) @ seed_mat
        field_, jac = emb.field, emb.jacobian
    else:
        y = coords.copy()
        vecs = seed_mat.copy()
        field_, jac = sys.vector_field, sys.jacobian
    n = y.size
    vecs = vecs / np.linalg.norm(vecs, axis=0)

    def rhs(t, u):
        z = u[:n]
        if not embedded and sys.domain_check is not None:
            sys.domain_check(z)
        m = u[n:].reshape(n, k)
        return np.concatenate([field_(z), (jac(z) @ m).ravel()])

    log_acc = np.zeros(k)
    t = 0.0
    times, curves = [], []
    n_chunks = int(np.ceil(horizon / chunk - 1e-12))
    for i in range(n_chunks):
        t_next = min(horizon, (i + 1) * chunk)
        sol = _solve(rhs, (t, t_next), np.concatenate([y, vecs.ravel()]), tol, [t_next], method)
        u = sol.y[:, -1]
        y = u[:n]
        if embedded and emb.project is not None:
            y = emb.project(y)
        vecs = u[n:].reshape(n, k)
        norms = np.linalg.norm(vecs, axis=0)
        big = norms > renorm_threshold
        if big.any():
            log_acc[big] += np.log(norms[big])
            vecs[:, big] /= norms[big]
            norms[big] = 1.0
        t = t_next
        times.append(t)
        curves.append((log_acc + np.log(norms)) / t)
    times = np.array(times)
    curves = np.array(curves)
    per_seed = [(seeds[j], times, curves[:, j]) for j in range(k)]
    value = float(np.mean(curves[-1]))
    if embedded:
        end = emb.from_ambient(y)
        try:
            back = emb.pullback(y) @ vecs
        except ChartBoundaryError:
            back = None
    else:
        end, back = y, vecs
    end_point = sys.point(end)
    end_vectors = None
    if back is not None:
        end_vectors = [TangentVector(end_point, back[:, j] / np.linalg.norm(back[:, j])) for j in range(k)]
    return LyapunovEstimate(value, per_seed, float(horizon), rng_seed, end_point, end_vectors)


@dataclass(frozen=True)
class FixedPoint:
    """Zero of the Hamiltonian vector field with its linear stability data."""

    point: PhasePoint
    params: dict
    spectrum: np.ndarray
    lambda_loc: float
    residual_norm: float
    extras: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def coords(self) -> np.ndarray:
        return self.point.coords

    @property
    def is_hyperbolic(self) -> bool:
        return self.lambda_loc > 1e-8

    def unstable_direction(self, sys: HamiltonianSystem) -> np.ndarray:
        """Unit real vector along the eigenvector of the largest real eigenvalue."""
        w, v = np.linalg.eig(sys.jacobian(self.point.coords))
        u = np.real(v[:, int(np.argmax(w.real))])
        return u / np.linalg.norm(u)


def stability_spectrum(sys: HamiltonianSystem, z) -> np.ndarray:
    w = np.linalg.eigvals(sys.jacobian(sys.coords_of(z)))
    return w[np.lexsort((w.imag, w.real))]


def lambda_from_spectrum(spectrum) -> float:
    """Largest real part, with values below :data:`SPECTRAL_FLOOR` reported as 0.

    Zero modes from continuous symmetries form Jordan blocks whose numerical
    eigenvalues split by ``O(sqrt(eps))``; the floor removes that artefact.
    """
    lam = float(np.max(np.real(spectrum)))
    return lam if lam > SPECTRAL_FLOOR else 0.0


def _augmented(sys: HamiltonianSystem, k: int):
    """Residual and Jacobian over ``u = (z, extras)``."""
    n = sys.dim
    ex = sys.extra

    def residual(u):
        z, vals = u[:n], u[n:]
        s = ex.rebind(vals) if k else sys
        r = s.vector_field(z)
        if k:
            r = np.concatenate([r, np.atleast_1d(ex.constraints(z)[0])])
        return r

    def jacobian(u):
        z, vals = u[:n], u[n:]
        s = ex.rebind(vals) if k else sys
        jz = s.jacobian(z)
        if not k:
            return jz
        top = np.hstack([jz, ex.field_derivative(z, vals)])
        cj = np.atleast_2d(ex.constraints(z)[1])
        bottom = np.hstack([cj, np.zeros((cj.shape[0], k))])
        return np.vstack([top, bottom])

    return residual, jacobian


def find_fixed_point(sys: HamiltonianSystem, guess, extra_unknowns: Optional[Sequence[float]] = None,
                     tol: float = 1e-10, max_iter: int = 100, max_halvings: int = 30) -> FixedPoint:
    """Damped Newton solve of ``X^H(z) = 0``.

    With ``extra_unknowns`` the system's :class:`ExtraUnknowns` supply
    additional parameters solved for simultaneously, together with their side
    constraints; the (possibly overdetermined) Newton step is a least-squares
    step.
    """
    k = 0 if extra_unknowns is None else len(extra_unknowns)
    if k and sys.extra is None:
        raise ContractError("system does not declare extra unknowns")
    coords = sys.coords_of(guess)
    u = np.concatenate([coords, np.asarray(extra_unknowns if k else [], dtype=float)])
    residual, jacobian = _augmented(sys, k)
    n = sys.dim

    def safe_norm(v):
        try:
            if sys.domain_check is not None:
                sys.domain_check(v[:n])
            return float(np.linalg.norm(residual(v)))
        except ChartBoundaryError:
            return np.inf

    r_norm = safe_norm(u)
    for it in range(1, max_iter + 1):
        if r_norm <= tol:
            break
        jac = jacobian(u)
        svals = np.linalg.svd(jac, compute_uv=False)
        if svals[-1] <= 1e-13 * svals[0]:
            raise DegenerateError(f"singular Newton Jacobian at iteration {it}")
        step = np.linalg.lstsq(jac, -residual(u), rcond=None)[0]
        alpha = 1.0
        for _ in range(max_halvings + 1):
            trial = u + alpha * step
            t_norm = safe_norm(trial)
            if t_norm < r_norm:
                break
            alpha /= 2
        else:
            raise ConvergenceError(f"line search failed at iteration {it}, residual {r_norm:.3e}")
        u, r_norm = trial, t_norm
    else:
        raise ConvergenceError(f"Newton did not converge in {max_iter} iterations, residual {r_norm:.3e}")
    z = u[:n]
    extras = {}
    final = sys
    if k:
        extras = dict(zip(sys.extra.names, (float(x) for x in u[n:])))
        final = sys.extra.rebind(u[n:])
    spectrum = stability_spectrum(final, z)
    lam = lambda_from_spectrum(spectrum)
    return FixedPoint(
        point=final.point(z),
        params=dict(final.params),
        spectrum=spectrum,
        lambda_loc=lam,
        residual_norm=float(np.linalg.norm(final.vector_field(z))),
        extras=extras,
        iterations=it,
    )


def grid_scan_guesses(sys: HamiltonianSystem, lower, upper, n_per_axis: int = 9, keep: int = 20) -> list:
    """Grid points with the smallest ``|X^H|``, as Newton starting guesses."""
    axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in zip(lower, upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, sys.dim)
    scored = []
    for z in grid:
        try:
            if sys.domain_check is not None:
                sys.domain_check(z)
            scored.append((float(np.linalg.norm(sys.vector_field(z))), z))
        except ChartBoundaryError:
            continue
    scored.sort(key=lambda item: item[0])
    return [sys.point(z) for _, z in scored[:keep]]


def distinct_fixed_points(sys: HamiltonianSystem, guesses, tol: float = 1e-10, merge: float = 1e-6) -> list:
    """Newton from every guess; duplicates (modulo periods) are merged."""
    found = []
    for g in guesses:
        try:
            fp = find_fixed_point(sys, g, tol=tol)
        except (ConvergenceError, DegenerateError, ChartBoundaryError):
            continue
        key = sys.wrap(fp.coords)
        if all(np.linalg.norm(sys.wrap(key - sys.wrap(other.coords))) > merge for other in found):
            found.append(fp)
    return found


def _jump(sys: HamiltonianSystem, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(sys.wrap(np.asarray(b) - np.asarray(a))))


def continue_fixed_point(sys_family: Callable[[float], HamiltonianSystem], fp0: FixedPoint,
                         param_grid: Sequence[float], max_jump: float = 0.25, tol: float = 1e-10) -> list:
    """Natural-parameter continuation; each solution seeds the next solve."""
    grid = list(param_grid)
    if not grid:
        raise ContractError("empty parameter grid")
    out = [fp0]
    prev = fp0
    for value in grid[1:]:
        sys = sys_family(value)
        extras = list(prev.extras.values()) if prev.extras else None
        try:
            fp = find_fixed_point(sys, prev.point, extra_unknowns=extras, tol=tol)
        except (ConvergenceError, DegenerateError) as exc:
            raise ContinuationBreak(f"solve failed at parameter {value}: {exc}", out) from exc
        jump = _jump(sys, prev.coords, fp.coords)
        if jump > max_jump:
            raise ContinuationBreak(f"branch jump {jump:.3g} > {max_jump} at parameter {value}", out)
        out.append(fp)
        prev = fp
    return out


def chaotic_offset_point(sys: HamiltonianSystem, fp: FixedPoint, eps: float = CHAOTIC_OFFSET) -> PhasePoint:
    """Fixed point displaced by ``eps`` along its dominant unstable direction."""
    return sys.point(fp.coords + eps * fp.unstable_direction(sys))


@dataclass(frozen=True)
class SectionPlane:
    """Surface ``z[index] = value`` crossed with sign ``direction`` of velocity."""

    index: int
    value: float
    direction: int = 1


@dataclass(frozen=True)
class SectionCloud:
    """Section hits in the two coordinates ``axes`` plus their provenance."""

    plane: SectionPlane
    hits: np.ndarray
    energy: float
    axes: tuple
    trajectory: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    max_drifts: np.ndarray = field(repr=False)


def _plane_function(sys: HamiltonianSystem, plane: SectionPlane):
    period = sys.periods[plane.index] if sys.periods else 0.0
    if period:
        scale = period / (2 * np.pi)
        return (lambda z: np.sin((z[plane.index] - plane.value) / scale),
                lambda z: np.cos((z[plane.index] - plane.value) / scale) > 0)
    return (lambda z: z[plane.index] - plane.value), (lambda z: True)


def _shell_root(sys, coords, idx, energy, bounds, n_scan=400):
    grid = np.linspace(bounds[0], bounds[1], n_scan)
    vals = []
    for x in grid:
        c = coords.copy()
        c[idx] = x
        vals.append(sys.hamiltonian(c) - energy)
    vals = np.array(vals)
    roots = []
    for j in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        lo, hi = grid[j], grid[j + 1]
        flo = vals[j]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            c = coords.copy()
            c[idx] = mid
            fm = sys.hamiltonian(c) - energy
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots


def poincare_section(sys: HamiltonianSystem, energy: float, plane: SectionPlane, n_init: int,
                     t_max: float, box=None, rng=None, axes=None, shell_index: Optional[int] = None,
                     shell_bounds=None, tol: float = RTOL, max_tries: int = 50) -> SectionCloud:
    """Crossings of trajectories on the energy shell with ``plane``.

    Initial conditions: coordinates drawn uniformly from ``box`` (lower,
    upper), the plane coordinate set to its value and ``shell_index``
    (default: the conjugate of the plane coordinate) solved for ``H = energy``.
    Crossings are located by the integrator's event finder and filtered by
    crossing direction.
    """
    rng = np.random.default_rng(rng)
    n, f = sys.dim, sys.dim_f
    if shell_index is None:
        shell_index = (plane.index + f) % n
    if axes is None:
        dof = [d for d in range(f) if d != plane.index % f][0]
        axes = (dof, dof + f)
    if box is None:
        lo = np.array([-np.pi if (sys.periods and sys.periods[i]) else -1.0 for i in range(n)])
        box = (lo, -lo)
    if shell_bounds is None:
        shell_bounds = (-1 + 1e-6, 1 - 1e-6)
    lower, upper = (np.asarray(b, dtype=float) for b in box)
    g, same_side = _plane_function(sys, plane)
    emb = sys.embedding if sys.embedding is not None else None

    def chart(y):
        return emb.from_ambient(y) if emb is not None else y

    def event(t, y):
        return g(chart(y))

    event.direction = plane.direction
    hits, owners, points, drifts = [], [], [], []
    started = 0
    for _ in range(n_init * max_tries):
        if started == n_init:
            break
        c = rng.uniform(lower, upper)
        c[plane.index] = plane.value
        roots = _shell_root(sys, c, shell_index, energy, shell_bounds)
        if not roots:
            continue
        c[shell_index] = roots[int(rng.integers(len(roots)))]
        try:
            sys.coords_of(c)
        except ChartBoundaryError:
            continue
        if emb is not None:
            y0 = emb.to_ambient(c)
            rhs = lambda t, y: emb.field(y)
            ham = emb.hamiltonian
        else:
            y0 = c
            rhs = lambda t, y: sys.vector_field(y)
            ham = sys.hamiltonian
        sol = _solve(rhs, (0.0, t_max), y0, tol, None, METHOD, events=[event])
        e_traj = np.array([ham(y) for y in sol.y.T])
        drifts.append(float(np.max(np.abs(e_traj - energy)) / max(abs(energy), 1e-12)))
        for y in sol.y_events[0]:
            z = chart(y)
            if not same_side(z):
                continue
            hits.append(sys.wrap(z)[list(axes)])
            points.append(z)
            owners.append(started)
        started += 1
    if started == 0:
        raise EmptyShellError(f"no initial condition on the shell H = {energy} in the plane")
    hits_arr = np.array(hits).reshape(-1, 2)
    return SectionCloud(plane, hits_arr, float(energy), tuple(axes), np.array(owners, dtype=int),
                        np.array(points).reshape(-1, n), np.array(drifts))


def write_section_csv(cloud: SectionCloud, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# plane: index={cloud.plane.index} value={cloud.plane.value!r} "
                 f"direction={cloud.plane.direction}\n# energy: {cloud.energy!r}\n"
                 "# units: dimensionless model time and energy\n")
        w = csv.writer(fh)
        w.writerow(["hit", "x", "y", "trajectory"])
        for i, ((x, y), k) in enumerate(zip(cloud.hits, cloud.trajectory)):
            w.writerow([i, repr(float(x)), repr(float(y)), int(k)])


__all__ = [
    "FixedPoint",
    "LyapunovEstimate",
    "SectionCloud",
    "SectionPlane",
    "Trajectory",
    "chaotic_offset_point",
    "continue_fixed_point",
    "distinct_fixed_points",
    "energy_drift_report",
    "find_fixed_point",
    "grid_scan_guesses",
    "integrate",
    "lambda_from_spectrum",
    "lyapunov",
    "poincare_section",
    "random_seeds",
    "stability_spectrum",
    "tangent_flow_series",
    "variational_flow",
    "write_drift_csv",
    "write_section_csv",
]
