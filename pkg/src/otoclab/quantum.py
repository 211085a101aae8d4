"""Exact-diagonalisation time evolution and squared-commutator OTOCs.

All OTOCs are evaluated in the eigenbasis of the generator.  With
``D(t) = diag(exp(-i E t))`` the Heisenberg operator is ``D^+ A D`` there, so
every time point only needs matrix-vector products; time points are batched
into matrix-matrix products.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, eigh

from .errors import ContractError, OtocLabError
from .symplectic import PhasePoint

#: time points evaluated per matrix-matrix product
TIME_BATCH = 64


@dataclass(frozen=True)
class CoherentState:
    """Normalised amplitude vector labelled by a classical phase-space point."""

    vector: np.ndarray = field(repr=False)
    point: Optional[PhasePoint] = None
    label: str = ""

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=complex)
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > 1e-10:
            raise ContractError(f"coherent state must be normalised, norm = {norm}")
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return self.vector.size


class NumericalError(OtocLabError, RuntimeError):
    """The eigensolver failed."""


def _is_hermitian(a, atol=1e-12) -> bool:
    if sp.issparse(a):
        diff = a - a.conj().T
        return diff.nnz == 0 or np.abs(diff.data).max() <= atol
    a = np.asarray(a)
    return np.allclose(a, a.conj().T, atol=atol, rtol=0)


def _matmul(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``m @ x`` without promoting a real ``m`` to a complex copy."""
    if np.isrealobj(m) and np.iscomplexobj(x):
        # interleaved float view keeps the product on the BLAS path
        # (the strided .real/.imag views fall back to a slow loop)
        xc = np.ascontiguousarray(x, dtype=complex)
        flat = xc.reshape(xc.shape[0], -1).view(np.float64)
        out = np.ascontiguousarray(m @ flat).view(complex)
        return out.reshape(x.shape)
    return m @ x


@dataclass(frozen=True)
class EigenOperator:
    """An operator expressed in a propagator's eigenbasis."""

    matrix: np.ndarray = field(repr=False)
    hermitian: bool
    label: str = ""

    def adjoint_apply(self, x: np.ndarray) -> np.ndarray:
        if self.hermitian:
            return _matmul(self.matrix, x)
        return _matmul(self.matrix.conj().T, x)


@dataclass(frozen=True)
class Propagator:
    """Spectral decomposition ``G = V diag(E) V^+`` of a time generator."""

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    dim: int

    def to_eigenbasis(self, vector) -> np.ndarray:
        return self.eigenvectors.conj().T @ np.asarray(vector)

    def from_eigenbasis(self, vector) -> np.ndarray:
        return self.eigenvectors @ vector

    def evolve(self, psi, t: float) -> np.ndarray:
        """``U(t) psi`` with ``U(t) = exp(-i G t)``."""
        w = self.to_eigenbasis(np.asarray(psi, dtype=complex))
        return self.from_eigenbasis(np.exp(-1j * self.eigenvalues * t) * w)

    def transform(self, op, label: str = "") -> EigenOperator:
        """``V^+ A V`` for a dense or sparse operator ``A``."""
        if isinstance(op, EigenOperator):
            return op
        if op.shape != (self.dim, self.dim):
            raise ContractError(f"operator shape {op.shape} does not match dimension {self.dim}")
        v = self.eigenvectors
        av = op @ v
        m = v.conj().T @ np.asarray(av)
        return EigenOperator(matrix=m, hermitian=_is_hermitian(op), label=label)


def diagonalize(model) -> Propagator:
    """Full eigendecomposition of ``model.generator`` (or of a bare matrix)."""
    g = model.generator if hasattr(model, "generator") else model
    g = g.toarray() if sp.issparse(g) else np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ContractError(f"generator must be square, got {g.shape}")
    try:
        e, v = eigh(g, overwrite_a=False, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return Propagator(eigenvalues=e, eigenvectors=v, dim=g.shape[0])


@dataclass(frozen=True)
class OTOCSeries:
    """Squared commutator ``C(t)`` with optional ``F``/``G`` four-point parts."""

    times: np.ndarray
    C: np.ndarray
    F: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    state_label: str = ""
    operator_labels: tuple = ("A", "B")

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.C))) if self.C.size else 0.0

    def window(self, t0: float, t1: float) -> "OTOCSeries":
        mask = (self.times >= t0) & (self.times <= t1)
        pick = (lambda a: None if a is None else a[mask])
        return OTOCSeries(self.times[mask], self.C[mask], pick(self.F), pick(self.G),
                          self.state_label, self.operator_labels)


@dataclass(frozen=True)
class ClassicalProxySeries:
    """Squared Poisson bracket ``{A o phi_t, B}^2`` along a trajectory."""

    times: np.ndarray
    bracket_sq: np.ndarray
    label: str = ""


def _otoc_parts(prop: Propagator, a: EigenOperator, b: EigenOperator, psi, times):
    psi = psi.vector if isinstance(psi, CoherentState) else np.asarray(psi, dtype=complex)
    if psi.shape != (prop.dim,):
        raise ContractError(f"state dimension {psi.shape} does not match propagator {prop.dim}")
    times = np.asarray(times, dtype=float)
    w = prop.to_eigenbasis(psi)
    bw = b.adjoint_apply(w)  # B^+ psi
    c_out = np.empty(times.size)
    f_out = np.empty(times.size)
    g_out = np.empty(times.size)
    energies = prop.eigenvalues[:, None]
    for start in range(0, times.size, TIME_BATCH):
        tb = times[start : start + TIME_BATCH]
        ph = np.exp(-1j * energies * tb[None, :])
        # y1 = A(t)^+ B^+ psi ;  y2 = B^+ A(t)^+ psi
        y1 = ph.conj() * a.adjoint_apply(ph * bw[:, None])
        x2 = ph.conj() * a.adjoint_apply(ph * w[:, None])
        y2 = b.adjoint_apply(x2)
        diff = y2 - y1
        c_out[start : start + tb.size] = np.sum(np.abs(diff) ** 2, axis=0)
        g_out[start : start + tb.size] = np.sum(np.abs(y1) ** 2, axis=0) + np.sum(np.abs(y2) ** 2, axis=0)
        f_out[start : start + tb.size] = -2 * np.real(np.sum(y2.conj() * y1, axis=0))
    return times, c_out, f_out, g_out


def otoc_series(prop: Propagator, A, B, psi, times, with_fg: bool = False,
                labels: Sequence[str] = ("A", "B")) -> OTOCSeries:
    """``C(t) = <psi| [A(t), B] [A(t), B]^+ |psi> = || [A(t), B]^+ psi ||^2``.

    ``A`` and ``B`` may be dense, sparse or already transformed with
    :meth:`Propagator.transform` (reuse that when many states share a model).
    """
    a = prop.transform(A, labels[0])
    b = a if B is A else prop.transform(B, labels[1])
    times, c, f, g = _otoc_parts(prop, a, b, psi, times)
    label = psi.label if isinstance(psi, CoherentState) else ""
    if with_fg:
        return OTOCSeries(times, c, f, g, label, tuple(labels))
    return OTOCSeries(times, c, None, None, label, tuple(labels))


def fg_decomposition(prop: Propagator, A, B, psi, times):
    """Four-point parts with ``C = F + G``.

    ``F = -<A(t) B A(t)^+ B^+ + h.c.>`` and ``G = <A(t) B B^+ A(t)^+ + B A(t) A(t)^+ B^+>``.
    """
    a = prop.transform(A)
    b = a if B is A else prop.transform(B)
    _, _, f, g = _otoc_parts(prop, a, b, psi, times)
    return f, g


def classical_proxy(sys, z0, times, a_index: Optional[int] = None, b_index: Optional[int] = None,
                    tol: float = 1e-10) -> ClassicalProxySeries:
    """Squared bracket of two coordinate functions from the tangent flow.

    Defaults to ``{p1 o phi_t, p1}^2 = (d p1(t) / d q1)^2``.
    """
    from .dynamics import tangent_flow_series
    from .symplectic import poisson_bracket_matrix

    a_index = sys.dim_f if a_index is None else a_index
    b_index = sys.dim_f if b_index is None else b_index
    times = np.asarray(times, dtype=float)
    _, mats = tangent_flow_series(sys, z0, times, tol=tol)
    vals = np.array([poisson_bracket_matrix(sys, m)[a_index, b_index] for m in mats])
    return ClassicalProxySeries(times, vals**2, label=f"bracket[{a_index},{b_index}]")


@dataclass(frozen=True)
class PlateauResult:
    """Outcome of plateau detection; ``saturated`` is False for short runs."""

    saturated: bool
    t_onset: float = float("nan")
    level: float = float("nan")


def plateau_level(series: OTOCSeries, window_frac: float = 0.1, threshold: float = 0.02) -> PlateauResult:
    """First window in which the running mean of ``log C`` stops moving.

    The running mean over ``window_frac`` of the samples is formed first;
    the onset is the first index whose following window of running means
    varies by less than ``threshold``.  The level is the mean of ``C`` from
    the onset to the end of that window.
    """
    c = np.asarray(series.C, dtype=float)
    t = np.asarray(series.times, dtype=float)
    n = c.size
    w = max(3, int(round(window_frac * n)))
    positive = c > 0
    if n < 2 * w or not positive.any():
        return PlateauResult(False)
    first = int(np.argmax(positive))
    logc = np.full(n, np.nan)
    logc[positive] = np.log(c[positive])
    kernel = np.ones(w) / w
    for k in range(first, n - 2 * w + 2):
        seg = logc[k : k + 2 * w - 1]
        if np.isnan(seg).any():
            continue
        running = np.convolve(seg, kernel, mode="valid")
        if running.max() - running.min() < threshold:
            return PlateauResult(True, float(t[k]), float(np.mean(c[k : k + 2 * w - 1])))
    return PlateauResult(False)


def write_otoc_csv(series: OTOCSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# state: {series.state_label}\n# operators: {','.join(series.operator_labels)}\n")
        fh.write("# units: dimensionless model time\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "C", "F", "G"])
        for i, t in enumerate(series.times):
            f = "" if series.F is None else repr(float(series.F[i]))
            g = "" if series.G is None else repr(float(series.G[i]))
            writer.writerow([repr(float(t)), repr(float(series.C[i])), f, g])


def read_otoc_csv(path) -> OTOCSeries:
    label, ops = "", ("A", "B")
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# state:"):
                label = line.split(":", 1)[1].strip()
            elif line.startswith("# operators:"):
                ops = tuple(line.split(":", 1)[1].strip().split(","))
            elif not line.startswith("#"):
                rows.append(line)
    reader = csv.DictReader(rows)
    t, c, f, g = [], [], [], []
    for row in reader:
        t.append(float(row["t"]))
        c.append(float(row["C"]))
        f.append(float(row["F"]) if row["F"] else np.nan)
        g.append(float(row["G"]) if row["G"] else np.nan)
    f_arr = None if np.all(np.isnan(f)) else np.array(f)
    g_arr = None if np.all(np.isnan(g)) else np.array(g)
    return OTOCSeries(np.array(t), np.array(c), f_arr, g_arr, label, ops)


def write_proxy_csv(series: ClassicalProxySeries, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {series.label}\n# units: dimensionless model time\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "bracket_sq"])
        for t, v in zip(series.times, series.bracket_sq):
            writer.writerow([repr(float(t)), repr(float(v))])


__all__ = [
    "ClassicalProxySeries",
    "CoherentState",
    "EigenOperator",
    "NumericalError",
    "OTOCSeries",
    "PlateauResult",
    "Propagator",
    "classical_proxy",
    "diagonalize",
    "fg_decomposition",
    "otoc_series",
    "plateau_level",
    "read_otoc_csv",
    "write_otoc_csv",
    "write_proxy_csv",
]
