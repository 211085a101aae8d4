"""Exponential window fits of OTOC series and the joint exponent fit.

The growth model is ``g(t) = offset + amplitude * exp(rate_c * t)`` with
``rate_c ~ 2 lambda_q``.  The hypothesis coefficients ``a`` (weight of
``lambda_L``) and ``b`` (weight of ``lambda_loc``) come from a linear least
squares fit over a whole parameter sweep.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import CalibrationError, ContractError, DegenerateError, FitError
from .quantum import OTOCSeries

MIN_SAMPLES = 10
#: windows must show at least this much growth, ``rate_c * (t1 - t0)``
MIN_GROWTH = 0.5
#: relative mismatch allowed between the calibrated rate and ``2 lambda_L``
CALIBRATION_TOLERANCE = 0.3
#: points with both exponents below this are treated as regular
REGULAR_CUTOFF = 0.01
WINDOW_STARTS = 20
WINDOW_LENGTHS = (0.5, 1.0, 1.5, 2.0)
SOURCES = ("calibrated", "local-instability", "scanned")


@dataclass(frozen=True)
class FitWindow:
    t0: float
    t1: float
    source: str = "scanned"

    def __post_init__(self):
        if not 0 <= self.t0 < self.t1:
            raise ContractError(f"window needs 0 <= t0 < t1, got ({self.t0}, {self.t1})")
        if self.source not in SOURCES:
            raise ContractError(f"unknown window source {self.source!r}")


@dataclass(frozen=True)
class ExpFit:
    offset: float
    amplitude: float
    rate_c: float
    window: tuple
    rel_residual: float
    n_points: int = 0
    source: str = "scanned"

    @property
    def lambda_q(self) -> float:
        return self.rate_c / 2

    def model(self, t) -> np.ndarray:
        return self.offset + self.amplitude * np.exp(self.rate_c * np.asarray(t, dtype=float))

    @property
    def growth(self) -> float:
        return self.rate_c * (self.window[1] - self.window[0])

    def admissible(self, min_growth: float = MIN_GROWTH) -> bool:
        """Growing exponential with visible growth across the window."""
        return self.amplitude > 0 and self.rate_c > 0 and self.growth >= min_growth


def _window_data(series: OTOCSeries, window: FitWindow, min_samples: int):
    mask = (series.times >= window.t0) & (series.times <= window.t1)
    t = np.asarray(series.times[mask], dtype=float)
    c = np.asarray(series.C[mask], dtype=float)
    if t.size < min_samples:
        raise ContractError(f"window [{window.t0}, {window.t1}] holds {t.size} samples, need {min_samples}")
    if np.any(c <= 0):
        raise ContractError("C must be positive on the fit window")
    return t, c


def _seeds(t, y):
    """Initial rates from log-linear fits (offset-free and min-shifted)."""
    out = []
    span = y.max() - y.min()
    for shifted in (y, y - y.min() + 1e-3 * span + 1e-300):
        slope = np.polyfit(t, np.log(shifted), 1)[0]
        if np.isfinite(slope):
            out.append(float(slope))
    out.append(0.0)
    return out


def _fit_arrays(t, c, max_iter=200, tol=1e-12, seed_rates=None):
    scale = float(np.max(np.abs(c)))
    y = c / scale
    tm = 0.5 * (t[0] + t[-1])
    tau = t - tm

    def resid(x):
        return x[0] + x[1] * np.exp(x[2] * tau) - y

    def jac(x):
        e = np.exp(x[2] * tau)
        return np.column_stack([np.ones_like(tau), e, x[1] * tau * e])

    best = None
    for rate in (seed_rates if seed_rates is not None else _seeds(tau, y)):
        e = np.exp(rate * tau)
        lin = np.linalg.lstsq(np.column_stack([np.ones_like(tau), e]), y, rcond=None)[0]
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                sol = least_squares(resid, [lin[0], lin[1], rate], jac=jac, method="lm",
                                    xtol=tol, ftol=tol, gtol=tol, max_nfev=max_iter)
        except ValueError:
            continue
        if not np.all(np.isfinite(sol.x)) or not np.isfinite(sol.cost):
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None or best.status <= 0 and best.cost > 1e-20:
        raise FitError("exponential fit did not converge")
    # Gauss-Newton polish drives J^T r to zero; LM stops on cost changes, which
    # leaves the rate loose at the sqrt(eps) level and breaks scale covariance.
    x = best.x.copy()
    for _ in range(30):
        with np.errstate(over="ignore", invalid="ignore"):
            jx, rx = jac(x), resid(x)
        if not (np.all(np.isfinite(jx)) and np.all(np.isfinite(rx))):
            break
        try:
            step = np.linalg.lstsq(jx, rx, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        x = x - step
        if np.linalg.norm(step) <= 1e-15 * max(np.linalg.norm(x), 1.0):
            break
    with np.errstate(over="ignore", invalid="ignore"):
        polished = np.sum(resid(x) ** 2)
    if np.all(np.isfinite(x)) and polished <= 2 * best.cost * (1 + 1e-9) + 1e-300:
        best.x, best.fun = x, resid(x)
    a, b_mid, rate = best.x
    amplitude = b_mid * np.exp(-rate * tm) * scale
    rel = float(np.linalg.norm(best.fun) / np.linalg.norm(y))
    return a * scale, float(amplitude), float(rate), rel


def fit_exponential(series: OTOCSeries, window: FitWindow, min_samples: int = MIN_SAMPLES,
                    max_iter: int = 200, tol: float = 1e-12) -> ExpFit:
    """Levenberg-Marquardt fit of ``offset + amplitude * exp(rate_c t)`` on ``window``."""
    t, c = _window_data(series, window, min_samples)
    offset, amplitude, rate, rel = _fit_arrays(t, c, max_iter, tol)
    return ExpFit(float(offset), amplitude, rate, (float(window.t0), float(window.t1)), rel, t.size,
                  window.source)


def bootstrap_rates(series: OTOCSeries, window: FitWindow, n_boot: int = 1000, rng=None,
                    min_samples: int = MIN_SAMPLES) -> np.ndarray:
    """Fitted ``rate_c`` for ``n_boot`` resamples (with replacement) of the window points."""
    rng = np.random.default_rng(rng)
    t, c = _window_data(series, window, min_samples)
    base = _fit_arrays(t, c)[2]
    rates = np.empty(n_boot)
    for k in range(n_boot):
        idx = np.sort(rng.integers(0, t.size, t.size))
        if np.unique(idx).size < 4:
            rates[k] = np.nan
            continue
        try:
            rates[k] = _fit_arrays(t[idx], c[idx], seed_rates=[base])[2]
        except FitError:
            rates[k] = np.nan
    return rates


def window_grid(t_E: float, lam_max: float, n_starts: int = WINDOW_STARTS,
                lengths: Sequence[float] = WINDOW_LENGTHS) -> list:
    """Start times on ``[0, t_E]`` times lengths in units of ``1/lam_max``."""
    if not t_E > 0 or not lam_max > 0:
        raise ContractError("t_E and lam_max must be positive")
    return [FitWindow(float(t0), float(t0 + f / lam_max), "scanned")
            for t0 in np.linspace(0.0, t_E, n_starts) for f in lengths]


def ehrenfest_time(hbar_eff: float, lam: float) -> float:
    return float(np.log(1.0 / hbar_eff) / lam)


def _scan(series: OTOCSeries, grid, min_samples: int, min_growth: float):
    out = []
    for w in grid:
        try:
            fit = fit_exponential(series, w, min_samples)
        except (ContractError, FitError):
            continue
        if fit.admissible(min_growth):
            out.append((w, fit))
    return out


def calibrate_window(reference: OTOCSeries, lambda_L: float, grid=None, t_E: Optional[float] = None,
                     tolerance: float = CALIBRATION_TOLERANCE, min_samples: int = MIN_SAMPLES,
                     min_growth: float = MIN_GROWTH) -> FitWindow:
    """Window whose fitted rate is closest to ``2 lambda_L``."""
    if not lambda_L > 0:
        raise ContractError("calibration needs a positive Lyapunov exponent")
    if grid is None:
        grid = window_grid(t_E if t_E is not None else float(reference.times[-1]), lambda_L)
    target = 2 * lambda_L
    scored = [(abs(fit.rate_c - target) / target, w) for w, fit in _scan(reference, grid, min_samples, min_growth)]
    if not scored:
        raise CalibrationError("no admissible exponential window in the reference series")
    mismatch, best = min(scored, key=lambda item: item[0])
    if mismatch > tolerance:
        raise CalibrationError(f"best window rate misses 2*lambda_L by {mismatch:.1%}")
    return FitWindow(best.t0, best.t1, "calibrated")


def best_window_fit(series: OTOCSeries, grid, min_samples: int = MIN_SAMPLES,
                    min_growth: float = MIN_GROWTH) -> ExpFit:
    """Admissible window fit with the smallest relative residual."""
    grid = list(grid)
    if not grid:
        raise ContractError("empty window grid")
    fits = _scan(series, grid, min_samples, min_growth)
    if not fits:
        raise FitError("no admissible window fit")
    return min((fit for _, fit in fits), key=lambda f: f.rel_residual)


def local_instability_window(lambda_loc: float, N: float) -> FitWindow:
    """``[1/lambda_loc, ln(N)/lambda_loc]``."""
    if not lambda_loc > 0:
        raise ContractError("window needs lambda_loc > 0")
    return FitWindow(1.0 / lambda_loc, float(np.log(N)) / lambda_loc, "local-instability")


@dataclass(frozen=True)
class HypothesisFit:
    """Joint fit of ``2 lambda_q ~ a lambda_L + b lambda_loc``."""

    coef_a: float
    coef_b: float
    triples: list
    rel_residual: float
    restricted: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)
    stderr_a: float = float("nan")
    stderr_b: float = float("nan")

    @property
    def sum_ab(self) -> float:
        return self.coef_a + self.coef_b

    def predict(self, lam_L, lam_loc):
        return self.coef_a * np.asarray(lam_L) + self.coef_b * np.asarray(lam_loc)


def _rel(res, y):
    ny = np.linalg.norm(y)
    if ny == 0.0:
        return 0.0 if np.linalg.norm(res) == 0.0 else float("inf")
    return float(np.linalg.norm(res) / ny)


def _design(triples):
    arr = np.array([(t[1], t[2], t[3]) for t in triples], dtype=float)
    return arr[:, :2], arr[:, 2]


def hypothesis_fit(triples, rate_samples=None, regular_cutoff: float = REGULAR_CUTOFF) -> HypothesisFit:
    """Least squares for ``(a, b)`` over ``(param, lambda_L, lambda_loc, 2 lambda_q)`` triples.

    ``rate_samples`` (one row of ``2 lambda_q`` replicates per triple, e.g.
    bootstrap rates) propagates into standard errors of ``a`` and ``b``.
    """
    triples = [tuple(float(v) for v in t) for t in triples]
    keep = [i for i, t in enumerate(triples) if not (t[1] < regular_cutoff and t[2] < regular_cutoff)]
    excluded = [triples[i] for i in range(len(triples)) if i not in keep]
    used = [triples[i] for i in keep]
    if len(used) < 3:
        raise ContractError(f"need at least 3 non-regular triples, got {len(used)}")
    x, y = _design(used)
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateError("lambda_L and lambda_loc columns are collinear")
    coef = np.linalg.lstsq(x, y, rcond=None)[0]
    restricted = {}
    for name, col in (("lambda_L", 0), ("lambda_loc", 1)):
        v = x[:, col]
        k = float(v @ y / (v @ v))
        restricted[name] = {"coef": k, "rel_residual": _rel(y - k * v, y)}
    se_a = se_b = float("nan")
    if rate_samples is not None:
        samples = np.asarray(rate_samples, dtype=float)[keep]
        pinv = np.linalg.pinv(x)
        reps = []
        for col in samples.T:
            if np.all(np.isfinite(col)):
                reps.append(pinv @ col)
        if len(reps) > 1:
            reps = np.array(reps)
            se_a, se_b = (float(v) for v in reps.std(axis=0, ddof=1))
    return HypothesisFit(float(coef[0]), float(coef[1]), used, _rel(y - x @ coef, y), restricted,
                         excluded, se_a, se_b)


def ab_decomposition_report(fit: HypothesisFit, tol: float = 0.1) -> dict:
    """Mean-plus-remainder split ``a lL + b lloc = (a+b)(lL+lloc)/2 + (a-b)(lL-lloc)/2``."""
    a, b = fit.coef_a, fit.coef_b
    mean, half_diff = (a + b) / 2, (a - b) / 2
    flags = []
    if abs(a - 2) <= tol and abs(b) <= tol:
        flags.append("pure-lyapunov")
    if abs(b - 2) <= tol and abs(a) <= tol:
        flags.append("pure-local")
    if abs(half_diff) <= tol * max(1.0, abs(mean)):
        flags.append("average")
    rows = []
    for _, lam_L, lam_loc, rate in fit.triples:
        rows.append({
            "lambda_L": lam_L,
            "lambda_loc": lam_loc,
            "two_lambda_q": rate,
            "mean_term": (a + b) * (lam_L + lam_loc) / 2,
            "remainder": (a - b) * (lam_L - lam_loc) / 2,
        })
    return {"a": a, "b": b, "sum_ab": a + b, "mean": mean, "half_difference": half_diff,
            "decomposition": (mean, half_diff), "flags": flags, "rows": rows}


def power_combination_residual(triples, n: float, m: float) -> float:
    """Relative residual of ``a lambda_L^n + b lambda_loc^m`` (diagnostic only)."""
    x, y = _design(triples)
    xp = np.column_stack([x[:, 0] ** n, x[:, 1] ** m])
    coef = np.linalg.lstsq(xp, y, rcond=None)[0]
    return _rel(y - xp @ coef, y)


def fit_record(fit, **provenance) -> dict:
    rec = asdict(fit)
    if isinstance(fit, ExpFit):
        rec["lambda_q"] = fit.lambda_q
    if isinstance(fit, HypothesisFit):
        rec["sum_ab"] = fit.sum_ab
    rec["provenance"] = provenance
    return rec


def write_json(record, path) -> None:
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serialisable: {type(obj).__name__}")


__all__ = [
    "ExpFit",
    "FitWindow",
    "HypothesisFit",
    "ab_decomposition_report",
    "best_window_fit",
    "bootstrap_rates",
    "calibrate_window",
    "ehrenfest_time",
    "fit_exponential",
    "fit_record",
    "hypothesis_fit",
    "local_instability_window",
    "power_combination_residual",
    "window_grid",
    "write_json",
]
