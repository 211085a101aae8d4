"""Campaign runner: task stages, manifests with checksums, resumable runs.

Each campaign is a short sequence of stages.  Tasks inside a stage are
independent and may run in a process pool; every task writes its own files
and a JSON result under ``tasks/``.  Rerunning with the same configuration
reuses tasks whose files still match their recorded checksums.
"""
from __future__ import annotations

import hashlib
import json
import logging
import traceback
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import bose_hubbard as bh
from . import dynamics as dyn
from . import quantum as qe
from . import spin
from .config import ExperimentConfig, from_dict
from .errors import OtocLabError

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
UNITS = "# units: dimensionless model time and energy\n"


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    version: str
    output: str
    tasks: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def failed(self) -> list:
        return [k for k, v in self.tasks.items() if v["status"] != "done"]

    @property
    def complete(self) -> bool:
        return bool(self.tasks) and not self.failed

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "config_hash": self.config_hash, "version": self.version,
                "output": self.output, "tasks": self.tasks, "files": self.files}

    def save(self) -> None:
        path = Path(self.output) / MANIFEST
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, out_dir) -> "RunManifest":
        data = json.loads((Path(out_dir) / MANIFEST).read_text())
        return cls(**data)

    def result(self, task_id):
        entry = self.tasks.get(task_id)
        if not entry or entry["status"] != "done":
            return None
        return json.loads((Path(self.output) / entry["result"]).read_text())


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunContext:
    """Per-task view of the run: output paths and the task's RNG stream."""

    def __init__(self, config: ExperimentConfig, out: Path, task_id: str):
        self.config = config
        self.out = out
        self.task_id = task_id
        self.written = []

    @property
    def num(self) -> dict:
        return self.config.numerics

    def rng_seed(self) -> int:
        ss = np.random.SeedSequence(self.config.seed, spawn_key=(zlib.crc32(self.task_id.encode()),))
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(name)
        return p


@dataclass(frozen=True)
class Task:
    id: str
    func: str
    payload: dict


def _run_task(config_dict, out, task: Task):
    cfg = from_dict(config_dict)
    ctx = RunContext(cfg, Path(out), task.id)
    try:
        result = TASKS[task.func](ctx, task.payload)
    except Exception as exc:  # recorded per task, the run continues
        return task.id, None, ctx.written, f"{type(exc).__name__}: {exc}", traceback.format_exc()
    return task.id, result, ctx.written, None, None


class Runner:
    def __init__(self, config: ExperimentConfig, out: Path, workers: int = 1, resume: bool = True):
        self.config = config
        self.out = out
        self.workers = max(1, int(workers))
        self.manifest = RunManifest(config.experiment, config.digest(), __version__, str(out))
        old = out / MANIFEST
        if resume and old.exists():
            try:
                prev = RunManifest.load(out)
            except (ValueError, TypeError, KeyError):
                prev = None
            if prev is not None and prev.config_hash == self.manifest.config_hash:
                self.previous = prev
                return
        self.previous = None

    def _reusable(self, task_id):
        prev = self.previous
        if prev is None:
            return None
        entry = prev.tasks.get(task_id)
        if not entry or entry["status"] != "done":
            return None
        for name in entry["files"] + [entry["result"]]:
            path = self.out / name
            if not path.exists() or prev.files.get(name) != sha256_of(path):
                return None
        return entry

    def _record(self, task_id, result, written, error):
        if error is None:
            rname = f"tasks/{task_id}.json"
            path = self.out / rname
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(result, indent=2, sort_keys=True, default=an._jsonable) + "\n")
            entry = {"status": "done", "files": sorted(set(written)), "result": rname, "error": ""}
            for name in entry["files"] + [rname]:
                self.manifest.files[name] = sha256_of(self.out / name)
        else:
            entry = {"status": "failed", "files": sorted(set(written)), "result": "", "error": error}
        self.manifest.tasks[task_id] = entry
        self.manifest.save()

    def skip(self, task_id, reason):
        self.manifest.tasks[task_id] = {"status": "skipped", "files": [], "result": "", "error": reason}
        self.manifest.save()

    def stage(self, tasks) -> dict:
        """Run tasks (reusing finished ones); returns ``{task id: result or None}``."""
        results, todo = {}, []
        for task in tasks:
            entry = self._reusable(task.id)
            if entry is not None:
                self.manifest.tasks[task.id] = entry
                for name in entry["files"] + [entry["result"]]:
                    self.manifest.files[name] = self.previous.files[name]
                results[task.id] = json.loads((self.out / entry["result"]).read_text())
            else:
                todo.append(task)
        cfg = self.config.to_dict()

        def collect(outcomes):
            # each task is recorded as soon as it finishes so an interrupted stage keeps its progress
            for task_id, result, written, error, tb in outcomes:
                if error:
                    log.warning("task %s failed: %s\n%s", task_id, error, tb)
                else:
                    log.info("task %s done", task_id)
                self._record(task_id, result, written, error)
                results[task_id] = result

        if self.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(self.workers) as pool:
                collect(pool.map(_run_task, [cfg] * len(todo), [str(self.out)] * len(todo), todo))
        else:
            collect(_run_task(cfg, str(self.out), t) for t in todo)
        self.manifest.save()
        return results


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _write_csv(path, header, rows, comments=()):
    with open(path, "w") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(UNITS)
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")


def _spin_params(cfg: ExperimentConfig, J: float, s=None) -> spin.SpinParams:
    m = cfg.model
    return spin.SpinParams(J=float(J), b_x=m["b_x"], b_y=m["b_y"], b_z=m["b_z"],
                           s=float(m["s"] if s is None else s))


def _bh_params(cfg: ExperimentConfig, theta: float) -> bh.BHParams:
    return bh.BHParams(int(cfg.model["L"]), int(cfg.model["N"]), float(theta))


def _lyapunov_record(ctx, sys, z0, name):
    num = ctx.num
    seed = ctx.rng_seed()
    seeds = dyn.random_seeds(sys, z0, int(num["lyapunov_seeds"]), seed)
    est = dyn.lyapunov(sys, z0, seeds, num["lyapunov_horizon"], chunk=num["lyapunov_chunk"],
                       tol=num["tol"], renorm_threshold=num["renorm_threshold"], rng_seed=seed)
    times = est.per_seed[0][1]
    curves = np.array([c for _, _, c in est.per_seed])
    rows = [[t, *curves[:, k], curves[:, k].mean()] for k, t in enumerate(times)]
    _write_csv(ctx.path(name), ["t"] + [f"seed{j}" for j in range(len(seeds))] + ["mean"], rows,
               [f"rng_seed: {seed}", f"start: {list(map(float, np.asarray(z0.coords if hasattr(z0, 'coords') else z0)))}"])
    return {"lambda_L": est.value, "spread": est.spread, "rng_seed": seed, "horizon": est.horizon}


# ---------------------------------------------------------------- spin tasks

def task_spin_fixed_points(ctx, payload):
    """Hyperbolic fixed point at the smallest J, continued over a refined grid."""
    cfg = ctx.config
    grid = sorted(set(float(J) for J in payload["J"]))
    step = ctx.num["continuation_step"]
    fine = sorted(set(grid) | set(np.round(np.arange(grid[0], grid[-1], step), 12).tolist()))
    fp0 = spin.find_hyperbolic_fixed_point(_spin_params(cfg, fine[0]))
    branch = dyn.continue_fixed_point(lambda J: spin.build_classical(_spin_params(cfg, J)), fp0, fine)
    out, rows = {}, []
    for J, fp in zip(fine, branch):
        if J not in grid:
            continue
        sys = spin.build_classical(_spin_params(cfg, J))
        energy = sys.energy(fp.point)
        out[repr(J)] = {"coords": list(map(float, fp.coords)), "lambda_loc": fp.lambda_loc,
                        "energy": energy, "residual": fp.residual_norm}
        rows.append([J, *fp.coords, energy, fp.lambda_loc, fp.residual_norm])
    _write_csv(ctx.path("fixed_points.csv"), ["J", "q1", "q2", "p1", "p2", "energy", "lambda_loc", "residual"], rows)
    return out


def task_spin_lyapunov(ctx, payload):
    sys = spin.build_classical(_spin_params(ctx.config, payload["J"]))
    fp = dyn.find_fixed_point(sys, payload["coords"])
    z0 = dyn.chaotic_offset_point(sys, fp, ctx.num["chaotic_offset"])
    if payload.get("dp2"):
        z0 = sys.point(np.asarray(z0.coords) + np.array([0, 0, 0, payload["dp2"]]))
    return _lyapunov_record(ctx, sys, z0, payload["file"])


def otoc_times(hbar_eff, lam_max, num, cover=None, factor=None):
    """``time_points`` samples on ``[0, factor * t_E]`` extended to cover a window."""
    t_E = an.ehrenfest_time(hbar_eff, lam_max)
    t_max = (num["time_factor"] if factor is None else factor) * t_E
    # longer horizons keep the sample density of the default grid
    n = int(round(num["time_points"] * max(1.0, t_max / (num["time_factor"] * t_E))))
    if cover is not None:
        t0, t1 = cover
        t_max = max(t_max, 1.05 * t1)
        n = max(n, int(np.ceil(4 * num["min_samples"] * t_max / (t1 - t0))) + 1)
    return np.linspace(0.0, t_max, n), t_E


def task_spin_otoc(ctx, payload):
    """One eigendecomposition, OTOCs of S_z^(1) for every requested state."""
    params = _spin_params(ctx.config, payload["J"], payload.get("s"))
    model = spin.build_quantum(params, int(ctx.num["max_dim"]))
    prop = qe.diagonalize(model)
    a = prop.transform(model.operators["Sz1"], "Sz1")
    fp = np.asarray(payload["coords"])
    times = np.asarray(payload["times"]) if "times" in payload else None
    if times is None:
        times, _ = otoc_times(params.hbar_eff, payload["lam_max"], ctx.num, payload.get("cover"),
                              payload.get("factor"))
    out = {}
    for label, dp2 in payload["states"]:
        point = fp.copy()
        point[3] += dp2
        psi = spin.coherent_state(params.s, point)
        series = qe.otoc_series(prop, a, a, psi, times, with_fg=True, labels=("Sz1", "Sz1"))
        name = f"otoc/{label}.csv"
        qe.write_otoc_csv(series, ctx.path(name))
        out[label] = name
    return {"files": out, "dim": model.dim, "hbar_eff": params.hbar_eff}


def _fit_json(fit):
    return None if fit is None else an.fit_record(fit)


def _pipeline_spin_sweep(runner: Runner):
    cfg, num = runner.config, runner.config.numerics
    line = cfg.experiment == "spin-line"
    grid = [float(J) for J in cfg.grids["J"]]
    dps = [float(x) for x in cfg.grids.get("delta_p2", [0.0])] if line else [0.0]
    J_cal, dp_cal = float(num["calibration_J"]), float(num["calibration_dp2"])
    need = sorted(set(grid) | ({J_cal} if not line else set()))
    fps = runner.stage([Task("fixed-points", "spin_fixed_points", {"J": need})])["fixed-points"]
    if fps is None:
        for J in need:
            runner.skip(f"lyapunov-J{J:g}", "fixed points unavailable")
        return
    lyap_tasks = [Task(f"lyapunov-J{J:g}", "spin_lyapunov",
                       {"J": J, "coords": fps[repr(J)]["coords"], "file": f"lyapunov/J{J:g}.csv"})
                  for J in need if J in grid]
    if not line:
        lyap_tasks.append(Task("lyapunov-calibration", "spin_lyapunov",
                               {"J": J_cal, "coords": fps[repr(J_cal)]["coords"], "dp2": dp_cal,
                                "file": f"lyapunov/calibration_J{J_cal:g}.csv"}))
    lyap = runner.stage(lyap_tasks)

    def lam_max(J):
        r = lyap.get(f"lyapunov-J{J:g}")
        return max(fps[repr(J)]["lambda_loc"], r["lambda_L"] if r else 0.0)

    window = None
    if not line:
        cal_l = lyap.get("lyapunov-calibration")
        if cal_l is None:
            runner.skip("calibration", "calibration Lyapunov exponent unavailable")
        else:
            lam_cal = max(fps[repr(J_cal)]["lambda_loc"], cal_l["lambda_L"])
            res = runner.stage([Task("otoc-calibration", "spin_otoc",
                                     {"J": J_cal, "coords": fps[repr(J_cal)]["coords"], "lam_max": lam_cal,
                                      "states": [["calibration", dp_cal]]})])["otoc-calibration"]
            if res is not None:
                series = qe.read_otoc_csv(runner.out / res["files"]["calibration"])
                t_E = an.ehrenfest_time(res["hbar_eff"], lam_cal)
                grid_w = an.window_grid(t_E, lam_cal, int(num["window_starts"]), num["window_lengths"])
                try:
                    w = an.calibrate_window(series, cal_l["lambda_L"], grid_w,
                                            tolerance=num["calibration_tolerance"],
                                            min_samples=int(num["min_samples"]), min_growth=num["min_growth"])
                    fit = an.fit_exponential(series, w, int(num["min_samples"]))
                    window = w
                    cal = {"t0": w.t0, "t1": w.t1, "lambda_L": cal_l["lambda_L"], "rate_c": fit.rate_c,
                           "mismatch": abs(fit.rate_c - 2 * cal_l["lambda_L"]) / (2 * cal_l["lambda_L"]),
                           "J": J_cal, "delta_p2": dp_cal}
                    an.write_json(cal, runner.out / "calibration.json")
                    runner._record("calibration", cal, ["calibration.json"], None)
                except OtocLabError as exc:
                    runner._record("calibration", None, [], f"{type(exc).__name__}: {exc}")
    otoc_tasks = []
    for J in grid:
        if lyap.get(f"lyapunov-J{J:g}") is None:
            runner.skip(f"otoc-J{J:g}", "Lyapunov exponent unavailable")
            continue
        states = [[f"J{J:g}_dp{dp:g}", dp] for dp in dps]
        cover = (window.t0, window.t1) if window is not None else None
        otoc_tasks.append(Task(f"otoc-J{J:g}", "spin_otoc",
                               {"J": J, "coords": fps[repr(J)]["coords"], "lam_max": lam_max(J),
                                "states": states, "cover": cover}))
    otocs = runner.stage(otoc_tasks)
    _spin_fits(runner, fps, lyap, otocs, grid, dps, window, line)


def _fit_series(series, window, grid_w, num, line):
    """Rate fit: calibrated window, or the scanned best window for line states."""
    try:
        if line or window is None:
            fit = an.best_window_fit(series, grid_w, int(num["min_samples"]), num["min_growth"])
        else:
            fit = an.fit_exponential(series, window, int(num["min_samples"]))
            if not fit.admissible(num["min_growth"]):
                return fit, False
        return fit, True
    except OtocLabError:
        return None, False


def _spin_fits(runner, fps, lyap, otocs, grid, dps, window, line):
    cfg, num = runner.config, runner.config.numerics
    if not line and window is None:
        runner.skip("fits", "no calibrated window")
        return
    rng = np.random.default_rng(RunContext(cfg, runner.out, "fits").rng_seed())
    table, written, records = [], [], {}
    fit_rows = []
    for dp in dps:
        triples, samples, rows = [], [], []
        for J in grid:
            res = otocs.get(f"otoc-J{J:g}")
            if res is None:
                continue
            label = f"J{J:g}_dp{dp:g}"
            series = qe.read_otoc_csv(runner.out / res["files"][label])
            lam_L = lyap[f"lyapunov-J{J:g}"]["lambda_L"]
            lam_loc = fps[repr(J)]["lambda_loc"]
            lam = max(lam_L, lam_loc)
            grid_w = an.window_grid(an.ehrenfest_time(res["hbar_eff"], lam), lam,
                                    int(num["window_starts"]), num["window_lengths"])
            fit, ok = _fit_series(series, window, grid_w, num, line)
            rate = fit.rate_c if ok else 0.0
            rows.append([J, lam_L, lam_loc, rate, fit.window[0] if fit else "", fit.window[1] if fit else "",
                         fit.rel_residual if fit else "", int(ok)])
            if fit is not None:
                fit_rows.append([res["files"][label], fit.window[0], fit.window[1], fit.offset, fit.amplitude,
                                 fit.rate_c, fit.rel_residual, int(ok)])
            if ok:
                triples.append((J, lam_L, lam_loc, rate))
                w = an.FitWindow(*fit.window, "scanned" if line else "calibrated")
                samples.append(an.bootstrap_rates(series, w, int(num["bootstrap"]), rng, int(num["min_samples"])))
        name = f"exponents_dp{dp:g}.csv" if line else "exponents.csv"
        _write_csv(runner.out / name, ["J", "lambda_L", "lambda_loc", "two_lambda_q", "t0", "t1",
                                       "rel_residual", "fitted"], rows)
        written.append(name)
        try:
            hyp = an.hypothesis_fit(triples, np.array(samples) if samples else None, num["regular_cutoff"])
        except OtocLabError as exc:
            records[repr(dp)] = {"error": str(exc)}
            continue
        rec = an.fit_record(hyp, config_hash=cfg.digest(), seed=cfg.seed,
                            window_source="scanned" if line else "calibrated")
        rec["report"] = an.ab_decomposition_report(hyp)
        records[repr(dp)] = rec
        table.append([dp, hyp.coef_a, hyp.coef_b, hyp.sum_ab, hyp.stderr_a, hyp.stderr_b, hyp.rel_residual,
                      hyp.restricted["lambda_L"]["rel_residual"], hyp.restricted["lambda_loc"]["rel_residual"],
                      len(hyp.triples)])
    _write_csv(runner.out / "fits.csv", ["file", "t0", "t1", "offset", "amplitude", "rate_c", "rel_residual",
                                         "admissible"], fit_rows)
    _write_csv(runner.out / "hypothesis_table.csv",
               ["delta_p2", "a", "b", "a_plus_b", "se_a", "se_b", "rel_residual", "rel_residual_L_only",
                "rel_residual_loc_only", "n_points"], table)
    an.write_json(records, runner.out / "hypothesis.json")
    written += ["fits.csv", "hypothesis_table.csv", "hypothesis.json"]
    runner._record("fits", {"rows": len(table)}, written, None if table else "no hypothesis fit succeeded")


def _pipeline_spin_s_sweep(runner: Runner):
    cfg, num = runner.config, runner.config.numerics
    J = float(cfg.grids["J"][0])
    fps = runner.stage([Task("fixed-points", "spin_fixed_points", {"J": [J]})])["fixed-points"]
    if fps is None:
        return
    fp = fps[repr(J)]
    tasks = [Task(f"otoc-s{s:g}", "spin_otoc",
                  {"J": J, "s": float(s), "coords": fp["coords"], "lam_max": fp["lambda_loc"],
                   "states": [[f"s{s:g}", 0.0]], "factor": num["saturation_factor"]})
             for s in cfg.grids["s"]]
    res = runner.stage(tasks)
    rows = []
    for s in cfg.grids["s"]:
        r = res.get(f"otoc-s{s:g}")
        if r is None:
            continue
        series = qe.read_otoc_csv(runner.out / r["files"][f"s{s:g}"])
        plateau = qe.plateau_level(series, num["plateau_window"], num["plateau_threshold"])
        t_E = an.ehrenfest_time(r["hbar_eff"], fp["lambda_loc"])
        try:
            fit = an.best_window_fit(series, an.window_grid(t_E, fp["lambda_loc"], int(num["window_starts"]),
                                                            num["window_lengths"]),
                                     int(num["min_samples"]), num["min_growth"])
            rate = fit.rate_c
        except OtocLabError:
            rate = float("nan")
        rows.append([float(s), r["dim"], t_E, int(plateau.saturated), plateau.t_onset, plateau.level, rate])
    _write_csv(runner.out / "s_sweep.csv", ["s", "dim", "t_E", "saturated", "t_onset", "level", "rate_c"], rows)
    runner._record("summary", {"rows": len(rows)}, ["s_sweep.csv"], None if rows else "no spin size finished")


# ------------------------------------------------------------ section atlas

def task_section(ctx, payload):
    cfg, num = ctx.config, ctx.num
    sys = spin.build_classical(_spin_params(cfg, payload["J"]))
    fp = np.asarray(payload["coords"])
    energy = sys.hamiltonian(fp)
    plane = dyn.SectionPlane(1, float(fp[1]), 1)
    box = (np.array([-np.pi, -np.pi, -1.0, -1.0]), np.array([np.pi, np.pi, 1.0, 1.0]))
    cloud = dyn.poincare_section(sys, energy, plane, int(num["section_n_init"]), num["section_t_max"], box=box,
                                 rng=ctx.rng_seed(), tol=num["tol"])
    name = f"sections/J{payload['J']:g}.csv"
    dyn.write_section_csv(cloud, ctx.path(name))
    return {"energy": energy, "hits": int(cloud.hits.shape[0]), "max_drift": float(cloud.max_drifts.max()),
            "drifts": cloud.max_drifts.tolist(), "fixed_point": fp.tolist(), "file": name}


def _pipeline_section_atlas(runner: Runner):
    grid = [float(J) for J in runner.config.grids["J"]]
    fps = runner.stage([Task("fixed-points", "spin_fixed_points", {"J": grid})])["fixed-points"]
    if fps is None:
        return
    res = runner.stage([Task(f"section-J{J:g}", "section", {"J": J, "coords": fps[repr(J)]["coords"]})
                        for J in grid])
    rows = [[J, r["energy"], r["hits"], r["max_drift"]] for J, r in
            ((J, res.get(f"section-J{J:g}")) for J in grid) if r is not None]
    _write_csv(runner.out / "drift_summary.csv", ["J", "energy", "hits", "max_rel_drift"], rows)
    runner._record("summary", {"rows": len(rows)}, ["drift_summary.csv"], None)


# ----------------------------------------------------------- Bose-Hubbard

def task_bh_point(ctx, payload):
    """Exponents and OTOC for one state of one theta value."""
    cfg, num = ctx.config, ctx.num
    params = _bh_params(cfg, payload["theta"])
    fp = bh.homogeneous_fixed_point(params)
    mu = fp.extras["mu"]
    sys = bh.mean_field_system(params, mu)
    if payload.get("q1") is None:
        z0 = dyn.chaotic_offset_point(sys, fp, num["chaotic_offset"])
        state_point = fp.point
    else:
        state_point = bh.energy_shell_point(params, mu, payload["q1"], fp)
        z0 = state_point
    tag = payload["tag"]
    lyap = _lyapunov_record(ctx, sys, z0, f"lyapunov/{tag}.csv")
    out = {"lambda_loc": fp.lambda_loc, "mu": mu, "residual": fp.residual_norm,
           "point": list(map(float, state_point.coords)),
           "distance": float(np.linalg.norm(np.asarray(state_point.coords) - fp.coords)), **lyap}
    if fp.lambda_loc <= 0:
        out["otoc"] = None
        return out
    model = bh.build_quantum(params, int(num["max_dim"]))
    prop = qe.diagonalize(model)
    psi = bh.projected_coherent_state(model.basis, bh.phi_of_point(state_point), state_point)
    times, t_E = otoc_times(params.hbar_eff, max(fp.lambda_loc, lyap["lambda_L"]), num)
    series = qe.otoc_series(prop, model.n_ops[0], model.n_ops[0], psi, times, with_fg=True, labels=("n1", "n1"))
    name = f"otoc/{tag}.csv"
    qe.write_otoc_csv(series, ctx.path(name))
    out.update({"otoc": name, "dim": model.dim, "t_E": t_E})
    return out


def _pipeline_bh(runner: Runner):
    cfg, num = runner.config, runner.config.numerics
    shell = cfg.experiment == "bh-shell-sweep"
    thetas = [float(t) for t in cfg.grids["theta"]]
    targets = [float(q) for q in cfg.grids["q1_targets"]] if shell else [None]
    tasks = []
    for th in thetas:
        for k, q1 in enumerate(targets):
            tag = f"theta{th:g}" + (f"_q{k}" if shell else "")
            tasks.append(Task(tag, "bh_point", {"theta": th, "q1": q1, "tag": tag}))
    res = runner.stage(tasks)
    rng = np.random.default_rng(RunContext(cfg, runner.out, "fits").rng_seed())
    N = int(cfg.model["N"])
    records, table, fit_rows, written = {}, [], [], []
    for k, q1 in enumerate(targets):
        triples, samples, rows = [], [], []
        for th in thetas:
            tag = f"theta{th:g}" + (f"_q{k}" if shell else "")
            r = res.get(tag)
            if r is None or r.get("otoc") is None:
                continue
            series = qe.read_otoc_csv(runner.out / r["otoc"])
            w = an.local_instability_window(r["lambda_loc"], N)
            fit, ok = _fit_series(series, w, None, num, False)
            try:
                lam = max(r["lambda_loc"], r["lambda_L"])
                scanned = an.best_window_fit(series, an.window_grid(r["t_E"], lam, int(num["window_starts"]),
                                                                    num["window_lengths"]),
                                             int(num["min_samples"]), num["min_growth"])
                scanned_rate = scanned.rate_c
            except OtocLabError:
                scanned_rate = float("nan")
            rate = fit.rate_c if ok else 0.0
            rows.append([th, r["distance"], r["lambda_L"], r["lambda_loc"], rate, scanned_rate, int(ok)])
            if fit is not None:
                fit_rows.append([r["otoc"], fit.window[0], fit.window[1], fit.offset, fit.amplitude, fit.rate_c,
                                 fit.rel_residual, int(ok)])
            if ok:
                triples.append((th, r["lambda_L"], r["lambda_loc"], rate))
                samples.append(an.bootstrap_rates(series, w, int(num["bootstrap"]), rng, int(num["min_samples"])))
        name = f"exponents_q{k}.csv" if shell else "exponents.csv"
        _write_csv(runner.out / name, ["theta", "distance", "lambda_L", "lambda_loc", "two_lambda_q",
                                       "two_lambda_q_scanned", "fitted"], rows)
        written.append(name)
        key = repr(q1) if shell else "fixed-point"
        try:
            hyp = an.hypothesis_fit(triples, np.array(samples) if samples else None, num["regular_cutoff"])
        except OtocLabError as exc:
            records[key] = {"error": str(exc)}
            continue
        rec = an.fit_record(hyp, config_hash=cfg.digest(), seed=cfg.seed, window_source="local-instability")
        rec["report"] = an.ab_decomposition_report(hyp)
        records[key] = rec
        dist = float(np.mean([row[1] for row in rows])) if rows else 0.0
        table.append([q1 if shell else float(np.sqrt(2.0 / cfg.model["L"])), dist, hyp.coef_a, hyp.coef_b,
                      hyp.sum_ab, hyp.stderr_a, hyp.stderr_b, hyp.rel_residual, len(hyp.triples)])
    _write_csv(runner.out / "fits.csv", ["file", "t0", "t1", "offset", "amplitude", "rate_c", "rel_residual",
                                         "admissible"], fit_rows)
    _write_csv(runner.out / "hypothesis_table.csv", ["q1", "mean_distance", "a", "b", "a_plus_b", "se_a", "se_b",
                                                     "rel_residual", "n_points"], table)
    an.write_json(records, runner.out / "hypothesis.json")
    written += ["fits.csv", "hypothesis_table.csv", "hypothesis.json"]
    runner._record("fits", {"rows": len(table)}, written, None if table else "no hypothesis fit succeeded")


TASKS = {
    "spin_fixed_points": task_spin_fixed_points,
    "spin_lyapunov": task_spin_lyapunov,
    "spin_otoc": task_spin_otoc,
    "section": task_section,
    "bh_point": task_bh_point,
}

PIPELINES = {
    "spin-fp-sweep": _pipeline_spin_sweep,
    "spin-line": _pipeline_spin_sweep,
    "spin-s-sweep": _pipeline_spin_s_sweep,
    "section-atlas": _pipeline_section_atlas,
    "bh-fp-sweep": _pipeline_bh,
    "bh-shell-sweep": _pipeline_bh,
}


def run(config: ExperimentConfig, out=None, workers: int = 1, resume: bool = True) -> RunManifest:
    """Execute a campaign; failed tasks are recorded and independent work continues."""
    config.validate()
    out = Path(out or config.output)
    out.mkdir(parents=True, exist_ok=True)
    if config.is_long_running:
        warnings.warn("paper-scale configuration: expect hours of run time", stacklevel=2)
    runner = Runner(config, out, workers, resume)
    config.save(out / "config.toml")
    runner.manifest.files["config.toml"] = sha256_of(out / "config.toml")
    PIPELINES[config.experiment](runner)
    # plain output files written by the pipelines themselves
    for entry in runner.manifest.tasks.values():
        for name in entry["files"]:
            p = out / name
            if p.exists():
                runner.manifest.files[name] = sha256_of(p)
    runner.manifest.save()
    return runner.manifest


def list_experiments() -> dict:
    from .config import EXPERIMENTS

    return dict(EXPERIMENTS)


__all__ = ["RunManifest", "list_experiments", "otoc_times", "run", "sha256_of"]
