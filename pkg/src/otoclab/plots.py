"""Plot-script emission.

Each script is a standalone matplotlib program that reads CSVs from the run
directory and saves a PNG next to itself.  Generating scripts instead of
images keeps the library free of a plotting dependency.
"""
from __future__ import annotations

import csv
import warnings
from pathlib import Path

_HEADER = '''"""{title}"""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

RUN = Path(__file__).resolve().parent.parent


def load(name):
    lines = [line for line in open(RUN / name) if not line.startswith("#")]
    return np.genfromtxt(lines, delimiter=",", names=True)

'''

_SECTION = '''
data = load({csv!r})
fig, ax = plt.subplots(figsize=(4.5, 4.5))
ax.scatter(data["x"], data["y"], c=data["trajectory"], s=0.5, cmap="viridis")
ax.set_xlabel("q1")
ax.set_ylabel("p1")
ax.set_title({label!r})
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''

_LYAPUNOV = '''
data = load({csv!r})
fig, ax = plt.subplots(figsize=(6, 4))
for name in data.dtype.names:
    if name.startswith("seed"):
        ax.plot(data["t"], data[name], lw=0.5, alpha=0.6)
ax.plot(data["t"], data["mean"], lw=2, color="k", label="mean")
ax.set_xscale("log")
ax.set_xlabel("T")
ax.set_ylabel("running estimate of lambda_L")
ax.set_title({label!r})
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''

_OTOC = '''
data = load({csv!r})
t0, t1 = {t0!r}, {t1!r}
offset, amplitude, rate = {offset!r}, {amplitude!r}, {rate!r}
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(data["t"], np.log(np.maximum(data["C"], 1e-300)), lw=1.2, label="C(t)")
mask = (data["t"] >= t0) & (data["t"] <= t1)
tw = data["t"][mask]
ax.plot(tw, np.log(np.maximum(offset + amplitude * np.exp(rate * tw), 1e-300)),
        ":", marker=".", ms=3, color="k", label="fit, rate {rate:.4g}")
top = np.log(np.max(data["C"]))
ax.set_ylim(top - 25, top + 1)
ax.set_xlabel("t")
ax.set_ylabel("log C")
ax.set_title({label!r})
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''

_EXPONENTS = '''
data = np.atleast_1d(load({csv!r}))
x = data[{xcol!r}]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(x, data["lambda_L"], "o-", label="lambda_L")
ax.plot(x, data["lambda_loc"], "s-", label="lambda_loc")
ax.plot(x, data["two_lambda_q"], "^", color="r", label="2 lambda_q")
a, b = {a!r}, {b!r}
if a is not None:
    ax.plot(x, a * data["lambda_L"] + b * data["lambda_loc"], "k-", label=f"{{a:.2f}} lambda_L + {{b:.2f}} lambda_loc")
ax.set_xlabel({xcol!r})
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''

_AB = '''
data = np.atleast_1d(load({csv!r}))
x = data[{xcol!r}]
fig, ax = plt.subplots(figsize=(6, 4))
ax.errorbar(x, data["a"], yerr=data["se_a"], fmt="o-", label="a (lambda_L)")
ax.errorbar(x, data["b"], yerr=data["se_b"], fmt="s-", label="b (lambda_loc)")
ax.plot(x, data["a_plus_b"], "k--", label="a + b")
ax.set_xlabel({xlabel!r})
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''


def _rows(path: Path) -> list:
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _hypothesis_coefs(run: Path, key: str):
    import json

    path = run / "hypothesis.json"
    if not path.exists():
        return None, None
    rec = json.loads(path.read_text()).get(key, {})
    return rec.get("coef_a"), rec.get("coef_b")


def emit_plots(manifest, out_dir=None) -> list:
    """Write plot scripts under ``<run>/plots``; returns the script paths.

    Datasets that are missing from the manifest are skipped with a warning.
    """
    files = dict(getattr(manifest, "files", {}) or {})
    if not files:
        warnings.warn("manifest lists no datasets; nothing to plot", stacklevel=2)
        return []
    run = Path(manifest.output)
    plots = Path(out_dir) if out_dir else run / "plots"
    written = []

    def emit(name, title, body):
        plots.mkdir(parents=True, exist_ok=True)
        path = plots / name
        path.write_text(_HEADER.format(title=title) + body)
        written.append(path)

    def present(name):
        if name in files and (run / name).exists():
            return True
        warnings.warn(f"dataset {name} is missing; plot skipped", stacklevel=3)
        return False

    for name in sorted(f for f in files if f.startswith("sections/")):
        if present(name):
            stem = Path(name).stem
            emit(f"section_{stem}.py", f"Poincare section {stem}", _SECTION.format(csv=name, label=stem))
    for name in sorted(f for f in files if f.startswith("lyapunov/")):
        if present(name):
            stem = Path(name).stem
            emit(f"lyapunov_{stem}.py", f"Lyapunov convergence {stem}",
                 _LYAPUNOV.format(csv=name, label=stem))
    if "fits.csv" in files and present("fits.csv"):
        for row in _rows(run / "fits.csv"):
            name = row["file"]
            if not present(name):
                continue
            stem = Path(name).stem
            emit(f"otoc_{stem}.py", f"log C(t) with fit, {stem}",
                 _OTOC.format(csv=name, t0=float(row["t0"]), t1=float(row["t1"]), offset=float(row["offset"]),
                              amplitude=float(row["amplitude"]), rate=float(row["rate_c"]), label=stem))
    else:
        for name in sorted(f for f in files if f.startswith("otoc/")):
            warnings.warn(f"no fit recorded for {name}; plot skipped", stacklevel=2)
    for name in sorted(f for f in files if f.startswith("exponents") and f.endswith(".csv")):
        if not present(name):
            continue
        header = _rows(run / name)
        if not header:
            warnings.warn(f"dataset {name} is empty; plot skipped", stacklevel=2)
            continue
        xcol = "J" if "J" in header[0] else "theta"
        key = _key_for(manifest.experiment, name)
        a, b = _hypothesis_coefs(run, key)
        emit(f"{Path(name).stem}.py", f"classical exponents and OTOC rates ({name})",
             _EXPONENTS.format(csv=name, xcol=xcol, a=a, b=b))
    if "hypothesis_table.csv" in files and present("hypothesis_table.csv"):
        rows = _rows(run / "hypothesis_table.csv")
        if len(rows) > 1:
            xcol = "delta_p2" if "delta_p2" in rows[0] else "mean_distance"
            emit("ab_vs_distance.py", "fitted a and b versus distance from the fixed point",
                 _AB.format(csv="hypothesis_table.csv", xcol=xcol, xlabel=xcol))
    if not written:
        warnings.warn("no plottable datasets found", stacklevel=2)
    return written


def _key_for(experiment: str, name: str) -> str:
    stem = Path(name).stem
    if experiment == "spin-line" and "_dp" in stem:
        return repr(float(stem.split("_dp", 1)[1]))
    if experiment == "spin-fp-sweep":
        return repr(0.0)
    if experiment == "bh-fp-sweep":
        return "fixed-point"
    return ""


__all__ = ["emit_plots"]
