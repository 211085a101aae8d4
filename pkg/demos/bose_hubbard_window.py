"""Instability of the homogeneous Bose-Hubbard mean-field state.

Scans the local exponent of the homogeneous point over theta for rings of
three and four sites, locates the upper window edge by bisection, and fits
the OTOC of n1 at one unstable theta over the local-instability window.

Run with ``python3 demos/bose_hubbard_window.py``.
"""
import numpy as np

from otoclab import analysis as an
from otoclab import bose_hubbard as bh
from otoclab import quantum as qe

for L in (3, 4):
    lo, hi = bh.instability_window(L)
    edge = bh.locate_stability_change(L, hi - 0.2, hi + 0.2)
    print(f"L={L}: unstable for theta in ({lo:.4f}, {hi:.4f}); bisection edge {edge:.6f}")
    for theta in np.linspace(-1.5, -0.6, 7):
        fp = bh.homogeneous_fixed_point(bh.BHParams(L, 1, theta))
        print(f"   theta {theta:+.3f}  lambda_loc {fp.lambda_loc:.4f}")

L, N, theta = 3, 40, -1.25
params = bh.BHParams(L, N, theta)
fp = bh.homogeneous_fixed_point(params)
model = bh.build_quantum(params)
prop = qe.diagonalize(model)
psi = bh.projected_coherent_state(model.basis, bh.phi_of_point(fp.point)).vector
window = an.local_instability_window(fp.lambda_loc, N)
times = np.linspace(0, 2 * window.t1, 400)
n1 = model.operators["n1"]
series = qe.otoc_series(prop, n1, n1, psi, times)
fit = an.fit_exponential(series, window)
print(f"\nL={L}, N={N}, theta={theta}: dim {model.dim}")
print(f"window [{window.t0:.2f}, {window.t1:.2f}], rate {fit.rate_c:.4f} vs 2 lambda_loc {2 * fp.lambda_loc:.4f}")
