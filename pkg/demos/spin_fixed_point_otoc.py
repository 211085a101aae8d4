"""OTOC growth at the hyperbolic fixed point of two coupled spins.

Finds the fixed point, measures the classical exponents there, then builds
the quantum model at a small spin size and fits the exponential growth of
C(t) = <[Sz1(t), Sz1]^2 ...> for a coherent state centred on the point.
The fitted rate is compared with 2 lambda_L, 2 lambda_loc and their sum.

Run with ``python3 demos/spin_fixed_point_otoc.py [J] [s]``.
"""
import sys

import numpy as np

from otoclab import analysis as an
from otoclab import dynamics as dyn
from otoclab import quantum as qe
from otoclab import spin

J = float(sys.argv[1]) if len(sys.argv) > 1 else 0.217
s = float(sys.argv[2]) if len(sys.argv) > 2 else 15.0

params = spin.SpinParams(J=J, s=s)
classical = spin.build_classical(params)
fp = spin.find_hyperbolic_fixed_point(params)
print(f"fixed point (q1, q2, p1, p2) = {np.round(fp.coords, 6)}")
print(f"energy {classical.energy(fp.point):.4f}, lambda_loc {fp.lambda_loc:.4f}")

# the Lyapunov exponent of the surrounding chaotic layer, short horizon for speed
z0 = dyn.chaotic_offset_point(classical, fp)
est = dyn.lyapunov(classical, z0, dyn.random_seeds(classical, z0, 4, 7), 1000.0)
print(f"lambda_L ~ {est.value:.4f} (4 seeds, T = 1000, spread {est.spread:.4f})")

model = spin.build_quantum(params)
prop = qe.diagonalize(model)
lam = max(est.value, fp.lambda_loc)
t_E = an.ehrenfest_time(params.hbar_eff, lam)
times = np.linspace(0, 2.5 * t_E, 500)
psi = spin.coherent_state(s, fp.coords)
a = model.operators["Sz1"]
series = qe.otoc_series(prop, a, a, psi, times, with_fg=True)
print(f"dim {model.dim}, hbar_eff {params.hbar_eff:.4f}, Ehrenfest time {t_E:.1f}")

fit = an.best_window_fit(series, an.window_grid(t_E, lam))
print(f"best window [{fit.window[0]:.2f}, {fit.window[1]:.2f}]: rate {fit.rate_c:.4f}")
print(f"  2 lambda_L          = {2 * est.value:.4f}")
print(f"  2 lambda_loc        = {2 * fp.lambda_loc:.4f}")
print(f"  lambda_L + lambda_loc = {est.value + fp.lambda_loc:.4f}")

plateau = qe.plateau_level(series)
if plateau.saturated:
    print(f"plateau from t = {plateau.t_onset:.1f} at C = {plateau.level:.2f}")
