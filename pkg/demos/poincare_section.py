"""Poincare section through the spin fixed point with an energy-drift audit.

Writes ``section_J<J>.csv`` in the working directory and, when matplotlib is
installed, a PNG of the crossings in the (q1, p1) plane.

Run with ``python3 demos/poincare_section.py [J]``.
"""
import sys

import numpy as np

from otoclab import dynamics as dyn
from otoclab import spin

J = float(sys.argv[1]) if len(sys.argv) > 1 else 0.156
params = spin.SpinParams(J=J)
system = spin.build_classical(params)
fp = spin.find_hyperbolic_fixed_point(params)
energy = system.energy(fp.point)
plane = dyn.SectionPlane(1, float(fp.coords[1]), 1)
box = (np.array([-np.pi, -np.pi, -1.0, -1.0]), np.array([np.pi, np.pi, 1.0, 1.0]))
cloud = dyn.poincare_section(system, energy, plane, 8, 500.0, box=box, rng=1)
name = f"section_J{J:g}.csv"
dyn.write_section_csv(cloud, name)
print(f"J={J}: energy {energy:.4f}, {cloud.hits.shape[0]} crossings from 8 trajectories")
print(f"largest relative energy drift {cloud.max_drifts.max():.2e}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)
fig, ax = plt.subplots(figsize=(4.5, 4.5))
ax.scatter(cloud.hits[:, 0], cloud.hits[:, 1], c=cloud.trajectory, s=0.5)
ax.set_xlabel("q1")
ax.set_ylabel("p1")
fig.savefig(name.replace(".csv", ".png"), dpi=150)
