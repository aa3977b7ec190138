"""Simulate a buried constant source, then find it from the boundary temperatures.

Run:  python3 demos/02_static_reconstruction.py [preset]     (default halfball_static_A1_noise1)
"""

import sys

import numpy as np

from thermolocate.cli import reconstruct_patch, simulate_patch
from thermolocate.config import resolve_config

preset = sys.argv[1] if len(sys.argv) > 1 else "halfball_static_A1_noise1"
cfg = resolve_config({"preset": preset, "reconstruction": {"resolution": [20, 20, 20]}})

patch = simulate_patch(cfg)
print(f"{preset}: {len(patch.values)} boundary points at radius {patch.extraction_radius}")
print(f"  temperatures {patch.values.min():.2f} .. {patch.values.max():.2f}")

report, grid, rec, _ = reconstruct_patch(cfg, patch, keep_field=True)
truth = np.array(report["truth"]["x0"])
print(f"  {len(grid)} candidates, grid spacing up to {grid.spacing:.1f}")
print(f"  truth {truth}, found {np.round(rec.x0, 2)}")
print(f"  location error {report['table_row']['location_error']:.2f}")
print(f"  fitted Q {rec.Q:.1f} (true total {report['truth']['Q']:.1f}), C {rec.C:.3f}")

# shape of the penalty along the ray through the best candidate
n_r, n_t, n_p = grid.resolution
eps = rec.epsilon_field.reshape(n_r, n_t, n_p)
_, it, ip = np.unravel_index(rec.index, (n_r, n_t, n_p))
print("  penalty along the radial ray:", np.array2string(eps[:, it, ip], precision=3, max_line_width=100))
