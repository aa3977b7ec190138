"""How visible is a 1 cm tumour-sized source at the skin?  Static against oscillating.

The kernel is Q / (4 pi alpha r) with the volumetric heat capacity folded
into Q, so the contrasts below are in W/m^3 * m^2 / (m^2/s) units.  Dividing
by the heat capacity of tissue (about 3.7e6 J/(m^3 K)) gives kelvin.

Run:  python3 demos/04_distinguishability.py
"""

import numpy as np

from thermolocate import SignalSpec, SourceSpec, ball_volume, distinguishability_map

Q = 29000 * ball_volume(0.01)
freqs = (0.15, 0.5, 1.0)
source = SourceSpec((0, 0, 0), 0.01, SignalSpec.from_components([(Q, f, 0.0) for f in freqs], dc_offset=Q))
depths = np.array([0.015, 0.02, 0.03, 0.05])
alphas = np.array([1e-7, 1e-6, 1e-5])

static = distinguishability_map(SourceSpec((0, 0, 0), 0.01, SignalSpec.constant(Q)), depths, alphas)
print("static contrast (rows: depth in m, columns: alpha in m^2/s)")
print("          " + "  ".join(f"{a:9.0e}" for a in alphas))
for d, row in zip(depths, static.values):
    print(f"  {d:6.3f}  " + "  ".join(f"{v:9.3g}" for v in row))

print(f"  (0.020 m, 1e-7 m^2/s) in kelvin for tissue: {static.values[1, 0] / 3.7e6:.2f}")

for f in freqs:
    m = distinguishability_map(source, depths, alphas, f=f)
    print(f"\noscillating at {f} Hz")
    for d, row in zip(depths, m.values):
        print(f"  {d:6.3f}  " + "  ".join(f"{v:9.3g}" for v in row))
