"""Forward models: static field, thermal-wave attenuation, and the time-domain check.

Run:  python3 demos/01_forward_models.py
"""

import math

import numpy as np

from thermolocate import Harmonic, Medium, fit_steady_oscillation, steady_spectral_response, static_point_temperature

medium = Medium(alpha=2.0)

print("static field of Q = 5 above ambient 20, alpha = 2")
for r in (5.0, 10.0, 20.0, 40.0):
    print(f"  r = {r:5.1f}  T = {static_point_temperature(r, 5.0, 20.0, medium):.5f}")

print("\nsteady oscillation per unit source amplitude at r = 10")
for f in (0.01, 0.05, 0.2, 1.0):
    resp = steady_spectral_response(10.0, f, medium)
    print(f"  f = {f:5.2f} Hz  gain = {resp.gain:.3e}  phase = {resp.phase_shift:+.3f} rad")

# the closed form against a direct time-domain convolution of the heat kernel
r, f = 3.0, 0.2
gain, lag, t_end = fit_steady_oscillation(r, Harmonic(1.0, f), medium)
resp = steady_spectral_response(r, f, medium)
print(f"\ntime-domain fit at r = {r}, f = {f} after {t_end:.0f} s of forcing")
print(f"  gain  {gain:.6e}  vs closed form {resp.gain:.6e}")
print(f"  phase {lag:+.6f}  vs closed form {resp.phase_shift:+.6f}")
print(f"  depth D = r*sqrt(pi f/alpha) = {r * math.sqrt(math.pi * f / medium.alpha):.3f}")

depths = np.linspace(1, 40, 5)
ratio = steady_spectral_response(depths, 0.2, medium).gain / (1 / (4 * math.pi * medium.alpha * depths))
print("\nwave gain relative to the static kernel:", np.array2string(ratio, precision=2))
