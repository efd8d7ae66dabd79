"""Integrate a single shear mode and compare with its exact exponential decay."""

import math

from enstrophy_cert import spectral as sp
from enstrophy_cert.galerkin import IntegratorConfig, integrate

# sin x3 in a K = 2 cube; |k|^2 = 1, so the energy decays like exp(-2t)
u0 = sp.shear_mode(2)
traj = integrate(u0, 1.0, IntegratorConfig(dt=1e-2))
print(f"{'t':>6} {'energy':>14} {'exact':>14}")
for t, (e0, _, _) in zip(traj.times[::20], traj.norm_series()[::20]):
    print(f"{t:6.2f} {e0:14.8f} {4 * math.pi**3 * math.exp(-2 * t):14.8f}")
