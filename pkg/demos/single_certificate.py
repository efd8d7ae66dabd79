"""Certificate for a small random field, with default and toy constants."""

from enstrophy_cert import spectral as sp
from enstrophy_cert.certify import certification_horizon, evaluate_certificate, t_star
from enstrophy_cert.constants import ConstantsLedger
from enstrophy_cert.galerkin import IntegratorConfig, integrate

u0 = sp.random_field(3, 7, target_enstrophy=1e-6)
for ledger in (ConstantsLedger(), ConstantsLedger(c_const=1.0)):
    T = certification_horizon(t_star(u0, ledger), 1e-3)
    traj = integrate(u0, T, IntegratorConfig(dt=1e-3))
    rep = evaluate_certificate(u0, traj, T, ledger)
    print(f"c = {ledger.c:.6g}  T* = {T:.4g}  lhs = {rep.lhs:.3e}  rhs = {rep.rhs:.3e}  -> {rep.verdict}")
