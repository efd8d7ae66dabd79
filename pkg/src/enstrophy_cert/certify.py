"""A-posteriori regularity certificate for a computed trajectory.

Given a piecewise-linear path ``v`` through the stored Galerkin states, a
strong solution from ``u0`` is certified on ``[0, T*]`` when

    |D(v(0) - u0)| + int_0^T* |D r(s)| ds  <  c T*^{-1/4} exp(-c I),
    I = int_0^T* |Dv|^4 + |Dv| |Av| ds,

with residual ``r = dv/dt + Av + B(v, v)``.  The residual uses the full
nonlinear term, including the part the Galerkin truncation discards.
Integrals use two-point Gauss quadrature on every stored interval; the
result is a floating-point estimate, not an enclosure.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import DEFAULT_LEDGER, ConstantsLedger
from .galerkin import Trajectory
from .spectral import (
    SpectralField,
    advection_pseudospectral,
    energy,
    enstrophy,
    h2,
    ksquared,
    leray_project,
    norms,
    resize,
)

REPORT_SCHEMA = "enstrophy-cert-report"
REPORT_VERSION = 1
QUADRATURE = "gauss2"
_GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


class CertificationError(RuntimeError):
    """The certificate could not be evaluated (short trajectory, non-finite values)."""


def t_star(u0: SpectralField, ledger: ConstantsLedger = DEFAULT_LEDGER) -> float:
    """Time after which every solution from ``u0`` is known to be regular."""
    return math.sqrt(ledger.c) * energy(u0)


def certification_horizon(tstar: float, dt: float) -> float:
    """Interval length to certify: ``T*`` itself, or one step when ``T* = 0``.

    ``T* = 0`` only happens for the zero field; any positive horizon is a
    valid (longer) certification interval for it.
    """
    if tstar < 0:
        raise ValueError("T* must be non-negative")
    return tstar if tstar > 0 else dt


def small_data_check(
    u0: SpectralField, ledger: ConstantsLedger = DEFAULT_LEDGER, L: float = 2.0 * math.pi
) -> bool:
    """True when the enstrophy lies inside the small-data ball of the ledger."""
    return norms(u0, L)[1] <= ledger.small_data_threshold()


@dataclass(frozen=True)
class ResidualSample:
    t: float
    weight: float
    v: SpectralField
    r: SpectralField


def _stokes(u: SpectralField) -> SpectralField:
    return SpectralField(u.K, ksquared(u.K) * u.coeffs)


def full_nonlinear(v: SpectralField) -> SpectralField:
    """``B(v, v)`` with every reachable mode kept (radius ``2K``, exact)."""
    adv = advection_pseudospectral(np.asarray(v.coeffs), v.K, 2 * v.K)
    return leray_project(adv, tol=1e-8)


def residual_series(traj: Trajectory, t_end: float | None = None) -> list[ResidualSample]:
    """Residual of the linear interpolant at the Gauss nodes of each interval.

    Samples carry their quadrature weight; intervals are clipped at
    ``t_end`` when given.  Residual fields live on the cube of radius ``2K``.
    """
    if len(traj.times) < 2:
        raise CertificationError("residual needs a trajectory with at least two stored times")
    t_end = traj.T if t_end is None else t_end
    K2 = 2 * traj.K
    out = []
    for j in range(len(traj.times) - 1):
        a, b = float(traj.times[j]), float(traj.times[j + 1])
        if a >= t_end:
            break
        h = b - a
        ua, ub = traj.fields[j].coeffs, traj.fields[j + 1].coeffs
        dvdt = resize(SpectralField(traj.K, (ub - ua) / h), K2)
        b_clip = min(b, t_end)
        w = 0.5 * (b_clip - a)
        for g in _GAUSS:
            t = a + g * (b_clip - a)
            s = (t - a) / h
            v = SpectralField(traj.K, (1.0 - s) * ua + s * ub)
            r = dvdt + resize(_stokes(v), K2) + full_nonlinear(v)
            out.append(ResidualSample(t, w, v, r))
    return out


@dataclass
class CertificateReport:
    lhs: float
    rhs: float
    verdict: str
    integral_I: float
    t_star: float
    initial_gap: float
    residual_integral: float
    quadrature_error_estimate: float
    constants: dict
    metadata: dict
    rhs_default_c: float | None = None
    verdict_default_c: str | None = None
    schema: str = field(default=REPORT_SCHEMA)
    version: int = field(default=REPORT_VERSION)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "CertificateReport":
        d = json.loads(text)
        if d.get("schema") != REPORT_SCHEMA or d.get("version") != REPORT_VERSION:
            raise ValueError("not a certificate report of a supported version")
        return cls(**d)


def robustness_threshold(c: float, tstar: float, integral_I: float) -> float:
    return c * tstar**-0.25 * math.exp(-c * integral_I)


def _verdict(lhs: float, rhs: float) -> str:
    return "certified" if lhs < rhs else "inconclusive"


def evaluate_certificate(
    u0: SpectralField,
    traj: Trajectory,
    Tstar: float,
    ledger: ConstantsLedger = DEFAULT_LEDGER,
) -> CertificateReport:
    """Evaluate both sides of the robustness inequality on ``[0, Tstar]``."""
    if not Tstar > 0:
        raise CertificationError("T* must be positive")
    if traj.times[0] != 0.0 or traj.T < Tstar * (1.0 - 1e-12):
        raise CertificationError(
            f"trajectory covers [{traj.times[0]}, {traj.T}] but the certificate needs [0, {Tstar}]"
        )
    K = max(traj.K, u0.K)
    initial_gap = math.sqrt(enstrophy(resize(traj.fields[0], K) - resize(u0, K)))
    samples = residual_series(traj, Tstar)
    res_gauss = 0.0
    I = 0.0
    res_nodes = []
    for smp in samples:
        dr = math.sqrt(enstrophy(smp.r))
        dv2 = enstrophy(smp.v)
        av = math.sqrt(h2(smp.v))
        res_gauss += smp.weight * dr
        I += smp.weight * (dv2 * dv2 + math.sqrt(dv2) * av)
        res_nodes.append(dr)
    # node spread per interval: distance between Gauss-2 and a one-point rule
    spread = sum(s.weight * abs(a - b) for s, a, b in zip(samples[::2], res_nodes[::2], res_nodes[1::2]))
    lhs = initial_gap + res_gauss
    if not all(map(math.isfinite, (lhs, I))):
        raise CertificationError("non-finite certificate integrals; the trajectory is under-resolved")
    rhs = robustness_threshold(ledger.c, Tstar, I)
    report = CertificateReport(
        lhs=lhs,
        rhs=rhs,
        verdict=_verdict(lhs, rhs),
        integral_I=I,
        t_star=float(Tstar),
        initial_gap=initial_gap,
        residual_integral=res_gauss,
        quadrature_error_estimate=spread,
        constants=ledger.to_dict(),
        metadata={
            "K": traj.K,
            "n_modes": traj.n_modes,
            "dt": traj.dt,
            "scheme": traj.scheme,
            "quadrature": QUADRATURE,
            "intervals": len(samples) // 2,
        },
    )
    if not ledger.is_default_c:
        report.rhs_default_c = robustness_threshold(DEFAULT_LEDGER.c, Tstar, I)
        report.verdict_default_c = _verdict(lhs, report.rhs_default_c)
    return report


def enstrophy_ode_diagnostic(traj: Trajectory, ledger: ConstantsLedger = DEFAULT_LEDGER) -> bool:
    """Check ``d/dt |Du|^2 <= (c/nu^3)|Du|^6 - nu lambda1 |Du|^2`` on stored intervals.

    Uses the difference quotient of the stored enstrophy against the larger
    of the bound's values at the two interval ends.  Diagnostic only.
    """
    ens = np.array([enstrophy(u) for u in traj.fields])
    c, nu, lam = ledger.c, ledger.nu, ledger.lambda1

    def bound(E):
        return c / nu**3 * E**3 - nu * lam * E

    dq = np.diff(ens) / np.diff(traj.times)
    rhs = np.maximum(bound(ens[:-1]), bound(ens[1:]))
    tol = 1e-6 * np.maximum(ens[:-1], ens[1:])
    return bool(np.all(dq <= rhs + tol))
