"""Time integration of the Galerkin system ``du/dt + Au + P_n B(u, u) = 0``."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .basis import count_below, eigenvalue, stokes_basis
from .spectral import (
    SpectralField,
    VOLUME,
    advection_half,
    energy,
    enstrophy,
    gevrey_norm,
    from_half,
    h2,
    ksquared,
    to_half,
    wavenumbers,
)

SCHEMES = ("integrating_factor_rk4", "explicit_rk4")
STABILITY_LIMIT = {"integrating_factor_rk4": 1000.0, "explicit_rk4": 2.8}
BLOWUP_ENSTROPHY = 1e12
SERIES_HEADER = ("t", "energy", "enstrophy", "h2")


class DivergenceError(RuntimeError):
    """The numerical state blew up; this is a resolution failure, not a verdict."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    scheme: str = "integrating_factor_rk4"
    n_modes: int | None = None  # None: every mode with |k| <= K
    store_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.n_modes is not None and self.n_modes < 1:
            raise ValueError("n_modes must be at least 1")
        if self.store_every < 1:
            raise ValueError("store_every must be at least 1")

    def resolve_modes(self, K: int) -> int:
        basis = stokes_basis(K)
        n = basis.n_within_radius(K) if self.n_modes is None else self.n_modes
        if n > basis.complete_n:
            raise ValueError(
                f"n_modes={n} needs modes outside the cube K={K} (at most {basis.complete_n})"
            )
        return n

    def check_stability(self, n_modes: int) -> None:
        lam_max = eigenvalue(n_modes)
        limit = STABILITY_LIMIT[self.scheme]
        if self.dt * lam_max > limit:
            raise ValueError(
                f"dt * lambda_max = {self.dt * lam_max:g} exceeds {limit} for {self.scheme}"
            )


@dataclass
class Trajectory:
    """Fields at strictly increasing times, read as a piecewise-linear path."""

    times: np.ndarray
    fields: list[SpectralField]
    n_modes: int
    dt: float = math.nan
    scheme: str = ""
    _stack: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.fields):
            raise ValueError("times and fields differ in length")
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if len({u.K for u in self.fields}) != 1:
            raise ValueError("all fields must share one truncation radius")

    @property
    def K(self) -> int:
        return self.fields[0].K

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def stack(self) -> np.ndarray:
        if self._stack is None:
            self._stack = np.stack([u.coeffs for u in self.fields])
        return self._stack

    def norm_series(self) -> np.ndarray:
        """Array of shape ``(m, 3)`` holding energy, enstrophy and ``|Au|^2``."""
        return np.array([[energy(u), enstrophy(u), h2(u)] for u in self.fields])

    def thinned(self, every: int) -> "Trajectory":
        keep = list(range(0, len(self.times), every))
        if keep[-1] != len(self.times) - 1:
            keep.append(len(self.times) - 1)
        return Trajectory(
            self.times[keep], [self.fields[i] for i in keep], self.n_modes, self.dt * every, self.scheme
        )


def interpolant(traj: Trajectory, t: float) -> SpectralField:
    """Piecewise-linear interpolation of the stored coefficients."""
    times = traj.times
    if not times[0] <= t <= times[-1]:
        raise ValueError(f"t={t} outside [{times[0]}, {times[-1]}]")
    j = int(np.searchsorted(times, t, side="right")) - 1
    if j >= len(times) - 1 or t == times[j]:
        return traj.fields[min(j, len(times) - 1)]
    s = (t - times[j]) / (times[j + 1] - times[j])
    a, b = traj.fields[j].coeffs, traj.fields[j + 1].coeffs
    return SpectralField(traj.K, (1.0 - s) * a + s * b)


class _Stepper:
    def __init__(self, K: int, n_modes: int, scheme: str):
        self.K = K
        self.n = n_modes
        self.scheme = scheme
        self.basis = stokes_basis(K)
        self.ksq = np.asarray(ksquared(K))[..., K:]
        # weights turning sum(ksq |c|^2) over the half cube into the full sum
        self.wsum = np.where(np.arange(K + 1) == 0, 1.0, 2.0) * self.ksq
        # when the Galerkin space is a union of whole eigenspaces, P_n is a
        # wavenumber mask composed with the Leray projector
        lam = eigenvalue(n_modes)
        self.shells = count_below(lam + 1) == n_modes
        if self.shells:
            k1, k2, k3 = wavenumbers(K)
            self.k = (k1, k2, k3[..., K:])
            self.mask = ((self.ksq > 0) & (self.ksq <= lam)).astype(float)
            self.inv = np.divide(self.mask, self.ksq, out=np.zeros_like(self.ksq), where=self.ksq > 0)
        self._factors: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def project(self, c: np.ndarray) -> np.ndarray:
        if not self.shells:
            return self.basis.project_coeffs(c, self.n)
        k1, k2, k3 = self.k
        kc = (k1 * c[0] + k2 * c[1] + k3 * c[2]) * self.inv
        out = np.empty_like(c)
        out[0] = self.mask * c[0] - k1 * kc
        out[1] = self.mask * c[1] - k2 * kc
        out[2] = self.mask * c[2] - k3 * kc
        return out

    def nonlinear(self, c: np.ndarray) -> np.ndarray:
        return -self.project(advection_half(c))

    def rhs(self, c: np.ndarray) -> np.ndarray:
        return self.nonlinear(c) - self.ksq * c

    def factors(self, h: float):
        if h not in self._factors:
            self._factors[h] = (np.exp(-self.ksq * h), np.exp(-self.ksq * h / 2.0))
        return self._factors[h]

    def enstrophy(self, c: np.ndarray) -> float:
        return VOLUME * float(np.sum(self.wsum * (c.real**2 + c.imag**2)))

    def step(self, c: np.ndarray, h: float) -> np.ndarray:
        if self.scheme == "explicit_rk4":
            k1 = self.rhs(c)
            k2 = self.rhs(c + 0.5 * h * k1)
            k3 = self.rhs(c + 0.5 * h * k2)
            k4 = self.rhs(c + h * k3)
            out = c + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            E, E2 = self.factors(h)
            k1 = self.nonlinear(c)
            k2 = self.nonlinear(E2 * (c + 0.5 * h * k1))
            k3 = self.nonlinear(E2 * c + 0.5 * h * k2)
            k4 = self.nonlinear(E * c + h * E2 * k3)
            out = E * c + h / 6.0 * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
        # re-projection onto the Galerkin space also removes divergence drift
        return self.project(out)


def integrate(u0: SpectralField, T: float, config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate the Galerkin system from ``P_n u0`` up to time ``T``.

    The last step is shortened so the final stored time is exactly ``T``.
    Raises :class:`DivergenceError` when the enstrophy exceeds ``1e12``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    n = config.resolve_modes(u0.K)
    config.check_stability(n)
    stepper = _Stepper(u0.K, n, config.scheme)
    # the state is the k3 >= 0 half of the coefficient cube
    c = stepper.project(to_half(np.asarray(u0.coeffs)))
    times = [0.0]
    fields = [SpectralField(u0.K, from_half(c))]
    nsteps = max(1, math.ceil(T / config.dt - 1e-9))
    t = 0.0
    for i in range(1, nsteps + 1):
        h = config.dt if i < nsteps else T - (nsteps - 1) * config.dt
        c = stepper.step(c, h)
        t = T if i == nsteps else i * config.dt
        ens = stepper.enstrophy(c)
        if not math.isfinite(ens) or ens > BLOWUP_ENSTROPHY:
            raise DivergenceError(f"enstrophy {ens:g} exceeded blow-up guard at t={t:g}", t)
        if i % config.store_every == 0 or i == nsteps:
            times.append(t)
            fields.append(SpectralField(u0.K, from_half(c)))
    return Trajectory(np.array(times), fields, n, config.dt * config.store_every, config.scheme)


def energy_identity_defect(traj: Trajectory) -> float:
    """``|u(T)|^2 + 2 int_0^T |Du|^2 - |u(0)|^2`` with Simpson quadrature (zero for exact solutions)."""
    ns = traj.norm_series()
    return float(ns[-1, 0] + 2.0 * simpson(ns[:, 1], x=traj.times) - ns[0, 0])


def series_rows(traj: Trajectory, gevrey: bool = False) -> list[list[float]]:
    rows = []
    for t, u in zip(traj.times, traj.fields):
        row = [float(t), energy(u), enstrophy(u), h2(u)]
        if gevrey:
            row.append(gevrey_norm(u, float(t)))
        rows.append(row)
    return rows


def series_csv(traj: Trajectory, gevrey: bool = False) -> str:
    """CSV time series of the norms, optionally with the Gevrey norm at ``t``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_HEADER + (("gevrey",) if gevrey else ()))
    for row in series_rows(traj, gevrey):
        w.writerow([repr(x) for x in row])
    return buf.getvalue()
