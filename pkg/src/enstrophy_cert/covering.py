"""Finite coverings of H^2 balls by dyadic lattices in the Stokes basis.

The lattice of a :class:`LatticeSpec` is the set of fields
``sum_{j<=N} (a_j / 2^M) w_j`` with integer ``a_j`` and ``|Au| <= S``.
Every field of the H^2 ball lies within ``delta`` (V norm) of the lattice
when ``N`` and ``M`` are chosen by the ``"safe"`` rules below:

* tail: ``lambda_{N+1} >= 4 S^2 / delta^2`` so ``|D(v - P_N v)| <= delta/2``;
* grid: rounding each coordinate toward zero keeps the point in the ball and
  moves it by less than ``2^-M`` per coordinate, so the head error is below
  ``2^-M sqrt(sum_{j<=N} lambda_j)``; this is required to be at most
  ``(sqrt(3)/2) delta`` so that head and tail combine to at most ``delta``.

The ``"coordinate"`` rules (``lambda_{N+1} >= 2 S^2/delta`` and a per-coordinate
grid test ``2^-M < delta/2``) are kept for comparison and for small demonstrations.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from .basis import count_below, eigenvalue_list, eigenvalue_sum, required_radius, stokes_basis
from .constants import DEFAULT_LEDGER, ConstantsLedger
from .galerkin import Trajectory
from .spectral import SpectralField, gevrey_norm

RULES = ("safe", "coordinate")
DEFAULT_COUNT_CAP = 10_000_000
_EXACT_COUNT_BUDGET = 200_000
_SATURATE = 2**60


class InfeasibleDeltaError(ArithmeticError):
    pass


class CountCapError(RuntimeError):
    def __init__(self, count: float, cap: int):
        super().__init__(f"lattice has ~{count:.4g} points, above the cap of {cap}")
        self.count = count
        self.cap = cap


# ---------------------------------------------------------------------------
# lattice parameters


def choose_N(S: float, delta: float, rule: str = "safe") -> int:
    """Smallest ``N`` whose tail ``|D(v - P_N v)|`` is small enough on the ball."""
    if not (S > 0 and delta > 0):
        raise ValueError("S and delta must be positive")
    if rule == "safe":
        return count_below(4.0 * S * S / (delta * delta))
    if rule == "coordinate":
        return count_below(2.0 * S * S / delta)
    raise ValueError(f"unknown rule {rule!r}")


def choose_M(N: int, delta: float, rule: str = "safe") -> int:
    """Smallest dyadic level ``M >= 0`` meeting the grid criterion."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if rule == "coordinate":
        M = 0
        while 2.0**-M >= delta / 2.0:
            M += 1
        return M
    if rule != "safe":
        raise ValueError(f"unknown rule {rule!r}")
    if N <= 0:
        return 0
    spread = math.sqrt(eigenvalue_sum(N))
    M = 0
    while 2.0**-M * spread > 0.5 * math.sqrt(3.0) * delta:
        M += 1
    return M


@dataclass(frozen=True)
class LatticeSpec:
    N: int
    M: int
    S: float
    delta: float
    rule: str = "safe"

    @classmethod
    def for_ball(cls, S: float, delta: float, rule: str = "safe") -> "LatticeSpec":
        N = choose_N(S, delta, rule)
        return cls(N, choose_M(N, delta, rule), float(S), float(delta), rule)

    def eigenvalues(self) -> np.ndarray:
        return eigenvalue_list(self.N)

    def active(self) -> int:
        """Number of leading coordinates that can be non-zero (``lambda_j^2 <= budget``)."""
        return min(self.N, count_below(math.isqrt(self.budget()) + 1))

    def budget(self) -> int:
        """Largest integer ``sum lambda_j^2 a_j^2`` allowed in the ball."""
        # exact for dyadic S; the tiny slack absorbs binary rounding of S^2 4^M
        b = self.S * self.S * 4.0**self.M
        return int(math.floor(b * (1.0 + 1e-12)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeSpec":
        return cls(int(d["N"]), int(d["M"]), float(d["S"]), float(d["delta"]), d.get("rule", "safe"))


def _ellipsoid_volume(weights: Sequence[float], radius: float) -> float:
    # volume of {sum w_j x_j^2 <= r^2}
    n = len(weights)
    logv = n / 2 * math.log(math.pi) - gammaln(n / 2 + 1) + n * math.log(radius)
    logv -= 0.5 * sum(math.log(w) for w in weights)
    # clamp to a finite float so reports stay valid JSON
    return math.exp(min(logv, 700.0))


def lattice_count(spec: LatticeSpec, cap: int | None = None) -> tuple[int | float, bool]:
    """Number of lattice points and whether the value is exact.

    Counting is exact (dynamic programming over the squared-norm budget)
    when the budget is small.  Otherwise the result is an estimate: the
    ellipsoid volume, or the lower bound ``1 + 2 n`` from the points
    ``+-e_j`` when that already exceeds ``cap``.  With ``cap`` the exact
    count saturates at ``cap + 1``, and a saturated count is not exact.
    """
    n = spec.active()
    if n == 0:
        return 1, True
    B = spec.budget()
    limit = _SATURATE if cap is None else min(cap + 1, _SATURATE)
    if cap is not None and 2 * n + 1 > cap:
        return 2 * n + 1, False
    lam = eigenvalue_list(n)
    if B > _EXACT_COUNT_BUDGET:
        return max(_ellipsoid_volume([float(x) ** 2 for x in lam], math.sqrt(B)), 2.0 * n + 1), False
    counts = np.zeros(B + 1, dtype=np.int64)
    counts[0] = 1
    for l in lam:
        w = int(l) * int(l)
        new = counts.copy()
        a = 1
        while w * a * a <= B:
            s = w * a * a
            new[s:] += 2 * counts[: B + 1 - s]
            np.minimum(new, limit, out=new)
            a += 1
        counts = new
    total = min(sum(counts.tolist()), limit)
    return total, total < limit


def lattice_points(spec: LatticeSpec) -> Iterator[tuple[int, ...]]:
    """Integer coordinate vectors of the lattice in lexicographic order."""
    n = spec.active()
    lam2 = [int(x) ** 2 for x in eigenvalue_list(n)]
    pad = (0,) * (spec.N - n)
    B = spec.budget()

    def rec(j: int, left: int, prefix: tuple[int, ...]):
        if j == n:
            yield prefix + pad
            return
        amax = math.isqrt(left // lam2[j])
        for a in range(-amax, amax + 1):
            yield from rec(j + 1, left - lam2[j] * a * a, prefix + (a,))

    yield from rec(0, B, ())


def lattice_field(spec: LatticeSpec, a: Sequence[int], K: int) -> SpectralField:
    alpha = np.asarray(a, dtype=float) / 2.0**spec.M
    return stokes_basis(K).from_coordinates(alpha)


def enumerate_lattice(
    spec: LatticeSpec, K: int | None = None, cap: int = DEFAULT_COUNT_CAP
) -> tuple[Iterator[SpectralField], int]:
    """Lattice fields in deterministic order, plus their number.

    Raises :class:`CountCapError` when the lattice is larger than ``cap``.
    """
    count, exact = lattice_count(spec, cap)
    if count > cap:
        raise CountCapError(count, cap)
    K = required_radius(spec.N) if K is None else K
    if spec.N and required_radius(spec.N) > K:
        raise ValueError(f"lattice needs K >= {required_radius(spec.N)}, got {K}")
    return (lattice_field(spec, a, K) for a in lattice_points(spec)), int(count)


# ---------------------------------------------------------------------------
# robustness radius


@dataclass(frozen=True)
class UniformBounds:
    D_S: float
    E_S: float
    provenance: str = "empirical"
    safety_factor: float = 2.0

    def __post_init__(self):
        if self.D_S < 0 or self.E_S < 0:
            raise ValueError("bounds must be non-negative")
        if self.provenance not in ("empirical", "user_supplied"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.safety_factor < 1:
            raise ValueError("safety_factor must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "UniformBounds":
        return cls(float(d["D_S"]), float(d["E_S"]), d["provenance"], float(d["safety_factor"]))


def uniform_integral_bound(bounds: UniformBounds, Tstar: float) -> float:
    """``I_S = T* D_S^4 + (T* D_S^2)^{1/2} E_S``."""
    return Tstar * bounds.D_S**4 + math.sqrt(Tstar * bounds.D_S**2) * bounds.E_S


def delta_of_S(bounds: UniformBounds, Tstar: float, ledger: ConstantsLedger = DEFAULT_LEDGER) -> float:
    """Uniform lower bound on the robustness radius over the ball."""
    if not Tstar > 0:
        raise ValueError("T* must be positive")
    c = ledger.c
    delta = c * Tstar**-0.25 * math.exp(-c * uniform_integral_bound(bounds, Tstar))
    if delta == 0.0:
        raise InfeasibleDeltaError(
            f"robustness radius underflows (c * I_S = {c * uniform_integral_bound(bounds, Tstar):.4g})"
        )
    return delta


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def empirical_bounds(
    spec: LatticeSpec | None, sample_trajectories: Sequence[Trajectory], safety_factor: float = 2.0
) -> UniformBounds:
    """Sup of ``|Du|`` and of ``int |Au|^2`` over sample trajectories, inflated.

    These stand in for bounds whose existence is only known abstractly;
    the result is stamped ``provenance="empirical"``.
    """
    if not sample_trajectories:
        raise ValueError("empirical bounds need at least one trajectory")
    D = 0.0
    E = 0.0
    for tr in sample_trajectories:
        ns = tr.norm_series()
        D = max(D, math.sqrt(float(ns[:, 1].max())))
        E = max(E, _trapezoid(ns[:, 2], tr.times))
    return UniformBounds(safety_factor * D, safety_factor * E, "empirical", float(safety_factor))


# ---------------------------------------------------------------------------
# Gevrey reduction from a V ball to an H^2 ball


def gevrey_reduction(R: float, ledger: ConstantsLedger = DEFAULT_LEDGER) -> tuple[float, float]:
    """Smoothing time ``tau`` and H^2 radius ``S`` reached from ``|Du0| <= R``."""
    if R < 0:
        raise ValueError("R must be non-negative")
    q = 1.0 + R * R
    return 1.0 / (ledger.K1 * q * q), ledger.K1 * q**2.5


def gevrey_bound_check(traj: Trajectory, tau: float, rtol: float = 1e-12) -> bool:
    """Check ``|A^{1/2} e^{tA^{1/2}} u(t)|^2 <= 2 (1 + |Du0|^2)`` for stored ``t <= 2 tau``."""
    if traj.T < 2.0 * tau * (1.0 - 1e-12):
        raise ValueError(f"trajectory ends at {traj.T}, before 2*tau = {2 * tau}")
    from .spectral import enstrophy

    limit = 2.0 * (1.0 + enstrophy(traj.fields[0]))
    for t, u in zip(traj.times, traj.fields):
        if t > 2.0 * tau:
            break
        if gevrey_norm(u, float(t)) > limit * (1.0 + rtol):
            return False
    return True


# ---------------------------------------------------------------------------
# physical units


def velocity_scale(L: float, nu: float) -> float:
    """Factor ``L / (2 pi nu)`` multiplying velocities when non-dimensionalizing."""
    if not (L > 0 and nu > 0):
        raise ValueError("L and nu must be positive")
    return L / (2.0 * math.pi * nu)


def to_nondimensional(u: SpectralField, L: float, nu: float) -> SpectralField:
    """Coefficients of a field on [0, L]^3 with viscosity ``nu`` in unit variables."""
    return SpectralField(u.K, np.asarray(u.coeffs) * velocity_scale(L, nu))


def to_physical(u: SpectralField, L: float, nu: float) -> SpectralField:
    return SpectralField(u.K, np.asarray(u.coeffs) / velocity_scale(L, nu))


def time_scale(L: float, nu: float) -> float:
    """Factor ``4 pi^2 nu / L^2`` multiplying times when non-dimensionalizing."""
    return 4.0 * math.pi**2 * nu / L**2


def brute_force_nearest(spec: LatticeSpec, alpha: np.ndarray) -> tuple[np.ndarray, float]:
    """Nearest lattice point to coordinates ``alpha`` among the floor/ceil candidates.

    Every coordinate is rounded down or up (``2^N`` candidates); candidates
    outside the ball are dropped.  Rounding toward zero is one of the
    candidates and always lies in the ball, so the search never comes back
    empty.  Returns the integer vector and its V distance from ``alpha``
    (the tail beyond ``N`` is not included).
    """
    N = spec.N
    if N == 0:
        return np.zeros(0, dtype=int), 0.0
    if N > 20:
        raise ValueError("brute-force search is limited to N <= 20")
    lam = spec.eigenvalues().astype(float)
    scale = 2.0**spec.M
    lo = np.floor(np.asarray(alpha) * scale)
    bits = (np.arange(2**N)[:, None] >> np.arange(N)[None, :]) & 1
    cand = lo[None, :] + bits
    inside = np.sum(lam**2 * cand**2, axis=1) <= spec.budget()
    cand = cand[inside]
    d2 = np.sum(lam * (alpha[None, :] - cand / scale) ** 2, axis=1)
    j = int(np.argmin(d2))
    return cand[j].astype(int), float(math.sqrt(d2[j]))
