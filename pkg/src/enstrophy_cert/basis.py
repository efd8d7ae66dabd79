"""Real orthonormal Stokes eigenbasis on the 2*pi-periodic torus.

Every wavevector ``k`` in the canonical half-space (first non-zero component
positive) carries four real eigenfunctions with eigenvalue ``|k|^2``::

    w = sqrt(2) (2 pi)^{-3/2} cos(k.x) e_p     and     ... sin(k.x) e_p

for two real unit polarizations ``e_1, e_2`` orthogonal to ``k``.  Ordinals
are assigned by increasing eigenvalue, then lexicographic wavevector, then
polarization, then phase (cos before sin).  The enumeration does not depend
on any truncation radius, so an ordinal names the same function everywhere.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .spectral import VOLUME, SpectralField, canonical_mask

PHASES = ("cos", "sin")
# alpha_cos = NORM * Re(c_k . e_p), alpha_sin = -NORM * Im(c_k . e_p)
NORM = math.sqrt(2.0 * VOLUME)


@dataclass(frozen=True)
class StokesBasisIndex:
    ordinal: int
    wavevector: tuple[int, int, int]
    polarization: int
    phase: str

    @property
    def eigenvalue(self) -> int:
        return sum(c * c for c in self.wavevector)


def is_canonical(k) -> bool:
    for c in k:
        if c != 0:
            return c > 0
    return False


def polarization_vectors(k) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal real pair perpendicular to ``k``.

    The seed axis is the coordinate axis least aligned with ``k`` (lowest
    index on ties); ``e1`` is its Gram-Schmidt remainder and
    ``e2 = khat x e1``.
    """
    k = np.asarray(k, dtype=float)
    khat = k / np.linalg.norm(k)
    axis = int(np.argmin(np.abs(k)))
    a = np.zeros(3)
    a[axis] = 1.0
    e1 = a - np.dot(a, khat) * khat
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    return e1, e2


@functools.lru_cache(maxsize=None)
def canonical_wavevectors(max_lambda: int) -> tuple[tuple[int, int, int], ...]:
    """Canonical wavevectors with ``|k|^2 <= max_lambda`` in basis order."""
    r = math.isqrt(max_lambda)
    rng = range(-r, r + 1)
    ks = [
        (a, b, c)
        for a in rng
        for b in rng
        for c in rng
        if 0 < a * a + b * b + c * c <= max_lambda and is_canonical((a, b, c))
    ]
    ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2 + k[2] ** 2, k))
    return tuple(ks)


def enumerate_basis(max_lambda: int) -> list[StokesBasisIndex]:
    """All basis elements with eigenvalue at most ``max_lambda``."""
    out = []
    for i, k in enumerate(canonical_wavevectors(max_lambda)):
        for p in (1, 2):
            for ph in PHASES:
                out.append(StokesBasisIndex(len(out) + 1, k, p, ph))
    return out


_EXACT_SHELL_LIMIT = 10**8


def _lattice_ball(top: int) -> tuple[int, int]:
    """Number of non-zero ``k`` with ``|k|^2 <= top`` and the sum of their ``|k|^2``."""
    if top < 1:
        return 0, 0
    if top > _EXACT_SHELL_LIMIT:
        # continuum estimate; only reached for lattices far beyond any count cap
        return int(4.0 / 3.0 * math.pi * top**1.5), int(0.8 * math.pi * top**2.5)
    r = math.isqrt(top)
    b = np.arange(-r, r + 1, dtype=np.int64)
    count = 0
    total = 0
    for a in range(-r, r + 1):
        rem = top - a * a - b * b
        ok = rem >= 0
        q = b[ok] * b[ok] + a * a
        m = np.floor(np.sqrt(rem[ok])).astype(np.int64)
        m -= (m * m > rem[ok]).astype(np.int64)
        m += ((m + 1) * (m + 1) <= rem[ok]).astype(np.int64)
        count += int(np.sum(2 * m + 1))
        total += int(np.sum((2 * m + 1) * q + m * (m + 1) * (2 * m + 1) // 3))
    return count - 1, total


def count_below(lam: float) -> int:
    """Number of basis elements with eigenvalue strictly below ``lam``."""
    if lam <= 1:
        return 0
    top = math.ceil(lam) - 1
    # each canonical wavevector (half of the non-zero ones) carries four elements
    return 2 * _lattice_ball(top)[0]


def eigenvalue_sum(n: int) -> int:
    """``lambda_1 + ... + lambda_n``."""
    if n <= 0:
        return 0
    lam = eigenvalue(n)
    below = count_below(lam)
    return 2 * _lattice_ball(lam - 1)[1] + (n - below) * lam


def eigenvalue(j: int) -> int:
    """Eigenvalue of the ``j``-th basis element (1-based)."""
    if j < 1:
        raise ValueError("ordinals start at 1")
    lo, hi = 1, 2
    while count_below(hi + 1) < j:
        lo, hi = hi, 2 * hi
    # smallest lam in [lo, hi] with count_below(lam + 1) >= j
    while lo < hi:
        mid = (lo + hi) // 2
        if count_below(mid + 1) >= j:
            hi = mid
        else:
            lo = mid + 1
    return lo


def eigenvalue_list(n: int) -> np.ndarray:
    """``lambda_1 .. lambda_n`` as an integer array."""
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    r = math.isqrt(eigenvalue(n))
    a = np.arange(-r, r + 1, dtype=np.int64)
    q = (a[:, None, None] ** 2 + a[None, :, None] ** 2 + a[None, None, :] ** 2).ravel()
    q = np.sort(q[q > 0])
    # every non-zero k contributes two elements (four per canonical k)
    return np.repeat(q, 2)[:n]


def basis_element(j: int) -> StokesBasisIndex:
    lam = eigenvalue(j)
    return enumerate_basis(lam)[j - 1]


def smallest_n_with_next_eigenvalue_at_least(threshold: float) -> int:
    """Smallest ``N >= 0`` such that ``lambda_{N+1} >= threshold``."""
    return count_below(threshold)


class StokesBasis:
    """Basis machinery restricted to the coefficient cube of radius ``K``.

    Holds per-mode polarization vectors and global ordinals for every mode
    in the cube; ``-k`` shares the vectors and ordinals of ``k``.
    """

    def __init__(self, K: int):
        self.K = K
        n = 2 * K + 1
        self.pol = np.zeros((2, 3, n, n, n))
        self.ordinal = np.zeros((2, 2, n, n, n), dtype=np.int64)
        order = {k: i for i, k in enumerate(canonical_wavevectors(3 * K * K))} if K else {}
        canon = canonical_mask(K)
        self.elements: list[StokesBasisIndex] = []
        for idx in zip(*np.nonzero(canon)):
            k = tuple(int(i) - K for i in idx)
            neg = tuple(2 * K - i for i in idx)
            e1, e2 = polarization_vectors(k)
            base = 4 * order[k]
            for p, e in enumerate((e1, e2)):
                for at in (idx, neg):
                    self.pol[(p, slice(None)) + at] = e
                for ph in range(2):
                    o = base + 2 * p + ph + 1
                    for at in (idx, neg):
                        self.ordinal[(p, ph) + at] = o
                    self.elements.append(StokesBasisIndex(o, k, p + 1, PHASES[ph]))
        self.elements.sort(key=lambda b: b.ordinal)
        # largest n such that every ordinal <= n lives inside the cube
        present = sorted(b.ordinal for b in self.elements)
        complete = 0
        for o in present:
            if o != complete + 1:
                break
            complete = o
        self.complete_n = complete
        self._canon_idx = tuple(np.nonzero(canon))

    def n_within_radius(self, radius: float) -> int:
        """Number of basis elements with ``|k| <= radius`` (must fit the cube)."""
        n = count_below(math.floor(radius**2) + 1)
        if n > self.complete_n:
            raise ValueError(f"radius {radius} exceeds the complete range of K={self.K}")
        return n

    def _dots(self, coeffs: np.ndarray) -> np.ndarray:
        # z[p] = c_k . e_p at every cube mode
        return np.einsum("pi...,i...->p...", self.pol, coeffs)

    def project_coeffs(self, coeffs: np.ndarray, n: int) -> np.ndarray:
        """``P_n`` on a full cube, or on its ``k3 >= 0`` half."""
        half = coeffs.shape[-1] == self.K + 1
        pol = self.pol[..., self.K :] if half else self.pol
        ordinal = self.ordinal[..., self.K :] if half else self.ordinal
        z = np.einsum("pi...,i...->p...", pol, coeffs)
        # at -k the stored value is conj(z), so Re/Im selection is consistent
        w = np.where(ordinal[:, 0] <= n, z.real, 0.0) + 1j * np.where(ordinal[:, 1] <= n, z.imag, 0.0)
        return np.einsum("p...,pi...->i...", w, pol)

    def project(self, u: SpectralField, n: int) -> SpectralField:
        if u.K != self.K:
            raise ValueError(f"basis built for K={self.K}, field has K={u.K}")
        if n <= 0:
            return SpectralField(u.K, np.zeros_like(u.coeffs))
        return SpectralField(u.K, self.project_coeffs(u.coeffs, n))

    def coordinates(self, u: SpectralField, n: int) -> np.ndarray:
        """Coefficients ``alpha_1 .. alpha_n`` of ``u`` in the real basis."""
        if n > self.complete_n:
            raise ValueError(f"n={n} exceeds the {self.complete_n} basis elements complete at K={self.K}")
        z = self._dots(u.coeffs)
        alpha = np.zeros(n)
        ci = self._canon_idx
        for p in range(2):
            for ph in range(2):
                o = self.ordinal[(p, ph) + ci]
                vals = NORM * (z[(p,) + ci].real if ph == 0 else -z[(p,) + ci].imag)
                sel = o <= n
                alpha[o[sel] - 1] = vals[sel]
        return alpha

    def from_coordinates(self, alpha) -> SpectralField:
        alpha = np.asarray(alpha, dtype=float)
        n = alpha.size
        if n > self.complete_n:
            raise ValueError(f"{n} coordinates exceed the {self.complete_n} basis elements complete at K={self.K}")
        full = np.zeros(self.complete_n + 1)
        full[1 : n + 1] = alpha
        o = np.where(self.ordinal <= n, self.ordinal, 0)
        a_cos = full[o[:, 0]]
        a_sin = full[o[:, 1]]
        z = (a_cos - 1j * a_sin) / NORM
        # z above is c_k . e_p at canonical k; at -k it is the conjugate
        neg = ~canonical_mask(self.K)
        z = np.where(neg, np.conj(z), z)
        z[:, self.K, self.K, self.K] = 0.0
        return SpectralField(self.K, np.einsum("p...,pi...->i...", z, self.pol))

    def element_field(self, j: int) -> SpectralField:
        alpha = np.zeros(j)
        alpha[j - 1] = 1.0
        return self.from_coordinates(alpha)


@functools.lru_cache(maxsize=32)
def stokes_basis(K: int) -> StokesBasis:
    return StokesBasis(K)


def project_n(u: SpectralField, n: int) -> SpectralField:
    """Orthogonal projection onto the first ``n`` Stokes eigenfunctions."""
    return stokes_basis(u.K).project(u, n)


def required_radius(n: int) -> int:
    """Smallest cube radius containing basis elements ``1..n``."""
    if n <= 0:
        return 0
    lam = eigenvalue(n)
    ks = canonical_wavevectors(lam)[: (n + 3) // 4]
    return max(max(abs(c) for c in k) for k in ks)
