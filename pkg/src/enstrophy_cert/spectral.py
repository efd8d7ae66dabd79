"""Divergence-free periodic velocity fields stored as truncated Fourier series.

A field is ``u(x) = sum_k c_k exp(i k.x)`` on the torus [0, 2*pi]^3 with
``k`` ranging over the integer cube ``max|k_i| <= K``.  Coefficients live in a
dense complex array of shape ``(3, 2K+1, 2K+1, 2K+1)``; array index ``i``
along a spatial axis corresponds to wavenumber ``i - K``.

Norms carry the volume factor ``(2*pi)^3`` so they equal the L^2 integrals
over the box.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import scipy.fft

VOLUME = (2.0 * math.pi) ** 3
DIV_TOL = 1e-13
DIRECT_CONVOLUTION_MAX_K = 8
GEVREY_MAX_EXPONENT = 700.0
FIELD_FORMAT = "enstrophy-cert-field"
FIELD_FORMAT_VERSION = 1


class FieldError(ValueError):
    """Raised for coefficient arrays that cannot represent a valid field."""


class CostGuardError(RuntimeError):
    pass


class GevreyOverflowError(OverflowError):
    pass


@functools.lru_cache(maxsize=None)
def wavenumbers(K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Broadcastable integer wavenumber grids for the cube of radius ``K``."""
    k = np.arange(-K, K + 1)
    k1 = k[:, None, None]
    k2 = k[None, :, None]
    k3 = k[None, None, :]
    for a in (k1, k2, k3):
        a.setflags(write=False)
    return k1, k2, k3


@functools.lru_cache(maxsize=None)
def ksquared(K: int) -> np.ndarray:
    k1, k2, k3 = wavenumbers(K)
    out = (k1**2 + k2**2 + k3**2).astype(float)
    out.setflags(write=False)
    return out


def _flip(a: np.ndarray) -> np.ndarray:
    """Map the coefficient at ``k`` to position ``-k``."""
    return a[..., ::-1, ::-1, ::-1]


def _check_shape(coeffs: np.ndarray) -> int:
    if coeffs.ndim != 4 or coeffs.shape[0] != 3:
        raise FieldError(f"expected coefficient array of shape (3, n, n, n), got {coeffs.shape}")
    n = coeffs.shape[1]
    if coeffs.shape[1:] != (n, n, n) or n % 2 == 0:
        raise FieldError(f"spatial axes must be equal and odd, got {coeffs.shape[1:]}")
    return (n - 1) // 2


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable divergence-free, mean-zero, real velocity field.

    Construct through :func:`leray_project`, :func:`zeros` or the helpers in
    this module; the raw constructor only checks the array shape.
    """

    K: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex, copy=True)
        K = _check_shape(coeffs)
        if K != self.K:
            raise FieldError(f"truncation radius {self.K} does not match array shape {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.K, self.coeffs + _same_K(self, other).coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.K, self.coeffs - _same_K(self, other).coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.K, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def coefficient(self, k) -> np.ndarray:
        i = tuple(int(x) + self.K for x in k)
        if any(not 0 <= j <= 2 * self.K for j in i):
            return np.zeros(3, dtype=complex)
        return self.coeffs[(slice(None),) + i].copy()

    def divergence_defect(self) -> float:
        k1, k2, k3 = wavenumbers(self.K)
        div = k1 * self.coeffs[0] + k2 * self.coeffs[1] + k3 * self.coeffs[2]
        return float(np.max(np.abs(div)))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(_flip(self.coeffs)))))

    def check(self, tol: float = DIV_TOL) -> None:
        """Raise :class:`FieldError` unless all field invariants hold."""
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        if np.any(self.coeffs[:, self.K, self.K, self.K] != 0):
            raise FieldError("mean mode is non-zero")
        if self.symmetry_defect() > tol * scale:
            raise FieldError("coefficients are not conjugate symmetric")
        if self.divergence_defect() > tol * scale * max(1, self.K):
            raise FieldError("field is not divergence free")

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)


def _same_K(a: SpectralField, b: SpectralField) -> SpectralField:
    if a.K != b.K:
        raise FieldError(f"truncation mismatch: {a.K} vs {b.K}")
    return b


def zeros(K: int) -> SpectralField:
    n = 2 * K + 1
    return SpectralField(K, np.zeros((3, n, n, n), dtype=complex))


def _raw_array(raw, K: int | None) -> np.ndarray:
    if isinstance(raw, SpectralField):
        return np.array(raw.coeffs)
    if isinstance(raw, Mapping):
        if K is None:
            K = max((max(abs(int(c)) for c in k) for k in raw), default=0)
        n = 2 * K + 1
        arr = np.zeros((3, n, n, n), dtype=complex)
        for k, v in raw.items():
            idx = tuple(int(c) + K for c in k)
            if any(not 0 <= i < n for i in idx):
                raise FieldError(f"wavevector {k} outside truncation radius {K}")
            arr[(slice(None),) + idx] = np.asarray(v, dtype=complex)
        return arr
    arr = np.array(raw, dtype=complex)
    _check_shape(arr)
    return arr


def leray_project(raw, K: int | None = None, *, tol: float = 1e-12) -> SpectralField:
    """Remove the gradient part of every Fourier coefficient.

    ``raw`` is a coefficient array of shape ``(3, n, n, n)``, a mapping from
    integer 3-tuples to complex 3-vectors, or a :class:`SpectralField`.
    Each coefficient is replaced by ``c_k - k (k.c_k) / |k|^2``.
    """
    arr = _raw_array(raw, K)
    K = _check_shape(arr)
    scale = max(1.0, float(np.max(np.abs(arr))))
    if np.max(np.abs(arr - np.conj(_flip(arr)))) > tol * scale:
        raise FieldError("raw coefficients violate conjugate symmetry")
    if np.max(np.abs(arr[:, K, K, K])) > tol * scale:
        raise FieldError("raw coefficients have a non-zero mean mode")
    k1, k2, k3 = wavenumbers(K)
    ksq = ksquared(K).copy()
    ksq[K, K, K] = 1.0
    kdotc = (k1 * arr[0] + k2 * arr[1] + k3 * arr[2]) / ksq
    out = np.empty_like(arr)
    out[0] = arr[0] - k1 * kdotc
    out[1] = arr[1] - k2 * kdotc
    out[2] = arr[2] - k3 * kdotc
    out[:, K, K, K] = 0.0
    # symmetrize away round-off so the stored field is exactly real
    out = 0.5 * (out + np.conj(_flip(out)))
    return SpectralField(K, out)


def resize(u: SpectralField, K: int) -> SpectralField:
    """Zero-pad or truncate ``u`` to the cube of radius ``K``."""
    if K == u.K:
        return u
    n = 2 * K + 1
    out = np.zeros((3, n, n, n), dtype=complex)
    m = min(K, u.K)
    src = slice(u.K - m, u.K + m + 1)
    dst = slice(K - m, K + m + 1)
    out[:, dst, dst, dst] = u.coeffs[:, src, src, src]
    return SpectralField(K, out)


def inner(u: SpectralField, v: SpectralField) -> float:
    """L^2 inner product over the box."""
    _same_K(u, v)
    return VOLUME * float(np.real(np.vdot(v.coeffs, u.coeffs)))


def energy(u: SpectralField) -> float:
    return VOLUME * float(np.sum(np.abs(u.coeffs) ** 2))


def enstrophy(u: SpectralField) -> float:
    return VOLUME * float(np.sum(ksquared(u.K) * np.abs(u.coeffs) ** 2))


def h2(u: SpectralField) -> float:
    return VOLUME * float(np.sum(ksquared(u.K) ** 2 * np.abs(u.coeffs) ** 2))


def norms(u: SpectralField, L: float = 2.0 * math.pi) -> tuple[float, float, float]:
    """Return ``(|u|^2, |Du|^2, |Au|^2)``.

    For ``L != 2*pi`` the coefficients are read as a field on [0, L]^3 with
    wavevectors ``2*pi*k/L``.
    """
    p = np.abs(u.coeffs) ** 2
    ksq = ksquared(u.K)
    scale = (2.0 * math.pi / L) ** 2
    e0 = float(np.sum(p))
    e1 = float(np.sum(ksq * p)) * scale
    e2 = float(np.sum(ksq**2 * p)) * scale**2
    vol = L**3
    return vol * e0, vol * e1, vol * e2


def gevrey_norm(u: SpectralField, t: float) -> float:
    """``|A^{1/2} exp(t A^{1/2}) u|^2``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    p = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    active = p > 0
    if not np.any(active):
        return 0.0
    ksq = ksquared(u.K)
    kabs = np.sqrt(ksq)
    if 2.0 * t * float(np.max(kabs[active])) > GEVREY_MAX_EXPONENT:
        raise GevreyOverflowError(
            f"Gevrey weight exp(2 t |k|) out of range at t={t}, K={u.K}"
        )
    return VOLUME * float(np.sum(ksq * np.exp(2.0 * t * kabs) * p))


# ---------------------------------------------------------------------------
# nonlinear term


@functools.lru_cache(maxsize=None)
def grid_size(K: int, out_K: int) -> int:
    # products of two radius-K fields reach 2K; aliases land outside out_K when
    # g >= 2K + out_K + 1
    return scipy.fft.next_fast_len(2 * K + out_K + 1, real=True)


def to_half(coeffs: np.ndarray) -> np.ndarray:
    """The ``k3 >= 0`` half of a full coefficient cube (a view)."""
    K = (coeffs.shape[-1] - 1) // 2
    return coeffs[..., K:]


def from_half(half: np.ndarray) -> np.ndarray:
    """Rebuild the full cube from its ``k3 >= 0`` half by conjugate symmetry."""
    K = half.shape[-1] - 1
    n = 2 * K + 1
    full = np.empty(half.shape[:-3] + (n, n, n), dtype=complex)
    full[..., K:] = half
    full[..., :K] = np.conj(half[..., ::-1, ::-1, :0:-1])
    return full


def _to_grid(half: np.ndarray, g: int) -> np.ndarray:
    """Physical values of half-spectrum coefficients on a ``g^3`` grid.

    The first two passes only touch rows that hold non-zero coefficients.
    """
    K = half.shape[-1] - 1
    lead = half.shape[:-3]
    a = np.zeros(lead + (g, 2 * K + 1, K + 1), dtype=complex)
    a[..., : K + 1, :, :] = half[..., K:, :, :]
    a[..., g - K :, :, :] = half[..., :K, :, :]
    a = scipy.fft.ifft(a, axis=-3, norm="forward")
    b = np.zeros(lead + (g, g, g // 2 + 1), dtype=complex)
    b[..., : K + 1, : K + 1] = a[..., K:, :]
    b[..., g - K :, : K + 1] = a[..., :K, :]
    b[..., : K + 1] = scipy.fft.ifft(b[..., : K + 1], axis=-2, norm="forward")
    return scipy.fft.irfft(b, n=g, axis=-1, norm="forward")


def _from_grid(values: np.ndarray, K: int) -> np.ndarray:
    """Half-spectrum coefficients of radius ``K`` from grid values.

    Transforms axis by axis and drops unneeded wavenumbers between passes.
    """
    g = values.shape[-1]
    a = scipy.fft.rfft(values, axis=-1, norm="forward")[..., : K + 1]
    a = scipy.fft.fft(a, axis=-2, norm="forward")
    a = np.concatenate([a[..., g - K :, :], a[..., : K + 1, :]], axis=-2)
    a = scipy.fft.fft(a, axis=-3, norm="forward")
    return np.concatenate([a[..., g - K :, :, :], a[..., : K + 1, :, :]], axis=-3)


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_PAIR_INDEX = {(i, j): n for n, (i, j) in enumerate(_PAIRS)}
_PAIR_INDEX.update({(j, i): n for (i, j), n in list(_PAIR_INDEX.items())})


def advection_half(half: np.ndarray, out_K: int | None = None) -> np.ndarray:
    """Dealiased ``(u.grad)u`` on half-spectrum arrays (``k3 >= 0``).

    ``u`` must be divergence free; the product is evaluated as ``div(u u)``
    on a grid large enough that no aliased wavenumber falls inside the
    output cube of radius ``out_K``.
    """
    K = half.shape[-1] - 1
    out_K = K if out_K is None else out_K
    g = grid_size(K, out_K)
    u = _to_grid(half, g)
    prod = np.empty((6, g, g, g))
    for n, (i, j) in enumerate(_PAIRS):
        np.multiply(u[i], u[j], out=prod[n])
    uu = _from_grid(prod, out_K)
    ik = _half_gradient(out_K)
    out = np.empty((3,) + uu.shape[1:], dtype=complex)
    for i in range(3):
        out[i] = ik[0] * uu[_PAIR_INDEX[i, 0]] + ik[1] * uu[_PAIR_INDEX[i, 1]] + ik[2] * uu[_PAIR_INDEX[i, 2]]
    return out


@functools.lru_cache(maxsize=None)
def _half_gradient(K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k1, k2, k3 = wavenumbers(K)
    return 1j * k1, 1j * k2, 1j * k3[..., K:]


def advection_pseudospectral(coeffs: np.ndarray, K: int, out_K: int | None = None) -> np.ndarray:
    """Full-cube wrapper of :func:`advection_half`."""
    return from_half(advection_half(to_half(coeffs), out_K))


def advection_direct(coeffs: np.ndarray, K: int, out_K: int | None = None) -> np.ndarray:
    """Exact convolution sum ``sum_{p+q=k} (c_p . i q) c_q`` for ``|k|_inf <= out_K``."""
    out_K = K if out_K is None else out_K
    n = 2 * K + 1
    no = 2 * out_K + 1
    out = np.zeros((3, no, no, no), dtype=complex)
    k1, k2, k3 = wavenumbers(K)
    grad = [1j * k1, 1j * k2, 1j * k3]
    for p in zip(*np.nonzero(np.any(coeffs != 0, axis=0))):
        cp = coeffs[(slice(None),) + p]
        s = cp[0] * grad[0] + cp[1] * grad[1] + cp[2] * grad[2]
        contrib = s * coeffs
        # q index j maps to k index j + (p - K) + (out_K - K) ... per axis
        src, dst = [], []
        for axis in range(3):
            shift = p[axis] - K + out_K - K
            lo = max(0, -shift)
            hi = min(n, no - shift)
            if lo >= hi:
                break
            src.append(slice(lo, hi))
            dst.append(slice(lo + shift, hi + shift))
        else:
            out[(slice(None),) + tuple(dst)] += contrib[(slice(None),) + tuple(src)]
    return out


def nonlinear_term(
    u: SpectralField, mode: str = "pseudospectral", out_K: int | None = None
) -> SpectralField:
    """``B(u, u) = P((u.grad)u)`` truncated to the cube of radius ``out_K``.

    ``out_K = 2K`` keeps every mode the product can reach, so the result is
    then exact.  ``mode="direct_convolution"`` evaluates the convolution sum
    term by term and is limited to ``K <= 8``.
    """
    out_K = u.K if out_K is None else out_K
    if mode == "pseudospectral":
        adv = advection_pseudospectral(u.coeffs, u.K, out_K)
    elif mode == "direct_convolution":
        if u.K > DIRECT_CONVOLUTION_MAX_K:
            raise CostGuardError(
                f"direct convolution is limited to K <= {DIRECT_CONVOLUTION_MAX_K}, got K={u.K}"
            )
        adv = advection_direct(u.coeffs, u.K, out_K)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return leray_project(adv, tol=1e-8)


# ---------------------------------------------------------------------------
# construction helpers


def shear_mode(K: int = 1, amplitude: float = 1.0) -> SpectralField:
    """The field ``(amplitude * sin x3, 0, 0)``."""
    if K < 1:
        raise ValueError("shear mode needs K >= 1")
    n = 2 * K + 1
    c = np.zeros((3, n, n, n), dtype=complex)
    c[0, K, K, K + 1] = amplitude / 2j
    c[0, K, K, K - 1] = -amplitude / 2j
    return SpectralField(K, c)


def random_field(
    K: int,
    rng: np.random.Generator | int | None = None,
    *,
    slope: float = 2.0,
    target_enstrophy: float | None = None,
    radius: float | None = None,
) -> SpectralField:
    """Random divergence-free field with amplitudes decaying like ``|k|^-slope``.

    Modes outside the ball ``|k| <= radius`` (default ``K``) are left empty.
    If ``target_enstrophy`` is given the field is rescaled to that value.
    """
    rng = np.random.default_rng(rng)
    n = 2 * K + 1
    raw = rng.standard_normal((3, n, n, n)) + 1j * rng.standard_normal((3, n, n, n))
    ksq = ksquared(K).copy()
    radius = K if radius is None else radius
    mask = (ksq > 0) & (ksq <= radius**2)
    ksq[K, K, K] = 1.0
    raw = raw * np.where(mask, ksq ** (-slope / 2.0), 0.0)
    raw = 0.5 * (raw + np.conj(_flip(raw)))
    u = leray_project(raw)
    if target_enstrophy is not None:
        cur = enstrophy(u)
        if cur > 0:
            u = u * math.sqrt(target_enstrophy / cur)
    return u


# ---------------------------------------------------------------------------
# serialization


def canonical_mask(K: int) -> np.ndarray:
    """Boolean mask of the half-space whose first non-zero component is positive."""
    k1, k2, k3 = wavenumbers(K)
    return (k1 > 0) | ((k1 == 0) & (k2 > 0)) | ((k1 == 0) & (k2 == 0) & (k3 > 0))


def dumps_field(u: SpectralField) -> str:
    """Text record of the canonical half-space coefficients.

    Layout::

        enstrophy-cert-field 1
        K <K>
        <k1> <k2> <k3> <re u1> <im u1> <re u2> <im u2> <re u3> <im u3>
        ...

    Only non-zero coefficients are listed; the others follow from
    conjugate symmetry.
    """
    lines = [f"{FIELD_FORMAT} {FIELD_FORMAT_VERSION}", f"K {u.K}"]
    mask = canonical_mask(u.K) & np.any(u.coeffs != 0, axis=0)
    for idx in zip(*np.nonzero(mask)):
        k = [i - u.K for i in idx]
        c = u.coeffs[(slice(None),) + idx]
        vals = []
        for z in c:
            vals += [repr(float(z.real)), repr(float(z.imag))]
        lines.append(" ".join(str(x) for x in k) + " " + " ".join(vals))
    return "\n".join(lines) + "\n"


def loads_field(text: str) -> SpectralField:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        tag, version = lines[0].split()
        if tag != FIELD_FORMAT or int(version) != FIELD_FORMAT_VERSION:
            raise FieldError(f"unsupported field format header {lines[0]!r}")
        key, K = lines[1].split()
        if key != "K":
            raise FieldError("second line must be 'K <radius>'")
        K = int(K)
        if K < 0:
            raise FieldError("negative truncation radius")
        n = 2 * K + 1
        arr = np.zeros((3, n, n, n), dtype=complex)
        canon = canonical_mask(K)
        for ln in lines[2:]:
            parts = ln.split()
            if len(parts) != 9:
                raise FieldError(f"malformed coefficient line {ln!r}")
            k = tuple(int(x) for x in parts[:3])
            idx = tuple(x + K for x in k)
            if any(not 0 <= i < n for i in idx) or not canon[idx]:
                raise FieldError(f"wavevector {k} is not a canonical mode within K={K}")
            v = [float(x) for x in parts[3:]]
            c = np.array([complex(v[0], v[1]), complex(v[2], v[3]), complex(v[4], v[5])])
            arr[(slice(None),) + idx] = c
            neg = tuple(K - x for x in k)
            arr[(slice(None),) + neg] = np.conj(c)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FieldError):
            raise
        raise FieldError(f"malformed field record: {exc}") from exc
    u = SpectralField(K, arr)
    u.check(tol=1e-12)
    return u


def save_field(path, u: SpectralField) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_field(u))


def load_field(path) -> SpectralField:
    with open(path) as fh:
        return loads_field(fh.read())
