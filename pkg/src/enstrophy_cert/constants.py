"""Absolute constants used by the regularity checks.

All quantities refer to the non-dimensional problem on [0, 2*pi]^3 unless a
ledger is built explicitly for physical units (see :func:`physical_ledger`).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

K_CONST_DEFAULT = 9.0 * 2.0 ** (15.0 / 4.0)
C_CONST_DEFAULT = 27.0 * K_CONST_DEFAULT**4 / 16.0
K1_DEFAULT = 3266.0


@dataclass(frozen=True)
class ConstantsLedger:
    """Constants of the small-data, robustness and Gevrey estimates.

    ``k_const`` is the trilinear Sobolev constant, ``c_const = 27 k^4 / 16``
    the small-data constant (also used as the robustness constant of the
    certificate), ``K1`` the Gevrey constant.  When ``c_const`` is left as
    ``None`` it is derived from ``k_const``.
    """

    k_const: float = K_CONST_DEFAULT
    c_const: float | None = None
    K1: float = K1_DEFAULT
    lambda1: float = 1.0
    nu: float = 1.0
    _c: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = 27.0 * self.k_const**4 / 16.0 if self.c_const is None else self.c_const
        object.__setattr__(self, "_c", float(c))
        for name in ("k_const", "K1", "lambda1", "nu"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (self._c > 0 and math.isfinite(self._c)):
            raise ValueError(f"c_const must be positive and finite, got {self._c!r}")

    @property
    def c(self) -> float:
        return self._c

    @property
    def is_default_c(self) -> bool:
        return self._c == C_CONST_DEFAULT

    def small_data_threshold(self) -> float:
        """Enstrophy bound ``c^{-1/2} nu^2 lambda1^{1/2}`` for global regularity."""
        return self._c**-0.5 * self.nu**2 * self.lambda1**0.5

    def small_data_radius(self) -> float:
        """Radius of the small-data ball in the V norm (``c^{-1/4}`` by default)."""
        return self.small_data_threshold() ** 0.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_c", None)
        d["c_const"] = self._c
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantsLedger":
        return cls(
            k_const=float(d.get("k_const", K_CONST_DEFAULT)),
            c_const=None if d.get("c_const") is None else float(d["c_const"]),
            K1=float(d.get("K1", K1_DEFAULT)),
            lambda1=float(d.get("lambda1", 1.0)),
            nu=float(d.get("nu", 1.0)),
        )


DEFAULT_LEDGER = ConstantsLedger()


def physical_ledger(L: float, nu: float, base: ConstantsLedger = DEFAULT_LEDGER) -> ConstantsLedger:
    """Ledger for the periodic box [0, L]^3 with viscosity ``nu``."""
    return ConstantsLedger(
        k_const=base.k_const,
        c_const=base.c,
        K1=base.K1,
        lambda1=4.0 * math.pi**2 / L**2,
        nu=nu,
    )
