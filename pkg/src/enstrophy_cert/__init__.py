"""Spectral Galerkin solver and regularity certificates for the 3D
Navier-Stokes equations on the 2*pi-periodic torus."""

from . import _malloc

_malloc.tune()

from .basis import StokesBasisIndex, project_n, stokes_basis  # noqa: E402
from .constants import DEFAULT_LEDGER, ConstantsLedger  # noqa: E402
from .galerkin import IntegratorConfig, Trajectory, integrate, interpolant  # noqa: E402
from .spectral import (  # noqa: E402
    SpectralField,
    gevrey_norm,
    leray_project,
    nonlinear_term,
    norms,
    random_field,
    shear_mode,
)

__version__ = "0.1.0"
