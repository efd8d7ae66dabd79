import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from enstrophy_cert import basis
from enstrophy_cert import spectral as sp
from enstrophy_cert.galerkin import (
    DivergenceError,
    IntegratorConfig,
    Trajectory,
    energy_identity_defect,
    integrate,
    interpolant,
    series_csv,
)


@pytest.fixture(scope="module")
def oracle():
    """Reference Galerkin solution from DOP853 on basis coordinates, direct convolution."""
    K = 2
    B = basis.stokes_basis(K)
    n = B.n_within_radius(K)
    lam = basis.eigenvalue_list(n).astype(float)
    u0 = basis.project_n(sp.random_field(K, 3, target_enstrophy=20.0), n)

    def rhs(t, a):
        b = sp.nonlinear_term(B.from_coordinates(a), "direct_convolution")
        return -lam * a - B.coordinates(b, n)

    sol = solve_ivp(rhs, (0, 0.5), B.coordinates(u0, n), method="DOP853", rtol=1e-13, atol=1e-15)
    assert sol.success
    return u0, n, B.from_coordinates(sol.y[:, -1])


def _rel_err(u, ref):
    return math.sqrt(sp.enstrophy(u - ref) / sp.enstrophy(ref))


def test_matches_ode_oracle(oracle):
    u0, n, ref = oracle
    traj = integrate(u0, 0.5, IntegratorConfig(dt=1e-3, n_modes=n))
    assert _rel_err(traj.fields[-1], ref) <= 1e-7


def test_fourth_order_self_convergence(oracle):
    u0, n, ref = oracle
    errs = [_rel_err(integrate(u0, 0.5, IntegratorConfig(dt=dt, n_modes=n)).fields[-1], ref) for dt in (0.05, 0.025)]
    assert 12 <= errs[0] / errs[1] <= 20


def test_explicit_scheme_agrees(oracle):
    u0, n, ref = oracle
    traj = integrate(u0, 0.5, IntegratorConfig(dt=1e-3, scheme="explicit_rk4", n_modes=n))
    assert _rel_err(traj.fields[-1], ref) <= 1e-7


def test_non_shell_galerkin_space(rng):
    # n = 20 splits the |k|^2 = 2 shell, so P_n is the basis projection
    u0 = sp.random_field(2, rng, target_enstrophy=1.0)
    traj = integrate(u0, 0.05, IntegratorConfig(dt=1e-3, n_modes=20))
    B = basis.stokes_basis(2)
    last = traj.fields[-1]
    assert np.allclose(B.coordinates(last, B.complete_n)[20:], 0, atol=1e-15)
    assert last.divergence_defect() <= 1e-13


def test_shear_decay_and_final_time():
    u0 = sp.shear_mode(3)
    traj = integrate(u0, 0.3337, IntegratorConfig(dt=0.01))
    assert traj.T == 0.3337
    assert np.all(np.diff(traj.times) > 0)
    err = math.sqrt(sp.enstrophy(traj.fields[-1] - u0 * math.exp(-0.3337)))
    assert err <= 1e-12


def test_store_every_and_thinning():
    u0 = sp.shear_mode(1)
    traj = integrate(u0, 0.1, IntegratorConfig(dt=0.01, store_every=3))
    assert traj.times.tolist() == pytest.approx([0, 0.03, 0.06, 0.09, 0.1])
    thin = integrate(u0, 0.1, IntegratorConfig(dt=0.01)).thinned(5)
    assert thin.times.tolist() == pytest.approx([0, 0.05, 0.1])


def test_energy_identity_and_small_data_decay(rng):
    u0 = sp.random_field(3, rng, target_enstrophy=0.5)
    traj = integrate(u0, 0.5, IntegratorConfig(dt=1e-3))
    assert abs(energy_identity_defect(traj)) <= 1e-8 * sp.energy(traj.fields[0])
    ens = traj.norm_series()[:, 1]
    assert np.all(np.diff(ens) <= 1e-10)


def test_divergence_guard():
    u0 = sp.random_field(2, 0, target_enstrophy=1e9)
    with pytest.raises(DivergenceError) as info:
        integrate(u0, 1.0, IntegratorConfig(dt=0.05))
    assert info.value.t > 0


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0)
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(n_modes=0)
    with pytest.raises(ValueError):
        # explicit RK4 is unstable for dt * lambda_max = 1.0 * 4
        integrate(sp.shear_mode(2), 1.0, IntegratorConfig(dt=1.0, scheme="explicit_rk4"))
    with pytest.raises(ValueError):
        integrate(sp.shear_mode(1), 1.0, IntegratorConfig(n_modes=10_000))
    with pytest.raises(ValueError):
        integrate(sp.shear_mode(1), 0.0)


def test_interpolant():
    u = sp.shear_mode(1)
    traj = Trajectory(np.array([0.0, 1.0]), [u, u * 3.0], n_modes=12)
    mid = interpolant(traj, 0.25)
    assert np.allclose(mid.coeffs, (u * 1.5).coeffs)
    assert interpolant(traj, 1.0) is traj.fields[1]
    with pytest.raises(ValueError):
        interpolant(traj, 1.5)
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), [u, u], 12)


def test_series_csv():
    u0 = sp.shear_mode(1)
    text = series_csv(integrate(u0, 0.01, IntegratorConfig(dt=0.005)), gevrey=True)
    lines = text.strip().splitlines()
    assert lines[0] == "t,energy,enstrophy,h2,gevrey"
    assert len(lines) == 4
    t, e0, e1, e2, g = map(float, lines[-1].split(","))
    assert e0 == pytest.approx(4 * math.pi**3 * math.exp(-2 * t), rel=1e-12)
    assert g == pytest.approx(4 * math.pi**3, rel=1e-12)
