import math

import numpy as np
import pytest

from enstrophy_cert import basis
from enstrophy_cert import spectral as sp


def test_enumeration_order_and_eigenvalues():
    els = basis.enumerate_basis(3)
    assert [b.ordinal for b in els] == list(range(1, len(els) + 1))
    lams = [b.eigenvalue for b in els]
    assert lams == sorted(lams)
    # 3 canonical wavevectors of |k|^2 = 1, four elements each
    assert lams[:12] == [1] * 12 and lams[12] == 2
    assert els[0].wavevector == (0, 0, 1)
    assert (els[0].polarization, els[0].phase) == (1, "cos")
    assert (els[3].polarization, els[3].phase) == (2, "sin")


def test_counting_functions():
    assert basis.count_below(1) == 0
    assert basis.count_below(2) == 12
    assert basis.count_below(3) == 12 + 24
    assert basis.eigenvalue(1) == 1 and basis.eigenvalue(12) == 1 and basis.eigenvalue(13) == 2
    for n in (1, 7, 12, 40, 123):
        lams = basis.eigenvalue_list(n)
        assert len(lams) == n
        assert basis.eigenvalue_sum(n) == int(lams.sum())
        assert lams[-1] == basis.eigenvalue(n)
    # brute-force count of |k|^2 < 400
    r = 20
    k = np.arange(-r, r + 1)
    q = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    assert basis.count_below(400) == 2 * int(np.sum((q > 0) & (q < 400)))


def test_polarizations_orthonormal():
    for k in basis.canonical_wavevectors(6):
        e1, e2 = basis.polarization_vectors(k)
        kk = np.array(k, float)
        assert abs(e1 @ kk) < 1e-14 and abs(e2 @ kk) < 1e-14
        assert abs(e1 @ e2) < 1e-14
        assert e1 @ e1 == pytest.approx(1) and e2 @ e2 == pytest.approx(1)


def test_elements_orthonormal_eigenfunctions():
    K = 2
    B = basis.stokes_basis(K)
    n = B.complete_n
    fields = [B.element_field(j) for j in range(1, n + 1)]
    for f in fields:
        f.check()
    gram = np.array([[sp.inner(a, b) for b in fields] for a in fields])
    assert np.allclose(gram, np.eye(n), atol=1e-13)
    for j, f in enumerate(fields, start=1):
        assert sp.enstrophy(f) == pytest.approx(basis.eigenvalue(j))


def test_coordinates_round_trip(rng):
    B = basis.stokes_basis(3)
    n = B.n_within_radius(3)
    alpha = rng.standard_normal(n)
    u = B.from_coordinates(alpha)
    assert np.allclose(B.coordinates(u, n), alpha, atol=1e-13)
    lam = basis.eigenvalue_list(n)
    assert sp.enstrophy(u) == pytest.approx(float(np.sum(lam * alpha**2)), rel=1e-12)


def test_projection_properties(rng):
    u = sp.random_field(3, rng)
    for n in (0, 5, 12, 30, 81):
        p = basis.project_n(u, n)
        assert np.allclose(basis.project_n(p, n).coeffs, p.coeffs, atol=1e-15)
        assert sp.energy(p) <= sp.energy(u) + 1e-12
        # tail bound |D(v - P_n v)|^2 <= |Av|^2 / lambda_{n+1}
        tail = sp.enstrophy(u - p)
        assert tail <= sp.h2(u) / basis.eigenvalue(n + 1) * (1 + 1e-12)


def test_shell_projection_is_mask():
    u = sp.shear_mode(2)
    assert basis.project_n(u, 12).coeffs.tolist() == u.coeffs.tolist()
    assert basis.project_n(u, 0).is_zero()


def test_required_radius_and_limits():
    assert basis.required_radius(0) == 0
    assert basis.required_radius(12) == 1
    assert basis.required_radius(13) == 1
    assert basis.required_radius(12 + 24 + 16) == 1
    assert basis.required_radius(12 + 24 + 16 + 1) == 2
    B = basis.stokes_basis(1)
    with pytest.raises(ValueError):
        B.from_coordinates(np.zeros(B.complete_n + 1))
    with pytest.raises(ValueError):
        basis.eigenvalue(0)


def test_ordinals_independent_of_radius():
    a = basis.stokes_basis(2)
    b = basis.stokes_basis(4)
    for j in range(1, a.complete_n + 1):
        fa = sp.resize(a.element_field(j), 4)
        assert math.isclose(sp.inner(fa, b.element_field(j)), 1.0, rel_tol=1e-12)
