import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import disk, gaussian
from services.bs_service import BirmanSchwingerService, build_grid
from services.coupling_service import (
    ABSENT,
    ADMISSIBLE,
    INADMISSIBLE,
    CouplingMatrix,
    CouplingService,
)
from services.potential_service import PotentialSpec
from utils.common import loglog_slope
from utils.domain import PolarPoint
from utils.errors import DomainError, NeumannSeriesError


def test_d_matrix_at_half_flux():
    service = CouplingService(0.5)
    expected = math.sqrt(math.pi) / (2.0 * math.pi)
    assert np.allclose(service.d_matrix(PolarPoint(2.0, 0.0)), np.diag([expected, expected]), rtol=1e-12)


def test_d_matrix_carries_angle_in_plus_entry():
    service = CouplingService(0.5)
    d = service.d_matrix(PolarPoint(2.0, math.pi / 2))
    expected = math.sqrt(math.pi) / (2.0 * math.pi)
    assert d[0, 0] == pytest.approx(1j * expected, abs=1e-14)
    assert d[1, 1] == pytest.approx(expected, rel=1e-12)
    assert d[0, 1] == 0 and d[1, 0] == 0


def test_d_matrix_undefined_at_origin():
    with pytest.raises(DomainError):
        CouplingService(0.5).d_matrix(PolarPoint(0.0, 0.0))


def test_U_of_unit_disk_at_half_flux():
    u = CouplingService(0.5).compute_U(disk())
    assert np.allclose(u.u, -np.eye(2), rtol=1e-8, atol=1e-12)


def test_U_of_lower_component_only():
    u = CouplingService(0.25).compute_U(disk(components=("v22",)))
    assert u.a0 == 0
    assert u.b0 == pytest.approx(-1.3947, abs=2e-4)


def test_U_of_zero_potential():
    u = CouplingService(0.3).compute_U(PotentialSpec())
    assert not np.any(u.u)


def test_U_scales_with_complex_amplitude():
    service = CouplingService(0.5)
    phase = cmath.exp(1j * math.pi / 8)
    u = service.compute_U(disk(-phase, components=("v22",)))
    assert u.b0 == pytest.approx(-phase, rel=1e-8)


@pytest.mark.parametrize("alpha, eps, a, b, c, expected", [
    (0.5, 0.1, -1.0, -1.0, 1.0, [-0.01, -0.01]),
    (0.25, 0.1, 0.0, -1.0, 0.0, [-1e-4]),
])
def test_implicit_roots_factorized(alpha, eps, a, b, c, expected):
    roots = CouplingService(alpha).implicit_roots(eps, a, b, c)
    assert sorted(r.real for r in roots.roots) == pytest.approx(expected, rel=1e-12)
    assert all(abs(r.imag) <= 1e-15 for r in roots.roots)


def test_implicit_roots_flags_inadmissible_branch():
    roots = CouplingService(0.5).implicit_roots(0.1, 0.0, 1.0, 0.0)
    assert len(roots) == 0
    assert roots.flags == {"plus": ABSENT, "minus": INADMISSIBLE}


def test_implicit_roots_general_determinant():
    service = CouplingService(0.25)
    eps, a, b, c = 0.1, -1.0, -1.0, 1.05
    roots = service.implicit_roots(eps, a, b, c)
    assert len(roots) == 2
    for z in roots.roots:
        assert service.implicit_residual(eps, a, b, c, z) <= 1e-10
    assert roots.get("minus") == pytest.approx(-1.2e-4, rel=0.05)


def test_implicit_roots_need_positive_eps():
    with pytest.raises(DomainError):
        CouplingService(0.5).implicit_roots(0.0, -1.0, -1.0, 1.0)


def _residual_scale(alpha, eps, a, b, c, z):
    zeta = abs(z)
    return 1.0 + eps * eps * abs(c) / zeta + eps * (abs(a) * zeta ** (alpha - 1.0) + abs(b) * zeta ** -alpha)


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(0.25, 0.75),
    eps=st.floats(0.01, 0.2),
    ra=st.floats(0.5, 2.0),
    rb=st.floats(0.5, 2.0),
    ta=st.floats(-0.9, 0.9),
    tb=st.floats(-0.9, 0.9),
)
def test_factorized_roots_solve_the_equation(alpha, eps, ra, rb, ta, tb):
    a = -ra * cmath.exp(1j * ta * (1.0 - alpha) * math.pi)
    b = -rb * cmath.exp(1j * tb * alpha * math.pi)
    service = CouplingService(alpha)
    roots = service.implicit_roots(eps, a, b, a * b)
    assert len(roots) == 2
    for z in roots.roots:
        residual = service.implicit_residual(eps, a, b, a * b, z)
        assert residual <= 1e-9 * _residual_scale(alpha, eps, a, b, a * b, z)


def test_asymptotic_complex_coupling():
    service = CouplingService(0.5)
    b0 = -cmath.exp(1j * math.pi / 8)
    pair = service.asymptotic_eigenvalues(0.1, CouplingMatrix(u=np.diag([0.0, b0]), alpha=0.5))
    assert pair.z_plus is None
    assert pair.z_minus == pytest.approx(-0.01 * cmath.exp(1j * math.pi / 4), abs=1e-14)
    assert (-pair.z_minus) ** 0.5 == pytest.approx(-0.1 * b0, abs=1e-12)


def test_asymptotic_at_zero_coupling():
    pair = CouplingService(0.5).asymptotic_eigenvalues(0.0, CouplingMatrix(u=-np.eye(2), alpha=0.5))
    assert pair.z_plus == 0j and pair.z_minus == 0j


def test_asymptotic_admissibility_follows_the_sector():
    alpha = 0.5
    service = CouplingService(alpha)
    for phi0 in np.linspace(-0.9 * math.pi, 0.9 * math.pi, 19):
        if abs(abs(phi0) - alpha * math.pi) < 1e-6:
            continue
        u = CouplingMatrix(u=np.diag([0.0, -cmath.exp(1j * phi0)]), alpha=alpha)
        pair = service.asymptotic_eigenvalues(0.1, u)
        if abs(phi0) < alpha * math.pi:
            assert pair.z_minus is not None
            assert pair.flags["minus"] == ADMISSIBLE
        else:
            assert pair.z_minus is None
            assert pair.flags["minus"] == INADMISSIBLE


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_asymptotic_exponent(alpha):
    service = CouplingService(alpha)
    eps_values = np.geomspace(1e-3, 1e-1, 7)
    u = CouplingMatrix(u=-np.eye(2), alpha=alpha)
    z = [service.asymptotic_eigenvalues(eps, u).z_minus for eps in eps_values]
    slope, _ = loglog_slope(eps_values, z)
    assert slope == pytest.approx(1.0 / alpha, rel=1e-10)


def test_W_at_zero_coupling_is_U():
    service = CouplingService(0.5, m_max=2)
    w = service.compute_W(0.0, -0.01, disk())
    assert np.array_equal(w.w, w.u)
    assert w.correction_norm == 0.0


def test_W_stays_close_to_U_for_weak_coupling():
    service = CouplingService(0.5, m_max=4)
    potential = disk()
    w = service.compute_W(0.05, -0.0025, potential)
    assert w.a == pytest.approx(-1.0, rel=0.1)
    assert w.b == pytest.approx(-1.0, rel=0.1)
    assert w.w[0, 1] == 0 and w.w[1, 0] == 0


def test_W_correction_is_first_order():
    service = CouplingService(0.5, m_max=4)
    potential = disk()
    grid = build_grid(potential)
    u = service.compute_U(potential)
    coarse = service.compute_W(0.05, -0.0025, potential, grid, u=u).correction_norm
    fine = service.compute_W(0.025, -0.0025, potential, grid, u=u).correction_norm
    assert 1.5 <= coarse / fine <= 2.5


def test_W_refuses_divergent_neumann_series():
    service = CouplingService(0.5, m_max=2)
    with pytest.raises(NeumannSeriesError):
        service.compute_W(1e3, -0.0025, disk(), build_grid(disk(), n_r=16))


def test_self_consistent_root_matches_bound_state():
    alpha, eps = 0.5, 0.05
    potential = disk()
    grid = build_grid(potential)
    bs = BirmanSchwingerService(alpha, m_max=4)
    service = CouplingService(alpha, bs=bs)
    implicit = service.self_consistent_roots(eps, potential, grid).get("minus")
    bound = bs.find_bound_state(eps, potential, spin="minus", grid=grid)
    assert implicit.real == pytest.approx(bound, rel=0.02)
    assert abs(implicit.imag) <= 1e-12


def test_asymptotic_root_within_first_order_of_bound_state():
    alpha = 0.5
    potential = disk()
    bs = BirmanSchwingerService(alpha, m_max=3)
    service = CouplingService(alpha, bs=bs)
    u = service.compute_U(potential)
    grid = build_grid(potential)
    for eps in (0.1, 0.05):
        z_asym = service.asymptotic_eigenvalues(eps, u).z_minus
        z_bs = bs.find_bound_state(eps, potential, spin="minus", grid=grid)
        assert abs(z_bs - z_asym) / abs(z_asym) <= 5.0 * eps


def test_asymptotic_root_at_small_coupling():
    alpha, eps = 0.5, 0.01
    potential = disk()
    bs = BirmanSchwingerService(alpha, m_max=3)
    service = CouplingService(alpha, bs=bs)
    z_asym = service.asymptotic_eigenvalues(eps, service.compute_U(potential)).z_minus
    assert z_asym == pytest.approx(-1e-4, rel=1e-6)
    z_bs = bs.find_bound_state(eps, potential, spin="minus", grid=build_grid(potential))
    assert abs(z_bs - z_asym) / abs(z_asym) <= 0.05


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_bound_state_exponents_track_the_corrected_roots(alpha):
    potential = disk()
    grid = build_grid(potential)
    bs = BirmanSchwingerService(alpha, m_max=3)
    service = CouplingService(alpha, bs=bs)
    eps_values = np.geomspace(1e-2, 1e-1, 5)
    corrected = [service.self_consistent_roots(eps, potential, grid) for eps in eps_values]
    for spin, nu in (("plus", 1.0 - alpha), ("minus", alpha)):
        bound = [bs.find_bound_state(eps, potential, spin=spin, grid=grid) for eps in eps_values]
        assert all(z < 0.0 for z in bound)
        slope_bs, _ = loglog_slope(eps_values, np.abs(bound))
        slope_corrected, _ = loglog_slope(eps_values, [abs(r.get(spin)) for r in corrected])
        assert slope_bs == pytest.approx(slope_corrected, rel=0.02)
        # the O(eps) correction pulls the bare slope below 1/nu
        assert slope_bs == pytest.approx(1.0 / nu, rel=0.05)


def test_gaussian_U_is_attractive_in_both_blocks():
    u = CouplingService(0.3).compute_U(gaussian())
    assert u.a0.real < 0.0 and u.b0.real < 0.0
    assert abs(u.a0.imag) == 0.0 and abs(u.b0.imag) == 0.0


def test_implicit_roots_admissibility_follows_the_sector():
    alpha = 0.3
    service = CouplingService(alpha)
    for phi0 in np.linspace(-0.95 * math.pi, 0.95 * math.pi, 39):
        if abs(abs(phi0) - alpha * math.pi) < 1e-6:
            continue
        b = -cmath.exp(1j * phi0)
        roots = service.implicit_roots(0.1, 0.0, b, 0.0)
        assert (roots.get("minus") is not None) == (abs(phi0) < alpha * math.pi)
