import math

import numpy as np
import pytest

from conftest import disk, gaussian
from services.bs_service import BirmanSchwingerService, build_grid
from services.coupling_service import CouplingService
from services.oracle_service import (
    RadialGrid1D,
    brute_U,
    cutoff_bump,
    cutoff_bump_derivative,
    cutoff_form_decay,
    kk_product_residual,
    radial_fd_ground_state,
    residue_residual,
)
from services.potential_service import PotentialSpec
from utils.common import loglog_slope
from utils.domain import NoEigenvalue
from utils.errors import DomainError


@pytest.mark.parametrize("alpha, phi", [
    (0.5, 0.0),
    (0.3, 2.0),
    (0.7, -1.0),
    (0.3, 4.0),
    (0.6, -5.0),
])
def test_residue_identity_by_tanh_sinh(alpha, phi):
    assert residue_residual(alpha, phi) <= 1e-10


@pytest.mark.parametrize("phi", [math.pi, -math.pi, math.pi + 5e-4, 7.0])
def test_residue_oracle_rejects_the_cut(phi):
    with pytest.raises(DomainError):
        residue_residual(0.5, phi)


@pytest.mark.parametrize("alpha, spin, expected", [
    (0.3, "minus", 0.7),
    (0.3, "plus", 0.3),
    (0.5, "minus", 0.5),
])
def test_kk_expansion_remainder_slope(alpha, spin, expected):
    z_values = [-1e-4, -1e-6, -1e-8]
    residual = [kk_product_residual(alpha, z, 1.0, 2.0, spin) for z in z_values]
    slope, _ = loglog_slope(np.abs(z_values), residual)
    assert slope == pytest.approx(expected, rel=0.1)


def test_kk_expansion_symmetric_at_half_flux():
    for z in (-1e-4, -1e-6):
        plus = kk_product_residual(0.5, z, 1.0, 2.0, "plus")
        minus = kk_product_residual(0.5, z, 1.0, 2.0, "minus")
        assert plus == pytest.approx(minus, rel=1e-12)


def test_brute_U_of_unit_disk():
    u = brute_U(0.5, disk(), n=512)
    assert np.allclose(u.u, -np.eye(2), atol=1e-4)


def test_brute_U_of_zero_potential():
    assert not np.any(brute_U(0.5, PotentialSpec(), n=64).u)


def test_brute_U_lower_component_at_quarter_flux():
    u = brute_U(0.25, disk(components=("v22",)), n=512)
    assert u.a0 == 0
    assert u.b0 == pytest.approx(-1.3947, abs=1e-3)


def test_brute_U_agrees_with_moment_integral():
    potential = gaussian()
    brute = brute_U(0.5, potential, n=2048)
    exact = CouplingService(0.5).compute_U(potential)
    assert np.allclose(brute.u, exact.u, rtol=1e-5, atol=1e-12)


def test_brute_U_needs_enough_cells():
    with pytest.raises(DomainError):
        brute_U(0.5, disk(), n=32)


@pytest.mark.parametrize("kwargs", [
    {"r_min": 0.0},
    {"r_min": 10.0, "r_max": 1.0},
    {"n": 4},
    {"bc": "dirichlet"},
])
def test_radial_grid_validation(kwargs):
    with pytest.raises(DomainError):
        RadialGrid1D(**kwargs)


def test_radial_grid_nodes_inside_faces():
    grid = RadialGrid1D(n=64, breakpoints=(1.0,))
    faces, nodes = grid.faces, grid.nodes
    assert 1.0 in faces
    assert np.all(np.diff(nodes) > 0.0)
    assert np.all((nodes > faces[:-1]) & (nodes < faces[1:]))


def test_radial_oracle_disk_ground_state():
    z = radial_fd_ground_state(0.5, 0.1, disk(), "minus")
    assert -0.013 <= z <= -0.008


def test_radial_oracle_friedrichs_condition_has_no_bound_state():
    result = radial_fd_ground_state(0.5, 0.1, disk(), "minus", RadialGrid1D(bc="friedrichs"))
    assert isinstance(result, NoEigenvalue)


def test_radial_oracle_exponent():
    potential = disk()
    ratio = radial_fd_ground_state(0.5, 0.05, potential, "minus") / radial_fd_ground_state(0.5, 0.1, potential, "minus")
    assert 0.225 <= ratio <= 0.275


def test_radial_oracle_matches_bs_solver():
    potential = disk()
    bs = BirmanSchwingerService(0.5, m_max=2)
    z_bs = bs.find_bound_state(0.05, potential, spin="minus", grid=build_grid(potential))
    z_fd = radial_fd_ground_state(0.5, 0.05, potential, "minus")
    assert z_fd == pytest.approx(z_bs, rel=0.02)


def test_radial_oracle_needs_real_potential():
    with pytest.raises(DomainError):
        radial_fd_ground_state(0.5, 0.1, disk(-1.0 + 1.0j), "minus")


def test_radial_oracle_matches_the_exact_disk_state():
    # at alpha = 1/2 the disk state solves kappa = k tan k with k^2 = eps - kappa^2
    z = radial_fd_ground_state(0.5, 0.1, disk(), "minus")
    assert z == pytest.approx(-0.0088426, rel=2e-3)


@pytest.mark.parametrize("grid", [
    RadialGrid1D(n=2000),
    RadialGrid1D(n=8000),
    RadialGrid1D(r_min=1e-6),
])
def test_radial_oracle_is_grid_independent(grid):
    reference = radial_fd_ground_state(0.5, 0.1, disk(), "minus")
    assert radial_fd_ground_state(0.5, 0.1, disk(), "minus", grid) == pytest.approx(reference, rel=0.02)


@pytest.mark.parametrize("n, r_min", [(2000, 1e-4), (8000, 1e-4), (4000, 1e-6)])
def test_radial_oracle_friedrichs_condition_on_refined_grids(n, r_min):
    grid = RadialGrid1D(r_min=r_min, n=n, bc="friedrichs")
    assert isinstance(radial_fd_ground_state(0.5, 0.1, disk(), "minus", grid), NoEigenvalue)


def test_cutoff_bump_shape():
    assert cutoff_bump(0.5) == 1.0
    assert cutoff_bump(1.0) == 1.0
    assert cutoff_bump(1.5) == pytest.approx(0.5, abs=1e-15)
    assert cutoff_bump(2.0) == 0.0
    assert cutoff_bump(2.5) == 0.0
    values = cutoff_bump(np.linspace(1.2, 1.8, 50))
    assert np.all(np.diff(values) < 0.0)


def test_cutoff_bump_derivative_matches_difference_quotient():
    t = np.linspace(1.1, 1.9, 9)
    h = 1e-6
    numeric = (cutoff_bump(t + h) - cutoff_bump(t - h)) / (2.0 * h)
    assert np.allclose(cutoff_bump_derivative(t), numeric, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("alpha, spin, expected", [
    (0.3, "plus", -1.4),
    (0.3, "minus", -0.6),
    (0.5, "plus", -1.0),
    (0.5, "minus", -1.0),
])
def test_cutoff_form_decay_slope(alpha, spin, expected):
    decay = cutoff_form_decay(alpha, spin, [1.0, 10.0, 100.0, 1000.0])
    assert decay.slope == pytest.approx(expected, rel=0.02)
    assert decay.r_squared == pytest.approx(1.0, abs=1e-9)


def test_cutoff_form_decay_needs_increasing_scales():
    with pytest.raises(DomainError):
        cutoff_form_decay(0.3, "plus", [10.0, 1.0])
