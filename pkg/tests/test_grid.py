import math

import numpy as np
import pytest

from curlcurl.grid import (
    CylField,
    GridMismatchError,
    axis_extrapolate,
    build_grid,
    dirichlet_energy,
    gaussian,
    gradient,
    integrate_r1,
    integrate_r3,
    read_field_csv,
    weighted_laplacian,
    write_field_csv,
)
from reference import INT_RHO2_U2_R3, INT_U2_R3


def test_spacing_and_nodes():
    g = build_grid(8, 8, 5, 5)
    assert g.dr == 2.0 and g.dz == 4.0
    assert list(g.z) == [-8.0, -4.0, 0.0, 4.0, 8.0]
    assert g.r[0] == 0.0 and np.all(np.diff(g.r) > 0)


@pytest.mark.parametrize("nz", [4, 6, 10])
def test_even_nz_rejected(nz):
    with pytest.raises(ValueError, match="odd"):
        build_grid(8, 8, 5, nz)


@pytest.mark.parametrize("rmax,zmax", [(0, 1), (1, -1), (-2, 3), (math.inf, 1)])
def test_bad_extents_rejected(rmax, zmax):
    with pytest.raises(ValueError):
        build_grid(rmax, zmax, 5, 5)


def test_too_few_nodes_rejected():
    with pytest.raises(ValueError):
        build_grid(1, 1, 2, 5)


@pytest.mark.parametrize("n", [5, 17, 129, 257, 1001])
def test_z_nodes_mirror_exactly(n):
    g = build_grid(7.3, 3.1, 9, n)
    assert np.array_equal(g.z, -g.z[::-1])
    assert g.z[g.center] == 0.0


def test_weight_sum_r3():
    g = build_grid(16, 16, 257, 257)
    total = g.w3.sum()
    assert abs(total - 524288.0) <= 1e-9 * 524288.0


@pytest.mark.parametrize("rmax,nr", [(3.0, 7), (10.0, 33), (1.5, 101)])
def test_weight_sum_exact_on_any_grid(rmax, nr):
    g = build_grid(rmax, 2.0, nr, 9)
    assert math.isclose(g.w3.sum(), rmax**4 / 4 * 4.0, rel_tol=1e-12)
    assert math.isclose(g.w1.sum(), rmax**2 / 2 * 4.0, rel_tol=1e-12)


def test_weights_nonnegative_and_zero_on_axis():
    g = build_grid(5, 5, 11, 11)
    assert np.all(g.w3 >= 0) and np.all(g.w1 >= 0)
    assert np.all(g.w3[0] == 0)


def test_integrals_of_zero():
    g = build_grid(4, 4, 9, 9)
    assert integrate_r3(g.zeros()) == 0.0
    assert integrate_r1(g.zeros()) == 0.0


def test_integrate_r3_gaussians():
    g = build_grid(10, 10, 401, 401)
    u2 = g.sample(lambda R, Z: np.exp(-(R**2 + Z**2)))
    assert abs(integrate_r3(u2) - INT_U2_R3) < 1e-6
    m = g.sample(lambda R, Z: (R**2 + Z**2) * np.exp(-(R**2 + Z**2)))
    assert abs(integrate_r3(m) - INT_RHO2_U2_R3) < 1e-6


def test_integrate_r1_gaussians():
    g = build_grid(10, 10, 401, 401)
    assert abs(integrate_r1(g.sample(lambda R, Z: np.exp(-(R**2 + Z**2)))) - INT_U2_R3) < 1e-6
    assert abs(integrate_r1(g.sample(lambda R, Z: R**2 * np.exp(-(R**2 + Z**2)))) - INT_U2_R3) < 1e-6


def test_mismatched_grid_rejected():
    a = build_grid(4, 4, 9, 9).zeros()
    b = build_grid(4, 4, 11, 9).zeros()
    with pytest.raises(GridMismatchError):
        a + b


def test_field_is_immutable_and_finite():
    g = build_grid(4, 4, 9, 9)
    u = g.zeros()
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0
    bad = np.zeros(g.shape)
    bad[3, 4] = np.nan
    with pytest.raises(ValueError, match="i=3, j=4"):
        CylField(g, bad)


def test_gradient_constant_and_linear():
    g = build_grid(3, 3, 13, 13)
    ur, uz = gradient(g.sample(lambda R, Z: 2.5 + 0 * R))
    assert np.all(ur.values == 0) and np.all(uz.values == 0)
    _, uz = gradient(g.sample(lambda R, Z: Z + 0 * R))
    assert np.allclose(uz.values[:, 1:-1], 1.0, rtol=0, atol=1e-14)


def test_gradient_axis_even_extension():
    g = build_grid(3, 3, 13, 13)
    ur, _ = gradient(g.sample(lambda R, Z: np.cos(R) * np.exp(Z)))
    assert np.all(ur.values[0] == 0.0)


def test_gradient_linear_in_field():
    g = build_grid(3, 3, 17, 15)
    rng = np.random.default_rng(3)
    a, b = CylField(g, rng.normal(size=g.shape)), CylField(g, rng.normal(size=g.shape))
    lhs = gradient(a * 2.0 + b * -0.5)
    ga, gb = gradient(a), gradient(b)
    for k in range(2):
        assert np.allclose(lhs[k].values, 2.0 * ga[k].values - 0.5 * gb[k].values, rtol=0, atol=1e-12)


def _nodal_grad_energy(u):
    ur, uz = gradient(u)
    return integrate_r3(CylField(u.grid, ur.values**2 + uz.values**2))


@pytest.mark.parametrize("energy", [dirichlet_energy, _nodal_grad_energy])
def test_dirichlet_energy_order(energy):
    errs = []
    for n in (65, 129, 257):
        g = build_grid(8, 8, n, n)
        errs.append(abs(energy(gaussian(g)) - INT_RHO2_U2_R3))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9, orders


def test_weighted_laplacian_on_gaussian_converges():
    errs = []
    for n in (65, 129, 257):
        g = build_grid(8, 8, n, n)
        u = gaussian(g)
        exact = (5.0 - g.R**2 - g.Z**2) * u.values
        errs.append(np.max(np.abs(weighted_laplacian(u) - exact)[g.interior]))
    assert errs[-1] < 5e-3
    assert math.log2(errs[1] / errs[2]) >= 1.9


def test_weighted_laplacian_exact_on_r_squared():
    g = build_grid(2, 2, 9, 9)
    u = g.sample(lambda R, Z: R**2 + 0 * Z)
    # -(1/r^3)(r^3 * 2r)' = -8 exactly, also on the axis
    assert np.allclose(weighted_laplacian(u)[:-1, 1:-1], -8.0, rtol=0, atol=1e-12)


def test_axis_extrapolate_flat_second_order():
    g = build_grid(1, 1, 41, 5)
    v = axis_extrapolate(g.sample(lambda R, Z: np.cos(R) + 0 * Z).values)
    assert abs(v[0, 0] - 1.0) < 1e-4
    assert np.array_equal(v[1:], g.sample(lambda R, Z: np.cos(R) + 0 * Z).values[1:])


def test_csv_roundtrip(tmp_path):
    g = build_grid(2.5, 1.5, 7, 9)
    rng = np.random.default_rng(0)
    u = CylField(g, rng.normal(size=g.shape))
    p = tmp_path / "f.csv"
    write_field_csv(u, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "r,z,value"
    assert len(lines) == 1 + 7 * 9
    back = read_field_csv(p)
    assert back.grid == g
    assert np.array_equal(back.values, u.values)


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n0,0,0\n")
    with pytest.raises(ValueError, match="header"):
        read_field_csv(p)
