import math

import numpy as np
import pytest

from curlcurl.corpus import field_corpus
from curlcurl.fields import (
    NonCoerciveError,
    Potential,
    custom_nonlinearity,
    energy_J,
    log_nonlinearity,
    nehari_residual,
    nonlinear_I,
    nonlinear_Iprime,
    norm_V,
    pde_residual,
    power_nonlinearity,
    quadratic_form,
    validate_nonlinearity,
    zero_nonlinearity,
)
from curlcurl.grid import CylField, build_grid, gaussian
from curlcurl.nehari import nehari_scale
from reference import INT_RHO2_U2_R3, IPRIME_P3, NORM2_V1


@pytest.fixture(scope="module")
def fine():
    return build_grid(8, 8, 2049, 2049)


@pytest.fixture(scope="module")
def mid():
    return build_grid(12, 12, 129, 129)


def test_zero_field(mid):
    V, f = Potential.constant(mid, 1.0), power_nonlinearity(3)
    u = mid.zeros()
    assert norm_V(u, V) == 0.0
    assert energy_J(u, V, f) == 0.0
    assert nonlinear_I(u, f) == 0.0 and nonlinear_Iprime(u, f) == 0.0
    assert np.all(pde_residual(u, V, f).values == 0.0)


def test_norm_gaussian_fine(fine):
    u = gaussian(fine)
    assert abs(norm_V(u, Potential.constant(fine, 1.0)) - math.sqrt(NORM2_V1)) < 1e-5
    assert abs(norm_V(u, Potential.constant(fine, 0.0)) - math.sqrt(INT_RHO2_U2_R3)) < 1e-5


def test_iprime_gaussian(mid):
    assert abs(nonlinear_Iprime(gaussian(mid), power_nonlinearity(3)) - IPRIME_P3) < 1e-6


def test_I_relation_pure_power(mid):
    # F(s) = 2 s^((p+1)/2) / (p+1) gives I = I'/(p+1) node by node
    rng = np.random.default_rng(1)
    for p in (2.0, 3.0, 4.0):
        f = power_nonlinearity(p)
        for u in field_corpus(mid, int(p), 5):
            a, b = nonlinear_I(u, f), nonlinear_Iprime(u, f) / (p + 1)
            assert abs(a - b) <= 1e-12 * abs(b)
    del rng


def test_energy_on_nehari_set_gaussian(fine):
    V, f = Potential.constant(fine, 1.0), power_nonlinearity(3)
    u = gaussian(fine)
    t = nehari_scale(u, V, f)
    J = energy_J(u * t, V, f)
    assert math.isclose(J, 0.25 * t * t * NORM2_V1, rel_tol=1e-4)


def test_doubling_with_zero_f_quadruples(mid):
    V, f = Potential.constant(mid, 1.3), zero_nonlinearity()
    u = field_corpus(mid, 0, 1)[0]
    assert math.isclose(energy_J(u * 2.0, V, f), 4.0 * energy_J(u, V, f), rel_tol=1e-14)


def test_energy_decomposition(mid):
    V, f = Potential.constant(mid, 1.0), log_nonlinearity()
    for u in field_corpus(mid, 5, 5):
        J = energy_J(u, V, f)
        assert math.isclose(J, 0.5 * norm_V(u, V) ** 2 - nonlinear_I(u, f), rel_tol=1e-13, abs_tol=1e-13)


def test_negative_radicand_reported(mid):
    V = Potential.constant(mid, -50.0)
    with pytest.raises(NonCoerciveError):
        norm_V(gaussian(mid), V)


def test_nan_in_F_located():
    g = build_grid(4, 4, 9, 9)

    def f(r, z, s):
        return np.where((r == g.r[3]) & (z == g.z[2]), np.nan, s)

    nl = custom_nonlinearity(f, 3.0, F=f)
    with pytest.raises(ValueError, match=r"i=3, j=2"):
        nonlinear_I(gaussian(g), nl)


def test_custom_primitive_by_quadrature():
    g = build_grid(4, 4, 9, 9)
    f = custom_nonlinearity(lambda r, z, s: np.log1p(s) + 0 * r, 3.0)
    s = np.linspace(0, 50, 11)
    exact = (1 + s) * np.log1p(s) - s
    assert np.allclose(f.eval_F(0.0, 0.0, s), exact, rtol=1e-8, atol=1e-12)
    del g


def test_residual_gaussian_against_symbolic():
    # symbolic oracle: residual = (6 - r^2 - z^2) u for V = 1, f = 0
    errs = []
    for n in (65, 129, 257):
        g = build_grid(8, 8, n, n)
        u = gaussian(g)
        res = pde_residual(u, Potential.constant(g, 1.0), zero_nonlinearity()).values
        exact = (6.0 - g.R**2 - g.Z**2) * u.values
        errs.append(np.max(np.abs(res - exact)[g.interior]))
    assert math.log2(errs[0] / errs[1]) > 1.9 and math.log2(errs[1] / errs[2]) > 1.9


def test_residual_boundary_zero(mid):
    u = field_corpus(mid, 2, 1)[0]
    res = pde_residual(u, Potential.constant(mid, 1.0), power_nonlinearity(3)).values
    assert np.all(res[-1] == 0) and np.all(res[:, 0] == 0) and np.all(res[:, -1] == 0)


def test_residual_is_gradient_of_J(mid):
    V, f = Potential.constant(mid, 1.0), power_nonlinearity(3)
    rng = np.random.default_rng(11)
    us = field_corpus(mid, 21, 3)
    for u in us:
        v = CylField(mid, rng.normal(size=mid.shape) * mid.interior)
        eps = 1e-6
        fd = (energy_J(u + v * eps, V, f) - energy_J(u - v * eps, V, f)) / (2 * eps)
        an = float(np.sum(mid.w3 * pde_residual(u, V, f).values * v.values))
        assert abs(fd - an) <= 1e-6 * (abs(an) + 1e-12 * abs(energy_J(u, V, f)))


def test_nehari_residual_zero_on_projection(mid):
    V, f = Potential.constant(mid, 1.0), log_nonlinearity()
    u = field_corpus(mid, 4, 1)[0]
    assert nehari_residual(u * nehari_scale(u, V, f), V, f) < 1e-10


def test_scaling_properties(mid):
    # s -> I'(su)[su]/s^2 strictly increasing; I(su)/s^2 increasing without bound
    for f in (power_nonlinearity(3), power_nonlinearity(2), log_nonlinearity()):
        u = field_corpus(mid, 9, 1)[0]
        a = [nonlinear_Iprime(u * s, f) / s**2 for s in (0.5, 1, 2, 4)]
        assert all(x < y for x, y in zip(a, a[1:]))
        b = [nonlinear_I(u * s, f) / s**2 for s in (1, 10, 100)]
        assert b[0] < b[1] < b[2] and b[2] > 5 * b[0]


def test_superlinear_small_amplitude(mid):
    f = power_nonlinearity(3)
    u = gaussian(mid)
    V = Potential.constant(mid, 1.0)
    q = quadratic_form(u, V)
    vals = [nonlinear_Iprime(u * lam, f) / (lam**2 * q) for lam in (1e-2, 1e-3, 1e-4)]
    assert vals[0] > vals[1] > vals[2]


# -- validators -------------------------------------------------------------------


@pytest.mark.parametrize("f", [power_nonlinearity(3), log_nonlinearity(), power_nonlinearity(2), power_nonlinearity(4.5)])
def test_validators_pass(mid, f):
    rep = validate_nonlinearity(f, mid)
    assert rep.all_passed, rep.lines()


def test_constant_f_fails_ii_and_iii(mid):
    rep = validate_nonlinearity(custom_nonlinearity(lambda r, z, s: np.ones_like(s * r), 3.0), mid)
    assert not rep["ii"].passed and not rep["iii"].passed


def test_bounded_f_fails_iv(mid):
    rep = validate_nonlinearity(custom_nonlinearity(lambda r, z, s: s / (1 + s) + 0 * r, 3.0), mid)
    assert rep.failed() == ["iv"]


def test_growth_too_fast_fails_i(mid):
    rep = validate_nonlinearity(custom_nonlinearity(lambda r, z, s: s**2 + 0 * r, 3.0), mid)
    assert not rep["i"].passed


def test_z_increasing_gamma_fails_v(mid):
    f = power_nonlinearity(3, gamma=lambda r, z: 1.0 + z * z)
    assert not validate_nonlinearity(f, mid)["v"].passed
    f = power_nonlinearity(3, gamma=lambda r, z: 1.0 + np.exp(-z * z))
    assert validate_nonlinearity(f, mid)["v"].passed


def test_validator_ladder_checked(mid):
    with pytest.raises(ValueError):
        validate_nonlinearity(power_nonlinearity(3), mid, [1.0, 0.5, 2.0, 3.0])


def test_exponent_range():
    with pytest.raises(ValueError):
        power_nonlinearity(5.0)
    with pytest.raises(ValueError):
        power_nonlinearity(1.0)


def test_grid_gamma_evaluates_exactly_on_nodes(mid, tmp_path):
    gam = mid.sample(lambda R, Z: 1.0 + 0.5 * np.exp(-R**2 - Z**2))
    f = power_nonlinearity(3, gamma=gam)
    u = gaussian(mid)
    direct = float(np.sum(mid.w3 * gam.values * mid.R**2 * u.values**4))
    assert math.isclose(nonlinear_Iprime(u, f), direct, rel_tol=1e-14)
