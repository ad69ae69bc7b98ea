import numpy as np
import pytest
from scipy.linalg import expm

from skmag.dynamics import (
    _expm_taylor,
    apply_S_mu_eps,
    apply_T0,
    apply_T_eps,
    characteristic_rates,
    complex_to_real,
    duhamel_first_component,
    duhamel_first_order,
    exp_j_scaled,
    generator_matrix,
    j_inverse,
    j_matrix,
    propagator_complex,
    second_order_propagator,
)
from skmag.errors import InvalidArgument, RefinementRequired
from skmag.spectral import PhasePoint, SpectralField, dirichlet_eigens, weighted_phase_norm, sobolev_norm


def rk4(matrix, y0, t, dt):
    y = np.array(y0, dtype=float)
    for _ in range(int(round(t / dt))):
        k1 = matrix @ y
        k2 = matrix @ (y + 0.5 * dt * k1)
        k3 = matrix @ (y + 0.5 * dt * k2)
        k4 = matrix @ (y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_friction_matrix():
    for eps in (0.0, 0.3, 2.0):
        J = j_matrix(eps)
        assert np.linalg.det(J) == pytest.approx(1 + eps**2)
        np.testing.assert_allclose(J @ j_inverse(eps), np.eye(2), atol=1e-15)
    np.testing.assert_array_equal(j_matrix(0.0).T, -j_matrix(0.0))


def test_exp_j_scaled_examples():
    np.testing.assert_allclose(exp_j_scaled(0.0, np.pi / 2), [[0, -1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(exp_j_scaled(0.7, 0.0), np.eye(2))
    assert np.linalg.norm(exp_j_scaled(1.0, 1.0)) == pytest.approx(2.3316, abs=1e-4)
    assert np.linalg.norm(exp_j_scaled(1.0, 1.0)) == pytest.approx(np.exp(0.5) * np.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("eps,t", [(0.0, 1.3), (0.5, -2.0), (3.0, 0.4)])
def test_exp_j_scaled_matches_expm(eps, t):
    np.testing.assert_allclose(exp_j_scaled(eps, t), expm(t * j_inverse(eps)), rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(exp_j_scaled(eps, t) @ exp_j_scaled(eps, -t), np.eye(2), atol=1e-14)


def test_golden_rates():
    slow, fast = characteristic_rates(1.0, 0.0, 1.0)
    rates = sorted([complex(slow), complex(fast)], key=lambda z: z.imag)
    np.testing.assert_allclose(rates, [1j * (1 - np.sqrt(5)) / 2, 1j * (1 + np.sqrt(5)) / 2], atol=1e-15)


def test_propagator_identity_at_zero():
    np.testing.assert_allclose(second_order_propagator(0.1, 0.5, 4.0, 0.0).matrix, np.eye(4), atol=1e-15)


def test_propagator_against_rk4():
    mu, eps, alpha = 0.1, 0.5, 4.0
    A = generator_matrix(mu, eps, alpha)
    P = second_order_propagator(mu, eps, alpha, 1.0).matrix
    for y0 in np.eye(4):
        ref = rk4(A, y0, 1.0, 1e-5)
        np.testing.assert_allclose(P @ y0, ref, rtol=1e-9, atol=1e-9 * np.max(np.abs(ref)))


@pytest.mark.parametrize("mu,eps,alpha,t", [(0.1, 0.5, 4, 1), (1, 0, 1, 3), (1e-4, 1, 25, 0.7),
                                            (0.01, 0, 1024, 0.3), (2, 10, 1, -0.5)])
def test_propagator_against_expm(mu, eps, alpha, t):
    P = second_order_propagator(mu, eps, alpha, t).matrix
    ref = expm(t * generator_matrix(mu, eps, alpha))
    np.testing.assert_allclose(P, ref, rtol=1e-11, atol=1e-11 * np.max(np.abs(ref)))


def test_taylor_fallback_matches_closed_form():
    mu, eps, alpha, t = 0.3, 0.2, 2.0, 1.1
    gen = np.array([[0, 1], [-alpha / mu, -(eps - 1j) / mu]]) * t
    np.testing.assert_allclose(_expm_taylor(gen[None])[0], propagator_complex(mu, eps, alpha, t), rtol=1e-12)


def test_complex_and_real_paths_agree():
    rng = np.random.default_rng(3)
    mu, eps, alpha, t = 0.05, 0.3, 9.0, 0.8
    p = propagator_complex(mu, eps, alpha, t)
    x, y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    u, v = p[0, 0] * x + p[0, 1] * y, p[1, 0] * x + p[1, 1] * y
    real = complex_to_real(p) @ np.array([x.real, x.imag, y.real, y.imag])
    np.testing.assert_allclose(real, [u.real, u.imag, v.real, v.imag], rtol=1e-12, atol=1e-14)


def test_group_law():
    eig = dirichlet_eigens(np.pi, 8)
    rng = np.random.default_rng(4)
    z = PhasePoint(SpectralField(rng.standard_normal((8, 2))), SpectralField(rng.standard_normal((8, 2))))
    two = apply_S_mu_eps(0.2, 0.4, 0.7, apply_S_mu_eps(0.2, 0.4, 0.3, z, eig), eig)
    one = apply_S_mu_eps(0.2, 0.4, 1.0, z, eig)
    np.testing.assert_allclose(two.u.coeffs, one.u.coeffs, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(two.v.coeffs, one.v.coeffs, rtol=1e-10, atol=1e-11)
    back = apply_S_mu_eps(0.2, 0.4, -1.0, one, eig)
    np.testing.assert_allclose(back.u.coeffs, z.u.coeffs, atol=1e-9)


def test_undamped_conserves_weighted_norm():
    eig = dirichlet_eigens(np.pi, 16)
    rng = np.random.default_rng(5)
    z = PhasePoint(SpectralField(rng.standard_normal((16, 2))), SpectralField(rng.standard_normal((16, 2))))
    for mu in (1.0, 0.1, 0.01):
        zt = apply_S_mu_eps(mu, 0.0, 2.3, z, eig)
        assert weighted_phase_norm(zt, mu, eig) == pytest.approx(weighted_phase_norm(z, mu, eig), rel=1e-10)


def test_invalid_mode_parameters():
    with pytest.raises(InvalidArgument):
        second_order_propagator(0.0, 0.1, 1.0, 1.0)
    with pytest.raises(InvalidArgument):
        second_order_propagator(1.0, 0.1, -1.0, 1.0)


def test_T_eps_examples():
    eig = dirichlet_eigens(np.pi, 1)
    x = SpectralField(np.array([[0.6, 0.8]]))
    np.testing.assert_allclose(apply_T_eps(0.3, 0.0, x, eig).coeffs, x.coeffs)
    assert sobolev_norm(apply_T_eps(1.0, 1.0, x, eig), 0.0, eig) == pytest.approx(np.exp(-0.5), rel=1e-14)
    # T_eps(t) on a mode is exp_j_scaled(eps, -alpha t)
    np.testing.assert_allclose(apply_T_eps(0.4, 1.7, x, eig).coeffs[0], exp_j_scaled(0.4, -1.7) @ x.coeffs[0],
                               rtol=1e-14)
    assert sobolev_norm(apply_T0(5.0, x, eig), 1.0, eig) == pytest.approx(1.0, rel=1e-15)


def test_duhamel_zero_forcing():
    eig = dirichlet_eigens(np.pi, 3)
    psi = np.zeros((101, 3), dtype=complex)
    assert np.all(duhamel_first_component(0.5, 0.2, psi, 0.01, eig).coeffs == 0)
    assert np.all(duhamel_first_order(0.2, psi, 0.01, eig).coeffs == 0)


def test_duhamel_constant_forcing_closed_form():
    mu, eps, alpha, t = 0.5, 0.3, 4.0, 1.0
    eig = dirichlet_eigens(np.pi / 2, 1)
    c = np.array([0.7, -0.2])
    psi = np.tile((c[0] + 1j * c[1]), (1001, 1))
    got = duhamel_first_component(mu, eps, psi, t / 1000, eig, rtol=1e-8).coeffs[0]
    # solve z' = A z + f with f = (0, 0, c/mu) through the augmented exponential
    A = generator_matrix(mu, eps, alpha)
    aug = np.zeros((5, 5))
    aug[:4, :4] = A
    aug[2:4, 4] = c / mu
    ref = expm(aug * t)[:2, 4]
    np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-10)


def test_duhamel_first_order_constant_forcing():
    eps, alpha, t = 0.4, 1.0, 2.0
    eig = dirichlet_eigens(np.pi, 1)
    psi = np.full((2001, 1), 1.0 + 0.5j)
    got = duhamel_first_order(eps, psi, t / 2000, eig).as_complex()[0]
    a = -alpha / (eps - 1j)
    ref = (np.exp(a * t) - 1) / a / (eps - 1j) * (1.0 + 0.5j)
    assert abs(got - ref) < 1e-10


def test_duhamel_first_order_is_small_mass_limit():
    eps = 0.5
    eig = dirichlet_eigens(np.pi, 2)
    t = 1.0
    limit = duhamel_first_order(eps, np.full((20001, 2), 1.0 + 0j), t / 20000, eig).as_complex()
    gaps = []
    for mu in (1e-1, 1e-2, 1e-3):
        val = duhamel_first_component(mu, eps, np.full((20001, 2), 1.0 + 0j), t / 20000, eig).as_complex()
        gaps.append(np.max(np.abs(val - limit)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


def test_duhamel_refuses_coarse_grid():
    eig = dirichlet_eigens(np.pi, 1)
    with pytest.raises(RefinementRequired):
        duhamel_first_component(0.01, 0.5, np.ones((11, 1), dtype=complex), 0.01, eig)
