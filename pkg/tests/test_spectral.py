import numpy as np
import pytest

from skmag.errors import InvalidArgument
from skmag.spectral import (
    EigenSequence,
    PhasePoint,
    SpectralField,
    analyze,
    dirichlet_eigens,
    phase_norm,
    power_law_eigens,
    project,
    sobolev_norm,
    synthesize,
    weighted_phase_norm,
)


def field(*pairs):
    return SpectralField(np.array(pairs, dtype=float))


def test_dirichlet_eigenvalues():
    np.testing.assert_allclose(dirichlet_eigens(np.pi, 3).values, [1, 4, 9], rtol=1e-15)
    np.testing.assert_allclose(dirichlet_eigens(np.pi, 1).values, [1], rtol=1e-15)
    np.testing.assert_allclose(dirichlet_eigens(2 * np.pi, 1).values, [0.25], rtol=1e-15)


@pytest.mark.parametrize("L,n", [(0, 3), (-1, 3), (np.pi, 0), (np.pi, -2)])
def test_dirichlet_rejects_bad_input(L, n):
    with pytest.raises(InvalidArgument):
        dirichlet_eigens(L, n)


def test_eigen_sequence_validation():
    with pytest.raises(InvalidArgument):
        EigenSequence([1.0, 0.5])
    with pytest.raises(InvalidArgument):
        EigenSequence([0.0, 1.0])
    assert power_law_eigens(2.0, 1.5, 4).values[-1] == pytest.approx(2 * 4**1.5)


def test_sobolev_norm_examples():
    eig = EigenSequence([1.0, 4.0])
    assert sobolev_norm(field((1, 0)), 3.7, eig) == pytest.approx(1.0)
    assert sobolev_norm(field((0, 0), (3, 4)), 1.0, eig) == pytest.approx(10.0)
    assert sobolev_norm(SpectralField.zeros(2), 1.0, eig) == 0.0


def test_sobolev_norm_length_mismatch():
    with pytest.raises(InvalidArgument):
        sobolev_norm(SpectralField.zeros(3), 0.0, EigenSequence([1.0, 2.0]))


def test_phase_norm_examples():
    eig = EigenSequence([4.0])
    x = field((1, 0))
    zero = SpectralField.zeros(1)
    assert phase_norm(PhasePoint(x, zero), 1.0, eig) == pytest.approx(sobolev_norm(x, 1.0, eig))
    assert phase_norm(PhasePoint(zero, x), 1.0, eig) == pytest.approx(sobolev_norm(x, 0.0, eig))
    assert phase_norm(PhasePoint(x, x), 0.0, eig) == pytest.approx(np.sqrt(1.25))


def test_weighted_phase_norm_examples():
    eig = EigenSequence([1.0])
    x = field((1, 0))
    zero = SpectralField.zeros(1)
    assert weighted_phase_norm(PhasePoint(x, zero), 123.0, eig) == pytest.approx(1.0)
    assert weighted_phase_norm(PhasePoint(zero, x), 4.0, eig) == pytest.approx(2.0)
    assert weighted_phase_norm(PhasePoint(zero, zero), 4.0, eig) == 0.0
    with pytest.raises(InvalidArgument):
        weighted_phase_norm(PhasePoint(x, x), 0.0, eig)


def test_phase_point_mode_mismatch():
    with pytest.raises(InvalidArgument):
        PhasePoint(SpectralField.zeros(2), SpectralField.zeros(3))


def test_project():
    rng = np.random.default_rng(1)
    f = SpectralField(rng.standard_normal((5, 2)))
    np.testing.assert_array_equal(project(f, 5).coeffs, f.coeffs)
    np.testing.assert_array_equal(project(f, 0).coeffs, 0.0)
    np.testing.assert_array_equal(project(project(f, 2), 2).coeffs, project(f, 2).coeffs)
    with pytest.raises(InvalidArgument):
        project(f, 6)


def test_non_finite_coefficients_rejected():
    with pytest.raises(InvalidArgument):
        SpectralField(np.array([[np.nan, 0.0]]))


def test_transform_round_trip():
    rng = np.random.default_rng(2)
    f = SpectralField(rng.standard_normal((12, 2)))
    back = analyze(synthesize(f, 31, 2.5), 2.5, n=12)
    np.testing.assert_allclose(back.coeffs, f.coeffs, rtol=1e-12, atol=1e-12)


def test_synthesize_first_mode_midpoint():
    # grid of 3 interior points on [0, pi] puts the middle one at pi/2
    vals = synthesize(field((1, 0)), 3, np.pi)
    np.testing.assert_allclose(vals[1], [np.sqrt(2 / np.pi), 0.0], rtol=1e-14)
    np.testing.assert_array_equal(synthesize(SpectralField.zeros(4), 9, 1.0), 0.0)


def test_synthesize_grid_too_small():
    with pytest.raises(InvalidArgument):
        synthesize(SpectralField.zeros(5), 4, 1.0)
