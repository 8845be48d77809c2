import numpy as np
import pytest

from spatialcox import BasisSpec, project_samples, sine_basis_eval, synthesize
from spatialcox.errors import InsufficientResolutionError, ParameterDomainError


def test_sine_eval_known_values():
    spec = BasisSpec(support_length=1.0, n_modes=4)
    assert sine_basis_eval(spec, 1, 0.5) == pytest.approx(1.0)
    assert sine_basis_eval(spec, 2, 0.5) == pytest.approx(0.0, abs=1e-15)
    spec2 = BasisSpec(support_length=2.0, n_modes=4)
    # sin(pi*3*0.4/2) = sin(0.6*pi), frozen from direct evaluation
    assert sine_basis_eval(spec2, 3, 0.4) == pytest.approx(0.9510565162951535, abs=1e-12)


def test_sine_eval_domain_errors():
    spec = BasisSpec(support_length=1.0, n_modes=2)
    with pytest.raises(ParameterDomainError):
        sine_basis_eval(spec, 0, 0.5)
    with pytest.raises(ParameterDomainError):
        sine_basis_eval(spec, 3, 0.5)
    with pytest.raises(ParameterDomainError):
        sine_basis_eval(spec, 1, 1.5)
    with pytest.raises(ParameterDomainError):
        BasisSpec(support_length=-1.0, n_modes=2)


def test_sine_eval_normalized_flag():
    spec = BasisSpec(support_length=2.0, n_modes=1)
    raw = sine_basis_eval(spec, 1, 0.7)
    assert sine_basis_eval(spec, 1, 0.7, normalized=True) == pytest.approx(raw * 1.0)


def test_projection_recovers_single_mode():
    spec = BasisSpec(support_length=1.0, n_modes=3)
    t = np.linspace(0, 1, 200)
    f = np.sin(np.pi * t)
    c = project_samples(t, f, spec)
    assert np.allclose(c, [1.0, 0.0, 0.0], atol=1e-6)


def test_projection_zero_and_linear_combination():
    spec = BasisSpec(support_length=1.0, n_modes=3)
    t = np.linspace(0, 1, 400)
    assert np.allclose(project_samples(t, np.zeros_like(t), spec), 0.0)
    f = 2.0 * np.sin(np.pi * t) - 3.0 * np.sin(2 * np.pi * t)
    assert np.allclose(project_samples(t, f, spec), [2.0, -3.0, 0.0], atol=1e-6)


def test_projection_resolution_errors():
    spec = BasisSpec(support_length=1.0, n_modes=5)
    with pytest.raises(InsufficientResolutionError):
        project_samples(np.linspace(0, 1, 10), np.zeros(10), spec)
    with pytest.raises(InsufficientResolutionError):
        project_samples(np.linspace(0, 0.8, 50), np.zeros(50), spec)


def test_project_synthesize_roundtrip_on_span():
    spec = BasisSpec(support_length=3.0, n_modes=6)
    t = np.linspace(0, 3.0, 3000)
    rng = np.random.default_rng(5)
    coeffs = rng.normal(size=6)
    f = synthesize(coeffs, t, spec)
    assert np.allclose(project_samples(t, f, spec), coeffs, atol=1e-8)


def test_discrete_orthogonality_2000_points():
    spec = BasisSpec(support_length=2.5, n_modes=6)
    t = np.linspace(0, 2.5, 2000)
    from spatialcox import design_matrix
    phi = design_matrix(spec, t)
    gram = np.trapezoid(phi[:, None, :] * phi[None, :, :], t, axis=-1)
    expect = np.eye(6) * spec.support_length / 2.0
    assert np.max(np.abs(gram - expect)) < 1e-6


def test_normalized_coefficients_scale():
    spec = BasisSpec(support_length=2.0, n_modes=3)
    t = np.linspace(0, 2.0, 500)
    f = np.sin(np.pi * t / 2.0)
    raw = project_samples(t, f, spec)
    normed = project_samples(t, f, spec, normalized=True)
    assert np.allclose(normed, raw * np.sqrt(spec.support_length / 2.0), atol=1e-12)


def test_batched_projection():
    spec = BasisSpec(support_length=1.0, n_modes=2)
    t = np.linspace(0, 1, 101)
    batch = np.stack([np.sin(np.pi * t), 4 * np.sin(2 * np.pi * t)])
    c = project_samples(t, batch, spec)
    assert c.shape == (2, 2)
    assert np.allclose(c, [[1, 0], [0, 4]], atol=1e-4)
