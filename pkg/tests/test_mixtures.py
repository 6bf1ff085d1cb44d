import numpy as np
import pytest

from fmtt import (GaussianMixture, InterpolantSchedule, MixturePath,
                  finite_diff_grad, standard_normal)


def two_mode_1d():
    return GaussianMixture.isotropic([0.5, 0.5], [[-2.0], [2.0]], 0.25)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        GaussianMixture([0.5, 0.4], [[-1.0], [1.0]], np.ones((2, 1, 1)))


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        GaussianMixture([1.0, 0.0], [[-1.0], [1.0]], np.ones((2, 1, 1)))


def test_covariance_must_be_spd():
    with pytest.raises(Exception):
        GaussianMixture([1.0], [[0.0]], [[[-1.0]]])
    with pytest.raises(ValueError):
        GaussianMixture([1.0], [[0.0, 0.0]], [np.array([[1.0, 0.5], [0.4, 1.0]])])


def test_sampling_moments_match_law():
    rng = np.random.default_rng(0)
    x = standard_normal(1).sample(10**6, rng)
    assert abs(float(x.mean())) < 4e-3
    assert abs(float(x.var()) - 1.0) < 0.01


def test_sampling_degenerate_covariance_concentrates():
    gm = GaussianMixture([1.0], [[2.0]], [[[1e-12]]])
    x = gm.sample(1000, np.random.default_rng(1))
    assert np.all(np.abs(x - 2.0) < 1e-5)


def test_sampling_is_deterministic_per_seed():
    gm = two_mode_1d()
    a = gm.sample(100, np.random.default_rng(5))
    b = gm.sample(100, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_sample_rejects_zero_count():
    with pytest.raises(ValueError):
        standard_normal(1).sample(0, np.random.default_rng(0))


def test_yaml_roundtrip():
    gm = two_mode_1d()
    back = GaussianMixture.from_yaml(gm.to_yaml())
    assert np.allclose(back.means, gm.means)
    assert np.allclose(back.covariances, gm.covariances)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        GaussianMixture.from_dict({"weights": [1.0], "means": [[0.0]],
                                   "covariances": [[[1.0]]], "bogus": 1})


def test_path_components_pairwise():
    path = MixturePath(standard_normal(1), two_mode_1d())
    w, m, c = path.components(0.5)
    assert np.allclose(w, [0.5, 0.5])
    assert np.allclose(sorted(m[:, 0]), [-1.0, 1.0])
    assert np.allclose(c[:, 0, 0], 0.3125)


def test_path_components_boundary():
    path = MixturePath(standard_normal(1), two_mode_1d())
    w0, m0, c0 = path.components(0.0)
    assert np.allclose(m0, 0.0) and np.allclose(c0[:, 0, 0], 1.0)
    w1, m1, c1 = path.components(1.0)
    assert np.allclose(sorted(m1[:, 0]), [-2.0, 2.0])
    assert np.allclose(c1[:, 0, 0], 0.25)


def test_dynamics_closed_form_point():
    path = MixturePath(standard_normal(1), standard_normal(1))
    d = path.dynamics(0.25, np.array([2.0]))
    kappa = 2 * 0.0625 - 0.5 + 1
    assert d.velocity[0] == pytest.approx(-1.6, abs=1e-12)
    assert d.score[0] == pytest.approx(-3.2, abs=1e-12)
    assert d.denoiser[0] == pytest.approx(0.8, abs=1e-12)
    assert kappa == 0.625


def test_score_velocity_identity_linear_schedule():
    path = MixturePath(standard_normal(1), two_mode_1d())
    for t in np.linspace(0.0, 0.99, 15):
        for x in np.linspace(-3, 3, 7):
            d = path.dynamics(t, np.array([x]))
            assert d.score[0] == pytest.approx((t * d.velocity[0] - x) / (1 - t),
                                               abs=1e-10)


def test_symmetric_point_has_zero_drift():
    path = MixturePath(standard_normal(1), two_mode_1d())
    d = path.dynamics(0.5, np.array([0.0]))
    assert abs(d.velocity[0]) < 1e-14


def test_dynamics_rejects_non_finite():
    path = MixturePath(standard_normal(1), standard_normal(1))
    with pytest.raises(ValueError):
        path.dynamics(0.5, np.array([np.nan]))


def test_interpolation_identity():
    target = GaussianMixture.isotropic([0.3, 0.7], [[-1.0, 0.5], [2.0, -0.5]], 0.4)
    path = MixturePath(standard_normal(2), target)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 2))
    for t in (0.2, 0.6, 0.95):
        a, b = path.schedule.alpha(t), path.schedule.beta(t)
        e0, e1 = path.conditional_means(t, x)
        assert np.max(np.abs(a * e0 + b * e1 - x)) < 1e-10


def test_score_matches_fd_gradient_of_log_density():
    path = MixturePath(standard_normal(1), two_mode_1d())
    for t in (0.3, 0.8):
        for x in (-1.2, 0.4, 2.1):
            s = path.dynamics(t, np.array([x])).score[0]
            fd = finite_diff_grad(lambda z: path.dynamics(t, z).log_density, np.array([x]))
            assert s == pytest.approx(fd[0], abs=1e-6)


def test_velocity_jacobian_matches_fd():
    target = GaussianMixture.isotropic([0.4, 0.6], [[-1.0, 0.0], [1.5, 1.0]], 0.3)
    path = MixturePath(standard_normal(2), target)
    x = np.array([0.3, -0.7])
    jac = path.velocity_jacobian(0.6, x)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (path.dynamics(0.6, x + e).velocity - path.dynamics(0.6, x - e).velocity) / (2 * h)
        assert np.max(np.abs(jac[:, i] - fd)) < 1e-6


def test_denoiser_jacobian_matches_fd():
    path = MixturePath(standard_normal(1), two_mode_1d())
    x = np.array([0.4])
    jac = path.denoiser_jacobian(0.5, x)
    h = 1e-6
    fd = (path.dynamics(0.5, x + h).denoiser - path.dynamics(0.5, x - h).denoiser) / (2 * h)
    assert jac[0, 0] == pytest.approx(fd[0], abs=1e-6)


def test_continuity_equation_residual():
    path = MixturePath(standard_normal(1), two_mode_1d())
    h = 1e-5
    for t in (0.25, 0.5, 0.75):
        for x in np.linspace(-2, 2, 9):
            pt = np.array([x])
            dlog = (path.dynamics(t + h, pt).log_density
                    - path.dynamics(t - h, pt).log_density) / (2 * h)
            div = (path.dynamics(t, pt + h).velocity[0]
                   - path.dynamics(t, pt - h).velocity[0]) / (2 * h)
            d = path.dynamics(t, pt)
            assert abs(dlog + div + d.velocity[0] * d.score[0]) < 1e-4


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        MixturePath(standard_normal(1), standard_normal(2))
