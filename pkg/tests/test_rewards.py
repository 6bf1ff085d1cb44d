import numpy as np
import pytest

from fmtt import (FlowMapEvaluator, GaussianMixture, LinearReward,
                  LogResponsibilityReward, MixturePath, QuadraticReward,
                  TimeDependentReward, ZeroReward, finite_diff_grad,
                  hutchinson_laplacian, standard_normal)


def std_path():
    return MixturePath(standard_normal(1), standard_normal(1))


def two_mode():
    return GaussianMixture.isotropic([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], 0.25)


def kappa(t):
    return 2 * t * t - 2 * t + 1


def test_linear_reward_and_grad():
    r = LinearReward([0.5, -1.0])
    x = np.array([[2.0, 1.0]])
    assert r.value(x)[0] == pytest.approx(0.0)
    assert np.allclose(r.grad(x), [[0.5, -1.0]])


def test_quadratic_reward_and_grad():
    r = QuadraticReward(2.0)
    x = np.array([[1.0, 2.0]])
    assert r.value(x)[0] == pytest.approx(-5.0)
    assert np.allclose(r.grad(x), [[-2.0, -4.0]])


def test_log_responsibility_reward_matches_posterior():
    gm = two_mode()
    r = LogResponsibilityReward(gm, 1, 0.1)
    x = np.array([[2.0, 0.0]])
    assert r.value(x)[0] == pytest.approx(0.1 * gm.log_responsibilities(x)[0, 1])


def test_log_responsibility_grad_matches_fd():
    gm = two_mode()
    r = LogResponsibilityReward(gm, 1, 0.1)
    for pt in ([0.3, -0.2], [-1.0, 0.5]):
        g = r.grad(np.array([pt]))[0]
        fd = finite_diff_grad(lambda z: r.value(z[None, :])[0], np.array(pt))
        assert np.max(np.abs(g - fd)) < 1e-6


def test_log_responsibility_component_range():
    with pytest.raises(ValueError):
        LogResponsibilityReward(two_mode(), 5)


def test_rt_eval_examples():
    path = std_path()
    naive = TimeDependentReward(LinearReward([1.0]), "naive", path)
    assert naive.value(0.25, np.array([[2.0]]))[0] == pytest.approx(0.5)
    den = TimeDependentReward(LinearReward([1.0]), "denoiser", path)
    assert den.value(0.25, np.array([[2.0]]))[0] == pytest.approx(0.25 * 0.8)
    flow = TimeDependentReward(LinearReward([1.0]), "flowmap_exact", path)
    expected = 0.25 * 2.0 * np.sqrt(1.0 / kappa(0.25))
    assert flow.value(0.25, np.array([[2.0]]))[0] == pytest.approx(expected, abs=1e-6)


def test_rt_grad_examples():
    path = std_path()
    naive = TimeDependentReward(LinearReward([0.5]), "naive", path)
    assert naive.grad(0.5, np.array([[3.0]]))[0, 0] == pytest.approx(0.25)
    flow = TimeDependentReward(LinearReward([1.0]), "flowmap_exact", path)
    assert np.allclose(flow.grad(0.0, np.array([[1.7]])), 0.0)
    g = flow.grad(0.25, np.array([[2.0]]))[0, 0]
    assert g == pytest.approx(0.25 * np.sqrt(1.0 / kappa(0.25)), abs=1e-6)


def test_r0_zero_and_r1_identity_in_every_mode():
    path = MixturePath(standard_normal(2), two_mode())
    base = QuadraticReward(0.3)
    x = np.array([[0.5, -1.0], [2.0, 0.0]])
    for mode in ("naive", "denoiser", "flowmap_exact", "flowmap_ksteps"):
        rt = TimeDependentReward(base, mode, path)
        assert np.allclose(rt.value(0.0, x), 0.0)
        assert np.allclose(rt.value(1.0, x), base.value(x), atol=1e-9)


def test_time_derivative_examples():
    path = std_path()
    naive = TimeDependentReward(LinearReward([1.0]), "naive", path)
    d = naive.time_derivative(0.4, np.array([[2.0]]), 1e-4)
    assert d[0] == pytest.approx(2.0, abs=1e-8)
    zero = TimeDependentReward(ZeroReward(), "naive", path)
    assert zero.time_derivative(0.4, np.array([[2.0]]))[0] == 0.0


def test_time_derivative_one_sided_at_boundary():
    path = std_path()
    naive = TimeDependentReward(LinearReward([1.0]), "naive", path)
    assert naive.time_derivative(1.0, np.array([[2.0]]), 1e-4)[0] == pytest.approx(2.0, abs=1e-8)


def test_transport_identity_flowmap_mode():
    path = std_path()
    rt = TimeDependentReward(LinearReward([1.0]), "flowmap_exact", path,
                             FlowMapEvaluator(path, rel_tol=1e-10, abs_tol=1e-12))
    for t in (0.1, 0.5, 0.9):
        for x in (-1.0, 0.5, 2.0):
            pt = np.array([x])
            b = path.dynamics(t, pt).velocity
            lhs = float(b @ rt.grad(t, pt)[0]) + float(rt.time_derivative(t, pt)[0])
            assert lhs == pytest.approx(float(rt.terminal_lookahead(t, pt)[0]), abs=1e-4)


def test_grad_matches_fd_across_modes():
    path = MixturePath(standard_normal(2), two_mode())
    base = LinearReward([0.4, -0.1])
    for mode in ("naive", "denoiser", "flowmap_exact", "flowmap_ksteps"):
        rt = TimeDependentReward(base, mode, path)
        pt = np.array([0.6, -0.3])
        g = rt.grad(0.7, pt)[0]
        fd = finite_diff_grad(lambda z: rt.value(0.7, z[None, :])[0], pt)
        assert np.max(np.abs(g - fd)) < 1e-5


def test_k_step_mode_error_decreases_with_k():
    path = std_path()
    base = LinearReward([1.0])
    exact = TimeDependentReward(base, "flowmap_exact", path).value(0.3, np.array([[1.5]]))[0]
    errs = [abs(TimeDependentReward(base, "flowmap_ksteps", path, k=k)
                .value(0.3, np.array([[1.5]]))[0] - exact) for k in (1, 4, 16)]
    assert errs[0] > errs[1] > errs[2]


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        TimeDependentReward(ZeroReward(), "psychic", std_path())


def test_hutchinson_quadratic():
    path = MixturePath(standard_normal(2), standard_normal(2))
    rt = TimeDependentReward(QuadraticReward(1.0), "naive", path)
    est = hutchinson_laplacian(rt, 1.0, np.zeros((1, 2)), 1000, 1e-3,
                               np.random.default_rng(8))
    assert est[0] == pytest.approx(-2.0, abs=0.2)


def test_hutchinson_affine_is_zero():
    path = std_path()
    rt = TimeDependentReward(LinearReward([2.0]), "naive", path)
    est = hutchinson_laplacian(rt, 0.5, np.zeros((1, 1)), 100, 1e-3,
                               np.random.default_rng(9), "rademacher")
    assert abs(est[0]) < 1e-8


def test_hutchinson_stderr_scaling():
    path = MixturePath(standard_normal(2), standard_normal(2))
    rt = TimeDependentReward(QuadraticReward(1.0), "flowmap_ksteps", path, k=2)
    x = np.array([[0.5, -0.5]])

    def spread(m, seeds):
        vals = [hutchinson_laplacian(rt, 0.5, x, m, 1e-3,
                                     np.random.default_rng(s))[0] for s in seeds]
        return np.std(vals, ddof=1)

    s1 = spread(50, range(20))
    s4 = spread(200, range(20, 40))
    assert s4 < 0.75 * s1


def test_hutchinson_validates_inputs():
    path = std_path()
    rt = TimeDependentReward(ZeroReward(), "naive", path)
    with pytest.raises(ValueError):
        hutchinson_laplacian(rt, 0.5, np.zeros((1, 1)), 0)
    with pytest.raises(ValueError):
        hutchinson_laplacian(rt, 0.5, np.zeros((1, 1)), 4, eps=0.0)
