import warnings

import numpy as np
import pytest

from sivstrain.fitting import (
    FitError,
    FitProblem,
    GridResolutionWarning,
    IdentifiabilityWarning,
    exp_relaxation,
    exp_relaxation_jacobian,
    fit_exp_relaxation,
    fit_linear,
    fit_lorentzian_dips,
    fit_splitting,
    fit_strain_response,
    format_uncertainty,
    lines_jacobian,
    lines_model,
    lorentzian_dips,
    lorentzian_dips_jacobian,
    nlls_fit,
    numeric_jacobian,
    splitting_jacobian,
    splitting_model,
)
from sivstrain.levels import optical_lines


def central_diff(f, p, rel=1e-6, floor=1e-9):
    p = np.asarray(p, dtype=float)
    cols = []
    for j in range(p.size):
        h = max(rel * abs(p[j]), floor)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((f(up) - f(dn)) / (2 * h))
    return np.column_stack(cols)


def rosenbrock(p):
    return np.array([10.0 * (p[1] - p[0] ** 2), 1.0 - p[0]])


# ---------------------------------------------------------------- engine


def test_rosenbrock_minimum():
    res = nlls_fit(FitProblem(rosenbrock, [-1.2, 1.0]))
    assert res.converged
    np.testing.assert_allclose(res.params, [1.0, 1.0], atol=1e-6)
    assert res.residual_norm < 1e-8


def test_rosenbrock_analytic_jacobian():
    def jac(p):
        # jacobian of the residual itself
        return np.array([[-20.0 * p[0], 10.0], [-1.0, 0.0]])

    res = nlls_fit(FitProblem(rosenbrock, [-1.2, 1.0], jacobian=jac))
    np.testing.assert_allclose(res.params, [1.0, 1.0], atol=1e-6)


def test_linear_exact_in_two_iterations():
    x = np.linspace(-2, 5, 15)
    y = 3.5 * x - 1.25
    problem = FitProblem.from_model(lambda xx, p: p[0] * xx + p[1], x, y, [0.0, 0.0], max_iter=2)
    res = nlls_fit(problem)
    assert res.iterations <= 2
    np.testing.assert_allclose(res.params, [3.5, -1.25], rtol=1e-10)


def test_linear_exact_after_damping_decays():
    x = np.linspace(-2, 5, 15)
    y = 3.5 * x - 1.25
    full = nlls_fit(FitProblem.from_model(lambda xx, p: p[0] * xx + p[1], x, y, [0.0, 0.0]))
    assert full.converged and full.iterations <= 4
    np.testing.assert_allclose(full.params, [3.5, -1.25], rtol=1e-12)


def test_cost_history_non_increasing():
    rng = np.random.default_rng(4)
    t = np.linspace(0, 5, 60)
    y = exp_relaxation(t, [0.3, 0.6, 1.4]) + rng.normal(0, 0.01, t.size)
    for res in (nlls_fit(FitProblem(rosenbrock, [-1.2, 1.0])), fit_exp_relaxation(t, y)):
        assert np.all(np.diff(res.cost_history) <= 0)
        assert len(res.cost_history) >= 2


def test_gradient_small_at_convergence():
    rng = np.random.default_rng(5)
    t = np.linspace(0, 5, 60)
    y = exp_relaxation(t, [0.3, 0.6, 1.4]) + rng.normal(0, 0.01, t.size)
    res = fit_exp_relaxation(t, y)
    assert res.converged
    J = central_diff(lambda p: exp_relaxation(t, p), res.params)
    g = J.T @ (y - exp_relaxation(t, res.params))
    assert np.max(np.abs(g) / (np.linalg.norm(J, axis=0) * res.residual_norm)) < 1e-6


def test_max_iterations_flagged():
    res = nlls_fit(FitProblem(rosenbrock, [-1.2, 1.0], max_iter=3))
    assert not res.converged
    assert res.iterations == 3
    assert "maximum" in res.message
    assert np.isfinite(res.residual_norm)


def test_non_finite_start_rejected():
    with pytest.raises(FitError):
        nlls_fit(FitProblem(lambda p: np.array([np.log(p[0])]), [-1.0]))


def test_unidentifiable_parameter_reported():
    # second parameter does not enter the residual: normal equations are singular
    x = np.linspace(0, 1, 10)
    res = nlls_fit(FitProblem.from_model(lambda xx, p: p[0] + 0.0 * p[1] * xx, x, 2.0 + 0.1 * np.sin(9 * x), [0.0, 1.0]))
    assert res.converged
    assert np.isfinite(res.stderr[0])
    assert np.isinf(res.stderr[1])


def test_bounds_respected():
    # unconstrained optimum of the rate is negative; the log transform keeps it at the bound
    t = np.linspace(0, 1, 20)
    y = 1.0 + 0.1 * t
    res = nlls_fit(FitProblem.from_model(lambda tt, p: p[0] * np.exp(-p[1] * tt), t, y, [1.0, 0.5],
                                         bounds=[(None, None), (0.0, None)]))
    assert res.params[1] >= 0.0
    with pytest.raises(ValueError):
        nlls_fit(FitProblem.from_model(lambda tt, p: p[0] * tt, t, y, [-1.0], bounds=[(0.0, None)]))


def test_problem_validation():
    x = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        FitProblem.from_model(lambda xx, p: p[0] * xx, x, np.ones(4), [1.0])
    with pytest.raises(ValueError):
        FitProblem.from_model(lambda xx, p: p[0] * xx, x, np.ones(5), [1.0], sigma=np.zeros(5))
    with pytest.raises(ValueError):
        FitProblem(rosenbrock, [1.0, 1.0], bounds=[(0, 1)])


def test_covariance_matches_linear_theory():
    rng = np.random.default_rng(9)
    x = np.linspace(0, 10, 30)
    sigma = np.full_like(x, 0.2)
    y = 0.5 * x + 2.0 + rng.normal(0, 0.2, x.size)
    problem = FitProblem.from_model(lambda xx, p: p[0] * xx + p[1], x, y, [1.0, 1.0], sigma=sigma,
                                    absolute_sigma=True)
    res = nlls_fit(problem)
    A = np.column_stack([x, np.ones_like(x)]) / 0.2
    np.testing.assert_allclose(res.covariance, np.linalg.inv(A.T @ A), rtol=1e-8)
    lin = fit_linear(x, y, sigma=sigma)
    np.testing.assert_allclose(res.params, [lin.slope, lin.intercept], rtol=1e-9)
    np.testing.assert_allclose(res.covariance, lin.covariance, rtol=1e-8)
    assert np.all(np.linalg.eigvalsh(res.covariance) >= 0)


def test_reordering_invariance():
    rng = np.random.default_rng(12)
    t = np.linspace(0, 5, 50)
    y = exp_relaxation(t, [0.2, 0.7, 0.9]) + rng.normal(0, 0.02, t.size)
    perm = rng.permutation(t.size)
    a = fit_exp_relaxation(t, y)
    b = nlls_fit(FitProblem.from_model(exp_relaxation, t[perm], y[perm], a.params * 1.05,
                                       jacobian=exp_relaxation_jacobian))
    c = nlls_fit(FitProblem.from_model(exp_relaxation, t, y, a.params * 1.05, jacobian=exp_relaxation_jacobian))
    np.testing.assert_allclose(b.params, c.params, rtol=1e-8)
    assert b.residual_norm == pytest.approx(c.residual_norm, rel=1e-8)


def test_sigma_rescaling():
    # common rescale of sigma: same estimates, weighted residual norm scales by 1/c
    rng = np.random.default_rng(13)
    t = np.linspace(0, 5, 50)
    y = exp_relaxation(t, [0.2, 0.7, 0.9]) + rng.normal(0, 0.02, t.size)
    s = np.full_like(t, 0.02)
    a = fit_exp_relaxation(t, y, sigma=s)
    b = fit_exp_relaxation(t, y, sigma=7.0 * s)
    np.testing.assert_allclose(b.params, a.params, rtol=1e-8)
    assert b.residual_norm == pytest.approx(a.residual_norm / 7.0, rel=1e-8)


def test_y_and_sigma_rescaling():
    # rescaling y and sigma together: rate unchanged, amplitudes scale, raw residuals scale linearly
    rng = np.random.default_rng(14)
    t = np.linspace(0, 5, 50)
    y = exp_relaxation(t, [0.2, 0.7, 0.9]) + rng.normal(0, 0.02, t.size)
    s = np.full_like(t, 0.02)
    c = 3.0
    a = fit_exp_relaxation(t, y, sigma=s)
    b = fit_exp_relaxation(t, c * y, sigma=c * s)
    np.testing.assert_allclose(b.params, a.params * [c, c, 1.0], rtol=1e-8)
    raw_a = np.linalg.norm(y - exp_relaxation(t, a.params))
    raw_b = np.linalg.norm(c * y - exp_relaxation(t, b.params))
    assert raw_b == pytest.approx(c * raw_a, rel=1e-8)
    assert b.residual_norm == pytest.approx(a.residual_norm, rel=1e-8)


# ------------------------------------------------------------- jacobians

JAC_CASES = [
    ("lorentzian_1", lambda x, p: lorentzian_dips(x, p), lambda x, p: lorentzian_dips_jacobian(x, p),
     np.linspace(-5, 5, 41), [1.0, 0.3, 1.2, 0.6]),
    ("lorentzian_2_quadratic", lambda x, p: lorentzian_dips(x, p, 3, 0.5),
     lambda x, p: lorentzian_dips_jacobian(x, p, 3, 0.5),
     np.linspace(-5, 5, 41), [1.0, 0.02, -0.003, -1.5, 0.8, 0.4, 2.0, 1.1, 0.3]),
    ("exp_relaxation", exp_relaxation, exp_relaxation_jacobian, np.linspace(0, 4, 30), [0.3, 0.6, 1.4]),
    ("splitting", splitting_model, splitting_jacobian, np.linspace(-4e-4, 4e-4, 21), [46.0, 1.2e6]),
    ("lines", lines_model, lines_jacobian, np.linspace(0, 4e-4, 21), [46.0, 1.2e6, 255.0, 2.4e6, 3.0, -1.2e5]),
]


@pytest.mark.parametrize("name,model,jac,x,p", JAC_CASES, ids=[c[0] for c in JAC_CASES])
def test_analytic_jacobians_match_central_differences(name, model, jac, x, p):
    rng = np.random.default_rng(21)
    for _ in range(5):
        q = np.asarray(p) * (1 + 0.2 * rng.uniform(-1, 1, len(p)))
        ref = central_diff(lambda pp: model(x, pp), q)
        got = jac(x, q)
        scale = np.maximum(np.abs(ref).max(axis=0), 1e-300)
        assert np.max(np.abs(got - ref) / scale) < 1e-6
        eng = numeric_jacobian(lambda pp: model(x, pp), q)
        assert np.max(np.abs(eng - ref) / scale) < 1e-6


# ------------------------------------------------------------ Lorentzian


def test_lorentzian_noiseless_single():
    x = np.linspace(-10, 10, 201)
    y = lorentzian_dips(x, [1.0, 0.7, 1.5, 0.4])
    fit = fit_lorentzian_dips(x, y)
    d = fit.dips[0]
    assert d.center == pytest.approx(0.7, abs=1e-3 * 1.5)
    assert d.fwhm == pytest.approx(1.5, rel=1e-3)
    assert d.depth == pytest.approx(0.4, rel=1e-3)
    assert fit.baseline == pytest.approx(1.0, rel=1e-3)
    assert fit.contrast == pytest.approx(0.4, rel=1e-3)


def test_lorentzian_noise_coverage():
    x = np.linspace(-10, 10, 201)
    truth = [0.7, 1.5, 0.4]
    y0 = lorentzian_dips(x, [1.0] + truth)
    hits = np.zeros(3)
    n = 200
    for seed in range(n):
        rng = np.random.default_rng(seed)
        fit = fit_lorentzian_dips(x, y0 + rng.normal(0, 0.02, x.size))
        d = fit.dips[0]
        for i, (v, e, t) in enumerate(((d.center, d.center_err, truth[0]), (d.fwhm, d.fwhm_err, truth[1]),
                                       (d.depth, d.depth_err, truth[2]))):
            hits[i] += abs(v - t) <= 3 * e
    assert np.all(hits >= 0.95 * n)


def test_lorentzian_two_dips_ordered():
    w = 0.8
    x = np.linspace(-8, 8, 321)
    y = lorentzian_dips(x, [1.0, 1.2, w, 0.3, -1.2, w, 0.5])
    fit = fit_lorentzian_dips(x, y, k=2)
    a, b = fit.dips
    assert a.center < b.center
    assert a.center == pytest.approx(-1.2, abs=1e-3 * w)
    assert b.center == pytest.approx(1.2, abs=1e-3 * w)
    assert (a.depth, b.depth) == pytest.approx((0.5, 0.3), rel=1e-3)
    assert (a.fwhm, b.fwhm) == pytest.approx((w, w), rel=1e-3)


def test_lorentzian_quadratic_baseline():
    x = np.linspace(-10, 10, 201)
    y = lorentzian_dips(x, [1.0, 0.01, -0.002, 0.5, 1.0, 0.1], n_base=3)
    fit = fit_lorentzian_dips(x, y, baseline="quadratic")
    assert fit.dips[0].fwhm == pytest.approx(1.0, rel=1e-6)
    assert fit.baseline_coeffs == pytest.approx((1.0, 0.01, -0.002), rel=1e-6)


def test_lorentzian_overlap_reported():
    x = np.linspace(-8, 8, 321)
    y = lorentzian_dips(x, [1.0, 0.0, 1.0, 0.5])
    with pytest.raises(FitError):
        fit_lorentzian_dips(x, y, k=2)


def test_lorentzian_coarse_grid_warns():
    x = np.linspace(-10, 10, 41)
    y = lorentzian_dips(x, [1.0, 0.0, 2.0, 0.5])
    with pytest.warns(GridResolutionWarning):
        fit_lorentzian_dips(x, y)


def test_lorentzian_argument_checks():
    x = np.linspace(-1, 1, 5)
    with pytest.raises(ValueError):
        fit_lorentzian_dips(x, x, k=3)
    with pytest.raises(ValueError):
        fit_lorentzian_dips(x, x, baseline="cubic")
    with pytest.raises(ValueError):
        fit_lorentzian_dips(x, x, k=2)


# ------------------------------------------------------------ strain


STRAIN = np.linspace(0, 4e-4, 21)


def test_splitting_closed_loop():
    d = 1.2e6
    delta = splitting_model(STRAIN, [46.0, d])
    lam, d_fit, res = fit_splitting(STRAIN, delta)
    assert d_fit == pytest.approx(d, rel=1e-2)
    assert lam == pytest.approx(46.0, rel=1e-6)
    rng = np.random.default_rng(3)
    noisy = delta + rng.normal(0, 0.05, delta.size)
    lam, d_fit, res = fit_splitting(STRAIN, noisy, sigma=np.full_like(delta, 0.05))
    assert d_fit == pytest.approx(d, rel=1e-2)
    assert abs(lam - 46.0) < 4 * res.stderr[0]


def test_zero_strain_only_flagged():
    with pytest.warns(IdentifiabilityWarning, match="unidentifiable"):
        lam, d, _ = fit_splitting(np.zeros(6), np.full(6, 46.0))
    assert lam == pytest.approx(46.0, rel=1e-12)
    assert np.isnan(d)
    lines = np.tile(optical_lines(46.0, 255.0, 406.7).lines, (6, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_strain_response(np.zeros(6), lines)
    assert np.isnan(fit.d_gs) and np.isnan(fit.d_es)


def test_crossover_not_covered_warns():
    x = np.linspace(0, 5e-6, 11)
    with pytest.warns(IdentifiabilityWarning, match="crossover"):
        fit_splitting(x, splitting_model(x, [46.0, 1.2e6]))


def test_simultaneous_gs_es_fit():
    rng = np.random.default_rng(8)
    dg, de, slope = 1.2e6, 2.4e6, -1.2e5
    rows = []
    for e in STRAIN:
        g = float(splitting_model(e, [46.0, dg]))
        x = float(splitting_model(e, [255.0, de]))
        rows.append(optical_lines(g, x, 406.7, common_shift=slope * e).lines)
    lines = np.array(rows) + rng.normal(0, 0.05e-3, (STRAIN.size, 4))
    fit = fit_strain_response(STRAIN, lines, sigma_ghz=0.05)
    for got, want in ((fit.lambda_gs, 46.0), (fit.d_gs, dg), (fit.lambda_es, 255.0), (fit.d_es, de),
                      (fit.shift_slope, slope)):
        assert got == pytest.approx(want, rel=2e-2)
    assert fit.result.reduced_chi2 < 2.0


def test_strain_response_shape_check():
    with pytest.raises(ValueError):
        fit_strain_response(STRAIN, np.zeros((STRAIN.size, 3)))


# ------------------------------------------------------------ linear


def test_linear_exact():
    x = np.array([2.0, 5.0, 9.0, 14.0])
    lin = fit_linear(x, 0.04 * x + 0.637)
    assert lin.slope == pytest.approx(0.04, rel=1e-12)
    assert lin.intercept == pytest.approx(0.637, rel=1e-12)
    assert lin.intercept_err < 1e-12


def test_linear_rejections():
    with pytest.raises(ValueError, match="degenerate"):
        fit_linear([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="3 points"):
        fit_linear([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_linear([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], sigma=[1.0, 0.0, 1.0])


def test_linear_intercept_coverage():
    # known sigma: the intercept lands within 1 reported sigma ~68% of the time, within 1.645 sigma ~90%
    x = np.linspace(2, 24, 6)
    sigma = 0.03
    n = 2000
    z = np.empty(n)
    for seed in range(n):
        rng = np.random.default_rng(seed)
        y = 0.637 + 0.045 * x + rng.normal(0, sigma, x.size)
        lin = fit_linear(x, y, sigma=np.full_like(x, sigma))
        z[seed] = abs(lin.intercept - 0.637) / lin.intercept_err
    assert np.mean(z <= 1.0) == pytest.approx(0.6827, abs=0.035)
    assert np.mean(z <= 1.645) >= 0.88


def test_format_uncertainty():
    assert format_uncertainty(0.6366, 0.0612, "MHz") == "0.64 ± 0.06 MHz"
    assert format_uncertainty(0.25, 0.02, "us") == "0.25 ± 0.02 us"
    assert format_uncertainty(1234.5, 56.0) == "1230 ± 60"
    assert format_uncertainty(3.14159, 0.0123) == "3.142 ± 0.012"
