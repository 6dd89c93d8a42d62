"""Built-in fit models and their front ends."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .engine import FitError, FitProblem, FitResult, nlls_fit


class IdentifiabilityWarning(UserWarning):
    """The data do not constrain one or more model parameters."""


class GridResolutionWarning(UserWarning):
    """Too few samples across a fitted feature."""


# --------------------------------------------------------------------------
# Lorentzian dips on a polynomial baseline
#   p = [b_0, ..., b_{m-1}, center_1, fwhm_1, depth_1, center_2, ...]
#   baseline = sum_j b_j (x - x_ref)^j, m = 1 (constant) or 3 (quadratic)


def lorentzian_dips(x, p, n_base: int = 1, x_ref: float = 0.0):
    x = np.asarray(x, dtype=float)
    u = x - x_ref
    out = np.zeros_like(x)
    for j in range(n_base):
        out += p[j] * u**j
    for c, w, a in np.reshape(p[n_base:], (-1, 3)):
        h2 = 0.25 * w * w
        out -= a * h2 / ((x - c) ** 2 + h2)
    return out


def lorentzian_dips_jacobian(x, p, n_base: int = 1, x_ref: float = 0.0):
    x = np.asarray(x, dtype=float)
    u = x - x_ref
    jac = np.empty((x.size, len(p)))
    for j in range(n_base):
        jac[:, j] = u**j
    for i, (c, w, a) in enumerate(np.reshape(p[n_base:], (-1, 3))):
        k = n_base + 3 * i
        h = 0.5 * w
        dx = x - c
        D = dx * dx + h * h
        jac[:, k] = -a * 2.0 * h * h * dx / D**2
        jac[:, k + 1] = -a * h * dx * dx / D**2
        jac[:, k + 2] = -h * h / D
    return jac


@dataclass(frozen=True)
class Dip:
    center: float
    fwhm: float
    depth: float
    center_err: float
    fwhm_err: float
    depth_err: float


@dataclass
class LorentzianFit:
    baseline: float
    baseline_err: float
    dips: list
    result: FitResult
    baseline_coeffs: tuple = ()
    x_ref: float = 0.0

    @property
    def contrast(self) -> float:
        """Depth of the deepest dip relative to the baseline at its centre."""
        d = max(self.dips, key=lambda d: d.depth)
        return d.depth / self.baseline_at(d.center)

    def baseline_at(self, x):
        return sum(b * (x - self.x_ref) ** j for j, b in enumerate(self.baseline_coeffs))


def _initial_dips(x, y, k, n_base=1, x_ref=0.0):
    n = x.size
    edge = max(n // 10, 1)
    wings = np.r_[0:edge, n - edge:n]
    if n_base == 3 and wings.size >= 6:
        # curved background: seed from a parabola through the wings
        coeffs = np.polyfit(x[wings] - x_ref, y[wings], 2)[::-1]
    else:
        coeffs = np.array([float(np.median(y[wings]))] + [0.0] * (n_base - 1))
    base = sum(c * (x - x_ref) ** j for j, c in enumerate(coeffs))
    z = base - y
    dx = float(np.median(np.diff(x)))
    peaks, props = find_peaks(z, prominence=0.05 * max(z.max(), 1e-300))
    guesses = []
    if peaks.size:
        order = np.argsort(props["prominences"])[::-1][:k]
        peaks = peaks[order]
        widths = peak_widths(z, peaks, rel_height=0.5)[0] * dx
        for pk, w in zip(peaks, widths):
            guesses.append([x[pk], max(w, 2 * dx), max(z[pk], 1e-12 * abs(base[pk]) + 1e-300)])
    if not guesses:
        i = int(np.argmax(z))
        guesses.append([x[i], (x[-1] - x[0]) / 10, max(z[i], 1e-300)])
    while len(guesses) < k:
        c, w, a = guesses[0]
        guesses[0] = [c - w / 2, w / 2, a]
        guesses.append([c + w / 2, w / 2, a])
    guesses.sort(key=lambda g: g[0])
    return [float(c) for c in coeffs], guesses


def fit_lorentzian_dips(x, y=None, k: int = 1, sigma=None, baseline: str = "constant") -> LorentzianFit:
    """
    Fit `k` Lorentzian dips on a constant or quadratic baseline.

    `x` may be a spectrum object with ``detuning`` and ``signal`` attributes,
    in which case `y` is omitted.  A quadratic baseline (centred on the grid
    midpoint) absorbs the slow curvature of a broad background under a
    shallow dip.  Dips are returned sorted by centre.

    Raises
    ------
    FitError
        If the fit does not converge or two dips collapse onto each other.
    """
    if y is None:
        x, y = x.detuning, x.signal
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    n_base = {"constant": 1, "quadratic": 3}.get(baseline)
    if n_base is None:
        raise ValueError("baseline must be 'constant' or 'quadratic'")
    if x.size < 3 * k + n_base + 1:
        raise ValueError("not enough points for the requested number of dips")
    order = np.argsort(x)
    x, y = x[order], y[order]
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)[order]
    x_ref = 0.5 * (x[0] + x[-1])
    p0, guesses = _initial_dips(x, y, k, n_base, x_ref)
    span = x[-1] - x[0]
    bounds = [(None, None)] * n_base
    names = ["baseline"] + [f"baseline_{j}" for j in range(1, n_base)]
    for i, (c, w, a) in enumerate(guesses):
        c = min(max(c, x[0] + 1e-6 * span), x[-1] - 1e-6 * span)
        p0 += [c, w, a]
        bounds += [(x[0], x[-1]), (0.0, None), (0.0, None)]
        names += [f"center_{i + 1}", f"fwhm_{i + 1}", f"depth_{i + 1}"]

    def model(xx, p):
        return lorentzian_dips(xx, p, n_base, x_ref)

    def jac(xx, p):
        return lorentzian_dips_jacobian(xx, p, n_base, x_ref)

    problem = FitProblem.from_model(model, x, y, p0, sigma=sigma, jacobian=jac, bounds=bounds, names=names)
    res = nlls_fit(problem)
    if not res.converged:
        raise FitError(f"Lorentzian fit did not converge: {res.message}", res)
    err = res.stderr
    dips = []
    for i in range(k):
        j = n_base + 3 * i
        c, w, a = res.params[j: j + 3]
        ec, ew, ea = err[j: j + 3]
        dips.append(Dip(float(c), float(w), float(a), float(ec), float(ew), float(ea)))
    dips.sort(key=lambda d: d.center)
    for d in dips:
        # a dip that collapsed onto the baseline leaves its shape parameters undefined
        if not (d.depth > 1e-12 * abs(float(np.median(y))) and np.isfinite(d.center_err) and np.isfinite(d.fwhm_err)):
            raise FitError("no resolvable dip in the data", res)
    if k == 2 and abs(dips[1].center - dips[0].center) < 0.5 * max(dips[0].fwhm, dips[1].fwhm):
        raise FitError("dips overlap and cannot be resolved", res)
    step = float(np.median(np.diff(x)))
    narrowest = min(d.fwhm for d in dips)
    if narrowest / step < 7:
        warnings.warn(
            f"only {narrowest / step:.1f} grid points across the fitted FWHM (< 7)",
            GridResolutionWarning,
            stacklevel=2,
        )
    coeffs = tuple(float(b) for b in res.params[:n_base])
    return LorentzianFit(coeffs[0], float(err[0]), dips, res, coeffs, x_ref)


# --------------------------------------------------------------------------
# Exponential relaxation  p(t) = p_inf + amplitude * exp(-rate t)


def exp_relaxation(t, p):
    return p[0] + p[1] * np.exp(-p[2] * np.asarray(t, dtype=float))


def exp_relaxation_jacobian(t, p):
    t = np.asarray(t, dtype=float)
    e = np.exp(-p[2] * t)
    return np.column_stack([np.ones_like(t), e, -p[1] * t * e])


def fit_exp_relaxation(t, y, sigma=None) -> FitResult:
    """Fit ``p_inf + amplitude * exp(-rate t)``; returns [p_inf, amplitude, rate]."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tail = max(t.size // 10, 2)
    p_inf = float(np.mean(y[-tail:]))
    amp = float(y[0] - p_inf)
    # time at which the excursion has fallen to 1/e of its initial value
    target = abs(amp) / math.e
    below = np.nonzero(np.abs(y - p_inf) <= target)[0]
    t_e = t[below[0]] - t[0] if below.size and t[below[0]] > t[0] else (t[-1] - t[0]) / 5
    rate0 = 1.0 / t_e
    if amp == 0:
        amp = 1e-6
    problem = FitProblem.from_model(
        exp_relaxation, t, y, [p_inf, amp, rate0], sigma=sigma, jacobian=exp_relaxation_jacobian,
        bounds=[(None, None), (None, None), (0.0, None)], names=["p_inf", "amplitude", "rate"],
    )
    return nlls_fit(problem)


# --------------------------------------------------------------------------
# Strain response of the orbital splittings along a pure E_g ray


def splitting_model(x, p):
    """p = [lambda, d]: sqrt(lambda^2 + (2 d x)^2)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(p[0] ** 2 + (2.0 * p[1] * x) ** 2)


def splitting_jacobian(x, p):
    x = np.asarray(x, dtype=float)
    delta = splitting_model(x, p)
    return np.column_stack([p[0] / delta, 4.0 * p[1] * x * x / delta])


def lines_model(x, p):
    """
    Four optical lines (GHz, relative to a reference) stacked as A, B, C, D.

    p = [lambda_gs, d_gs, lambda_es, d_es, centre, shift_slope]
    """
    x = np.asarray(x, dtype=float)
    g = splitting_model(x, p[0:2])
    e = splitting_model(x, p[2:4])
    centre = p[4] + p[5] * x
    return np.concatenate([
        centre + 0.5 * (e + g),
        centre + 0.5 * (e - g),
        centre - 0.5 * (e - g),
        centre - 0.5 * (e + g),
    ])


def lines_jacobian(x, p):
    x = np.asarray(x, dtype=float)
    jg = splitting_jacobian(x, p[0:2])
    je = splitting_jacobian(x, p[2:4])
    one = np.ones_like(x)
    blocks = []
    for sg, se in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        blocks.append(np.column_stack([0.5 * sg * jg, 0.5 * se * je, one, x]))
    return np.vstack(blocks)


@dataclass
class StrainFit:
    lambda_gs: float
    d_gs: float
    lambda_es: float
    d_es: float
    nu_mean: float
    shift_slope: float
    stderr: dict
    result: FitResult


def _guess_splitting(x, delta):
    i0 = int(np.argmin(np.abs(x)))
    i1 = int(np.argmax(np.abs(x)))
    lam = float(delta[i0])
    if x[i1] == 0:
        return lam, 0.0
    excess = max(delta[i1] ** 2 - lam**2, (0.01 * lam) ** 2)
    return lam, float(np.sqrt(excess) / (2 * abs(x[i1])))


def _check_crossover(x, lam, d):
    reach = 2 * abs(d) * np.max(np.abs(x)) / lam
    if reach < 1.0:
        warnings.warn(
            f"strain range reaches 2|d|x/lambda = {reach:.2g} < 1; the data do not cover the "
            "quadratic-to-linear crossover and d is poorly conditioned",
            IdentifiabilityWarning,
            stacklevel=3,
        )


def fit_splitting(x, delta, sigma=None) -> tuple[float, float, FitResult]:
    """
    Fit ``delta = sqrt(lambda^2 + (2 d x)^2)`` for one manifold.

    Returns ``(lambda, |d|, result)``.  With no non-zero strain in the data
    only lambda is fitted and d is returned as NaN.
    """
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.all(x == 0):
        warnings.warn("all strain values are zero; d is unidentifiable", IdentifiabilityWarning, stacklevel=2)
        res = nlls_fit(FitProblem.from_model(
            lambda xx, p: np.full_like(xx, abs(p[0])), x, delta, [float(np.mean(delta))], sigma=sigma,
            names=["lambda"],
        ))
        return abs(float(res.params[0])), float("nan"), res
    if x.size < 5:
        warnings.warn("fewer than 5 strain points", IdentifiabilityWarning, stacklevel=2)
    lam0, d0 = _guess_splitting(x, delta)
    res = nlls_fit(FitProblem.from_model(
        splitting_model, x, delta, [lam0, d0], sigma=sigma, jacobian=splitting_jacobian,
        names=["lambda", "d"],
    ))
    if not res.converged:
        raise FitError(f"splitting fit did not converge: {res.message}", res)
    lam, d = abs(float(res.params[0])), abs(float(res.params[1]))
    _check_crossover(x, lam, d)
    return lam, d, res


def fit_strain_response(strain, lines_thz, sigma_ghz=None) -> StrainFit:
    """
    Simultaneous fit of both manifolds to the four optical lines.

    Parameters
    ----------
    strain : array, shape (n,)
        Strain (or a voltage proxy such as V^2) along a fixed E_g ray.
        The fitted d values are per unit of this abscissa.
    lines_thz : array, shape (n, 4)
        Lines A, B, C, D in THz.
    sigma_ghz : float or array, optional
        Uncertainty of each line in GHz.
    """
    from ..levels import GHZ_PER_THZ, splittings_from_lines

    x = np.asarray(strain, dtype=float)
    lines = np.asarray(lines_thz, dtype=float)
    if lines.ndim != 2 or lines.shape != (x.size, 4):
        raise ValueError("lines_thz must have shape (len(strain), 4)")
    if x.size < 5:
        warnings.warn("fewer than 5 strain points", IdentifiabilityWarning, stacklevel=2)
    ref = float(np.mean(lines))
    y = ((lines - ref) * GHZ_PER_THZ).T.ravel()
    per_point = np.array([splittings_from_lines(*row, tol_ghz=np.inf) for row in lines])
    lam_g, d_g = _guess_splitting(x, per_point[:, 0])
    lam_e, d_e = _guess_splitting(x, per_point[:, 1])
    centre0 = float(np.mean(per_point[:, 2]) - ref) * GHZ_PER_THZ
    sigma = None
    if sigma_ghz is not None:
        sigma = np.broadcast_to(np.asarray(sigma_ghz, dtype=float), (x.size, 4)).T.ravel()
    if np.all(x == 0):
        warnings.warn("all strain values are zero; d is unidentifiable", IdentifiabilityWarning, stacklevel=2)
    names = ["lambda_gs", "d_gs", "lambda_es", "d_es", "centre_ghz", "shift_slope"]
    p0 = [lam_g, d_g if d_g else 1.0, lam_e, d_e if d_e else 1.0, centre0, 0.0]
    res = nlls_fit(FitProblem.from_model(
        lines_model, x, y, p0, sigma=sigma, jacobian=lines_jacobian, names=names,
    ))
    if not res.converged:
        raise FitError(f"strain-response fit did not converge: {res.message}", res)
    p = res.params
    err = res.stderr
    if np.any(x != 0):
        _check_crossover(x, abs(p[0]), p[1])
        _check_crossover(x, abs(p[2]), p[3])
    else:
        p = p.copy()
        p[[1, 3]] = np.nan
    return StrainFit(
        lambda_gs=abs(float(p[0])),
        d_gs=abs(float(p[1])),
        lambda_es=abs(float(p[2])),
        d_es=abs(float(p[3])),
        nu_mean=ref + float(p[4]) / GHZ_PER_THZ,
        shift_slope=float(p[5]),
        stderr={n: float(e) for n, e in zip(names, err)},
        result=res,
    )


# --------------------------------------------------------------------------
# Weighted straight line


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    covariance: np.ndarray
    chi2: float
    dof: int

    def intercept_text(self, unit: str = "") -> str:
        return format_uncertainty(self.intercept, self.intercept_err, unit)


def fit_linear(x, y, sigma=None, absolute_sigma: bool = True) -> LinearFit:
    """
    Weighted least-squares line ``y = slope * x + intercept``.

    With `sigma` given and `absolute_sigma` true the errors are taken at face
    value; otherwise the covariance is scaled by the reduced chi-square.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    if sigma is None:
        w = np.ones_like(x)
        absolute_sigma = False
    else:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), x.shape)
        if np.any(sigma <= 0):
            raise ValueError("sigma must be > 0")
        w = 1.0 / sigma**2
    S = w.sum()
    xm = (w * x).sum() / S
    dx = x - xm
    Sxx = (w * dx * dx).sum()
    if Sxx <= 1e-14 * (w * x * x).sum() or np.ptp(x) == 0:
        raise ValueError("x values are degenerate (all equal)")
    slope = (w * dx * y).sum() / Sxx
    ym = (w * y).sum() / S
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    chi2 = float((w * resid**2).sum())
    dof = x.size - 2
    scale = 1.0 if absolute_sigma else chi2 / dof
    var_slope = scale / Sxx
    var_int = scale * (1.0 / S + xm * xm / Sxx)
    cov_si = -scale * xm / Sxx
    cov = np.array([[var_slope, cov_si], [cov_si, var_int]])
    return LinearFit(float(slope), float(intercept), math.sqrt(var_slope), math.sqrt(var_int), cov, chi2, dof)


def format_uncertainty(value: float, err: float, unit: str = "") -> str:
    """``value ± err`` rounded to the leading digit of the error, e.g. '0.64 ± 0.06 MHz'."""
    suffix = f" {unit}" if unit else ""
    if not np.isfinite(err) or err <= 0:
        return f"{value:g} ± {err:g}{suffix}"
    exponent = math.floor(math.log10(err))
    lead = err / 10**exponent
    digits = 2 if round(lead, 6) < 2 else 1
    decimals = -(exponent - digits + 1)
    if decimals > 0:
        return f"{value:.{decimals}f} ± {err:.{decimals}f}{suffix}"
    q = 10 ** (-decimals)
    return f"{round(value / q) * q:.0f} ± {round(err / q) * q:.0f}{suffix}"
