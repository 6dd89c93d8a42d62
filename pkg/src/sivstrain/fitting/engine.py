"""
Damped Gauss-Newton (Levenberg-Marquardt) least squares.

The solver works on internal, unconstrained parameters.  Bounded
parameters are mapped through smooth transforms (log for half-bounded,
logistic for two-sided), so every trial step is feasible.  Jacobians are
either supplied analytically or taken by central differences in the
external parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class FitError(RuntimeError):
    """A fit failed; `result` carries the diagnostics when available."""

    def __init__(self, message: str, result: Optional["FitResult"] = None):
        super().__init__(message)
        self.result = result


def numeric_jacobian(fun: Callable[[np.ndarray], np.ndarray], p: np.ndarray, f0=None) -> np.ndarray:
    """Central-difference Jacobian with step max(1e-6 |p_j|, 1e-9)."""
    p = np.asarray(p, dtype=float)
    if f0 is None:
        f0 = np.asarray(fun(p), dtype=float)
    jac = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = max(1e-6 * abs(p[j]), 1e-9)
        up = p.copy()
        dn = p.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (np.asarray(fun(up)) - np.asarray(fun(dn))) / (up[j] - dn[j])
    return jac


class _Transform:
    """Element-wise map between internal u and external p for one parameter."""

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        lo_inf, hi_inf = np.isneginf(lo), np.isposinf(hi)
        if lo_inf and hi_inf:
            self.kind = "free"
        elif hi_inf:
            self.kind = "lower"
        elif lo_inf:
            self.kind = "upper"
        else:
            if not hi > lo:
                raise ValueError(f"empty bound interval [{lo}, {hi}]")
            self.kind = "both"

    def to_external(self, u):
        if self.kind == "free":
            return u
        if self.kind == "lower":
            return self.lo + np.exp(u)
        if self.kind == "upper":
            return self.hi - np.exp(u)
        return self.lo + (self.hi - self.lo) / (1.0 + np.exp(-u))

    def to_internal(self, p):
        if self.kind == "free":
            return p
        if self.kind == "lower":
            if p <= self.lo:
                raise ValueError(f"initial value {p} not above lower bound {self.lo}")
            return np.log(p - self.lo)
        if self.kind == "upper":
            if p >= self.hi:
                raise ValueError(f"initial value {p} not below upper bound {self.hi}")
            return np.log(self.hi - p)
        if not self.lo < p < self.hi:
            raise ValueError(f"initial value {p} outside ({self.lo}, {self.hi})")
        s = (p - self.lo) / (self.hi - self.lo)
        return np.log(s / (1.0 - s))

    def derivative(self, u):
        """dp/du."""
        if self.kind == "free":
            return 1.0
        if self.kind == "lower":
            return np.exp(u)
        if self.kind == "upper":
            return -np.exp(u)
        e = np.exp(-u)
        return (self.hi - self.lo) * e / (1.0 + e) ** 2


@dataclass
class FitProblem:
    """
    Weighted least-squares problem.

    `residual` maps external parameters to the (already weighted) residual
    vector.  Use `FitProblem.from_model` for the usual ``(y - f(x, p)) / sigma``
    case.  `bounds` is a sequence of ``(lo, hi)`` pairs, one per parameter;
    use ``None`` or infinities for unbounded sides.
    """

    residual: Callable[[np.ndarray], np.ndarray]
    p0: np.ndarray
    bounds: Optional[Sequence] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    gtol: float = 1e-10
    xtol: float = 1e-12
    ftol: float = 1e-14
    max_iter: int = 200
    absolute_sigma: bool = False
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.p0 = np.atleast_1d(np.asarray(self.p0, dtype=float)).copy()
        if self.bounds is None:
            self.bounds = [(-np.inf, np.inf)] * self.p0.size
        if len(self.bounds) != self.p0.size:
            raise ValueError("need one (lo, hi) pair per parameter")
        self.bounds = [
            (-np.inf if b is None or b[0] is None else float(b[0]),
             np.inf if b is None or b[1] is None else float(b[1]))
            for b in self.bounds
        ]
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float)
            if self.y is not None and sigma.shape != np.shape(self.y):
                raise ValueError("sigma must match y in shape")
            if np.any(sigma <= 0):
                raise ValueError("sigma must be > 0")

    @classmethod
    def from_model(cls, model, x, y, p0, sigma=None, jacobian=None, **kwargs) -> "FitProblem":
        """
        Problem for ``y ~ model(x, p)``.

        `jacobian`, when given, is ``jac(x, p) -> d model / d p`` with shape
        (len(x), len(p)); it is weighted and negated here.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
        # stacked models (several outputs per abscissa) are fine; only the output must match y
        shape = np.shape(model(x, np.asarray(p0, dtype=float)))
        if shape != y.shape:
            raise ValueError(f"model output shape {shape} does not match y shape {y.shape}")

        def residual(p):
            return (y - model(x, p)) * w

        def jac(p):
            return -jacobian(x, p) * w[:, None]

        return cls(residual=residual, p0=p0, jacobian=jac if jacobian is not None else None, x=x, y=y, sigma=sigma, **kwargs)


@dataclass
class FitResult:
    params: np.ndarray
    covariance: Optional[np.ndarray]
    residual_norm: float
    iterations: int
    converged: bool
    message: str = ""
    gradient_norm: float = np.nan
    dof: int = 0
    cost_history: list = field(default_factory=list)
    residuals: Optional[np.ndarray] = None
    names: Optional[Sequence[str]] = None

    @property
    def stderr(self) -> np.ndarray:
        if self.covariance is None:
            return np.full_like(self.params, np.nan)
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def reduced_chi2(self) -> float:
        return self.residual_norm**2 / self.dof if self.dof > 0 else np.nan

    def as_dict(self) -> dict:
        names = self.names or [f"p{i}" for i in range(self.params.size)]
        out = {}
        for n, v, e in zip(names, self.params, self.stderr):
            out[n] = float(v)
            out[n + "_err"] = float(e)
        return out


def _covariance(jac: np.ndarray, scale: float) -> Optional[np.ndarray]:
    # pseudo-inverse via SVD, tolerating rank deficiency
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return None
    keep = s > s[0] * max(jac.shape) * np.finfo(float).eps
    if not np.all(keep):
        vt_k = vt[keep]
        partial = (vt_k.T / s[keep] ** 2) @ vt_k
        # parameters touched by the null space are unidentifiable
        null = np.abs(vt[~keep]).max(axis=0) > 1e-8
        cov = np.where(np.outer(~null, ~null), partial, np.inf)
        return cov * scale
    cov = (vt.T / s**2) @ vt
    return 0.5 * (cov + cov.T) * scale


def nlls_fit(problem: FitProblem) -> FitResult:
    """
    Minimise ``0.5 * |r(p)|^2`` with a Levenberg-Marquardt schedule.

    The damping starts at 1e-3, is divided by 10 after an accepted step and
    multiplied by 10 after a rejected one; the damping matrix is the diagonal
    of J^T J (Marquardt scaling).  Convergence is declared when the scaled
    gradient ``max_j |J_j . r| / (|J_j| |r|)`` falls below `gtol`, when the
    relative step falls below `xtol`, or when the relative cost reduction of
    an accepted step falls below `ftol`.

    Returns a `FitResult`; the covariance is ``(J^T J)^-1`` scaled by the
    reduced chi-square unless ``problem.absolute_sigma`` is set.
    """
    tr = [_Transform(lo, hi) for lo, hi in problem.bounds]

    def external(u):
        return np.array([t.to_external(ui) for t, ui in zip(tr, u)])

    def dp_du(u):
        return np.array([t.derivative(ui) for t, ui in zip(tr, u)])

    def residual(p):
        r = np.asarray(problem.residual(p), dtype=float)
        return r

    def jac_external(p, r):
        if problem.jacobian is not None:
            return np.asarray(problem.jacobian(p), dtype=float)
        return numeric_jacobian(residual, p, r)

    u = np.array([t.to_internal(pi) for t, pi in zip(tr, problem.p0)])
    p = external(u)
    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise FitError("residual is not finite at the initial parameters")
    n = p.size
    m = r.size
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    message = "maximum number of iterations reached"
    gnorm = np.inf
    it = 0

    for it in range(1, problem.max_iter + 1):
        J = jac_external(p, r) * dp_du(u)[None, :]
        g = J.T @ r
        col = np.linalg.norm(J, axis=0)
        rn = np.sqrt(2.0 * cost)
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = np.where(col > 0, np.abs(g) / (col * rn), 0.0)
        gnorm = float(np.max(scaled)) if rn > 0 else 0.0
        if gnorm < problem.gtol:
            converged, message = True, "gradient tolerance reached"
            break

        D = np.maximum(col, 1e-12 * max(col.max(), 1.0))
        accepted = False
        first_predicted = None
        while lam < 1e16:
            A = np.vstack([J, np.sqrt(lam) * np.diag(D)])
            b = np.concatenate([-r, np.zeros(n)])
            step, *_ = np.linalg.lstsq(A, b, rcond=None)
            if first_predicted is None:
                lin = r + J @ step
                first_predicted = cost - 0.5 * float(lin @ lin)
            u_new = u + step
            p_new = external(u_new)
            r_new = residual(p_new)
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # at a minimum the linear model predicts no gain beyond round-off
            if first_predicted <= 1e-10 * cost:
                converged, message = True, "no further decrease within round-off"
            else:
                message = "damping escalation failed to find a descent step"
            break

        rel_reduction = (cost - cost_new) / cost if cost > 0 else 0.0
        small_step = np.linalg.norm(step) <= problem.xtol * (np.linalg.norm(u) + problem.xtol)
        u, p, r, cost = u_new, p_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if cost == 0.0:
            converged, message = True, "exact fit"
            gnorm = 0.0
            break
        if small_step:
            converged, message = True, "step tolerance reached"
            break
        if rel_reduction < problem.ftol:
            converged, message = True, "cost tolerance reached"
            break

    dof = m - n
    J_ext = jac_external(p, r)
    scale = 1.0
    if not problem.absolute_sigma:
        scale = 2.0 * cost / dof if dof > 0 else np.nan
    cov = _covariance(J_ext, scale) if np.isfinite(scale) else None
    return FitResult(
        params=p,
        covariance=cov,
        residual_norm=float(np.sqrt(2.0 * cost)),
        iterations=it,
        converged=converged,
        message=message,
        gradient_norm=gnorm,
        dof=dof,
        cost_history=history,
        residuals=r,
        names=problem.names,
    )
