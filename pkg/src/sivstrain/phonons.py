"""
Single-phonon relaxation between the ground-state orbital branches.

Absorption and emission rates share a density-of-states factor that scales
as (delta / delta_ref)**n; absorption is weighted by the Bose-Einstein
occupation and emission by occupation + 1, so detailed balance holds by
construction.  At large splittings the exponential drop of the thermal
occupation beats the polynomial DOS growth and absorption is quenched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.constants import h as PLANCK, k as BOLTZMANN

from .fitting import FitError, fit_exp_relaxation

# k_B / h in GHz per kelvin
KB_OVER_H_GHZ = BOLTZMANN / PLANCK * 1e-9
REFERENCE_SPLITTING_GHZ = 46.0
MEASURED_WINDOW_GHZ = (46.0, 110.0)


@dataclass(frozen=True)
class BathParams:
    """
    Phonon bath seen by the ground-state orbitals.

    chi : zero-temperature emission rate (Hz) at the reference splitting.
    n : density-of-states exponent (2 for a bulk-like acoustic DOS here).
    T : temperature in kelvin; 0 is treated as the zero-temperature limit.
    """

    chi: float = 7.0e6
    n: float = 2.0
    T: float = 4.0
    delta_ref: float = REFERENCE_SPLITTING_GHZ

    def __post_init__(self):
        if not np.isfinite(self.chi) or self.chi < 0:
            raise ValueError("chi must be finite and >= 0")
        if not np.isfinite(self.n) or self.n < 0:
            raise ValueError("DOS exponent n must be >= 0")
        if not np.isfinite(self.T) or self.T < 0:
            raise ValueError("temperature must be >= 0")
        if self.delta_ref <= 0:
            raise ValueError("delta_ref must be > 0")


def _reduced_energy(delta, T):
    delta = np.asarray(delta, dtype=float)
    if np.any(~np.isfinite(delta)) or np.any(delta <= 0):
        raise ValueError("splitting must be finite and > 0")
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("temperature must be >= 0")
    with np.errstate(divide="ignore"):
        return delta / (KB_OVER_H_GHZ * T)


def bose_occupation(delta, T):
    """
    Mean phonon number at frequency `delta` (GHz) and temperature `T` (K).

    Returns 0 at T = 0.  Vectorised over both arguments.
    """
    x = _reduced_energy(delta, T)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(x)
    return out if np.ndim(out) else float(out)


def _emission_occupation(x):
    # n + 1 = 1 / (1 - exp(-x)), exact at T -> 0
    with np.errstate(divide="ignore"):
        return -1.0 / np.expm1(-x)


def _dos_factor(delta, bath: BathParams):
    return bath.chi * (np.asarray(delta, dtype=float) / bath.delta_ref) ** bath.n


def gamma_up(delta, bath: BathParams):
    """Phonon absorption rate (Hz), lower -> upper branch."""
    x = _reduced_energy(delta, bath.T)
    with np.errstate(over="ignore"):
        out = _dos_factor(delta, bath) / np.expm1(x)
    return out if np.ndim(out) else float(out)


def gamma_down(delta, bath: BathParams):
    """Phonon emission rate (Hz), upper -> lower branch."""
    x = _reduced_energy(delta, bath.T)
    out = _dos_factor(delta, bath) * _emission_occupation(x)
    return out if np.ndim(out) else float(out)


def boltzmann_factor(delta, T):
    """exp(-h delta / k_B T)."""
    x = _reduced_energy(delta, T)
    out = np.exp(-x)
    return out if np.ndim(out) else float(out)


def equilibrium_populations(delta, bath: BathParams):
    """Thermal (p_lower, p_upper) of the two-branch rate equation."""
    r = boltzmann_factor(delta, bath.T)
    p_upper = r / (1.0 + r)
    return 1.0 - p_upper, p_upper


@dataclass
class RelaxationTrace:
    """
    Upper-branch population after an orbital pump pulse.

    With ``noise > 0`` the samples are noisy measurements and may step
    slightly outside [0, 1]; the noiseless trace always stays inside.
    ``noise=None`` marks measured data of unknown noise (no range check).
    """

    time: np.ndarray
    population: np.ndarray
    noise: Optional[float] = 0.0
    seed: Optional[int] = None
    truth: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.population = np.asarray(self.population, dtype=float)
        if self.time.shape != self.population.shape or self.time.ndim != 1:
            raise ValueError("time and population must be 1-D arrays of equal length")
        if np.any(np.diff(self.time) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if self.noise == 0 and (self.population.min() < -1e-12 or self.population.max() > 1 + 1e-12):
            raise ValueError("populations must lie in [0, 1]")


def simulate_pump_probe(delta, bath: BathParams, p0: float, time, noise: float = 0.0, seed=None) -> RelaxationTrace:
    """
    Relaxation of the upper-branch population from `p0` back to equilibrium.

    p(t) = p_eq + (p0 - p_eq) exp(-(gamma_up + gamma_down) t), with optional
    additive Gaussian noise of standard deviation `noise` drawn from
    ``numpy.random.default_rng(seed)``.
    """
    if not 0 <= p0 <= 1:
        raise ValueError("p0 must lie in [0, 1]")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    time = np.asarray(time, dtype=float)
    rate = gamma_up(delta, bath) + gamma_down(delta, bath)
    p_eq = equilibrium_populations(delta, bath)[1]
    pop = p_eq + (p0 - p_eq) * np.exp(-rate * time)
    if noise > 0:
        pop = pop + np.random.default_rng(seed).normal(0.0, noise, size=time.shape)
    truth = {"gamma_up": gamma_up(delta, bath), "gamma_down": gamma_down(delta, bath), "p_eq": p_eq}
    return RelaxationTrace(time, pop, noise=noise, seed=seed, truth=truth)


@dataclass(frozen=True)
class RateEstimate:
    gamma_up: float
    gamma_down: float
    gamma_up_err: float
    gamma_down_err: float
    gamma_total: float
    p_eq: float
    result: object = field(repr=False, default=None)


def extract_rates(trace: RelaxationTrace) -> RateEstimate:
    """
    Split the fitted relaxation rate into absorption and emission.

    The steady-state upper population equals gamma_up / (gamma_up +
    gamma_down), so gamma_up = rate * p_eq and gamma_down = rate * (1 - p_eq).
    Standard errors follow from the fit covariance.
    """
    sigma = None
    res = fit_exp_relaxation(trace.time, trace.population, sigma=sigma)
    if not res.converged:
        raise FitError(
            f"relaxation fit did not converge ({res.message}); residual norm {res.residual_norm:.3g}, "
            f"{res.iterations} iterations",
            res,
        )
    p_eq, _, rate = res.params
    span = (trace.time[-1] - trace.time[0]) * rate
    if span < 3:
        warnings.warn(f"trace covers only {span:.2g} decay constants (< 3)", stacklevel=2)
    up = rate * p_eq
    down = rate * (1.0 - p_eq)
    cov = res.covariance
    if cov is None or not np.all(np.isfinite(cov)):
        up_err = down_err = float("nan")
    else:
        # linear error propagation over (p_eq, rate)
        c = cov[np.ix_([0, 2], [0, 2])]
        g_up = np.array([rate, p_eq])
        g_down = np.array([-rate, 1.0 - p_eq])
        up_err = float(np.sqrt(max(g_up @ c @ g_up, 0.0)))
        down_err = float(np.sqrt(max(g_down @ c @ g_down, 0.0)))
    return RateEstimate(float(up), float(down), up_err, down_err, float(rate), float(p_eq), res)


def pump_probe_scan(deltas, bath: BathParams, p0: float, time, noise: float = 0.0, seed=None,
                    window=MEASURED_WINDOW_GHZ):
    """
    Simulate and analyse pump-probe traces over a set of splittings.

    Splittings outside `window` (GHz) are rejected: above about 110 GHz the
    thermal upper population becomes too small for the technique.  Each
    trace gets its own child seed derived from `seed`.
    """
    deltas = np.asarray(deltas, dtype=float)
    lo, hi = window
    if np.any(deltas < lo) or np.any(deltas > hi):
        raise ValueError(f"pump-probe scan restricted to {lo:g}-{hi:g} GHz")
    seeds = np.random.SeedSequence(seed).spawn(deltas.size)
    out = []
    for d, ss in zip(deltas, seeds):
        trace = simulate_pump_probe(d, bath, p0, time, noise, np.random.default_rng(ss).integers(2**63))
        out.append(extract_rates(trace))
    return out
