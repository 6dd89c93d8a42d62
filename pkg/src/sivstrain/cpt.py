"""
Coherent population trapping on the C1/C2 Lambda scheme.

Units
-----
Coherent quantities (Rabi frequencies, laser detunings, scan axis, the
fine-structure offset) are cyclic frequencies in MHz.  Incoherent rates
(excited-state decay, dephasing, orbital jumps) are in 1/us.  With these
conventions the zero-power CPT dip has FWHM = gamma_phi / (2 pi) MHz, and
the coherence time quoted from a linewidth is T2* = 1 / (2 pi FWHM).

Two dephasing models are available:

``effective``
    three levels |1 down>, |1 up>, |e>; the qubit coherence decays through a
    pure-dephasing channel of rate gamma_phi.
``microscopic``
    five levels |1 down>, |1 up>, |2 down>, |2 up>, |e>; spin-conserving
    phonon jumps between the orbital branches at gamma_up / gamma_down
    interrupt the dark state.  gamma_phi still adds on top.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .fitting import GridResolutionWarning, fit_linear, fit_lorentzian_dips
from .lindblad import lindblad_generator, steady_state
from .phonons import BathParams, gamma_up as phonon_gamma_up

TWO_PI = 2.0 * np.pi

# SiV excited-state lifetime is about 1.7 ns
DEFAULT_GAMMA_E = 1.0 / 1.7e-3


def fwhm_from_t2star(t2star_us: float) -> float:
    """Dip FWHM (MHz) corresponding to a coherence time in us."""
    return 1.0 / (TWO_PI * t2star_us)


def t2star_from_fwhm(fwhm_mhz: float) -> float:
    """Coherence time (us) from a zero-power dip FWHM in MHz."""
    return 1.0 / (TWO_PI * fwhm_mhz)


def gamma_phi_from_t2star(t2star_us: float) -> float:
    """Pure dephasing rate (1/us) whose zero-power dip gives this T2*."""
    return 1.0 / t2star_us


@dataclass(frozen=True)
class LambdaConfig:
    rabi_1: float = 2.0
    rabi_2: float = 2.0
    detuning_1: float = 0.0
    detuning_2: float = 0.0
    gamma_e: float = DEFAULT_GAMMA_E
    branching_1: float = 0.5
    branching_2: float = 0.5
    model: str = "effective"
    gamma_phi: float = 4.0
    gamma_up: float = 0.0
    gamma_down: float = 0.0
    delta_z: float = 1.0
    hf_offset: float = 0.0
    hf_weight: float = 0.0

    def __post_init__(self):
        if self.model not in ("effective", "microscopic"):
            raise ValueError(f"model must be 'effective' or 'microscopic', got {self.model!r}")
        for name in ("rabi_1", "rabi_2", "detuning_1", "detuning_2", "hf_offset", "delta_z"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("gamma_e", "gamma_phi", "gamma_up", "gamma_down"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite rate >= 0, got {value!r}")
        for name in ("branching_1", "branching_2", "hf_weight"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if self.branching_1 + self.branching_2 > 1 + 1e-12:
            raise ValueError("branching fractions must sum to <= 1")
        if self.delta_z < 0:
            raise ValueError("delta_z must be >= 0")

    @property
    def dimension(self) -> int:
        return 3 if self.model == "effective" else 5

    @property
    def power(self) -> float:
        """Optical power proxy rabi_1^2 + rabi_2^2 (MHz^2)."""
        return self.rabi_1**2 + self.rabi_2**2

    def with_power(self, power: float) -> "LambdaConfig":
        """Copy with both Rabi frequencies rescaled to the given power, ratio kept."""
        if power < 0:
            raise ValueError("power must be >= 0")
        if self.power == 0:
            r = np.sqrt(power / 2.0)
            return replace(self, rabi_1=r, rabi_2=r)
        s = np.sqrt(power / self.power)
        return replace(self, rabi_1=self.rabi_1 * s, rabi_2=self.rabi_2 * s)


def _ket(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _op(n, i, j):
    return np.outer(_ket(n, i), _ket(n, j))


def hamiltonian(config: LambdaConfig) -> np.ndarray:
    """Rotating-frame Hamiltonian in rad/us; excited state at zero energy."""
    n = config.dimension
    e = n - 1
    H = TWO_PI * (
        config.detuning_1 * _op(n, 0, 0)
        + config.detuning_2 * _op(n, 1, 1)
        + 0.5 * config.rabi_1 * (_op(n, e, 0) + _op(n, 0, e))
        + 0.5 * config.rabi_2 * (_op(n, e, 1) + _op(n, 1, e))
    )
    return H.astype(complex)


def collapse_operators(config: LambdaConfig) -> list:
    n = config.dimension
    e = n - 1
    b1, b2 = config.branching_1, config.branching_2
    rest = max(1.0 - b1 - b2, 0.0)
    ge = config.gamma_e
    ops = []
    if config.model == "effective":
        # residual decay returns through the eliminated upper branch, unpolarised
        rates = [(0, ge * (b1 + 0.5 * rest)), (1, ge * (b2 + 0.5 * rest))]
    else:
        rates = [(0, ge * b1), (1, ge * b2), (2, 0.5 * ge * rest), (3, 0.5 * ge * rest)]
    for target, rate in rates:
        if rate > 0:
            ops.append(np.sqrt(rate) * _op(n, target, e))
    if config.gamma_phi > 0:
        sz = _op(n, 0, 0) - _op(n, 1, 1)
        ops.append(np.sqrt(config.gamma_phi) * 0.5 * sz)
    if config.model == "microscopic":
        for lower, upper in ((0, 2), (1, 3)):
            if config.gamma_up > 0:
                ops.append(np.sqrt(config.gamma_up) * _op(n, upper, lower))
            if config.gamma_down > 0:
                ops.append(np.sqrt(config.gamma_down) * _op(n, lower, upper))
    return ops


def build_generator(config: LambdaConfig) -> np.ndarray:
    """Liouvillian (1/us) of the Lambda system described by `config`."""
    return lindblad_generator(hamiltonian(config), collapse_operators(config))


def excited_population(config: LambdaConfig) -> float:
    rho = steady_state(build_generator(config))
    return float(rho[-1, -1].real)


@dataclass
class CptSpectrum:
    """Fluorescence (gamma_e * rho_ee, 1/us) against two-photon detuning (MHz)."""

    detuning: np.ndarray
    signal: np.ndarray
    config: LambdaConfig
    seed: Optional[int] = None
    noise: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.detuning = np.asarray(self.detuning, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if np.any(np.diff(self.detuning) <= 0):
            raise ValueError("detuning grid must be strictly increasing")


def _single_spectrum(config: LambdaConfig, grid: np.ndarray) -> np.ndarray:
    out = np.empty(grid.size)
    for i, delta in enumerate(grid):
        cfg = replace(config, detuning_1=config.detuning_1 + 0.5 * delta,
                      detuning_2=config.detuning_2 - 0.5 * delta)
        rho = steady_state(build_generator(cfg))
        out[i] = config.gamma_e * rho[-1, -1].real
    return np.clip(out, 0.0, None)


def expected_fwhm(config: LambdaConfig) -> float:
    """
    Weak-drive estimate of the dip FWHM in MHz.

    Coherence loss (gamma_phi, plus twice the phonon absorption rate in the
    microscopic model) plus optical pumping (2 pi)^2 (rabi_1^2 + rabi_2^2) /
    gamma_e, all divided by 2 pi.
    """
    loss = config.gamma_phi
    if config.model == "microscopic":
        loss += 2.0 * config.gamma_up
    pumping = TWO_PI**2 * config.power / config.gamma_e if config.gamma_e > 0 else 0.0
    return (loss + pumping) / TWO_PI


def cpt_spectrum(config: LambdaConfig, grid, noise: float = 0.0, seed=None) -> CptSpectrum:
    """
    Steady-state fluorescence as the two-photon detuning is scanned.

    The scan is split symmetrically between the lasers: at grid point delta
    laser 1 sits at detuning_1 + delta/2 and laser 2 at detuning_2 - delta/2.
    With ``hf_weight > 0`` a second Lambda system offset by ``hf_offset``
    contributes with that weight (incoherent sum).  Optional Gaussian noise
    has standard deviation ``noise`` times the largest signal.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be 1-D with at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("detuning grid must be strictly increasing")
    signal = _single_spectrum(config, grid)
    if config.hf_weight > 0:
        shifted = _single_spectrum(config, grid - config.hf_offset)
        signal = (1.0 - config.hf_weight) * signal + config.hf_weight * shifted
    step = float(np.min(np.diff(grid)))
    width = expected_fwhm(config)
    if width / step < 7:
        warnings.warn(
            f"grid step {step:.3g} MHz gives only {width / step:.1f} points across the expected "
            f"{width:.3g} MHz dip (< 7)",
            GridResolutionWarning,
            stacklevel=2,
        )
    if noise > 0:
        rng = np.random.default_rng(seed)
        signal = np.clip(signal + rng.normal(0.0, noise * signal.max(), size=signal.shape), 0.0, None)
    meta = {"config": asdict(config)}
    return CptSpectrum(grid, signal, config, seed=seed, noise=noise, metadata=meta)


def scan_grid(config: LambdaConfig, span_factor: float = 20.0, points: int = 201) -> np.ndarray:
    """Grid centred on the dip, covering `span_factor` expected widths."""
    half = 0.5 * span_factor * expected_fwhm(config)
    centre = config.detuning_2 - config.detuning_1
    if config.hf_weight > 0:
        lo = min(centre, centre + config.hf_offset) - half
        hi = max(centre, centre + config.hf_offset) + half
        return np.linspace(lo, hi, points)
    return np.linspace(centre - half, centre + half, points)


@dataclass(frozen=True)
class ZeroPowerLinewidth:
    fwhm: float
    fwhm_err: float
    slope: float
    slope_err: float
    powers: np.ndarray
    widths: np.ndarray
    width_errs: np.ndarray

    @property
    def t2star(self) -> float:
        """Coherence time in us."""
        return t2star_from_fwhm(self.fwhm)

    @property
    def t2star_err(self) -> float:
        return self.t2star * self.fwhm_err / self.fwhm


class NonlinearPowerWarning(UserWarning):
    """Linewidth against power curves noticeably; the linear extrapolation is biased."""


def dip_fwhm(config: LambdaConfig, points: int = 201, span_factor: float = 20.0, noise: float = 0.0, seed=None):
    """Fit the main dip of a simulated spectrum; returns (fwhm, stderr) in MHz."""
    spectrum = cpt_spectrum(config, scan_grid(config, span_factor, points), noise=noise, seed=seed)
    k = 2 if config.hf_weight > 0 and abs(config.hf_offset) > 0 else 1
    fit = fit_lorentzian_dips(spectrum, k=k, baseline="quadratic")
    centre = config.detuning_2 - config.detuning_1
    dip = min(fit.dips, key=lambda d: abs(d.center - centre))
    return dip.fwhm, dip.fwhm_err


def linewidth_at_zero_power(config: LambdaConfig, powers, points: int = 201, noise: float = 0.0,
                            seed=None) -> ZeroPowerLinewidth:
    """
    Extrapolate the fitted dip FWHM linearly to zero optical power.

    `powers` are values of rabi_1^2 + rabi_2^2 (MHz^2).  A quadratic term
    that shifts the highest-power width by more than 2% triggers a
    `NonlinearPowerWarning`.  With noise, each spectrum draws from its own
    child of ``SeedSequence(seed)`` and the widths are weighted by their
    fit errors.
    """
    powers = np.asarray(powers, dtype=float)
    if powers.size < 4:
        raise ValueError("need at least 4 power points")
    widths = np.empty(powers.size)
    errs = np.empty(powers.size)
    seeds = np.random.SeedSequence(seed).spawn(powers.size)
    for i, (p, ss) in enumerate(zip(powers, seeds)):
        widths[i], errs[i] = dip_fwhm(config.with_power(p), points, noise=noise, seed=ss)
    line = fit_linear(powers, widths, sigma=errs if noise > 0 else None, absolute_sigma=noise > 0)
    quad = np.polyfit(powers, widths, 2)
    if abs(quad[0]) * powers.max() ** 2 > 0.02 * widths.max():
        warnings.warn("linewidth is not linear in power over the scanned range", NonlinearPowerWarning,
                      stacklevel=2)
    return ZeroPowerLinewidth(line.intercept, line.intercept_err, line.slope, line.slope_err,
                              powers, widths, errs)


def anchor_coupling(bath: BathParams, floor: float, linewidth_ref: float,
                    delta_ref: float = 46.0) -> float:
    """Coupling c that makes the predicted linewidth equal `linewidth_ref` (MHz) at `delta_ref`."""
    rate_mhz = phonon_gamma_up(delta_ref, bath) / TWO_PI / 1e6
    if rate_mhz == 0:
        raise ValueError("phonon absorption vanishes at the reference splitting")
    return (linewidth_ref - floor) / rate_mhz


def predict_linewidth_vs_strain(deltas, bath: BathParams, floor: float, c: float):
    """
    CPT linewidth (MHz) against ground-state splitting (GHz).

    floor + c * gamma_up(delta) / (2 pi), with gamma_up in Hz converted to MHz.
    """
    if floor < 0 or c < 0:
        raise ValueError("floor and c must be >= 0")
    rate_mhz = np.asarray(phonon_gamma_up(np.asarray(deltas, dtype=float), bath)) / TWO_PI / 1e6
    return floor + c * rate_mhz
