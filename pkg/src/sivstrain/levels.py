"""
Orbital and spin level structure of the negatively charged SiV centre.

Both the ground-state (GS) and excited-state (ES) manifolds are modelled as
E_g orbital doublets split by spin-orbit coupling.  Strain enters through
three channels in the defect frame: a common A1g shift (alpha) and two E_g
components (beta_x, beta_y) which mix the orbitals.  Diagonalising the
doublet gives the branch splitting

    delta = sqrt(lambda**2 + 4 * (beta_x**2 + beta_y**2))

which grows quadratically with small E_g strain and linearly with large.

Frequencies inside a manifold are in GHz; absolute optical frequencies are in
THz and anchored to a user-supplied mean zero-phonon-line frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

GHZ_PER_THZ = 1e3


@dataclass(frozen=True)
class SpinOrbitParams:
    """Zero-strain orbital splittings (GHz) of the ground and excited manifolds."""

    lambda_gs: float = 46.0
    lambda_es: float = 255.0

    def __post_init__(self):
        for name in ("lambda_gs", "lambda_es"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class OrbitalStrainTerms:
    """Strain coupling of one manifold (GHz): A1g shift and the two E_g components."""

    alpha: float = 0.0
    beta_x: float = 0.0
    beta_y: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.alpha, self.beta_x, self.beta_y])):
            raise ValueError("strain terms must be finite")

    @property
    def beta(self) -> float:
        """Magnitude of the E_g coupling."""
        return float(np.hypot(self.beta_x, self.beta_y))

    def scaled(self, factor: float) -> "OrbitalStrainTerms":
        return OrbitalStrainTerms(factor * self.alpha, factor * self.beta_x, factor * self.beta_y)


@dataclass(frozen=True)
class StrainSusceptibilities:
    """
    Linear map from a defect-frame strain tensor to `OrbitalStrainTerms`.

    All values are in GHz per unit strain.  The defaults are order-of-magnitude
    placeholders (about 1 PHz/strain) and are not calibrated to any device;
    supply measured or fitted values for quantitative work.
    """

    t_par: float = -1.0e6
    t_perp: float = 0.1e6
    d: float = 1.0e6
    f: float = -1.0e6

    def __post_init__(self):
        if not all(np.isfinite([self.t_par, self.t_perp, self.d, self.f])):
            raise ValueError("susceptibilities must be finite")


# Placeholder excited-state response, roughly twice the ground-state one.
DEFAULT_GS_SUSCEPTIBILITY = StrainSusceptibilities()
DEFAULT_ES_SUSCEPTIBILITY = StrainSusceptibilities(t_par=-2.0e6, t_perp=-0.3e6, d=2.0e6, f=-2.0e6)


@dataclass(frozen=True)
class ZeemanParams:
    """Splitting (GHz) between the qubit levels |1 down> and |1 up>."""

    delta_z: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta_z) or self.delta_z < 0:
            raise ValueError(f"delta_z must be finite and >= 0, got {self.delta_z!r}")


@dataclass(frozen=True)
class LevelDiagram:
    """
    Branch energies and optical lines of one SiV.

    Branch energies and lines are absolute frequencies in THz (ground-state
    centroid at zero, excited-state centroid at the mean ZPL plus the
    common shift); splittings are in GHz.
    """

    gs_lower: float
    gs_upper: float
    es_lower: float
    es_upper: float
    line_A: float
    line_B: float
    line_C: float
    line_D: float
    delta_gs: float
    delta_es: float

    @property
    def lines(self) -> np.ndarray:
        return np.array([self.line_A, self.line_B, self.line_C, self.line_D])

    @property
    def wavelengths_nm(self) -> np.ndarray:
        """Vacuum wavelengths of lines A-D in nm."""
        return thz_to_nm(self.lines)


def thz_to_nm(freq_thz):
    return SPEED_OF_LIGHT / (np.asarray(freq_thz, dtype=float) * 1e12) * 1e9


def nm_to_thz(wavelength_nm):
    return SPEED_OF_LIGHT / (np.asarray(wavelength_nm, dtype=float) * 1e-9) * 1e-12


def orbital_splitting(lam: float, terms: OrbitalStrainTerms) -> float:
    """
    Splitting (GHz) between the two orbital branches of a manifold.

    Parameters
    ----------
    lam : float
        Spin-orbit splitting at zero strain (GHz), must be > 0.
    terms : OrbitalStrainTerms
        Strain coupling of the same manifold.  `alpha` shifts both branches
        equally and does not enter.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError(f"spin-orbit splitting must be finite and > 0, got {lam!r}")
    return float(np.sqrt(lam**2 + 4.0 * (terms.beta_x**2 + terms.beta_y**2)))


def orbital_splitting_array(lam, beta):
    """Vectorised splitting for E_g magnitudes `beta` (GHz)."""
    beta = np.asarray(beta, dtype=float)
    return np.sqrt(lam**2 + 4.0 * beta**2)


def _check_symmetric(strain: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    strain = np.asarray(strain, dtype=float)
    if strain.shape != (3, 3):
        raise ValueError(f"strain tensor must be 3x3, got shape {strain.shape}")
    if not np.all(np.isfinite(strain)):
        raise ValueError("strain tensor must be finite")
    scale = max(np.abs(strain).max(), 1.0)
    if np.abs(strain - strain.T).max() > atol * scale:
        raise ValueError("strain tensor must be symmetric")
    return strain


def strain_to_terms(strain, s: StrainSusceptibilities) -> OrbitalStrainTerms:
    """
    Project a defect-frame strain tensor onto the A1g and E_g channels.

    The defect frame has z along the SiV symmetry axis.
    """
    e = _check_symmetric(strain)
    alpha = s.t_par * e[2, 2] + s.t_perp * (e[0, 0] + e[1, 1])
    beta_x = s.d * (e[0, 0] - e[1, 1]) + s.f * e[2, 0]
    beta_y = -2.0 * s.d * e[0, 1] + s.f * e[1, 2]
    return OrbitalStrainTerms(float(alpha), float(beta_x), float(beta_y))


def orbital_hamiltonian(lam: float, terms: OrbitalStrainTerms) -> np.ndarray:
    """
    2x2 orbital Hamiltonian (GHz) of one spin sector in the {e_x, e_y} basis.

    Kept as an independent route to the branch energies; `orbital_splitting`
    uses the closed form.
    """
    return np.array(
        [
            [terms.alpha + terms.beta_x, terms.beta_y - 0.5j * lam],
            [terms.beta_y + 0.5j * lam, terms.alpha - terms.beta_x],
        ]
    )


def optical_lines(delta_gs: float, delta_es: float, nu_mean: float, common_shift: float = 0.0) -> LevelDiagram:
    """
    Build the level diagram from the two orbital splittings.

    Parameters
    ----------
    delta_gs, delta_es : float
        Ground- and excited-state branch splittings (GHz), >= 0.
    nu_mean : float
        Mean zero-phonon-line frequency (THz), > 0.
    common_shift : float
        A1g shift of the optical transitions (GHz), i.e. the difference
        between the excited- and ground-state alpha terms.
    """
    if delta_gs < 0 or delta_es < 0:
        raise ValueError("orbital splittings must be >= 0")
    if not np.isfinite(nu_mean) or nu_mean <= 0:
        raise ValueError("nu_mean must be finite and > 0")
    g = delta_gs / GHZ_PER_THZ
    e = delta_es / GHZ_PER_THZ
    centre = nu_mean + common_shift / GHZ_PER_THZ
    gs_lower, gs_upper = -0.5 * g, 0.5 * g
    es_lower, es_upper = centre - 0.5 * e, centre + 0.5 * e
    return LevelDiagram(
        gs_lower=gs_lower,
        gs_upper=gs_upper,
        es_lower=es_lower,
        es_upper=es_upper,
        line_A=centre + 0.5 * (e + g),
        line_B=centre + 0.5 * (e - g),
        line_C=centre - 0.5 * (e - g),
        line_D=centre - 0.5 * (e + g),
        delta_gs=float(delta_gs),
        delta_es=float(delta_es),
    )


class InconsistentLinesError(ValueError):
    """The four optical lines do not share a common pair of splittings."""


def splittings_from_lines(line_A, line_B, line_C, line_D, tol_ghz: float = 0.05):
    """
    Invert `optical_lines`: recover (delta_gs, delta_es, nu_mean).

    Lines are in THz; splittings come back in GHz.  The closure mismatch
    (A-B) - (C-D) must stay below `tol_ghz`, otherwise the set cannot come
    from a single emitter and `InconsistentLinesError` is raised.
    """
    a, b, c, d = (float(x) for x in (line_A, line_B, line_C, line_D))
    if not (a >= b >= c >= d):
        raise InconsistentLinesError("expected line_A >= line_B >= line_C >= line_D")
    mismatch = ((a - b) - (c - d)) * GHZ_PER_THZ
    if abs(mismatch) > tol_ghz:
        raise InconsistentLinesError(
            f"closure mismatch (A-B)-(C-D) = {mismatch:.4g} GHz exceeds {tol_ghz:g} GHz"
        )
    delta_gs = 0.5 * ((a - b) + (c - d)) * GHZ_PER_THZ
    delta_es = 0.5 * ((a - c) + (b - d)) * GHZ_PER_THZ
    nu_mean = 0.25 * (a + b + c + d)
    return delta_gs, delta_es, nu_mean


def qubit_levels(delta_gs: float, zeeman: ZeemanParams) -> dict[str, float]:
    """
    Ground-state spin-orbital levels (GHz) relative to |1 down>.

    Keys are ``"1d", "1u", "2d", "2u"`` (lower/upper branch, spin down/up).
    The same Zeeman splitting is assumed in both branches.
    """
    if delta_gs < 0:
        raise ValueError("delta_gs must be >= 0")
    dz = zeeman.delta_z
    return {"1d": 0.0, "1u": dz, "2d": float(delta_gs), "2u": float(delta_gs) + dz}


def level_diagram(
    terms_gs: OrbitalStrainTerms,
    terms_es: OrbitalStrainTerms,
    nu_mean: float,
    spin_orbit: SpinOrbitParams = SpinOrbitParams(),
) -> LevelDiagram:
    """Full diagram for given per-manifold strain terms."""
    delta_gs = orbital_splitting(spin_orbit.lambda_gs, terms_gs)
    delta_es = orbital_splitting(spin_orbit.lambda_es, terms_es)
    return optical_lines(delta_gs, delta_es, nu_mean, terms_es.alpha - terms_gs.alpha)


def diagram_from_strain(
    strain,
    nu_mean: float,
    spin_orbit: SpinOrbitParams = SpinOrbitParams(),
    gs: StrainSusceptibilities = DEFAULT_GS_SUSCEPTIBILITY,
    es: StrainSusceptibilities = DEFAULT_ES_SUSCEPTIBILITY,
) -> LevelDiagram:
    """Level diagram for a defect-frame strain tensor."""
    return level_diagram(strain_to_terms(strain, gs), strain_to_terms(strain, es), nu_mean, spin_orbit)


def strain_scaling_exponent(lam: float, beta, rel_step: float = 1e-4):
    """
    Local log-log slope of the strain-induced splitting change.

    Returns d ln(delta - lam) / d ln beta along a pure-E_g ray, evaluated by
    central differences in log space.  Tends to 2 at small strain and 1 at
    large strain.
    """
    beta = np.asarray(beta, dtype=float)
    up = beta * np.exp(rel_step)
    dn = beta * np.exp(-rel_step)

    def excess(b):
        # sqrt(l^2 + x^2) - l written without cancellation
        x2 = 4.0 * b**2
        return x2 / (np.sqrt(lam**2 + x2) + lam)

    return (np.log(excess(up)) - np.log(excess(dn))) / (2.0 * rel_step)
