"""
Strain-tuned silicon-vacancy centre: orbital levels under cantilever strain,
phonon-limited orbital relaxation, CPT spectra and the fits that connect
them to data.
"""

__version__ = "0.1.0"

from .levels import (  # noqa: E402
    LevelDiagram,
    OrbitalStrainTerms,
    SpinOrbitParams,
    StrainSusceptibilities,
    ZeemanParams,
    diagram_from_strain,
    optical_lines,
    orbital_splitting,
    splittings_from_lines,
    strain_to_terms,
)
from .actuator import (  # noqa: E402
    CantileverGeometry,
    SivOrientation,
    crystal_strain_tensor,
    defect_strain_at_voltage,
    emitter_strain,
    to_defect_frame,
)
from .phonons import (  # noqa: E402
    BathParams,
    bose_occupation,
    extract_rates,
    gamma_down,
    gamma_up,
    simulate_pump_probe,
)
from .cpt import (  # noqa: E402
    CptSpectrum,
    LambdaConfig,
    cpt_spectrum,
    linewidth_at_zero_power,
    predict_linewidth_vs_strain,
)
from .lindblad import DegenerateSteadyStateError, steady_state  # noqa: E402

__all__ = [
    "__version__",
    "BathParams",
    "CantileverGeometry",
    "CptSpectrum",
    "DegenerateSteadyStateError",
    "LambdaConfig",
    "LevelDiagram",
    "OrbitalStrainTerms",
    "SivOrientation",
    "SpinOrbitParams",
    "StrainSusceptibilities",
    "ZeemanParams",
    "bose_occupation",
    "cpt_spectrum",
    "crystal_strain_tensor",
    "defect_strain_at_voltage",
    "diagram_from_strain",
    "emitter_strain",
    "extract_rates",
    "gamma_down",
    "gamma_up",
    "linewidth_at_zero_power",
    "optical_lines",
    "orbital_splitting",
    "predict_linewidth_vs_strain",
    "simulate_pump_probe",
    "splittings_from_lines",
    "steady_state",
    "strain_to_terms",
    "to_defect_frame",
]
