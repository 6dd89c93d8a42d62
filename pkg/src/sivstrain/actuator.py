"""
Electrostatically actuated diamond cantilever as a static strain source.

The beam is treated as an isotropic Euler-Bernoulli cantilever clamped at
x = 0 under a uniform parallel-plate load.  Axial strain at the emitter is
turned into a crystal-frame tensor (uniaxial along the long axis with
Poisson contraction) and then rotated into the frame of a given SiV.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import epsilon_0

UM = 1e-6


class ModelValidityWarning(UserWarning):
    """Inputs push a simplified mechanical model outside its range of validity."""


@dataclass(frozen=True)
class CantileverGeometry:
    """
    Cantilever dimensions and material constants.

    Lengths in micrometres, Young's modulus in GPa.  Defaults describe a
    plausible single-crystal diamond beam; they are not taken from any
    particular device.
    """

    length: float = 19.0
    width: float = 1.2
    thickness: float = 0.3
    gap: float = 3.0
    youngs_modulus: float = 1050.0
    poisson: float = 0.2
    emitter_x: float = 2.0
    emitter_depth: float = 0.05

    def __post_init__(self):
        for name in ("length", "width", "thickness", "gap", "youngs_modulus"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be > 0, got {value!r}")
        if not 0 <= self.poisson < 0.5:
            raise ValueError(f"poisson must lie in [0, 0.5), got {self.poisson!r}")
        if not 0 <= self.emitter_x <= self.length:
            raise ValueError("emitter_x must lie within [0, length]")
        if not 0 <= self.emitter_depth <= self.thickness:
            raise ValueError("emitter_depth must lie within [0, thickness]")

    @property
    def second_moment(self) -> float:
        """Area moment of inertia w t^3 / 12 in m^4."""
        return self.width * UM * (self.thickness * UM) ** 3 / 12.0

    @property
    def flexural_rigidity(self) -> float:
        """E I in N m^2."""
        return self.youngs_modulus * 1e9 * self.second_moment


def electrostatic_load(voltage: float, geom: CantileverGeometry, check: bool = True) -> float:
    """
    Uniform parallel-plate force per unit length (N/m).

    A warning is raised when the resulting tip deflection exceeds 10% of the
    electrode gap, beyond which the fixed-gap approximation breaks down.
    """
    voltage = float(voltage)
    if not np.isfinite(voltage):
        raise ValueError("voltage must be finite")
    q = epsilon_0 * geom.width * UM * voltage**2 / (2.0 * (geom.gap * UM) ** 2)
    if check:
        deflection = tip_deflection(q, geom)
        if deflection > 0.1 * geom.gap * UM:
            warnings.warn(
                f"tip deflection {deflection / UM:.3g} um exceeds 10% of the {geom.gap:g} um gap "
                f"at {voltage:g} V; small-deflection load model is unreliable",
                ModelValidityWarning,
                stacklevel=2,
            )
    return q


def tip_deflection(load: float, geom: CantileverGeometry) -> float:
    """Tip deflection (m) of the cantilever under uniform load q: q L^4 / (8 E I)."""
    return load * (geom.length * UM) ** 4 / (8.0 * geom.flexural_rigidity)


def bending_moment(x: float, load: float, geom: CantileverGeometry) -> float:
    """Bending moment (N m) at distance x (um) from the clamp."""
    return 0.5 * load * ((geom.length - x) * UM) ** 2


def axial_surface_strain(x: float, voltage: float, geom: CantileverGeometry) -> float:
    """
    Axial strain at position x (um) and the emitter depth.

    Positive values are tensile.  Under downward deflection the layer above
    the neutral plane is stretched, so emitters shallower than t/2 see
    tensile strain.
    """
    if not 0 <= x <= geom.length:
        raise ValueError(f"x must lie within [0, {geom.length}] um")
    q = electrostatic_load(voltage, geom)
    z = (0.5 * geom.thickness - geom.emitter_depth) * UM
    eps = z * bending_moment(x, q, geom) / geom.flexural_rigidity
    if abs(eps) > 1e-2:
        warnings.warn(
            f"axial strain {eps:.3g} exceeds the 1e-2 linear-elastic limit",
            ModelValidityWarning,
            stacklevel=2,
        )
    return float(eps)


def emitter_strain(voltage: float, geom: CantileverGeometry) -> float:
    """Axial strain at the configured emitter position."""
    return axial_surface_strain(geom.emitter_x, voltage, geom)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("direction vector must be non-zero")
    return v / n


def crystal_strain_tensor(eps_axial: float, long_axis, poisson: float) -> np.ndarray:
    """
    Crystal-frame strain of a beam stretched by `eps_axial` along `long_axis`.

    The two transverse directions contract by ``poisson * eps_axial``.
    """
    u = np.asarray(long_axis, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("long_axis must be a unit vector")
    uu = np.outer(u, u)
    strain = eps_axial * uu - poisson * eps_axial * (np.eye(3) - uu)
    return 0.5 * (strain + strain.T)


@dataclass(frozen=True)
class SivOrientation:
    """
    Defect frame of an SiV: rows of `frame` are the internal x, y, z axes in
    crystal coordinates, with z the <111> symmetry axis.
    """

    frame: np.ndarray = field(repr=False)

    def __post_init__(self):
        frame = np.asarray(self.frame, dtype=float)
        if frame.shape != (3, 3):
            raise ValueError("frame must be 3x3")
        if np.abs(frame @ frame.T - np.eye(3)).max() > 1e-12:
            raise ValueError("defect frame is not orthonormal")
        if np.linalg.det(frame) < 0:
            raise ValueError("defect frame must be right-handed")
        object.__setattr__(self, "frame", frame)

    @property
    def axis(self) -> np.ndarray:
        return self.frame[2]

    @classmethod
    def from_axis(cls, axis) -> "SivOrientation":
        """
        Frame for a <111> axis given as sign triple, e.g. ``(-1, 1, 1)``.

        For [111] the transverse axes are x = [1,1,-2]/sqrt(6) and
        y = [-1,1,0]/sqrt(2); other members of the family follow by the
        matching sign flips, with y re-derived to keep the frame right-handed.
        """
        signs = np.sign(np.asarray(axis, dtype=float))
        if signs.shape != (3,) or np.any(signs == 0) or not np.allclose(np.abs(axis), np.abs(axis)[0]):
            raise ValueError(f"axis must belong to the <111> family, got {axis!r}")
        z = signs / np.sqrt(3.0)
        x = signs * np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)
        y = np.cross(z, x)
        return cls(np.vstack([x, y, z]))


TRANSVERSE_AXES = ((1, -1, 1), (-1, 1, 1))
LONGITUDINAL_AXES = ((1, 1, 1), (1, 1, -1))
DEFAULT_LONG_AXIS = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)


def to_defect_frame(strain, orient: SivOrientation) -> np.ndarray:
    """Rotate a crystal-frame tensor into the defect frame: R e R^T."""
    strain = np.asarray(strain, dtype=float)
    if strain.shape != (3, 3):
        raise ValueError("strain tensor must be 3x3")
    R = orient.frame
    out = R @ strain @ R.T
    return 0.5 * (out + out.T)


def defect_strain_at_voltage(
    voltage: float,
    geom: CantileverGeometry,
    orient: SivOrientation,
    long_axis=DEFAULT_LONG_AXIS,
) -> np.ndarray:
    """Voltage -> defect-frame strain tensor at the emitter."""
    eps = emitter_strain(voltage, geom)
    return to_defect_frame(crystal_strain_tensor(eps, _unit(long_axis), geom.poisson), orient)


def tensor_invariants(strain) -> tuple[float, float, float]:
    """Trace, second principal invariant and determinant."""
    e = np.asarray(strain, dtype=float)
    tr = np.trace(e)
    i2 = 0.5 * (tr**2 - np.trace(e @ e))
    return float(tr), float(i2), float(np.linalg.det(e))
