"""Four-momentum kinematics for collision events.

Scalar helpers accept floats or numpy arrays and broadcast elementwise.
Angles are in radians, energies and momenta in GeV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def transverse_momentum(px, py):
    """Momentum component transverse to the beam axis.

    Parameters
    ----------
    px, py : float or ndarray
        Cartesian momentum components orthogonal to the beam.

    Returns
    -------
    float or ndarray
        sqrt(px**2 + py**2), equal to p*sin(theta) for a momentum of
        magnitude p at polar angle theta.
    """
    return np.hypot(px, py)


def rapidity(energy, pz):
    """Longitudinal rapidity y = 0.5*ln((E + pz) / (E - pz)).

    Raises
    ------
    DomainError
        If energy <= |pz| anywhere, where the logarithm is undefined.
    """
    energy = np.asarray(energy, dtype=float)
    pz = np.asarray(pz, dtype=float)
    if np.any(energy <= np.abs(pz)):
        raise DomainError("rapidity requires energy > |pz|")
    out = 0.5 * np.log((energy + pz) / (energy - pz))
    return float(out) if out.ndim == 0 else out


def pseudorapidity(theta):
    """Pseudorapidity eta = -ln(tan(theta / 2)) for polar angle theta in (0, pi).

    Raises
    ------
    DomainError
        If theta lies outside the open interval (0, pi).
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0) or np.any(theta >= math.pi):
        raise DomainError("pseudorapidity requires 0 < theta < pi")
    out = -np.log(np.tan(theta / 2.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FourMomentum:
    """Energy-momentum four-vector in cartesian components (E, px, py, pz)."""

    energy: float
    px: float
    py: float
    pz: float

    @classmethod
    def from_polar(cls, energy: float, momentum: float, theta: float, phi: float) -> "FourMomentum":
        """Build from (E, p, theta, phi) with p the momentum magnitude.

        Raises DomainError if the magnitude is negative.
        """
        if momentum < 0.0:
            raise DomainError("momentum magnitude must be non-negative")
        st = math.sin(theta)
        return cls(
            energy=energy,
            px=momentum * st * math.cos(phi),
            py=momentum * st * math.sin(phi),
            pz=momentum * math.cos(theta),
        )

    @classmethod
    def from_transverse(cls, m_t: float, p_t: float, phi: float, y: float) -> "FourMomentum":
        """Build from (m_T, p_T, phi, y) with m_T the transverse mass and y the rapidity.

        Uses E = m_T*cosh(y), pz = m_T*sinh(y).
        Raises DomainError if m_T or p_T is negative.
        """
        if m_t < 0.0:
            raise DomainError("transverse mass must be non-negative")
        if p_t < 0.0:
            raise DomainError("transverse momentum must be non-negative")
        return cls(
            energy=m_t * math.cosh(y),
            px=p_t * math.cos(phi),
            py=p_t * math.sin(phi),
            pz=m_t * math.sinh(y),
        )

    @property
    def pt(self) -> float:
        return float(np.hypot(self.px, self.py))

    @property
    def momentum(self) -> float:
        return math.sqrt(self.px**2 + self.py**2 + self.pz**2)

    @property
    def phi(self) -> float:
        return math.atan2(self.py, self.px)

    @property
    def theta(self) -> float:
        # atan2 keeps theta in (0, pi) whenever pt > 0
        return math.atan2(self.pt, self.pz)

    @property
    def eta(self) -> float:
        return pseudorapidity(self.theta)

    @property
    def rapidity(self) -> float:
        return rapidity(self.energy, self.pz)

    @property
    def transverse_mass(self) -> float:
        arg = self.energy**2 - self.pz**2
        if arg < 0.0:
            raise DomainError("transverse mass undefined for energy < |pz|")
        return math.sqrt(arg)

    def to_polar(self) -> tuple[float, float, float, float]:
        """Inverse of from_polar: (E, p, theta, phi)."""
        return self.energy, self.momentum, self.theta, self.phi

    def to_transverse(self) -> tuple[float, float, float, float]:
        """Inverse of from_transverse: (m_T, p_T, phi, y)."""
        return self.transverse_mass, self.pt, self.phi, self.rapidity


def to_cartesian(components, representation: str) -> FourMomentum:
    """Convert a 4-tuple in a named representation to cartesian components.

    representation is "polar" for (E, p, theta, phi) or "transverse" for
    (m_T, p_T, phi, y).
    """
    a, b, c, d = components
    if representation == "polar":
        return FourMomentum.from_polar(a, b, c, d)
    if representation == "transverse":
        return FourMomentum.from_transverse(a, b, c, d)
    raise DomainError(f"unknown representation {representation!r}")
