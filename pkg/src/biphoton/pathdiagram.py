"""Two-photon path diagrams and the biphoton length/phase parameters.

A two-photon two-path experiment is reduced to two alternatives ``a`` and
``b``; each alternative records the optical path length travelled by the
pump, signal and idler photon and any extra (non-dynamical) phases. From
these, three numbers govern the interference:

* ``delta_L``: biphoton path-length difference,
  ``[(l_sa + l_ia)/2 + l_pa] - [(l_sb + l_ib)/2 + l_pb]``
* ``delta_L_prime``: biphoton path-asymmetry-length difference,
  ``(l_sa - l_ia) - (l_sb - l_ib)``
* ``delta_phi``: net extra phase,
  ``(phi_sa + phi_ia + phi_pa) - (phi_sb + phi_ib + phi_pb)``

Phases are kept unreduced; wrapping modulo 2*pi only happens inside the
trigonometric evaluation of the rates.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from .errors import ConfigError, InputDomainError


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise InputDomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PathAlternative:
    """Optical path lengths (meters) and extra phases (radians) of one alternative."""

    l_p: float
    l_s: float
    l_i: float
    phi_p: float = 0.0
    phi_s: float = 0.0
    phi_i: float = 0.0

    def __post_init__(self):
        for name in ("l_p", "l_s", "l_i"):
            value = getattr(self, name)
            _check_finite(name, value)
            if np.any(np.asarray(value) < 0):
                raise InputDomainError(f"{name} must be non-negative, got {value!r}")
        for name in ("phi_p", "phi_s", "phi_i"):
            _check_finite(name, getattr(self, name))

    @property
    def biphoton_length(self):
        """Mean of signal and idler path lengths plus the pump path length."""
        return (self.l_s + self.l_i) / 2 + self.l_p

    @property
    def asymmetry_length(self):
        """Signal path length minus idler path length."""
        return self.l_s - self.l_i

    @property
    def total_phase(self):
        return self.phi_s + self.phi_i + self.phi_p


@dataclass(frozen=True)
class TwoPhotonPathDiagram:
    alt_a: PathAlternative
    alt_b: PathAlternative

    def __post_init__(self):
        for name in ("alt_a", "alt_b"):
            if not isinstance(getattr(self, name), PathAlternative):
                raise InputDomainError(f"{name} must be a PathAlternative")

    def swapped(self):
        return TwoPhotonPathDiagram(self.alt_b, self.alt_a)


@dataclass(frozen=True)
class BiphotonParams:
    """The (delta_L, delta_L_prime, delta_phi) triple.

    Fields may be scalars or equally shaped numpy arrays; the rate
    functions broadcast over them.
    """

    delta_L: float
    delta_L_prime: float
    delta_phi: float = 0.0

    def __post_init__(self):
        for name in ("delta_L", "delta_L_prime", "delta_phi"):
            _check_finite(name, getattr(self, name))

    def __neg__(self):
        return BiphotonParams(-self.delta_L, -self.delta_L_prime, -self.delta_phi)

    def as_tuple(self):
        return (self.delta_L, self.delta_L_prime, self.delta_phi)


def derive_biphoton_params(diagram):
    """Compute the biphoton parameters of a path diagram (alternative a minus b)."""
    a, b = diagram.alt_a, diagram.alt_b
    delta_L = a.biphoton_length - b.biphoton_length
    delta_L_prime = (a.l_s - a.l_i) - (b.l_s - b.l_i)
    delta_phi = a.total_phase - b.total_phase
    return BiphotonParams(delta_L, delta_L_prime, delta_phi)


def double_pass_params(x_s, x_i):
    """Biphoton parameters of the double-pass (frustrated creation) setup.

    ``x_s`` and ``x_i`` are the signal and idler mirror displacements from
    the balanced position, positive away from the crystal. The round-trip
    factor is already folded in: ``delta_L = x_s + x_i``,
    ``delta_L_prime = 2 x_s - 2 x_i`` and ``delta_phi = pi``.
    """
    _check_finite("x_s", x_s)
    _check_finite("x_i", x_i)
    x_s = np.asarray(x_s, dtype=float)[()]
    x_i = np.asarray(x_i, dtype=float)[()]
    delta_phi = np.full_like(np.asarray(x_s + x_i), math.pi, dtype=float)[()]
    return BiphotonParams(x_s + x_i, 2 * x_s - 2 * x_i, delta_phi)


def double_pass_diagram(x_s, x_i, mirror_distance=0.1, detector_distance=1.2):
    """Explicit path diagram for the double-pass setup.

    Alternative a: the pair is created on the forward pass, so signal and
    idler make the round trip to their mirrors. Alternative b: the pump
    makes the round trip to its mirror and the pair is created on the
    backward pass. All mirrors sit ``mirror_distance`` from the crystal at
    the balanced position; the reflected pass picks up a net phase of pi.
    """
    if mirror_distance + min(x_s, x_i) < 0:
        raise InputDomainError("mirror displacement moves a mirror through the crystal")
    alt_a = PathAlternative(
        l_p=0.0,
        l_s=2 * (mirror_distance + x_s) + detector_distance,
        l_i=2 * (mirror_distance + x_i) + detector_distance,
        phi_s=math.pi,
    )
    alt_b = PathAlternative(
        l_p=2 * mirror_distance,
        l_s=detector_distance,
        l_i=detector_distance,
    )
    return TwoPhotonPathDiagram(alt_a, alt_b)


class Distinguishability(str, enum.Enum):
    COHERENT = "coherent"
    PARTIAL = "partial"
    DISTINGUISHABLE = "distinguishable"


def classify_distinguishability(params, model, threshold=0.05):
    """Classify the two alternatives by their degree of two-photon coherence.

    ``coherent`` if |gamma(dL) gamma'(dL')| >= 1 - threshold,
    ``distinguishable`` if it is <= threshold, ``partial`` otherwise.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold!r}", key="threshold")
    degree = float(np.abs(model.degree_of_coherence(params.delta_L, params.delta_L_prime)))
    if degree >= 1.0 - threshold:
        return Distinguishability.COHERENT
    if degree <= threshold:
        return Distinguishability.DISTINGUISHABLE
    return Distinguishability.PARTIAL
