"""Phasors, three-phase sets and the symmetrical-component transform.

Angles are given in degrees at the public constructors (``Phasor.polar``,
``ThreePhaseSet.polar``) and stored internally as complex numbers.  All
magnitudes are RMS.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ALPHA",
    "A_MATRIX",
    "A_INV",
    "Phasor",
    "ThreePhaseSet",
    "SequenceSet",
    "fortescue_decompose",
    "fortescue_compose",
    "polar",
]

ALPHA: complex = cmath.exp(2j * math.pi / 3)

# phase = A_MATRIX @ [pos, neg, zero]
A_MATRIX = np.array(
    [
        [1.0, 1.0, 1.0],
        [ALPHA**2, ALPHA, 1.0],
        [ALPHA, ALPHA**2, 1.0],
    ],
    dtype=complex,
)
# [pos, neg, zero] = A_INV @ phase  (row order: +, -, 0)
A_INV = np.array(
    [
        [1.0, ALPHA, ALPHA**2],
        [1.0, ALPHA**2, ALPHA],
        [1.0, 1.0, 1.0],
    ],
    dtype=complex,
) / 3.0


def polar(magnitude: float, angle_deg: float = 0.0) -> complex:
    """Complex value from an RMS magnitude and an angle in degrees."""
    return cmath.rect(magnitude, math.radians(angle_deg))


def _normalize_angle(rad: float) -> float:
    # map to (-pi, pi]
    wrapped = math.remainder(rad, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


@dataclass(frozen=True)
class Phasor:
    """Single RMS phasor stored as a complex value."""

    value: complex = 0j

    @classmethod
    def polar(cls, magnitude: float, angle_deg: float = 0.0) -> "Phasor":
        if magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        return cls(polar(magnitude, angle_deg))

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def angle(self) -> float:
        """Angle in radians, normalized to (-pi, pi]."""
        if self.value == 0:
            return 0.0
        return _normalize_angle(cmath.phase(self.value))

    @property
    def angle_deg(self) -> float:
        return math.degrees(self.angle)

    def __complex__(self) -> complex:
        return complex(self.value)

    def __add__(self, other: "Phasor") -> "Phasor":
        return Phasor(self.value + complex(other))

    def __sub__(self, other: "Phasor") -> "Phasor":
        return Phasor(self.value - complex(other))

    def __mul__(self, k: complex) -> "Phasor":
        return Phasor(self.value * complex(k))

    __rmul__ = __mul__

    def __neg__(self) -> "Phasor":
        return Phasor(-self.value)


class _Triple:
    """Shared behaviour of three-entry complex containers."""

    __slots__ = ()
    _fields: tuple[str, str, str]

    def as_array(self) -> np.ndarray:
        return np.array([complex(getattr(self, f)) for f in self._fields], dtype=complex)

    @classmethod
    def from_array(cls, arr):
        a, b, c = (complex(x) for x in np.asarray(arr, dtype=complex).reshape(3))
        return cls(a, b, c)

    def __iter__(self):
        return iter(complex(getattr(self, f)) for f in self._fields)

    def __add__(self, other):
        return type(self).from_array(self.as_array() + other.as_array())

    def __sub__(self, other):
        return type(self).from_array(self.as_array() - other.as_array())

    def __mul__(self, k: complex):
        return type(self).from_array(self.as_array() * complex(k))

    __rmul__ = __mul__

    def __neg__(self):
        return type(self).from_array(-self.as_array())

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.as_array())


@dataclass(frozen=True)
class ThreePhaseSet(_Triple):
    """Phase a, b, c phasors of one quantity (all voltages or all currents)."""

    a: complex = 0j
    b: complex = 0j
    c: complex = 0j
    unit: str = ""

    _fields = ("a", "b", "c")

    @classmethod
    def from_array(cls, arr, unit: str = ""):
        a, b, c = (complex(x) for x in np.asarray(arr, dtype=complex).reshape(3))
        return cls(a, b, c, unit)

    @classmethod
    def polar(cls, mags, angles_deg, unit: str = "") -> "ThreePhaseSet":
        return cls.from_array([polar(m, d) for m, d in zip(mags, angles_deg)], unit)

    @classmethod
    def balanced(cls, value: complex, unit: str = "") -> "ThreePhaseSet":
        """Positive-sequence set whose phase-a entry is ``value``."""
        v = complex(value)
        return cls(v, v * ALPHA**2, v * ALPHA, unit)

    def _check_unit(self, other: "ThreePhaseSet") -> None:
        if self.unit and other.unit and self.unit != other.unit:
            raise ValueError(f"cannot combine {self.unit!r} and {other.unit!r} sets")

    def __add__(self, other):
        self._check_unit(other)
        return ThreePhaseSet.from_array(self.as_array() + other.as_array(), self.unit or other.unit)

    def __sub__(self, other):
        self._check_unit(other)
        return ThreePhaseSet.from_array(self.as_array() - other.as_array(), self.unit or other.unit)

    def __mul__(self, k: complex):
        return ThreePhaseSet.from_array(self.as_array() * complex(k), self.unit)

    __rmul__ = __mul__

    def __neg__(self):
        return ThreePhaseSet.from_array(-self.as_array(), self.unit)


@dataclass(frozen=True)
class SequenceSet(_Triple):
    """Positive, negative and zero sequence components."""

    pos: complex = 0j
    neg: complex = 0j
    zero: complex = 0j

    _fields = ("pos", "neg", "zero")


def fortescue_decompose(abc) -> SequenceSet:
    """Split a phase triple into (pos, neg, zero) using the 1/3-scaled matrix."""
    x = abc.as_array() if isinstance(abc, _Triple) else np.asarray(abc, dtype=complex)
    return SequenceSet.from_array(A_INV @ x)


def fortescue_compose(seq, unit: str = "") -> ThreePhaseSet:
    """Rebuild phase a, b, c from sequence components."""
    s = seq.as_array() if isinstance(seq, _Triple) else np.asarray(seq, dtype=complex)
    return ThreePhaseSet.from_array(A_MATRIX @ s, unit)
