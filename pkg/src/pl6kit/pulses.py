"""Microwave pulse sequences on the ground-state spin qubit.

Pi and pi/2 pulses are ideal instantaneous rotations; delays are free
precession under a static detuning (GHz, time in ns).  Optical pulses are
bookkeeping elements that occupy time but leave the spin untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

ROTATIONS = {"pi_x": (np.pi, 0.0), "pi_y": (np.pi, np.pi / 2), "pi_half_x": (np.pi / 2, 0.0), "pi_half_y": (np.pi / 2, np.pi / 2)}
XY8_PHASES = ("pi_x", "pi_y", "pi_x", "pi_y", "pi_y", "pi_x", "pi_y", "pi_x")


@dataclass(frozen=True)
class Element:
    kind: str
    duration: float = 0.0
    power: float = 0.0

    def __post_init__(self):
        if self.kind not in ROTATIONS and self.kind not in ("delay", "optical_pulse"):
            raise InputError(f"unknown pulse element {self.kind!r}")
        if not np.isfinite(self.duration) or self.duration < 0:
            raise InputError(f"{self.kind}: duration must be >= 0, got {self.duration!r}")
        if not np.isfinite(self.power) or self.power < 0:
            raise InputError(f"{self.kind}: power must be >= 0")


def delay(tau):
    return Element("delay", float(tau))


def optical_pulse(duration, power):
    return Element("optical_pulse", float(duration), float(power))


@dataclass(frozen=True)
class PulseSequence:
    elements: tuple

    def __post_init__(self):
        elems = tuple(e if isinstance(e, Element) else Element(e) for e in self.elements)
        if not elems:
            raise InputError("pulse sequence is empty")
        object.__setattr__(self, "elements", elems)

    def __len__(self):
        return len(self.elements)

    @property
    def duration(self):
        return sum(e.duration for e in self.elements)

    @property
    def n_pi(self):
        return sum(e.kind in ("pi_x", "pi_y") for e in self.elements)

    def kinds(self):
        return [e.kind for e in self.elements]


def hahn_echo(tau):
    """pi/2 - tau - pi - tau - pi/2, with ``tau`` the half echo time."""
    return PulseSequence(("pi_half_x", delay(tau), "pi_x", delay(tau), "pi_half_x"))


def xy8(tau, repeats=1):
    """XY8-``repeats``: pulse spacing ``tau`` with half spacings at the ends."""
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    body = []
    for _ in range(repeats):
        for kind in XY8_PHASES:
            body += [delay(tau / 2), kind, delay(tau / 2)]
    return PulseSequence(("pi_half_x", *body, "pi_half_x"))


def rotation(angle, phase):
    """SU(2) rotation by ``angle`` about the equatorial axis at ``phase``."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s * np.exp(-1j * phase)], [-1j * s * np.exp(1j * phase), c]])


def free_precession(tau, detuning):
    ph = np.pi * detuning * tau
    return np.diag([np.exp(-1j * ph), np.exp(1j * ph)])


def propagator(sequence, detuning=0.0):
    """Unitary of the whole sequence on the qubit ``{|0>, |1>}``."""
    u = np.eye(2, dtype=complex)
    for e in sequence.elements:
        if e.kind in ROTATIONS:
            u = rotation(*ROTATIONS[e.kind]) @ u
        elif e.kind == "delay":
            u = free_precession(e.duration, detuning) @ u
    return u


def final_population(sequence, detuning=0.0):
    """Population left in ``|0>`` after the sequence acts on ``|0>``."""
    return float(abs(propagator(sequence, detuning)[0, 0]) ** 2)
