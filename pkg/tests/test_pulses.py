import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pl6kit.errors import InputError
from pl6kit.pulses import (
    XY8_PHASES,
    Element,
    PulseSequence,
    delay,
    final_population,
    hahn_echo,
    optical_pulse,
    propagator,
    rotation,
    xy8,
)


def test_xy8_structure():
    seq = xy8(2.0, repeats=3)
    assert seq.n_pi == 24
    assert seq.duration == pytest.approx(48.0)
    pulses = [k for k in seq.kinds() if k.startswith("pi_") and "half" not in k]
    assert pulses[:8] == list(XY8_PHASES)
    assert seq.kinds()[0] == seq.kinds()[-1] == "pi_half_x"


def test_rotations_are_unitary():
    for angle, phase in [(np.pi, 0.0), (np.pi / 2, 0.3), (1.1, -2.0)]:
        u = rotation(angle, phase)
        assert np.allclose(u.conj().T @ u, np.eye(2))
    assert abs(rotation(np.pi, 0.0)[1, 0]) == pytest.approx(1.0)


@given(st.floats(0, 1e3), st.floats(-0.5, 0.5))
def test_hahn_echo_refocuses_static_detuning(tau, detuning):
    assert final_population(hahn_echo(tau), detuning) == pytest.approx(final_population(hahn_echo(tau), 0.0), abs=1e-9)


@given(st.floats(0, 100), st.floats(-0.5, 0.5), st.integers(1, 4))
def test_xy8_refocuses_static_detuning(tau, detuning, repeats):
    u = propagator(xy8(tau, repeats), detuning)
    u0 = propagator(xy8(tau, repeats), 0.0)
    assert abs(abs(np.vdot(u0.ravel(), u.ravel())) / 2 - 1) < 1e-9


def test_ramsey_without_echo_dephases():
    seq = PulseSequence(("pi_half_x", delay(1.0), "pi_half_x"))
    assert final_population(seq, 0.0) == pytest.approx(0.0, abs=1e-15)
    # accumulated phase 2 pi delta tau: a quarter turn leaves half the population
    assert final_population(seq, 0.25) == pytest.approx(0.5, abs=1e-12)
    assert final_population(seq, 0.5) == pytest.approx(1.0, abs=1e-12)


def test_optical_pulse_leaves_spin_alone():
    seq = PulseSequence((optical_pulse(10.0, 5.0), "pi_x"))
    assert seq.duration == 10.0
    assert final_population(seq) == pytest.approx(0.0, abs=1e-15)


def test_sequence_validation():
    with pytest.raises(InputError):
        PulseSequence(())
    with pytest.raises(InputError):
        Element("pi_z")
    with pytest.raises(InputError):
        delay(-1.0)
    with pytest.raises(InputError):
        optical_pulse(1.0, -2.0)
    with pytest.raises(InputError):
        xy8(1.0, 0)
