"""Driven open-system dynamics: Lindblad evolution and classical rate equations.

Hamiltonians are in ordinary-frequency GHz and time in ns; the factor 2*pi
enters only in the commutator of the Liouvillian.  Collapse rates are in
ns^-1.  Density matrices are vectorized column-major, so
``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.linalg import expm

from .errors import InputError, NumericalError

TWO_PI = 2.0 * np.pi
BIN_NS = 0.1
DETECTION_WINDOW_NS = 35.0


@dataclass(frozen=True)
class Drive:
    """Coherent drive in the rotating frame.

    ``pairs`` lists ``(lower, upper)`` level indices coupled with Rabi
    frequency ``omega`` (GHz); ``detuning`` shifts each upper level by
    ``-detuning``.  ``window`` is ``(t_on, t_off)`` in ns, or None for
    always on.
    """

    omega: float
    detuning: float = 0.0
    window: tuple | None = None
    pairs: tuple = ((0, 1),)

    def is_on(self, t):
        if self.window is None:
            return True
        return self.window[0] <= t < self.window[1]


@dataclass(frozen=True)
class LindbladModel:
    hamiltonian: np.ndarray
    collapse_ops: tuple = ()
    drive: Drive | None = None

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or not 2 <= h.shape[0] <= 7:
            raise InputError(f"hamiltonian must be square with 2-7 levels, got {h.shape}")
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise InputError("hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)
        ops = []
        for op, rate in self.collapse_ops:
            op = np.asarray(op, dtype=complex)
            if op.shape != h.shape:
                raise InputError(f"collapse operator shape {op.shape} does not match hamiltonian {h.shape}")
            if not np.isfinite(rate) or rate < 0:
                raise InputError(f"collapse rate must be finite and >= 0, got {rate!r}")
            ops.append((op, float(rate)))
        object.__setattr__(self, "collapse_ops", tuple(ops))
        if self.drive is not None:
            for lo, hi in self.drive.pairs:
                if not (0 <= lo < self.dim and 0 <= hi < self.dim) or lo == hi:
                    raise InputError(f"drive pair {(lo, hi)} out of range")
            if self.drive.omega < 0:
                raise InputError("Rabi frequency must be >= 0")

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def total_hamiltonian(self, drive_on=True):
        h = self.hamiltonian.copy()
        if self.drive is not None and drive_on:
            for lo, hi in self.drive.pairs:
                h[lo, hi] += self.drive.omega / 2
                h[hi, lo] += self.drive.omega / 2
                h[hi, hi] -= self.drive.detuning
        return h


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    rho: np.ndarray

    def population(self, level):
        return self.rho[:, level, level].real.copy()


@dataclass(frozen=True)
class TimeSeries:
    """(t_ns, value) samples; the CSV interface of the dynamics module."""

    t: np.ndarray
    values: np.ndarray
    name: str = "value"


def build_liouvillian(model, drive_on=True):
    """Generator ``L`` with ``d vec(rho)/dt = L vec(rho)`` (ns^-1, column-major)."""
    d = model.dim
    eye = np.eye(d)
    h = model.total_hamiltonian(drive_on)
    gen = -1j * TWO_PI * (np.kron(eye, h) - np.kron(h.T, eye))
    for c, rate in model.collapse_ops:
        if rate == 0:
            continue
        cdc = c.conj().T @ c
        gen += rate * (np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye))
    return gen


def check_density_matrix(rho, t=None):
    where = "" if t is None else f" at t={t:.6g} ns"
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > 1e-10:
        raise NumericalError(f"density matrix lost Hermiticity ({herm:.2e}){where}")
    tr = np.trace(rho).real
    if abs(tr - 1) > 1e-9:
        raise NumericalError(f"density matrix trace drifted to {tr:.12f}{where}")
    min_eig = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if min_eig < -1e-9:
        raise NumericalError(f"density matrix not positive (min eigenvalue {min_eig:.2e}){where}")


def _segments(model, t0, t1):
    """Split [t0, t1] at drive switching times."""
    cuts = [t0]
    if model.drive is not None and model.drive.window is not None:
        for edge in model.drive.window:
            if t0 < edge < t1:
                cuts.append(edge)
    cuts.append(t1)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        on = model.drive is not None and model.drive.is_on(0.5 * (a + b))
        out.append((a, b, on))
    return out


def evolve(model, rho0, t_grid, method="expm", rtol=1e-10, atol=1e-12):
    """Density-matrix trajectory sampled on ``t_grid`` (ns, ascending from 0).

    The generator is piecewise constant (drive on/off), so ``method="expm"``
    propagates exactly with matrix exponentials.  ``method="rk"`` uses an
    adaptive Dormand-Prince 8(5,3) integrator with step rejection at
    tolerance ``rtol``; both paths validate every output state.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = model.dim
    if rho0.shape != (d, d):
        raise InputError(f"rho0 shape {rho0.shape} does not match model dimension {d}")
    check_density_matrix(rho0)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0 or np.any(np.diff(t) <= 0):
        raise InputError("t_grid must be strictly ascending and start at 0")
    gens = {True: build_liouvillian(model, True), False: build_liouvillian(model, False)}
    out = np.empty((t.size, d, d), dtype=complex)
    out[0] = rho0
    vec = rho0.reshape(-1, order="F")
    cache = {}
    for k in range(1, t.size):
        for a, b, on in _segments(model, t[k - 1], t[k]):
            if method == "expm":
                key = (on, round(b - a, 12))
                if key not in cache:
                    cache[key] = expm(gens[on] * (b - a))
                vec = cache[key] @ vec
            elif method == "rk":
                gen = gens[on]
                sol = solve_ivp(lambda _, y: gen @ y, (a, b), vec, method="DOP853", rtol=rtol, atol=atol)
                if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
                    raise NumericalError(f"integrator failed at t={sol.t[-1]:.6g} ns: {sol.message}")
                vec = sol.y[:, -1]
            else:
                raise InputError(f"unknown method {method!r}")
        rho = vec.reshape(d, d, order="F")
        check_density_matrix(rho, t[k])
        out[k] = rho
    return Trajectory(t, out)


def _bins(pulse_len, tail_ns, bin_ns):
    n = int(round((pulse_len + tail_ns) / bin_ns))
    return np.arange(n + 1) * bin_ns


def simulate_optical_rabi(omega, detuning, t1, pulse_len, dephasing=0.0, tail_ns=0.0, bin_ns=BIN_NS):
    """Excited-state population of a driven two-level emitter.

    Level 0 is the ground spin state, level 1 the excited orbital.  The
    drive is on for ``[0, pulse_len]``; ``tail_ns`` extends the series into
    the free-decay detection window.  ``dephasing`` is an optional pure
    dephasing rate (ns^-1) applied through ``|e><e|``.
    """
    if omega < 0 or t1 <= 0:
        raise InputError("need omega >= 0 and t1 > 0")
    if pulse_len <= 0:
        raise InputError(f"pulse_len must be > 0, got {pulse_len!r}")
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    proj_e = np.diag([0.0, 1.0]).astype(complex)
    model = LindbladModel(
        np.zeros((2, 2)),
        ((lower, 1.0 / t1), (proj_e, dephasing)),
        Drive(omega, detuning, (0.0, pulse_len), ((0, 1),)),
    )
    t = _bins(pulse_len, tail_ns, bin_ns)
    traj = evolve(model, np.diag([1.0, 0.0]), t)
    return TimeSeries(t, traj.population(1), "excited_population")


LAMBDA_LEVELS = ("+1", "-1", "A2")


@dataclass(frozen=True)
class LambdaRun:
    t: np.ndarray
    populations: np.ndarray  # columns follow LAMBDA_LEVELS
    photon_rate: np.ndarray  # ns^-1
    branch: str

    @property
    def excited(self):
        return self.populations[:, 2]


def lambda_model(omega_drive, branch, gamma_plus, gamma_minus, pulse_len):
    if branch not in ("plus", "minus"):
        raise InputError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if gamma_plus <= 0 or gamma_minus <= 0:
        raise InputError("decay rates must be > 0")
    down_plus = np.zeros((3, 3), dtype=complex)
    down_plus[0, 2] = 1
    down_minus = np.zeros((3, 3), dtype=complex)
    down_minus[1, 2] = 1
    ground = 0 if branch == "plus" else 1
    return LindbladModel(
        np.zeros((3, 3)),
        ((down_plus, gamma_plus), (down_minus, gamma_minus)),
        Drive(omega_drive, 0.0, (0.0, pulse_len), ((ground, 2),)),
    )


def simulate_lambda_rabi(omega_drive, branch, gamma_plus, gamma_minus, pulse_len, tail_ns=0.0, bin_ns=BIN_NS):
    """Three-level Lambda system ``{|+1>, |-1>, |A2>}`` with one branch driven.

    The spin starts in the driven ground state.  Re-pumping and spin flips
    inside the ground manifold are left out; the photon rate is the total
    radiative flux out of ``|A2>``.
    """
    if pulse_len <= 0:
        raise InputError(f"pulse_len must be > 0, got {pulse_len!r}")
    model = lambda_model(omega_drive, branch, gamma_plus, gamma_minus, pulse_len)
    rho0 = np.zeros((3, 3), dtype=complex)
    g = 0 if branch == "plus" else 1
    rho0[g, g] = 1
    t = _bins(pulse_len, tail_ns, bin_ns)
    traj = evolve(model, rho0, t)
    pops = np.column_stack([traj.population(i) for i in range(3)])
    return LambdaRun(t, pops, (gamma_plus + gamma_minus) * pops[:, 2], branch)


def qwp_excitation_weight(theta, spin_branch):
    """Relative drive intensity of a spin branch after a quarter-wave plate.

    Linear input light through a QWP at ``theta`` degrees carries
    sigma+ weight ``(1 - sin 2theta)/2`` and sigma- weight
    ``(1 + sin 2theta)/2``.  The ``+1`` branch couples to ``|A2>`` through
    sigma-, the ``-1`` branch through sigma+.
    """
    s = np.sin(np.deg2rad(2 * np.asarray(theta, dtype=float)))
    if spin_branch == "plus":
        return (1 + s) / 2
    if spin_branch == "minus":
        return (1 - s) / 2
    raise InputError(f"spin_branch must be 'plus' or 'minus', got {spin_branch!r}")


def spin_flip_saturation(power, r_max, p_sat):
    """Saturating spin-flip rate ``r_max * P / (P + p_sat)`` (kHz, power in uW)."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0) or r_max <= 0 or p_sat <= 0:
        raise InputError("need power >= 0, r_max > 0, p_sat > 0")
    return r_max * power / (power + p_sat)


def rabi_frequency_from_power(power, kappa):
    """Optical Rabi frequency ``kappa * sqrt(P)`` in GHz."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise InputError("power must be >= 0")
    return kappa * np.sqrt(power)


# --- classical rate model ----------------------------------------------------

POOLS = ("g0", "g1", "e0", "e1", "S")


@dataclass(frozen=True)
class RateModel:
    """Five-pool spin-pumping rate model.

    Pools: ground m_s=0 ``g0``, ground m_s=+-1 ``g1`` (both spin states as
    one pool), their optically excited partners ``e0``/``e1`` and the
    singlet ``S``.  Rates are ns^-1; pumping rates are per uW of laser
    power and act symmetrically (absorption and stimulated emission).
    """

    pump_ms1: float = 0.5
    pump_ms0: float = 0.0
    radiative: float = 1 / 16
    isc_ms0: float = 0.001
    isc_ms1: float = 0.05
    singlet_to_ms0: float = 1 / 300
    singlet_to_ms1: float = 1.7e-5
    spin_relaxation: float = 0.0
    initial: tuple = (1 / 3, 2 / 3, 0.0, 0.0, 0.0)

    def __post_init__(self):
        rates = (
            self.pump_ms1, self.pump_ms0, self.radiative, self.isc_ms0, self.isc_ms1,
            self.singlet_to_ms0, self.singlet_to_ms1, self.spin_relaxation,
        )
        if any(not np.isfinite(r) or r < 0 for r in rates):
            raise InputError("rate-model rates must be finite and >= 0")
        pops = np.asarray(self.initial, dtype=float)
        if pops.shape != (5,) or np.any(pops < 0) or abs(pops.sum() - 1) > 1e-9:
            raise InputError("initial populations must be 5 non-negative values summing to 1")


def rate_matrix(model, laser_power):
    """Generator ``M`` of ``dp/dt = M p`` over ``POOLS``; columns sum to zero."""
    if laser_power < 0:
        raise InputError("laser power must be >= 0")
    g0, g1, e0, e1, s = range(5)
    m = np.zeros((5, 5))

    def link(src, dst, rate):
        m[dst, src] += rate
        m[src, src] -= rate

    p1 = model.pump_ms1 * laser_power
    p0 = model.pump_ms0 * laser_power
    link(g1, e1, p1)
    link(e1, g1, p1 + model.radiative)
    link(g0, e0, p0)
    link(e0, g0, p0 + model.radiative)
    link(e0, s, model.isc_ms0)
    link(e1, s, model.isc_ms1)
    link(s, g0, model.singlet_to_ms0)
    link(s, g1, model.singlet_to_ms1)
    link(g0, g1, model.spin_relaxation)
    link(g1, g0, model.spin_relaxation)
    return m


def population_trajectory(model, laser_power, t_grid):
    m = rate_matrix(model, laser_power)
    t = np.asarray(t_grid, dtype=float)
    p0 = np.asarray(model.initial, dtype=float)
    pops = np.array([expm(m * ti) @ p0 for ti in t])
    return pops


def simulate_pumping_decay(rate_model, laser_power, t_grid):
    """Photoluminescence transient ``radiative * (e0 + e1)`` under constant pumping."""
    pops = population_trajectory(rate_model, laser_power, t_grid)
    return TimeSeries(np.asarray(t_grid, dtype=float), rate_model.radiative * (pops[:, 2] + pops[:, 3]), "pl")


@dataclass(frozen=True)
class PLModes:
    """Exact modal form ``PL(t) = constant + sum_k amplitudes[k] exp(-rates[k] t)``."""

    rates: np.ndarray
    amplitudes: np.ndarray
    constant: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.constant + np.exp(-np.outer(t, self.rates)) @ self.amplitudes


def pl_modes(rate_model, laser_power):
    """Eigen-decomposition of the PL transient, sorted slowest decay first."""
    m = rate_matrix(rate_model, laser_power)
    w, v = np.linalg.eig(m)
    coef = np.linalg.solve(v, np.asarray(rate_model.initial, dtype=float))
    readout = np.zeros(5)
    readout[2] = readout[3] = rate_model.radiative
    amps = (readout @ v) * coef
    if np.max(np.abs(w.imag)) > 1e-12 or np.max(np.abs(amps.imag)) > 1e-12:
        raise NumericalError("rate matrix has oscillatory modes")
    w, amps = w.real, amps.real
    stationary = np.abs(w) < 1e-12 * max(1.0, np.abs(w).max())
    constant = float(amps[stationary].sum())
    rates, amps = -w[~stationary], amps[~stationary]
    order = np.argsort(rates)
    return PLModes(rates[order], amps[order], constant)


def modal_fidelity(rate_model, laser_power):
    """Fast-to-total amplitude fraction of the two slowest PL modes.

    This is the quantity a bi-exponential fit of the transient tail
    estimates; it is computed here exactly from the eigen-decomposition.
    """
    modes = pl_modes(rate_model, laser_power)
    slow, fast = modes.amplitudes[0], modes.amplitudes[1]
    return fast / (fast + slow)


def tune_singlet_branching(rate_model, laser_power, fidelity, bracket=(1e-9, 1e-2)):
    """Copy of ``rate_model`` whose singlet-to-m_s=+-1 rate gives ``fidelity``.

    Larger singlet return into the +-1 pool raises the slow PL component,
    so the modal fidelity is monotone in this rate and a bracketing root
    finder suffices.
    """
    if not 0 < fidelity < 1:
        raise InputError("fidelity must lie in (0, 1)")

    def gap(rate):
        return modal_fidelity(replace(rate_model, singlet_to_ms1=rate), laser_power) - fidelity

    lo, hi = bracket
    if gap(lo) * gap(hi) > 0:
        raise NumericalError(f"fidelity {fidelity} not reachable for singlet rates in {bracket}")
    rate = brentq(gap, lo, hi, xtol=1e-18, rtol=1e-14)
    return replace(rate_model, singlet_to_ms1=rate)
