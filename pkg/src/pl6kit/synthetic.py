"""Synthetic data sets generated from the published parameter values.

Each generator is deterministic in its seed.  ``write_fixtures`` renders
them to the CSV formats read by ``pl6kit.io.ingest_csv``; the bundled files
under ``pl6kit/data`` were produced this way and carry their generator and
seed in ``#`` comment lines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dynamics import (
    RateModel,
    qwp_excitation_weight,
    rabi_frequency_from_power,
    simulate_optical_rabi,
    simulate_pumping_decay,
    spin_flip_saturation,
    tune_singlet_branching,
)
from .finestructure import LABELS, DEFAULT_PARAMS, labeled_energies
from .fitting.models import _eseem, _multiplet, _stretched
from .fitting.spectrum import Spectrum
from .inference import SYNTHETIC_STRAINS, synthetic_datasets

OMEGA_MAX = 2.895  # GHz at the highest power
P_MAX = 60.0  # uW
KAPPA = OMEGA_MAX / np.sqrt(P_MAX)
T1_EX = 16.0
GAMMA0_MHZ = 180.0
P_SAT_NW = 900.0 / ((440.0 / GAMMA0_MHZ) ** 2 - 1)  # Gamma(900 nW) = 440 MHz
FLIP_R_MAX_KHZ = 140.0
FLIP_P_SAT_UW = 0.2
FIDELITY = 0.9969
PUMP_POWER_UW = 0.08
VISIBILITY = 0.82
ESEEM_TRUTH = {"amplitude": 1.0, "t2": 0.54, "k1": 0.4, "k2": 0.3, "nu_si": 24.09, "nu_c": 30.64, "offset": 0.0}
B_FIELD_MT = 5.7
XY8_T2_MS, XY8_N = 5.70, 2.5
DD_ALPHA, DD_BETA = 0.514, 0.89


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def ple_spectrum(delta_perp=SYNTHETIC_STRAINS[0], fwhm=0.18, noise=0.02, seed=0, params=DEFAULT_PARAMS):
    """PLE scan (GHz, normalized counts) with one Lorentzian per excited level."""
    e = labeled_energies(params, delta_perp)
    x = np.round(np.arange(-8.0, 8.0 + 1e-9, 0.01), 10)
    p = []
    for lab in LABELS:
        p += [e[LABELS.index(lab)], fwhm, 1.0]
    p.append(0.02)
    y = _multiplet(x, np.array(p)) + noise * _rng(seed).standard_normal(x.size)
    return Spectrum(x, y, np.full(x.size, noise), x_unit="GHz")


def linewidth_vs_power(noise=0.02, seed=0):
    p = np.array([0.0, 25, 50, 100, 200, 300, 450, 600, 750, 900])
    g = GAMMA0_MHZ * np.sqrt(1 + p / P_SAT_NW)
    s = noise * g
    return Spectrum(p, g + s * _rng(seed).standard_normal(p.size), s, x_unit="nW", y_unit="MHz")


def flip_rates(noise=0.03, seed=0):
    p = np.array([0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2])
    r = spin_flip_saturation(p, FLIP_R_MAX_KHZ, FLIP_P_SAT_UW)
    s = noise * r
    return Spectrum(p, r + s * _rng(seed).standard_normal(p.size), s, x_unit="uW", y_unit="kHz")


def tuned_rate_model():
    return tune_singlet_branching(RateModel(), PUMP_POWER_UW, FIDELITY)


def pumping_decay(peak_counts=1e6, seed=0, t_max=3000.0, step=2.0):
    """Photon counts per bin of the pumping transient, Poisson sampled."""
    t = np.arange(0.0, t_max + 1e-9, step)
    pl = simulate_pumping_decay(tuned_rate_model(), PUMP_POWER_UW, t).values
    lam = peak_counts * pl / pl.max()
    counts = _rng(seed).poisson(lam).astype(float) if seed is not None else lam
    return Spectrum.counts(t, counts, x_unit="ns", y_unit="counts")


def rabi_trace(power=P_MAX, noise=0.01, seed=0, pulse_len=20.0, t1=T1_EX):
    omega = float(rabi_frequency_from_power(power, KAPPA))
    ts = simulate_optical_rabi(omega, 0.0, t1, pulse_len)
    y = ts.values + noise * _rng(seed).standard_normal(ts.t.size)
    return Spectrum(ts.t, y, np.full(ts.t.size, noise), x_unit="ns")


RABI_POWERS = (6.0, 12.0, 23.8, 40.0, 60.0)


def qwp_scan(branch="plus", visibility=VISIBILITY, mean_counts=1e6, seed=0, step=5.0):
    """Counts versus QWP angle; the drive weight is diluted to visibility ``V``."""
    th = np.arange(0.0, 360.0 + 1e-9, step)
    w = qwp_excitation_weight(th, branch)  # 1/2 (1 +- sin 2 theta)
    lam = mean_counts * (1 + visibility * (2 * w - 1))
    return Spectrum.counts(th, _rng(seed).poisson(lam).astype(float), x_unit="deg", y_unit="counts")


def eseem_decay(noise=0.02, seed=0, n=300, tau_max=1.5):
    tau = np.linspace(tau_max / n, tau_max, n)
    y = _eseem(tau, np.array(list(ESEEM_TRUTH.values())))
    return Spectrum(tau, y + noise * _rng(seed).standard_normal(n), np.full(n, noise), x_unit="ms")


def xy8_decay(noise=0.02, seed=0, n=60, t_max=12.0):
    t = np.linspace(t_max / n, t_max, n)
    y = _stretched(t, np.array([1.0, XY8_T2_MS, XY8_N]))
    return Spectrum(t, y + noise * _rng(seed).standard_normal(n), np.full(n, noise), x_unit="ms")


def t2_scaling(rel_sigma=0.03):
    n = np.array([2.0, 4.0, 8.0, 16.0])
    t2 = DD_ALPHA * n**DD_BETA
    return Spectrum(n, t2, rel_sigma * t2, x_unit="pulses", y_unit="ms")


# --- fixture files -----------------------------------------------------------

def _fmt(v):
    return f"{float(v):.9g}"


def _spectrum_rows(s):
    return ["x,y,sigma"] + [f"{_fmt(a)},{_fmt(b)},{_fmt(c)}" for a, b, c in zip(s.x, s.y, s.sigma)]


FIXTURES = {
    "ple_spectrum": ("spectrum", lambda: ple_spectrum(seed=11), "ple_spectrum(delta_perp=0.688, seed=11)", 11),
    "linewidth_power": ("spectrum", lambda: linewidth_vs_power(seed=12), "linewidth_vs_power(seed=12)", 12),
    "flip_rates": ("spectrum", lambda: flip_rates(seed=13), "flip_rates(seed=13)", 13),
    "pumping_decay": ("decay", lambda: pumping_decay(seed=14), "pumping_decay(peak_counts=1e6, seed=14)", 14),
    "qwp_plus": ("spectrum", lambda: qwp_scan("plus", seed=15), "qwp_scan('plus', seed=15)", 15),
    "qwp_minus": ("spectrum", lambda: qwp_scan("minus", seed=16), "qwp_scan('minus', seed=16)", 16),
    "eseem": ("spectrum", lambda: eseem_decay(seed=17), "eseem_decay(seed=17)", 17),
    "xy8_decay": ("spectrum", lambda: xy8_decay(seed=18), "xy8_decay(seed=18)", 18),
    "t2_scaling": ("t2_scaling", t2_scaling, "t2_scaling(rel_sigma=0.03), noiseless", None),
    "line_list": ("line_list", lambda: synthetic_datasets(DEFAULT_PARAMS.excited_array(), seed=19),
                  "synthetic_datasets(default params, 7 emitters, 30 MHz noise, seed=19)", 19),
}
for _i, _p in enumerate(RABI_POWERS):
    FIXTURES[f"rabi_{_p:g}uW"] = (
        "spectrum", (lambda p=_p, s=20 + _i: rabi_trace(p, seed=s)), f"rabi_trace(power={_p:g}, seed={20 + _i})", 20 + _i,
    )


def render_fixture(name):
    kind, gen, desc, seed = FIXTURES[name]
    data = gen()
    head = [f"# synthetic fixture {name}: {desc}", f"# kind={kind} seed={seed}"]
    if kind == "spectrum":
        body = _spectrum_rows(data)
        head.append(f"# x unit: {data.x_unit or '-'}; y unit: {data.y_unit or '-'}")
    elif kind == "decay":
        body = ["t_ns,counts"] + [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(data.x, data.y)]
    elif kind == "t2_scaling":
        body = ["n_pulses,t2_ms,sigma_ms"] + [f"{_fmt(a)},{_fmt(b)},{_fmt(c)}" for a, b, c in zip(data.x, data.y, data.sigma)]
    else:
        body = ["emitter,label,offset_ghz,sigma_ghz"]
        for ds in data:
            body += [f"{ds.emitter},{ln.label or ''},{_fmt(ln.offset)},{_fmt(ln.sigma)}" for ln in ds.lines]
    return "\n".join(head + body) + "\n"


def write_fixtures(directory):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name in FIXTURES:
        (out / f"{name}.csv").write_bytes(render_fixture(name).encode("utf-8"))
    return sorted(FIXTURES)


def data_dir():
    return Path(__file__).with_name("data")


def fixture_path(name):
    if name not in FIXTURES:
        raise KeyError(name)
    return data_dir() / f"{name}.csv"


if __name__ == "__main__":
    print("\n".join(write_fixtures(data_dir())))
