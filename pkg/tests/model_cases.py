"""Synthetic ground truth for every fit model, shared by the unit and acceptance tests."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from pl6kit.fitting import (
    BIEXPONENTIAL,
    DAMPED_COSINE,
    ESEEM,
    LINE,
    POWER_BROADENING,
    POWER_LAW,
    SATURATION,
    STRETCHED,
    VISIBILITY,
    Spectrum,
    fit_biexponential,
    fit_damped_cosine,
    fit_eseem,
    fit_lambda_rabi,
    fit_line,
    fit_lorentzian_multiplet,
    fit_power_broadening,
    fit_power_law,
    fit_saturation,
    fit_stretched_exponential,
    fit_visibility,
    lambda_rabi_model,
    lorentzian_multiplet_model,
)


@dataclass
class Case:
    name: str
    model: object
    x: np.ndarray
    truth: np.ndarray
    sigma: Callable  # y_true -> sigma
    fit: Callable  # Spectrum -> FitResult
    periodic: dict = None  # parameter index -> period (for wrapped phases)
    positive: tuple = ()  # indices drawn on a log scale for Jacobian checks

    def data(self, seed=None):
        y = self.model(self.x, self.truth)
        s = self.sigma(y)
        if seed is not None:
            y = y + s * np.random.Generator(np.random.PCG64(seed)).standard_normal(y.size)
        return Spectrum(self.x, y, s)

    def random_params(self, rng):
        p = self.truth.astype(float).copy()
        for j in range(p.size):
            if j in self.positive:
                p[j] *= np.exp(rng.uniform(-0.7, 0.7))
            else:
                p[j] += rng.uniform(-0.5, 0.5) * max(abs(p[j]), 0.1)
        return p

    def deviation(self, values):
        d = np.asarray(values, dtype=float) - self.truth
        for j, period in (self.periodic or {}).items():
            d[j] = (d[j] + period / 2) % period - period / 2
        return d


def _const(s):
    return lambda y: np.full(y.size, s)


def _rel(r):
    return lambda y: r * np.abs(y)


CASES = [
    Case("line", LINE, np.linspace(0, 10, 20), np.array([2.0, 1.0]), _const(0.5), fit_line),
    Case(
        "lorentzian_x2", lorentzian_multiplet_model(2), np.linspace(-2, 2, 201),
        np.array([-0.5, 0.18, 1.0, 0.6, 0.2, 0.8, 0.02]), _const(0.02),
        lambda d: fit_lorentzian_multiplet(d, 2), positive=(1, 2, 4, 5),
    ),
    Case(
        "power_broadening", POWER_BROADENING, np.array([0.0, 25, 50, 100, 200, 300, 450, 600, 750, 900]),
        np.array([180.0, 180.9]), _rel(0.02), fit_power_broadening, positive=(0, 1),
    ),
    Case(
        "saturation", SATURATION, np.array([0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2]),
        np.array([140.0, 0.2]), _rel(0.03), fit_saturation, positive=(0, 1),
    ),
    Case(
        "biexponential", BIEXPONENTIAL, np.linspace(0, 1500, 751),
        np.array([1.0, 3.0, 0.2, 300.0, 0.01]), _const(0.01), fit_biexponential, positive=(1, 3),
    ),
    Case(
        "damped_cosine", DAMPED_COSINE, np.arange(0, 20.05, 0.1),
        np.array([2.895, 21.3, 0.3, 0.5, 0.5]), _const(0.01), fit_damped_cosine,
        periodic={2: 2 * np.pi}, positive=(0, 1),
    ),
    Case(
        "eseem", ESEEM, np.linspace(0.005, 1.5, 300),
        np.array([1.0, 0.54, 0.4, 0.3, 24.09, 30.64, 0.0]), _const(0.02),
        lambda d: fit_eseem(d, 5.7), positive=(1, 4, 5),
    ),
    Case(
        "stretched_exponential", STRETCHED, np.linspace(0.2, 12.0, 60),
        np.array([1.0, 5.70, 2.5]), _const(0.02), fit_stretched_exponential, positive=(1,),
    ),
    Case(
        "power_law", POWER_LAW, np.array([2.0, 4.0, 8.0, 16.0]),
        np.array([0.514, 0.89]), _rel(0.03), fit_power_law, positive=(0,),
    ),
    Case(
        "visibility", VISIBILITY, np.arange(0.0, 360.0, 5.0),
        np.array([1e4, 0.82, 90.0]), lambda y: np.sqrt(y), fit_visibility,
        periodic={2: 360.0}, positive=(0,),
    ),
    Case(
        "lambda_rabi", lambda_rabi_model("plus"), np.arange(0, 20.05, 0.1),
        np.array([1.61, 15.0, 19.0, 1.0]), _const(0.01), lambda d: fit_lambda_rabi(d, "plus"),
        positive=(0, 1, 2, 3),
    ),
]

BY_NAME = {c.name: c for c in CASES}


def fd_reference(case, p):
    """Fourth-order central differences, independent of the engine's step rule."""
    cols = []
    for j in range(p.size):
        h = 1e-5 * max(abs(p[j]), 1e-2)
        f = []
        for k in (-2, -1, 1, 2):
            q = p.copy()
            q[j] += k * h
            f.append(case.model(case.x, q))
        cols.append((f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h))
    return np.column_stack(cols)


def jacobian_error(case, p):
    """Largest column-scaled discrepancy between the model Jacobian and differences."""
    jac = case.model.jacobian(case.x, p)
    ref = fd_reference(case, p)
    scale = np.maximum(np.abs(ref).max(axis=0), 1e-300)
    return float((np.abs(jac - ref).max(axis=0) / scale).max())


def coverage(case, n_runs=200, seed0=0):
    """Fraction of runs with the truth inside +-1 sigma, per parameter."""
    hits = np.zeros(case.truth.size)
    for s in range(n_runs):
        fit = case.fit(case.data(seed0 + s))
        hits += np.abs(case.deviation(fit.values)) <= fit.errors
    return hits / n_runs
