"""Bounded Levenberg-Marquardt least squares with covariance estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConvergenceError, InputError, SingularJacobianError


@dataclass(frozen=True)
class CurveModel:
    """A parametric curve ``func(x, p)`` with optional analytic ``jac(x, p)``."""

    name: str
    param_names: tuple
    func: Callable
    jac: Callable | None = None

    def __call__(self, x, p):
        return self.func(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def jacobian(self, x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.jac is not None:
            return self.jac(x, p)
        return finite_difference_jacobian(self.func, x, p)


def finite_difference_jacobian(func, x, p, rel_step=1e-6):
    """Central differences, step ``rel_step * max(|p_j|, 1e-3)``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for j in range(p.size):
        h = rel_step * max(abs(p[j]), 1e-3)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((func(x, up) - func(x, dn)) / (2 * h))
    return np.column_stack(cols)


@dataclass
class FitResult:
    model: str
    names: tuple
    values: np.ndarray
    errors: np.ndarray
    covariance: np.ndarray
    chi2_red: float
    converged: bool
    iterations: int
    n_points: int
    flags: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def error(self, name):
        return float(self.errors[self.names.index(name)])

    @property
    def params(self):
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def uncertainties(self):
        return dict(zip(self.names, (float(v) for v in self.errors)))

    def reordered(self, order, names=None):
        order = np.asarray(order)
        return FitResult(
            self.model,
            tuple(names) if names is not None else tuple(self.names[i] for i in order),
            self.values[order],
            self.errors[order],
            self.covariance[np.ix_(order, order)],
            self.chi2_red,
            self.converged,
            self.iterations,
            self.n_points,
            list(self.flags),
            dict(self.derived),
        )

    def to_dict(self):
        return {
            "model": self.model,
            "estimates": self.params,
            "uncertainties": self.uncertainties,
            "chi2_red": self.chi2_red,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_points": self.n_points,
            "flags": list(self.flags),
            "derived": {k: float(v) for k, v in self.derived.items()},
        }


def _bounds(bounds, n):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape != (n,) or hi.shape != (n,):
        raise InputError("bounds must be two sequences with one entry per parameter")
    return lo, hi


def covariance_from_jacobian(jac, cost, n_points, absolute_sigma, cond_limit=1e12):
    """Parameter covariance from the weighted Jacobian at the optimum."""
    a = jac.T @ jac
    d = np.sqrt(np.diag(a))
    if not np.all(np.isfinite(a)) or np.any(d == 0):
        dead = [int(i) for i in np.flatnonzero(d == 0)]
        raise SingularJacobianError(f"Jacobian has zero columns {dead}; parameters unidentifiable")
    scaled = a / np.outer(d, d)
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularJacobianError(f"Jacobian is singular (scaled condition number {cond:.3e})", cond)
    cov = np.linalg.inv(scaled) / np.outer(d, d)
    dof = n_points - jac.shape[1]
    chi2_red = 2 * cost / dof if dof > 0 else np.nan
    if not absolute_sigma:
        cov = cov * chi2_red
    return cov, chi2_red


def _pinv_covariance(jac, cost, n_points, absolute_sigma):
    cov = np.linalg.pinv(jac.T @ jac, rcond=1e-12, hermitian=True)
    dof = n_points - jac.shape[1]
    chi2_red = 2 * cost / dof if dof > 0 else np.nan
    return (cov if absolute_sigma else cov * chi2_red), chi2_red


def nlls_fit(model, data, init, bounds=None, max_iter=10_000, ftol=1e-10, gtol=1e-8, xtol=1e-14,
             on_singular="raise"):
    """Weighted nonlinear least squares by damped Gauss-Newton (Levenberg-Marquardt).

    Minimizes ``0.5 * sum(((model(x, p) - y) / sigma)**2)`` inside the box
    ``bounds``.  Stops when the relative cost change (actual and predicted)
    falls below ``ftol``, when the projected gradient's infinity norm falls
    below ``gtol``, or when the step stagnates.  Uncertainties come from the
    Jacobian at the optimum; they are rescaled by the reduced chi-square
    unless ``data.sigma_known``.  With ``on_singular="pinv"`` a singular
    Jacobian gives a pseudo-inverse covariance and a ``singular_covariance``
    flag instead of an error.
    """
    if on_singular not in ("raise", "pinv"):
        raise InputError("on_singular must be 'raise' or 'pinv'")
    p = np.array(init, dtype=float)
    n_par = p.size
    if len(model.param_names) != n_par:
        raise InputError(f"{model.name}: expected {len(model.param_names)} parameters, got {n_par}")
    if len(data) <= n_par:
        raise InputError(f"{model.name}: need more data points ({len(data)}) than parameters ({n_par})")
    lo, hi = _bounds(bounds, n_par)
    if np.any(p < lo) or np.any(p > hi) or not np.all(np.isfinite(p)):
        raise InputError(f"{model.name}: initial parameters outside bounds")
    x, y, w = data.x, data.y, 1.0 / data.sigma

    def residual(q):
        return (model(x, q) - y) * w

    def jacobian(q):
        return model.jacobian(x, q) * w[:, None]

    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise InputError(f"{model.name}: model is not finite at the initial parameters")
    cost = 0.5 * r @ r
    jac = jacobian(p)
    mu = None
    nu = 2.0
    converged = False
    it = 0
    while True:
        g = jac.T @ r
        blocked = ((p <= lo) & (g > 0)) | ((p >= hi) & (g < 0))
        g_free = np.where(blocked, 0.0, g)
        if np.max(np.abs(g_free)) < gtol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        free = ~blocked
        a = jac[:, free].T @ jac[:, free]
        diag = np.maximum(np.diag(a), 1e-300)
        if mu is None:
            mu = 1e-3
        step = np.zeros(n_par)
        try:
            step[free] = np.linalg.solve(a + mu * np.diag(diag), -g[free])
        except np.linalg.LinAlgError:
            mu *= nu
            nu *= 2
            continue
        trial = np.clip(p + step, lo, hi)
        step = trial - p
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(p) + xtol):
            converged = True
            break
        r_new = residual(trial)
        cost_new = 0.5 * r_new @ r_new if np.all(np.isfinite(r_new)) else np.inf
        predicted = -(g @ step + 0.5 * step @ (jac.T @ (jac @ step)))
        if cost_new < cost:
            actual = cost - cost_new
            ratio = actual / predicted if predicted > 0 else 0.0
            small = cost > 0 and actual <= ftol * cost and predicted <= ftol * cost
            p, r, cost = trial, r_new, cost_new
            jac = jacobian(p)
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * ratio - 1.0) ** 3)
            nu = 2.0
            if small or cost == 0:
                converged = True
                break
        else:
            mu *= nu
            nu *= 2
            if mu > 1e30:
                # no descent possible at machine precision
                converged = True
                break
    if not converged:
        raise ConvergenceError(
            f"{model.name}: no convergence within {max_iter} iterations",
            state={"params": dict(zip(model.param_names, p)), "cost": cost, "iterations": it},
        )
    flags = []
    try:
        cov, chi2_red = covariance_from_jacobian(jac, cost, len(data), data.sigma_known)
    except SingularJacobianError:
        if on_singular == "raise":
            raise
        cov, chi2_red = _pinv_covariance(jac, cost, len(data), data.sigma_known)
        flags.append("singular_covariance")
    return FitResult(
        model.name,
        tuple(model.param_names),
        p,
        np.sqrt(np.maximum(np.diag(cov), 0.0)),
        cov,
        float(chi2_red),
        True,
        it,
        len(data),
        flags,
    )
