"""Global Bayesian inference of the excited-state parameters from line positions.

The parameter vector is ``(lambda_so, d_es, d1, d2, delta_1, ..., delta_n)``
with one transverse strain per emitter, all in GHz.  Priors are uniform
boxes.  Sampling is adaptive random-walk Metropolis started from a
Laplace approximation around the maximum a posteriori point.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConvergenceError, InputError, NumericalError, Pl6Error
from .finestructure import LABELS, labeled_energies
from .fitting.engine import CurveModel, nlls_fit
from .fitting.spectrum import Spectrum

log = logging.getLogger(__name__)

GLOBAL_NAMES = ("lambda_so", "d_es", "d1", "d2")
LINE_LABELS = LABELS + ("E12",)
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
TARGET_ACCEPTANCE = 0.234
MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class Line:
    label: str | None
    offset: float
    sigma: float


@dataclass(frozen=True)
class EmitterDataset:
    """Measured line offsets (GHz) of one emitter.

    ``label`` is one of ``A1, A2, Ex, Ey, E1, E2``, ``E12`` for the
    unresolved E1/E2 pair (compared with their mean), or None when the
    line is unassigned.
    """

    emitter: str
    lines: tuple

    def __post_init__(self):
        lines = tuple(ln if isinstance(ln, Line) else Line(*ln) for ln in self.lines)
        if len(lines) < 3:
            raise InputError(f"emitter {self.emitter}: need at least 3 lines, got {len(lines)}")
        for ln in lines:
            if ln.label is not None and ln.label not in LINE_LABELS:
                raise InputError(f"emitter {self.emitter}: unknown label {ln.label!r}")
            if not (np.isfinite(ln.offset) and np.isfinite(ln.sigma)) or ln.sigma <= 0:
                raise InputError(f"emitter {self.emitter}: offsets must be finite and sigma > 0")
        labels = [ln.label for ln in lines if ln.label is not None]
        if len(set(labels)) != len(labels):
            raise InputError(f"emitter {self.emitter}: duplicate line labels")
        n_unlabeled = sum(ln.label is None for ln in lines)
        if n_unlabeled > 6 - len(labels):
            raise InputError(f"emitter {self.emitter}: more lines than model levels")
        object.__setattr__(self, "lines", lines)

    @property
    def offsets(self):
        return np.array([ln.offset for ln in self.lines])

    @property
    def sigmas(self):
        return np.array([ln.sigma for ln in self.lines])


@dataclass(frozen=True)
class Priors:
    """Uniform box priors; ``strain`` applies to every emitter."""

    lambda_so: tuple = (0.0, 20.0)
    d_es: tuple = (0.0, 5.0)
    d1: tuple = (0.0, 1.0)
    d2: tuple = (0.0, 2.0)
    strain: tuple = (0.0, 20.0)

    def __post_init__(self):
        for name in (*GLOBAL_NAMES, "strain"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise InputError(f"prior box for {name} must be finite with lower < upper")

    def box(self, n_emitters):
        lo = [getattr(self, n)[0] for n in GLOBAL_NAMES] + [self.strain[0]] * n_emitters
        hi = [getattr(self, n)[1] for n in GLOBAL_NAMES] + [self.strain[1]] * n_emitters
        return np.array(lo, dtype=float), np.array(hi, dtype=float)


def parameter_names(datasets):
    return GLOBAL_NAMES + tuple(f"delta_{d.emitter}" for d in datasets)


# --- likelihood --------------------------------------------------------------

def _model_lines(energies, dataset):
    """Model offsets matched to the dataset's lines (label, else nearest)."""
    model = np.empty(len(dataset.lines))
    free_levels = list(range(6))
    unlabeled = []
    for i, ln in enumerate(dataset.lines):
        if ln.label is None:
            unlabeled.append(i)
        elif ln.label == "E12":
            model[i] = 0.5 * (energies[4] + energies[5])
            free_levels = [k for k in free_levels if k not in (4, 5)]
        else:
            k = LABELS.index(ln.label)
            model[i] = energies[k]
            free_levels = [j for j in free_levels if j != k]
    if unlabeled:
        obs = np.array([dataset.lines[i].offset for i in unlabeled])
        sig = np.array([dataset.lines[i].sigma for i in unlabeled])
        avail = energies[free_levels]
        cost = ((obs[:, None] - avail[None, :]) / sig[:, None]) ** 2
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            model[unlabeled[r]] = avail[c]
    return model


@dataclass(frozen=True)
class _LinePlan:
    """Precomputed label map: ``model = weights @ energies.ravel()`` for labeled lines."""

    weights: np.ndarray
    labeled: np.ndarray
    obs: np.ndarray
    sigma: np.ndarray
    norm: float
    partial: tuple  # indices of emitters with unlabeled lines


@lru_cache(maxsize=64)
def _plan(datasets):
    n = sum(len(d.lines) for d in datasets)
    w = np.zeros((n, 6 * len(datasets)))
    labeled = np.zeros(n, dtype=bool)
    row = 0
    partial = []
    for j, ds in enumerate(datasets):
        for ln in ds.lines:
            if ln.label == "E12":
                w[row, 6 * j + 4] = w[row, 6 * j + 5] = 0.5
                labeled[row] = True
            elif ln.label is not None:
                w[row, 6 * j + LABELS.index(ln.label)] = 1.0
                labeled[row] = True
            row += 1
        if any(ln.label is None for ln in ds.lines):
            partial.append(j)
    obs = np.concatenate([d.offsets for d in datasets])
    sig = np.concatenate([d.sigmas for d in datasets])
    norm = float(-np.sum(np.log(sig)) - n * _LOG_SQRT_2PI)
    return _LinePlan(w[labeled], labeled, obs, sig, norm, tuple(partial))


def predicted_lines(energies, datasets):
    """Model offsets for every measured line, concatenated over emitters."""
    datasets = tuple(datasets)
    plan = _plan(datasets)
    if not plan.partial:
        return plan.weights @ energies.ravel()
    return np.concatenate([_model_lines(e, d) for e, d in zip(energies, datasets)])


def log_likelihood(global_params, strains, datasets):
    """Gaussian log-likelihood of all measured lines.

    Returns -inf (with a logged diagnostic) if the level computation fails.
    """
    datasets = tuple(datasets)
    strains = np.asarray(strains, dtype=float)
    if strains.shape != (len(datasets),):
        raise InputError("need one strain per emitter")
    try:
        energies = labeled_energies(np.asarray(global_params, dtype=float), strains)
    except (np.linalg.LinAlgError, NumericalError) as exc:
        log.warning("level computation failed at %s: %s", global_params, exc)
        return -np.inf
    if not np.all(np.isfinite(energies)):
        log.warning("non-finite levels at %s", global_params)
        return -np.inf
    plan = _plan(datasets)
    z = (plan.obs - predicted_lines(energies, datasets)) / plan.sigma
    return plan.norm - 0.5 * float(z @ z)


class Posterior:
    """Callable log-posterior over the full parameter vector."""

    def __init__(self, datasets, priors=None, use_likelihood=True):
        if not datasets:
            raise InputError("no emitter datasets")
        ids = [d.emitter for d in datasets]
        if len(set(ids)) != len(ids):
            raise InputError("emitter ids must be unique")
        self.datasets = tuple(datasets)
        self.priors = priors or Priors()
        self.lo, self.hi = self.priors.box(len(datasets))
        self.use_likelihood = use_likelihood
        self.names = parameter_names(datasets)

    @property
    def dim(self):
        return self.lo.size

    def in_support(self, theta):
        return bool(np.all(theta >= self.lo) and np.all(theta <= self.hi))

    def __call__(self, theta):
        if not self.in_support(theta):
            return -np.inf
        if not self.use_likelihood:
            return 0.0
        return log_likelihood(theta[:4], theta[4:], self.datasets)


# --- MAP start and Laplace covariance ---------------------------------------

def _labeled_strain_guess(ds):
    by = {ln.label: ln.offset for ln in ds.lines}
    if "Ex" in by and "Ey" in by:
        return abs(by["Ey"] - by["Ex"]) / 2
    return 1.0


def local_fit(posterior, init):
    """Bounded least-squares descent of the line residuals from ``init``."""
    post = posterior
    obs = np.concatenate([d.offsets for d in post.datasets])
    sig = np.concatenate([d.sigmas for d in post.datasets])
    n_glob = len(GLOBAL_NAMES)

    def predict(_, p):
        return predicted_lines(labeled_energies(p[:n_glob], p[n_glob:]), post.datasets)

    model = CurveModel("line_positions", post.names, predict)
    data = Spectrum(np.arange(obs.size, dtype=float), obs, sig)
    init = np.clip(np.asarray(init, dtype=float), post.lo, post.hi)
    return nlls_fit(model, data, init, (post.lo, post.hi), on_singular="pinv")


def map_estimate(posterior, starts=None):
    """Best least-squares fit over a deterministic set of starts.

    Returns ``(theta, covariance)``; the covariance is the Laplace
    approximation from the Jacobian at the optimum.
    """
    post = posterior
    strains = [min(max(_labeled_strain_guess(d), post.lo[4]), post.hi[4]) for d in post.datasets]
    if starts is None:
        starts = [(lam, 1.0, 0.05, 0.3) for lam in (3.0, 6.0, 9.0)]
    best = None
    for g in starts:
        try:
            res = local_fit(post, np.concatenate([g, strains]))
        except Pl6Error as exc:
            log.info("MAP start %s failed: %s", g, exc)
            continue
        if best is None or res.chi2_red < best.chi2_red:
            best = res
    if best is None:
        raise ConvergenceError("no MAP start converged", state={"starts": list(starts)})
    width = post.hi - post.lo
    # floor the variances so a parameter pinned at a prior edge still gets a proposal scale
    cov = best.covariance + np.diag((1e-3 * width) ** 2)
    return best.values.copy(), cov


def _same_basin(posterior, cand, center, sd):
    try:
        res = local_fit(posterior, cand)
    except Pl6Error:
        return False
    return bool(np.all(np.abs(res.values - center) <= 0.1 * sd))


# --- adaptive Metropolis -----------------------------------------------------

@dataclass
class Chain:
    names: tuple
    samples: np.ndarray  # post-burn-in draws, shape (n, dim)
    log_post: np.ndarray
    seed: int
    acceptance_rate: float
    burn_in: int
    chain_index: int = 0
    warmup: np.ndarray | None = field(default=None, repr=False)

    @property
    def usable(self):
        return 0.05 < self.acceptance_rate < 0.95 and bool(np.all(np.isfinite(self.samples)))

    def column(self, name):
        return self.samples[:, self.names.index(name)]


def _run_chain(posterior, start, proposal_cov, n_steps, burn_in, rng, index, seed):
    dim = start.size
    x = start.copy()
    lp = posterior(x)
    if not np.isfinite(lp):
        raise NumericalError(f"chain {index}: start has zero posterior density")
    scale = 2.38**2 / dim
    log_scale = 0.0
    cov = proposal_cov.copy()
    mean = x.copy()
    emp = np.zeros((dim, dim))
    jitter = 1e-12 * np.diag(np.diag(proposal_cov) + 1e-30)
    chol = np.linalg.cholesky(scale * cov + jitter)
    half = burn_in // 2
    samples = np.empty((n_steps, dim))
    lps = np.empty(n_steps)
    accepted = 0
    streak = 0
    for k in range(n_steps):
        prop = x + chol @ rng.standard_normal(dim)
        lp_new = posterior(prop)
        alpha = 0.0 if not np.isfinite(lp_new) else min(1.0, np.exp(min(0.0, lp_new - lp)))
        if rng.random() < alpha:
            x, lp = prop, lp_new
            streak = 0
            if k >= burn_in:
                accepted += 1
        else:
            streak += 1
            if streak >= MAX_REJECTIONS:
                raise ConvergenceError(
                    f"chain {index}: {MAX_REJECTIONS} consecutive rejections",
                    state={"step": k, "proposal_scale": float(np.exp(log_scale) * scale), "position": x.tolist()},
                )
        samples[k] = x
        lps[k] = lp
        if k < burn_in:
            # Robbins-Monro scale adaptation throughout burn-in; the empirical
            # covariance only uses the second half, after the initial transient
            log_scale += (alpha - TARGET_ACCEPTANCE) / np.sqrt(k + 1)
            if k >= half:
                n = k - half + 1
                delta = x - mean
                mean += delta / n
                emp += (np.outer(delta, x - mean) - emp) / n
                if n >= 10 * dim and n % 50 == 0:
                    cov = emp + 1e-6 * np.diag(np.diag(proposal_cov))
            else:
                mean = x.copy()
            try:
                chol = np.linalg.cholesky(np.exp(log_scale) * scale * cov + jitter)
            except np.linalg.LinAlgError:
                cov = proposal_cov.copy()
                chol = np.linalg.cholesky(np.exp(log_scale) * scale * cov + jitter)
    n_post = n_steps - burn_in
    return Chain(
        posterior.names, samples[burn_in:], lps[burn_in:], seed,
        accepted / n_post if n_post else 0.0, burn_in, index, samples[:burn_in],
    )


def _chain_job(args):
    posterior, start, cov, n_steps, burn_in, state, index, seed = args
    rng = np.random.Generator(np.random.PCG64(state))
    return _run_chain(posterior, start, cov, n_steps, burn_in, rng, index, seed)


def mcmc_sample(datasets, priors=None, n_chains=4, n_steps=20_000, seed=0, workers=1,
                use_likelihood=True, start=None, start_cov=None):
    """Independent adaptive Metropolis chains over globals plus strains.

    The first 20% of each chain is burn-in; the proposal covariance and
    scale adapt there and stay frozen afterwards.  Chains start from the
    MAP point with overdispersed jitter.  Output does not depend on
    ``workers``.
    """
    if n_chains < 4:
        raise InputError("need at least 4 chains")
    if n_steps < 10:
        raise InputError("n_steps too small")
    if seed < 0 or seed >= 2**64:
        raise InputError("seed must be a 64-bit unsigned integer")
    post = Posterior(datasets, priors, use_likelihood)
    width = post.hi - post.lo
    if start is None:
        if use_likelihood:
            start, start_cov = map_estimate(post)
        else:
            start = 0.5 * (post.lo + post.hi)
            start_cov = np.diag((width / np.sqrt(12)) ** 2)
    start = np.asarray(start, dtype=float)
    cov = np.asarray(start_cov, dtype=float) if start_cov is not None else np.diag((1e-2 * width) ** 2)
    children = np.random.SeedSequence(seed).spawn(n_chains + 1)
    init_rng = np.random.Generator(np.random.PCG64(children[-1]))
    sd = np.sqrt(np.diag(cov))
    starts = []
    for _ in range(n_chains):
        # overdispersed draws, kept only if they descend back into the start's basin
        for _attempt in range(50):
            cand = np.clip(start + 2.0 * sd * init_rng.standard_normal(start.size), post.lo, post.hi)
            if not np.isfinite(post(cand)):
                continue
            if not use_likelihood or _same_basin(post, cand, start, sd):
                break
        else:
            cand = start.copy()
        starts.append(cand)
    burn_in = int(0.2 * n_steps)
    jobs = [(post, starts[i], cov, n_steps, burn_in, children[i], i, seed) for i in range(n_chains)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_chain_job, jobs))
    return [_chain_job(j) for j in jobs]


# --- summaries ---------------------------------------------------------------

@dataclass(frozen=True)
class CredibleInterval:
    name: str
    estimate: float
    lower: float
    upper: float
    level: float

    def contains(self, value):
        return self.lower <= value <= self.upper


def _pooled(chains):
    if isinstance(chains, Chain):
        chains = [chains]
    names = chains[0].names
    if any(c.names != names for c in chains):
        raise InputError("chains have different parameter orderings")
    return names, np.vstack([c.samples for c in chains])


def credible_interval(chains, level=0.95, min_samples=1000):
    """Equal-tailed intervals around the posterior median, pooled over chains."""
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    names, s = _pooled(chains)
    if s.shape[0] < min_samples:
        raise InputError(f"need at least {min_samples} post-burn-in samples, got {s.shape[0]}")
    q = np.quantile(s, [(1 - level) / 2, 0.5, (1 + level) / 2], axis=0)
    return [
        CredibleInterval(n, float(min(max(q[1, j], q[0, j]), q[2, j])), float(q[0, j]), float(q[2, j]), level)
        for j, n in enumerate(names)
    ]


def rhat_diagnostic(chains):
    """Split potential-scale-reduction factor per parameter.

    ``chains`` is a list of Chain objects or an array shaped
    ``(n_chains, n_draws[, n_params])``.  Parameters whose chains are all
    identical carry no between-chain information and return exactly 1, as
    do parameters with zero variance everywhere.
    """
    if isinstance(chains, (list, tuple)) and chains and isinstance(chains[0], Chain):
        lengths = {c.samples.shape[0] for c in chains}
        if len(lengths) != 1:
            raise InputError("chains must have equal lengths")
        arr = np.stack([c.samples for c in chains])
    else:
        try:
            arr = np.asarray(chains, dtype=float)
        except ValueError as exc:
            raise InputError("chains must have equal lengths") from exc
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3 or arr.shape[0] < 2:
        raise InputError("need at least 2 chains of equal length")
    n = arr.shape[1] // 2
    if n < 2:
        raise InputError("chains too short for split R-hat")
    halves = np.concatenate([arr[:, :n], arr[:, arr.shape[1] - n:]], axis=0)
    means = halves.mean(axis=1)
    w = halves.var(axis=1, ddof=1).mean(axis=0)
    b = n * means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * w + b / n
    out = np.ones(arr.shape[2])
    ok = w > 0
    out[ok] = np.sqrt(var_plus[ok] / w[ok])
    out[~ok & (b > 0)] = np.inf
    out[np.all(arr == arr[:1], axis=(0, 1))] = 1.0
    return out


def posterior_predictive(chains, strain_grid, n_draws=200, seed=0, quantiles=(0.05, 0.5, 0.95)):
    """Quantile bands of each labeled level versus transverse strain.

    Returns ``{label: array of shape (len(quantiles), len(strain_grid))}``.
    """
    grid = np.asarray(strain_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid < 0):
        raise InputError("strain grid must be a non-empty 1-D array of values >= 0")
    _, s = _pooled(chains)
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.choice(s.shape[0], size=min(n_draws, s.shape[0]), replace=False)
    curves = np.stack([labeled_energies(s[i, :4], grid) for i in np.sort(idx)])  # (draw, grid, 6)
    q = np.quantile(curves, quantiles, axis=0)  # (q, grid, 6)
    return {lab: q[:, :, k] for k, lab in enumerate(LABELS)}


# --- synthetic data ----------------------------------------------------------

SYNTHETIC_STRAINS = (0.688, 1.532, 2.079, 4.505, 6.874, 9.213, 12.416)


def synthetic_datasets(params, strains=SYNTHETIC_STRAINS, noise=0.030, seed=0, labels=LABELS):
    """Labeled line lists with Gaussian noise (GHz) for a set of emitters."""
    rng = np.random.Generator(np.random.PCG64(seed))
    energies = labeled_energies(params, np.asarray(strains, dtype=float))
    out = []
    for i, e in enumerate(energies):
        lines = []
        for lab in labels:
            k = LABELS.index(lab)
            lines.append(Line(lab, float(e[k] + noise * rng.standard_normal()), noise))
        out.append(EmitterDataset(f"em{i + 1}", tuple(lines)))
    return out
