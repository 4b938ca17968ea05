"""Curve models and the fit routines built on them.

All models except the Lambda-system envelope carry analytic Jacobians;
that one is a master-equation solve and uses central differences.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import medfilt

from ..dynamics import evolve, lambda_model
from ..errors import InputError, NumericalError
from .engine import CurveModel, FitResult, covariance_from_jacobian, nlls_fit

GAMMA_SI29_KHZ_PER_MT = 8.458
GAMMA_C13_KHZ_PER_MT = 10.705
# effective field seen by the Larmor modulation relative to the applied field
ESEEM_FIELD_FACTOR = 0.5


# --- straight line -----------------------------------------------------------

def _line(x, p):
    return p[0] * x + p[1]


def _line_jac(x, p):
    return np.column_stack([x, np.ones_like(x)])


LINE = CurveModel("line", ("slope", "intercept"), _line, _line_jac)


def fit_line(data):
    a = np.column_stack([data.x, np.ones_like(data.x)]) / data.sigma[:, None]
    init = np.linalg.lstsq(a, data.y / data.sigma, rcond=None)[0]
    return nlls_fit(LINE, data, init)


# --- Lorentzian multiplet ----------------------------------------------------

def _lorentz_parts(x, c, w):
    u = x - c
    h = w / 2
    d = u * u + h * h
    return u, h, d


def _multiplet(x, p):
    out = np.full_like(x, p[-1])
    for k in range(0, p.size - 1, 3):
        c, w, a = p[k:k + 3]
        _, h, d = _lorentz_parts(x, c, w)
        out += a * h * h / d
    return out


def _multiplet_jac(x, p):
    cols = []
    for k in range(0, p.size - 1, 3):
        c, w, a = p[k:k + 3]
        u, h, d = _lorentz_parts(x, c, w)
        cols += [2 * a * h * h * u / d**2, a * h * u * u / d**2, h * h / d]
    cols.append(np.ones_like(x))
    return np.column_stack(cols)


def lorentzian_multiplet_model(n_peaks):
    names = []
    for k in range(1, n_peaks + 1):
        names += [f"center_{k}", f"fwhm_{k}", f"amplitude_{k}"]
    names.append("baseline")
    return CurveModel(f"lorentzian_x{n_peaks}", tuple(names), _multiplet, _multiplet_jac)


def seed_peaks(x, y, n_peaks):
    """Indices of the ``n_peaks`` largest local maxima after 3-point median smoothing."""
    smooth = medfilt(y, 3) if y.size >= 3 else y.copy()
    idx = [
        i for i in range(1, y.size - 1)
        if smooth[i] > smooth[i - 1] and smooth[i] >= smooth[i + 1]
    ]
    if len(idx) < n_peaks:
        raise InputError(
            f"found {len(idx)} local maxima but {n_peaks} peaks requested; "
            "smooth the spectrum or lower n_peaks"
        )
    idx.sort(key=lambda i: (-smooth[i], i))
    return sorted(idx[:n_peaks]), smooth


def _half_width(x, smooth, i, base):
    half = base + (smooth[i] - base) / 2
    left = i
    while left > 0 and smooth[left] > half:
        left -= 1
    right = i
    while right < x.size - 1 and smooth[right] > half:
        right += 1
    return max(x[right] - x[left], 2 * np.min(np.diff(x)))


def fit_lorentzian_multiplet(data, n_peaks):
    """Sum of ``n_peaks`` Lorentzians plus a constant baseline.

    Parameters per peak are center, FWHM and peak height, in the units of
    ``data``; the result lists peaks with ascending centers and, for GHz
    x-data, ``derived`` carries the widths in MHz.
    """
    if n_peaks < 1:
        raise InputError("n_peaks must be >= 1")
    x, y = data.x, data.y
    peaks, smooth = seed_peaks(x, y, n_peaks)
    base = float(np.median(y))
    init, lo, hi = [], [], []
    span = x[-1] - x[0]
    for i in peaks:
        width = _half_width(x, smooth, i, base)
        init += [x[i], width, max(smooth[i] - base, 1e-12)]
        lo += [x[0], 1e-9 * span, 0.0]
        hi += [x[-1], span, np.inf]
    init.append(base)
    lo.append(-np.inf)
    hi.append(np.inf)
    model = lorentzian_multiplet_model(n_peaks)
    res = nlls_fit(model, data, init, (lo, hi))
    centers = res.values[0:-1:3]
    order = []
    for k in np.argsort(centers, kind="stable"):
        order += [3 * k, 3 * k + 1, 3 * k + 2]
    order.append(3 * n_peaks)
    res = res.reordered(order, names=model.param_names)
    if data.x_unit.lower() == "ghz":
        for k in range(1, n_peaks + 1):
            res.derived[f"fwhm_mhz_{k}"] = 1e3 * res[f"fwhm_{k}"]
    return res


# --- power broadening and saturation -----------------------------------------

def _broadening(x, p):
    return p[0] * np.sqrt(1 + x / p[1])


def _broadening_jac(x, p):
    s = np.sqrt(1 + x / p[1])
    return np.column_stack([s, -p[0] * x / (2 * s * p[1] ** 2)])


POWER_BROADENING = CurveModel("power_broadening", ("gamma0", "p_sat"), _broadening, _broadening_jac)


def fit_power_broadening(data):
    """Linewidth ``gamma0 * sqrt(1 + P / p_sat)`` versus power."""
    if len(data) < 3:
        raise InputError("need at least 3 power points")
    coef = np.polyfit(data.x, data.y**2, 1)
    if coef[0] > 0 and coef[1] > 0:
        g0 = np.sqrt(coef[1])
        init = [g0, coef[1] / coef[0]]
    else:
        init = [float(data.y.min()), float(np.median(data.x[data.x > 0])) if np.any(data.x > 0) else 1.0]
    res = nlls_fit(POWER_BROADENING, data, init, ([1e-12, 1e-12], [np.inf, np.inf]))
    if res["gamma0"] > data.y.min():
        res.flags.append("gamma0_exceeds_min_data")
    return res


def _saturation(x, p):
    return p[0] * x / (x + p[1])


def _saturation_jac(x, p):
    return np.column_stack([x / (x + p[1]), -p[0] * x / (x + p[1]) ** 2])


SATURATION = CurveModel("saturation", ("r_max", "p_sat"), _saturation, _saturation_jac)


def fit_saturation(data):
    """Spin-flip rate ``r_max * P / (P + p_sat)``."""
    if len(data) < 3:
        raise InputError("need at least 3 power points")
    pos = data.x > 0
    init = [1.2 * float(data.y.max()), float(np.median(data.x[pos])) if np.any(pos) else 1.0]
    return nlls_fit(SATURATION, data, init, ([1e-12, 1e-12], [np.inf, np.inf]))


# --- bi-exponential and fidelity ---------------------------------------------

def _biexp(x, p):
    a, tf, b, ts, c = p
    return a * np.exp(-x / tf) + b * np.exp(-x / ts) + c


def _biexp_jac(x, p):
    a, tf, b, ts, _ = p
    ef, es = np.exp(-x / tf), np.exp(-x / ts)
    return np.column_stack([ef, a * ef * x / tf**2, es, b * es * x / ts**2, np.ones_like(x)])


BIEXPONENTIAL = CurveModel("biexponential", ("A", "tau_fast", "B", "tau_slow", "C"), _biexp, _biexp_jac)


def _log_linear(t, y):
    good = y > 0
    if good.sum() < 2:
        return None
    slope, icept = np.polyfit(t[good], np.log(y[good]), 1)
    if slope >= 0:
        return None
    return np.exp(icept), -1.0 / slope


def _biexp_init(t, y, sigma, n_grid=40):
    """Start values from a grid over both time constants.

    For each pair ``tau_fast < tau_slow`` on a log grid the amplitudes and
    offset are linear, so the best pair is found by weighted linear least
    squares alone.
    """
    dt = float(np.min(np.diff(t)))
    span = float(t[-1] - t[0])
    taus = np.geomspace(dt / 4, 2 * span, n_grid)
    w = 1.0 / sigma
    ex = np.exp(-np.subtract.outer(t, t[0])[:, None] / taus[None, :]) * w[:, None]  # (n, grid)
    one = w
    best = None
    for i in range(n_grid - 1):
        for j in range(i + 1, n_grid):
            a = np.column_stack([ex[:, i], ex[:, j], one])
            coef, *_ = np.linalg.lstsq(a, y * w, rcond=None)
            r = a @ coef - y * w
            cost = float(r @ r)
            if best is None or cost < best[0]:
                best = (cost, coef, taus[i], taus[j])
    _, (a_amp, b_amp, c), tf, ts = best
    # amplitudes refer to t = t[0]; the model is written from t = 0
    a_amp *= np.exp(t[0] / tf)
    b_amp *= np.exp(t[0] / ts)
    return [a_amp, tf, b_amp, ts, c]


def fit_biexponential(data):
    """``A exp(-t/tau_fast) + B exp(-t/tau_slow) + C`` with ``tau_fast < tau_slow``."""
    if len(data) <= 5:
        raise InputError("transient must have more than 5 points")
    init = _biexp_init(data.x, data.y, data.sigma)
    tmin = 1e-9 * (data.x[-1] - data.x[0])
    res = nlls_fit(BIEXPONENTIAL, data, init, ([-np.inf, tmin, -np.inf, tmin, -np.inf], [np.inf] * 5),
                   on_singular="pinv")
    if res["tau_fast"] > res["tau_slow"]:
        res = res.reordered([2, 3, 0, 1, 4], names=BIEXPONENTIAL.param_names)
    # merged time constants or a vanished component leave one exponential
    if res["tau_slow"] / res["tau_fast"] < 1.05 or "singular_covariance" in res.flags:
        res.flags.append("single_exponential")
    return res


def fidelity_from_biexp(fit):
    """Pumped fraction ``A / (A + B)`` of a bi-exponential transient.

    Returns ``(fidelity, uncertainty)`` with the uncertainty propagated
    from the fit covariance.
    """
    if not fit.converged or fit.model != BIEXPONENTIAL.name:
        raise InputError("need a converged bi-exponential fit")
    a, b = fit["A"], fit["B"]
    if a < 0 or b < 0:
        raise InputError(f"amplitudes must be >= 0 (A={a:.3g}, B={b:.3g})")
    if a + b == 0:
        raise InputError("A + B = 0; fidelity undefined")
    f = a / (a + b)
    ia, ib = fit.names.index("A"), fit.names.index("B")
    grad = np.zeros(len(fit.names))
    grad[ia] = b / (a + b) ** 2
    grad[ib] = -a / (a + b) ** 2
    return f, float(np.sqrt(max(grad @ fit.covariance @ grad, 0.0)))


# --- damped cosine -----------------------------------------------------------

def _damped(x, p):
    om, tau, ph, a, c = p
    return a * np.exp(-x / tau) * np.cos(2 * np.pi * om * x + ph) + c


def _damped_jac(x, p):
    om, tau, ph, a, _ = p
    e = np.exp(-x / tau)
    th = 2 * np.pi * om * x + ph
    cs, sn = np.cos(th), np.sin(th)
    return np.column_stack([
        -a * e * sn * 2 * np.pi * x,
        a * e * cs * x / tau**2,
        -a * e * sn,
        e * cs,
        np.ones_like(x),
    ])


DAMPED_COSINE = CurveModel("damped_cosine", ("omega", "tau", "phase", "amplitude", "offset"), _damped, _damped_jac)


def dominant_frequency(t, y, min_periods=1.0, floor_ratio=5.0, pad=16):
    """Peak of the zero-padded amplitude spectrum, or an error if none stands out."""
    dt = np.median(np.diff(t))
    yy = y - np.polyval(np.polyfit(t, y, 1), t) if t.size > 3 else y - y.mean()
    if np.max(np.abs(yy)) <= 1e-12 * max(float(np.max(np.abs(y))), 1e-300):
        raise NumericalError("no oscillation detected: constant series")
    n = pad * t.size
    amp = np.abs(np.fft.rfft(yy, n))
    freqs = np.fft.rfftfreq(n, dt)
    allowed = freqs >= min_periods / (t[-1] - t[0])
    if not np.any(allowed):
        raise NumericalError("no oscillation detected: series too short")
    k = np.flatnonzero(allowed)[np.argmax(amp[allowed])]
    floor = np.median(np.abs(np.fft.rfft(yy))[1:])
    if floor > 0 and np.abs(np.fft.rfft(yy)).max() < floor_ratio * floor:
        raise NumericalError("no oscillation detected above the noise floor")
    return freqs[k]


def _phase_amp(t, y, om, tau):
    e = np.exp(-t / tau)
    a = np.column_stack([e * np.cos(2 * np.pi * om * t), -e * np.sin(2 * np.pi * om * t), np.ones_like(t)])
    coef, res, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = float(np.sum((a @ coef - y) ** 2))
    amp = float(np.hypot(coef[0], coef[1]))
    return amp, float(np.arctan2(coef[1], coef[0])), float(coef[2]), resid


def fit_damped_cosine(data):
    """``a exp(-t/tau) cos(2 pi omega t + phase) + c``.

    The frequency is seeded from the discrete spectrum.  ``derived`` holds
    the contrast ``|a| / c`` of the envelope at t = 0 and its uncertainty.
    """
    t, y = data.x, data.y
    om = dominant_frequency(t, y)
    span = t[-1] - t[0]
    best = None
    for tau in span * np.array([0.125, 0.25, 0.5, 1, 2, 4, 16]):
        amp, ph, c, resid = _phase_amp(t, y, om, tau)
        if best is None or resid < best[0]:
            best = (resid, tau, amp, ph, c)
    _, tau, amp, ph, c = best
    init = [om, tau, ph, max(amp, 1e-12), c]
    bounds = ([0.0, 1e-6 * span, -np.inf, -np.inf, -np.inf], [np.inf] * 5)
    res = nlls_fit(DAMPED_COSINE, data, init, bounds)
    vals = res.values
    if vals[3] < 0:
        vals[3] = -vals[3]
        vals[2] += np.pi
        flip = np.ones(5)
        flip[3] = -1
        res.covariance = res.covariance * np.outer(flip, flip)
    vals[2] = (vals[2] + np.pi) % (2 * np.pi) - np.pi
    a, c = vals[3], vals[4]
    if c > 0:
        grad = np.zeros(5)
        grad[3], grad[4] = 1 / c, -a / c**2
        res.derived["contrast"] = a / c
        res.derived["contrast_err"] = float(np.sqrt(max(grad @ res.covariance @ grad, 0.0)))
    return res


# --- ESEEM -------------------------------------------------------------------

ESEEM_NAMES = ("amplitude", "t2", "k1", "k2", "nu_si", "nu_c", "offset")


def _eseem(x, p):
    a, t2, k1, k2, n1, n2, o = p
    s1 = np.sin(np.pi * n1 * x) ** 2
    s2 = np.sin(np.pi * n2 * x) ** 2
    return a * np.exp(-x / t2) * (1 - k1 * s1) * (1 - k2 * s2) + o


def _eseem_jac(x, p):
    a, t2, k1, k2, n1, n2, _ = p
    e = np.exp(-x / t2)
    s1 = np.sin(np.pi * n1 * x) ** 2
    s2 = np.sin(np.pi * n2 * x) ** 2
    p1, p2 = 1 - k1 * s1, 1 - k2 * s2
    base = e * p1 * p2
    return np.column_stack([
        base,
        a * base * x / t2**2,
        -a * e * s1 * p2,
        -a * e * p1 * s2,
        -a * e * p2 * k1 * np.pi * x * np.sin(2 * np.pi * n1 * x),
        -a * e * p1 * k2 * np.pi * x * np.sin(2 * np.pi * n2 * x),
        np.ones_like(x),
    ])


ESEEM = CurveModel("eseem", ESEEM_NAMES, _eseem, _eseem_jac)


def larmor_guess(b_field_mT):
    """Initial (nu_Si29, nu_C13) in kHz for a c-axis field in mT."""
    b_eff = ESEEM_FIELD_FACTOR * b_field_mT
    return GAMMA_SI29_KHZ_PER_MT * b_eff, GAMMA_C13_KHZ_PER_MT * b_eff


def fit_eseem(data, b_field_mT, k_init=0.5, search=0.15, grid=41):
    """Hahn-echo envelope with 29Si and 13C modulation (tau in ms, nu in kHz).

    Larmor frequencies start from the gyromagnetic ratios times the
    effective field and are refined on a grid of +-``search`` before the
    full fit.
    """
    t, y = data.x, data.y
    span = t[-1] - t[0]
    n1, n2 = larmor_guess(b_field_mT)
    if span * min(n1, n2) < 2:
        raise InputError("tau grid must span at least two modulation periods")
    amp0 = float(y.max() - min(y.min(), 0.0))
    decay = _log_linear(t, np.clip(y, 1e-12, None))
    t2 = decay[1] if decay is not None else span / 3
    t2 = float(np.clip(t2, span / 50, 10 * span))
    f1 = n1 * (1 + np.linspace(-search, search, grid))
    f2 = n2 * (1 + np.linspace(-search, search, grid))
    e = np.exp(-t / t2)
    m1 = 1 - k_init * np.sin(np.pi * np.outer(f1, t)) ** 2
    m2 = 1 - k_init * np.sin(np.pi * np.outer(f2, t)) ** 2
    best = None
    for i in range(grid):
        shape = e * m1[i] * m2  # (grid, n)
        # linear amplitude + offset for every nu_c at once
        sx = shape.sum(axis=1)
        sxx = (shape * shape).sum(axis=1)
        sxy = shape @ y
        n = t.size
        det = n * sxx - sx * sx
        amp = (n * sxy - sx * y.sum()) / det
        off = (y.sum() - amp * sx) / n
        resid = ((amp[:, None] * shape + off[:, None] - y) ** 2).sum(axis=1)
        j = int(np.argmin(resid))
        if best is None or resid[j] < best[0]:
            best = (resid[j], f1[i], f2[j], amp[j], off[j])
    _, nu1, nu2, amp, off = best
    init = [max(amp, 1e-12 * amp0 + 1e-300), t2, k_init, k_init, nu1, nu2, off]
    lo = [0.0, 1e-6 * span, 0.0, 0.0, 1e-9, 1e-9, -np.inf]
    hi = [np.inf, np.inf, 1.0, 1.0, np.inf, np.inf, np.inf]
    # K1 = K2 = 0 leaves the frequencies undetermined; keep the fit and flag it
    res = nlls_fit(ESEEM, data, init, (lo, hi), on_singular="pinv")
    if abs(res["nu_si"] - res["nu_c"]) < 1.0 / span:
        res.flags.append("frequency_collision")
    return res


# --- stretched exponential ---------------------------------------------------

def _stretched(x, p):
    a, t2, n = p
    return a * np.exp(-((x / t2) ** n))


def _stretched_jac(x, p):
    a, t2, n = p
    r = x / t2
    u = r**n
    e = np.exp(-u)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    return np.column_stack([e, a * e * u * n / t2, -a * e * u * logr])


STRETCHED = CurveModel("stretched_exponential", ("amplitude", "t2", "n"), _stretched, _stretched_jac)
STRETCH_BOUNDS = (0.5, 4.0)


def fit_stretched_exponential(data):
    """``A exp[-(t/T2)^n]`` with ``n`` kept inside (0.5, 4)."""
    t, y = data.x, data.y
    a0 = float(y.max())
    frac = y / a0
    use = (frac > 0.05) & (frac < 0.95) & (t > 0)
    if use.sum() >= 2:
        n0, c0 = np.polyfit(np.log(t[use]), np.log(-np.log(frac[use])), 1)
        t20 = np.exp(-c0 / n0) if n0 > 0 else np.median(t)
    else:
        n0, t20 = 2.0, float(np.median(t))
    n0 = float(np.clip(n0, 0.6, 3.9))
    res = nlls_fit(STRETCHED, data, [a0, t20, n0], ([0.0, 1e-12, STRETCH_BOUNDS[0]], [np.inf, np.inf, STRETCH_BOUNDS[1]]))
    a = res["amplitude"]
    head = _stretched(t[:1], res.values)[0]
    tail = _stretched(t[-1:], res.values)[0]
    if head < 0.9 * a or tail > 0.2 * a:
        raise NumericalError(
            "decay range insufficient to identify T2 and n "
            f"(fit spans {head / a:.2f}A to {tail / a:.2f}A; need >=0.9A down to <=0.2A)"
        )
    return res


# --- power law ---------------------------------------------------------------

def _power(x, p):
    return p[0] * x ** p[1]


def _power_jac(x, p):
    xb = x ** p[1]
    return np.column_stack([xb, p[0] * xb * np.log(x)])


POWER_LAW = CurveModel("power_law", ("alpha", "beta"), _power, _power_jac)


def fit_power_law(data):
    """``T2(N) = alpha N^beta`` from a weighted straight line in log-log space."""
    n, t2 = data.x, data.y
    if np.unique(n).size < 3:
        raise InputError("need at least 3 distinct pulse numbers")
    if np.any(n <= 0) or np.any(t2 <= 0):
        raise InputError("pulse numbers and T2 values must be positive")
    lx, ly = np.log(n), np.log(t2)
    s = data.sigma / t2
    w = 1 / s
    design = np.column_stack([np.ones_like(lx), lx]) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, ly * w, rcond=None)
    r = design @ coef - ly * w
    cov_log, chi2_red = covariance_from_jacobian(design, 0.5 * r @ r, n.size, data.sigma_known)
    alpha, beta = np.exp(coef[0]), coef[1]
    jac = np.array([[alpha, 0.0], [0.0, 1.0]])
    cov = jac @ cov_log @ jac.T
    return FitResult(
        POWER_LAW.name, POWER_LAW.param_names, np.array([alpha, beta]),
        np.sqrt(np.diag(cov)), cov, float(chi2_red), True, 1, n.size,
    )


# --- polarization visibility -------------------------------------------------

def _visibility(x, p):
    a, v, th0 = p
    return a * (1 + v * np.cos(np.deg2rad(2 * x - th0)))


def _visibility_jac(x, p):
    a, v, th0 = p
    ang = np.deg2rad(2 * x - th0)
    return np.column_stack([1 + v * np.cos(ang), a * np.cos(ang), a * v * np.sin(ang) * np.pi / 180])


VISIBILITY = CurveModel("visibility", ("mean", "visibility", "theta0"), _visibility, _visibility_jac)


def fit_visibility(data):
    """``a [1 + V cos(2 theta - theta0)]`` over QWP angle in degrees."""
    th, y = data.x, data.y
    if th[-1] - th[0] < 180:
        raise InputError("QWP angle range must span at least 180 degrees")
    ang = np.deg2rad(2 * th)
    design = np.column_stack([np.ones_like(th), np.cos(ang), np.sin(ang)]) / data.sigma[:, None]
    c0, c1, c2 = np.linalg.lstsq(design, y / data.sigma, rcond=None)[0]
    v0 = np.hypot(c1, c2) / c0 if c0 != 0 else 0.0
    th0 = np.rad2deg(np.arctan2(c2, c1))
    res = nlls_fit(VISIBILITY, data, [c0, v0, th0])
    vals = res.values
    if vals[1] < 0:
        vals[1] = -vals[1]
        vals[2] += 180.0
        flip = np.array([1.0, -1.0, 1.0])
        res.covariance = res.covariance * np.outer(flip, flip)
    vals[2] = vals[2] % 360.0
    if not 0 <= vals[1] <= 1:
        res.flags.append("visibility_out_of_range")
    return res


# --- Rabi frequency versus power ---------------------------------------------

def fit_rabi_power_scaling(power, omega):
    """Regress ``omega = kappa sqrt(P)`` through the origin.

    Returns ``(kappa, kappa_err, r2)`` with the uncentered coefficient of
    determination ``1 - SS_res / sum(omega^2)``.
    """
    x = np.sqrt(np.asarray(power, dtype=float))
    y = np.asarray(omega, dtype=float)
    if x.size < 2:
        raise InputError("need at least 2 powers")
    kappa = float(x @ y / (x @ x))
    resid = y - kappa * x
    ss_res = float(resid @ resid)
    dof = max(x.size - 1, 1)
    err = float(np.sqrt(ss_res / dof / (x @ x)))
    return kappa, err, 1.0 - ss_res / float(y @ y)


# --- Lambda-system Rabi envelope --------------------------------------------

LAMBDA_NAMES = ("omega", "t1", "t_leak", "scale")


def lambda_rabi_model(branch):
    """Excited population of the driven Lambda system, scaled.

    ``t1`` is the radiative lifetime towards the driven ground state and
    ``t_leak`` the lifetime towards the other one, both in ns.
    """

    def func(x, p):
        omega, t1, t_leak, scale = p
        if branch == "plus":
            g_plus, g_minus = 1 / t1, 1 / t_leak
        else:
            g_plus, g_minus = 1 / t_leak, 1 / t1
        grid = x if x[0] == 0 else np.concatenate([[0.0], x])
        model = lambda_model(omega, branch, g_plus, g_minus, grid[-1] + 1.0)
        rho0 = np.zeros((3, 3), dtype=complex)
        g = 0 if branch == "plus" else 1
        rho0[g, g] = 1
        pop = evolve(model, rho0, grid).population(2)
        return scale * (pop if x[0] == 0 else pop[1:])

    return CurveModel(f"lambda_rabi_{branch}", LAMBDA_NAMES, func)


def fit_lambda_rabi(data, branch, t1_grid=(5.0, 15.0, 40.0), leak_grid=(5.0, 15.0, 40.0)):
    """Fit Rabi frequency, driven-branch lifetime and leak lifetime.

    ``data`` is the excited population (or a photon signal proportional to
    it) during a pulse starting at t = 0.  The master-equation model has no
    closed form, so its Jacobian is taken by central differences.  Starts
    come from the spectral peak frequency and a small lifetime grid.
    """
    if branch not in ("plus", "minus"):
        raise InputError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if data.x[0] < 0:
        raise InputError("times must be >= 0")
    model = lambda_rabi_model(branch)
    om = dominant_frequency(data.x, data.y)
    scale = max(float(data.y.max()) / 0.8, 1e-12)
    best = None
    for t1 in t1_grid:
        for tl in leak_grid:
            r = (model(data.x, [om, t1, tl, scale]) - data.y) / data.sigma
            cost = r @ r
            if best is None or cost < best[0]:
                best = (cost, [om, t1, tl, scale])
    lo = [0.0, 1e-3, 1e-3, 0.0]
    return nlls_fit(model, data, best[1], (lo, [np.inf] * 4))


MODELS = {
    m.name: m
    for m in (LINE, POWER_BROADENING, SATURATION, BIEXPONENTIAL, DAMPED_COSINE, ESEEM, STRETCHED, POWER_LAW, VISIBILITY)
}
