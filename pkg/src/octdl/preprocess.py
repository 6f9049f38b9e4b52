"""B-scan preprocessing: contrast enhancement, RPE flattening and cropping.

The stages are pure functions on 2-D float arrays (row 0 at the top of the
image, rows growing downward). :class:`BScanPreprocessor` strings them
together behind the scikit-learn transformer interface.
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import ndimage, optimize, special
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_image
from .exceptions import (
    DegenerateInputError,
    InsufficientSupportError,
    InvalidInputError,
    NonConvergenceError,
    OutOfBoundsError,
)

CROP_ROWS_ABOVE = 60
CROP_ROWS_BELOW = 4
CROP_HEIGHT = CROP_ROWS_ABOVE + 1 + CROP_ROWS_BELOW
CROP_WIDTH = 380

TARGET_STD = 0.15
LOG_OFFSET = 1.0
STALL_LIMIT = 10


# --------------------------------------------------------------------------
# Normal-Laplace mixture
# --------------------------------------------------------------------------

@dataclass
class MixtureModel:
    """Normal-Laplace mixture over log-intensities.

    Each component is ``N(mean, std**2)`` convolved with a symmetric Laplace
    of scale ``laplace_scale``.
    """

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    laplace_scales: np.ndarray
    log_likelihood_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stds = np.asarray(self.stds, dtype=np.float64)
        self.laplace_scales = np.asarray(self.laplace_scales, dtype=np.float64)
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights <= 0):
            raise InvalidInputError("mixture weights must be positive and sum to 1")
        if np.any(self.stds <= 0) or np.any(self.laplace_scales <= 0):
            raise InvalidInputError("std and Laplace scale must be positive")

    @property
    def n_components(self):
        return self.weights.size

    @property
    def components(self):
        return list(zip(self.weights, self.means, self.stds, self.laplace_scales))

    def component_logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([normal_laplace_logpdf(x, m, s, b)
                         for m, s, b in zip(self.means, self.stds, self.laplace_scales)])

    def log_likelihood(self, x, counts=None):
        lp = self.component_logpdf(x) + np.log(self.weights)[:, None]
        ll = special.logsumexp(lp, axis=0)
        return float(ll.sum() if counts is None else ll @ counts)

    def posterior(self, x):
        lp = self.component_logpdf(x) + np.log(self.weights)[:, None]
        return np.exp(lp - special.logsumexp(lp, axis=0))


def _nl_terms(x, mean, std, scale):
    # log of phi(s) * R(t) for t = std/scale -+ s, R the Mills ratio
    z = x - mean
    s = z / std
    a = std / scale
    base = 0.5 * a * a
    log_a1 = base - z / scale + special.log_ndtr(s - a)
    log_a2 = base + z / scale + special.log_ndtr(-s - a)
    return s, log_a1, log_a2


def normal_laplace_logpdf(x, mean, std, scale):
    """Log density of ``N(mean, std^2) * Laplace(0, scale)`` (convolution)."""
    _, log_a1, log_a2 = _nl_terms(x, mean, std, scale)
    return np.logaddexp(log_a1, log_a2) - np.log(2.0 * scale)


def normal_laplace_cdf(x, mean, std, scale):
    s, log_a1, log_a2 = _nl_terms(x, mean, std, scale)
    cdf = special.ndtr(s) - 0.5 * (np.exp(log_a1) - np.exp(log_a2))
    return np.clip(cdf, 0.0, 1.0)


def _initial_mixture(x, counts, n_components):
    order = np.argsort(x)
    cum = np.cumsum(counts[order]) / counts.sum()
    qs = (np.arange(n_components) + 0.5) / n_components
    means = x[order][np.searchsorted(cum, qs).clip(0, x.size - 1)]
    mu = counts @ x / counts.sum()
    sd = np.sqrt(counts @ (x - mu) ** 2 / counts.sum())
    return (np.full(n_components, 1.0 / n_components), means.astype(np.float64),
            np.full(n_components, sd), np.full(n_components, sd / 2.0))


def _m_step(x, counts, resp, means, stds, scales, fixed_scale):
    """Weighted ML update of each component's (mean, std, scale)."""
    new = []
    for k in range(means.size):
        w = resp[k] * counts
        if w.sum() <= 0:
            new.append((means[k], stds[k], scales[k]))
            continue

        def nll(theta, w=w):
            m, ls, lb = theta
            b = fixed_scale if fixed_scale is not None else np.exp(lb)
            return -float(w @ normal_laplace_logpdf(x, m, np.exp(ls), b))

        theta0 = np.array([means[k], np.log(stds[k]), np.log(scales[k])])
        res = optimize.minimize(nll, theta0, method="L-BFGS-B",
                                bounds=[(None, None), (-20, 5), (-20, 5)],
                                options={"maxiter": 50})
        # generalised EM: keep the old parameters unless the optimiser improved them
        if np.isfinite(res.fun) and res.fun < nll(theta0):
            m, ls, lb = res.x
            b = fixed_scale if fixed_scale is not None else np.exp(lb)
            new.append((m, np.exp(ls), b))
        else:
            new.append((means[k], stds[k], scales[k]))
    m, s, b = (np.array(v) for v in zip(*new))
    return m, s, b


def fit_mixture(x, n_components=3, em_iters=100, counts=None, laplace_scale=None,
                tol=1e-8):
    """Fit a Normal-Laplace mixture to samples ``x`` by (generalised) EM.

    ``counts`` gives optional per-sample multiplicities (histogram fitting).
    ``laplace_scale`` pins every component's Laplace scale. The likelihood
    trace is non-decreasing; ``STALL_LIMIT`` consecutive iterations without
    improvement before convergence raise :class:`NonConvergenceError`.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    counts = np.ones_like(x) if counts is None else np.asarray(counts, dtype=np.float64)
    if n_components < 1:
        raise InvalidInputError("n_components must be >= 1")
    weights, means, stds, scales = _initial_mixture(x, counts, n_components)
    if laplace_scale is not None:
        scales = np.full(n_components, float(laplace_scale))
    model = MixtureModel(weights, means, stds, scales)
    ll = model.log_likelihood(x, counts)
    trace = [ll]
    stall = 0
    total = counts.sum()
    for it in range(1, em_iters + 1):
        resp = model.posterior(x)
        nk = resp @ counts
        weights = np.maximum(nk / total, 1e-12)
        weights /= weights.sum()
        means, stds, scales = _m_step(x, counts, resp, model.means, model.stds,
                                      model.laplace_scales, laplace_scale)
        candidate = MixtureModel(weights, means, stds, scales)
        ll_new = candidate.log_likelihood(x, counts)
        gain = ll_new - ll
        if gain > 0:
            model, ll = candidate, ll_new
            stall = 0
        elif abs(gain) > tol * abs(ll):
            stall += 1
            if stall >= STALL_LIMIT:
                raise NonConvergenceError(it)
        trace.append(ll)
        if abs(gain) <= tol * abs(ll):
            break
    model.log_likelihood_trace = trace
    return model


def enhance_contrast(img, n_components=3, em_iters=100, seed=0, n_bins=1024,
                     laplace_scale=None, return_model=False):
    """Normal-Laplace mixture contrast enhancement.

    Pipeline: ``log(1 + img)``, EM fit of the mixture (on a histogram of the
    log-intensities), per-component CDF-matching to ``N(mu_k, 0.15^2)`` with
    targets ``mu_k`` equally spaced in [0, 1], posterior-weighted sum of the
    Gaussianised components, and finally ``exp``.

    ``seed`` is accepted for interface stability; the initialisation is
    deterministic (quantile based) and does not consume randomness.
    """
    img = check_image(img)
    if np.any(img < 0):
        raise InvalidInputError("pixel intensities must be non-negative")
    logimg = np.log(img + LOG_OFFSET)
    if np.ptp(logimg) == 0.0:
        raise DegenerateInputError("image has zero variance")
    values = logimg.ravel()
    if values.size > n_bins:
        counts, edges = np.histogram(values, bins=n_bins)
        centers = 0.5 * (edges[:-1] + edges[1:])
        keep = counts > 0
        x, c = centers[keep], counts[keep].astype(np.float64)
    else:
        x, c = values, None
    model = fit_mixture(x, n_components=n_components, em_iters=em_iters, counts=c,
                        laplace_scale=laplace_scale)
    targets = (np.linspace(0.0, 1.0, n_components) if n_components > 1 else np.array([0.5]))
    order = np.argsort(model.means)
    target_of = np.empty(n_components)
    target_of[order] = targets
    post = model.posterior(values)
    out = np.zeros_like(values)
    for k in range(n_components):
        cdf = normal_laplace_cdf(values, model.means[k], model.stds[k], model.laplace_scales[k])
        # clip away from {0, 1}; ndtri is infinite there
        g = special.ndtri(np.clip(cdf, 1e-12, 1.0 - 1e-12))
        out += post[k] * (target_of[k] + TARGET_STD * g)
    enhanced = np.exp(out).reshape(img.shape)
    if return_model:
        return enhanced, model
    return enhanced


# --------------------------------------------------------------------------
# RPE estimation and flattening
# --------------------------------------------------------------------------

@dataclass
class RpeCurve:
    row_at: np.ndarray
    valid: np.ndarray

    @property
    def cols(self):
        return np.flatnonzero(self.valid)


@dataclass
class Baseline:
    degree: int
    coeffs: np.ndarray
    method: str
    support_cols: np.ndarray = None

    def __call__(self, cols):
        return P.polyval(np.asarray(cols, dtype=np.float64), self.coeffs)


def _windowed_median(values, valid, window):
    half = window // 2
    n = values.size
    out = values.astype(np.float64).copy()
    for j in range(n):
        lo, hi = max(0, j - half), min(n, j + half + 1)
        v = values[lo:hi][valid[lo:hi]]
        if v.size:
            out[j] = np.median(v)
    return out


def estimate_rpe(img, median_window=15):
    """Per-column RPE row estimate.

    Takes the two brightest pixels of every column (ties resolved toward the
    larger row), keeps the outer one (larger row index) and median filters the
    result across columns with a window of ``median_window`` columns. Columns
    with constant intensity are marked invalid and ignored by the filter.
    """
    img = check_image(img, min_rows=3)
    if median_window < 1 or median_window % 2 == 0:
        raise InvalidInputError("median_window must be a positive odd integer")
    rows = img.shape[0]
    order = np.argsort(img, axis=0, kind="stable")
    raw = np.maximum(order[-1], order[-2])
    valid = np.ptp(img, axis=0) > 0
    if valid.all():
        filt = ndimage.median_filter(raw, size=median_window, mode="nearest")
    else:
        filt = np.rint(_windowed_median(raw, valid, median_window)).astype(int)
    filt = np.clip(filt, 0, rows - 1).astype(int)
    filt[~valid] = -1
    return RpeCurve(row_at=filt, valid=valid)


def _lower_border(cols, rows):
    """Points on the image-lower border (largest rows) of the convex hull.

    Collinear points on hull edges are kept.
    """
    pts = sorted(zip(cols.tolist(), rows.tolist()))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            cross = (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox)
            if cross > 0:
                hull.pop()
            else:
                break
        hull.append(p)
    h = np.array(hull, dtype=np.float64)
    return h[:, 0], h[:, 1]


def fit_baseline(curve, method="convex_hull", degree=2, fraction=0.3):
    """Fit a polynomial ``row = poly(col)`` to the RPE estimate.

    ``convex_hull`` fits the lower border of the convex hull of the valid
    points; ``fraction`` keeps only points within ``fraction * (max - min)``
    rows of the lowest point. Coefficients are in ascending order.
    """
    if method in ("hull",):
        method = "convex_hull"
    if method not in ("convex_hull", "fraction"):
        raise InvalidInputError(f"unknown baseline method {method!r}")
    if degree not in (1, 2, 3, 4):
        raise InvalidInputError("degree must be in 1..4")
    if not 0.0 < fraction <= 1.0:
        raise InvalidInputError("fraction must be in (0, 1]")
    cols = np.flatnonzero(curve.valid).astype(np.float64)
    rows = np.asarray(curve.row_at, dtype=np.float64)[curve.valid]
    if cols.size < degree + 1:
        raise InsufficientSupportError(
            f"{cols.size} valid columns cannot support a degree-{degree} fit")
    if method == "convex_hull":
        xs, ys = _lower_border(cols, rows)
    else:
        hi, lo = rows.max(), rows.min()
        keep = rows >= hi - fraction * (hi - lo)
        xs, ys = cols[keep], rows[keep]
    if xs.size < degree + 1:
        raise InsufficientSupportError(
            f"only {xs.size} support points for a degree-{degree} fit")
    coeffs = P.polyfit(xs, ys, degree)
    return Baseline(degree=degree, coeffs=coeffs, method=method,
                    support_cols=xs.astype(int))


def shift_columns(img, shifts):
    """Shift column ``j`` down by ``shifts[j]`` rows (negative = up), zero fill."""
    img = np.asarray(img, dtype=np.float64)
    rows, cols = img.shape
    out = np.zeros_like(img)
    for j, s in enumerate(np.asarray(shifts, dtype=int)):
        if s >= 0:
            if s < rows:
                out[s:, j] = img[:rows - s, j]
        elif -s < rows:
            out[:rows + s, j] = img[-s:, j]
    return out


def flatten(img, baseline, target_row):
    """Move the baseline of every column onto ``target_row``."""
    img = check_image(img)
    if not 0 <= target_row < img.shape[0]:
        raise OutOfBoundsError("rows", f"target_row {target_row} outside image")
    cols = np.arange(img.shape[1])
    shifts = np.rint(target_row - baseline(cols)).astype(int)
    return shift_columns(img, shifts)


def crop(img, flat_row):
    """65 x 380 window: 60 rows above ``flat_row``, 4 below, centred columns."""
    img = check_image(img)
    rows, cols = img.shape
    top, bottom = flat_row - CROP_ROWS_ABOVE, flat_row + CROP_ROWS_BELOW
    if top < 0:
        raise OutOfBoundsError("rows", f"need {CROP_ROWS_ABOVE} rows above row {flat_row}")
    if bottom >= rows:
        raise OutOfBoundsError("rows", f"need {CROP_ROWS_BELOW} rows below row {flat_row}")
    if cols < CROP_WIDTH:
        raise OutOfBoundsError("cols", f"image is {cols} columns wide, need {CROP_WIDTH}")
    left = (cols - CROP_WIDTH) // 2
    return img[top:bottom + 1, left:left + CROP_WIDTH].copy()


def preprocess_bscan(img, degree=2, method="convex_hull", fraction=0.3,
                     median_window=15, n_components=3, em_iters=100, denoise=True):
    """Full chain for one B-scan: enhance, estimate RPE, flatten, crop."""
    img = check_image(img)
    work = enhance_contrast(img, n_components=n_components, em_iters=em_iters) if denoise else img
    curve = estimate_rpe(work, median_window=median_window)
    baseline = fit_baseline(curve, method=method, degree=degree, fraction=fraction)
    level = baseline(np.arange(img.shape[1]))
    target = int(np.clip(np.rint(np.median(level)), CROP_ROWS_ABOVE,
                         img.shape[0] - 1 - CROP_ROWS_BELOW))
    return crop(flatten(work, baseline, target), target)


class BScanPreprocessor(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping raw B-scans to 65 x 380 crops.

    ``transform`` accepts an iterable of 2-D images (or a 3-D stack) and
    returns an array of shape ``(n_images, 65, 380)``.
    """

    def __init__(self, degree=2, method="convex_hull", fraction=0.3, median_window=15,
                 n_components=3, em_iters=100, denoise=True):
        self.degree = degree
        self.method = method
        self.fraction = fraction
        self.median_window = median_window
        self.n_components = n_components
        self.em_iters = em_iters
        self.denoise = denoise

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return np.stack([
            preprocess_bscan(img, degree=self.degree, method=self.method,
                             fraction=self.fraction, median_window=self.median_window,
                             n_components=self.n_components, em_iters=self.em_iters,
                             denoise=self.denoise)
            for img in X
        ])
