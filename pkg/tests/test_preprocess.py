import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from octdl import preprocess as pp
from octdl.exceptions import (
    DegenerateInputError,
    InsufficientSupportError,
    NonConvergenceError,
    OutOfBoundsError,
)
from octdl.io import synthetic_bscan
from octdl.preprocess import (
    Baseline,
    BScanPreprocessor,
    RpeCurve,
    crop,
    enhance_contrast,
    estimate_rpe,
    fit_baseline,
    fit_mixture,
    flatten,
    normal_laplace_cdf,
    normal_laplace_logpdf,
    preprocess_bscan,
    shift_columns,
)


# --- Normal-Laplace density --------------------------------------------------

@pytest.mark.parametrize("mean,std,scale", [(0.0, 1.0, 0.5), (2.0, 0.3, 1.5), (-1.0, 0.05, 0.02)])
def test_density_integrates_to_one_and_cdf_matches_quadrature(mean, std, scale):
    pdf = lambda t: float(np.exp(normal_laplace_logpdf(np.array([t]), mean, std, scale))[0])  # noqa: E731
    lo, hi = mean - 40 * (std + scale), mean + 40 * (std + scale)
    total, _ = integrate.quad(pdf, lo, hi, points=[mean], limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)
    for q in (-1.0, 0.0, 0.7):
        x = mean + q * (std + scale)
        ref, _ = integrate.quad(pdf, lo, x, limit=200)
        assert normal_laplace_cdf(np.array([x]), mean, std, scale)[0] == pytest.approx(ref, abs=1e-8)


def test_density_matches_convolution_quadrature():
    mean, std, scale = 0.5, 0.4, 0.3
    for x in (-1.0, 0.5, 2.0):
        f = lambda u: np.exp(-0.5 * ((x - u - mean) / std) ** 2) / (std * np.sqrt(2 * np.pi)) \
            * np.exp(-abs(u) / scale) / (2 * scale)  # noqa: E731
        ref, _ = integrate.quad(f, -20, 20, points=[0.0], limit=200)
        assert np.exp(normal_laplace_logpdf(np.array([x]), mean, std, scale))[0] == pytest.approx(ref, rel=1e-8)


# --- EM ------------------------------------------------------------------------

def sample_mixture(rng, n, weights, means, stds, scales):
    comp = rng.choice(len(weights), size=n, p=weights)
    return (np.asarray(means)[comp] + np.asarray(stds)[comp] * rng.standard_normal(n)
            + rng.laplace(0.0, np.asarray(scales)[comp]))


def test_em_recovers_two_component_mixture():
    rng = np.random.default_rng(7)
    weights, means = [0.35, 0.65], [1.0, 4.0]
    x = sample_mixture(rng, 10_000, weights, means, [0.4, 0.5], [0.3, 0.2])
    counts, edges = np.histogram(x, bins=1024)
    centers = 0.5 * (edges[1:] + edges[:-1])
    keep = counts > 0
    model = fit_mixture(centers[keep], 2, em_iters=100, counts=counts[keep].astype(float))
    order = np.argsort(model.means)
    np.testing.assert_allclose(model.weights[order], weights, rtol=0.10)
    np.testing.assert_allclose(model.means[order], means, rtol=0.10)


def test_em_log_likelihood_non_decreasing():
    rng = np.random.default_rng(3)
    x = sample_mixture(rng, 3000, [0.5, 0.5], [0.0, 2.0], [0.3, 0.3], [0.2, 0.2])
    model = fit_mixture(x, 2, em_iters=30)
    assert np.all(np.diff(model.log_likelihood_trace) >= -1e-9)
    assert abs(model.weights.sum() - 1) <= 1e-9
    assert np.all(model.stds > 0) and np.all(model.laplace_scales > 0)


def test_em_stall_raises_with_iteration_count(monkeypatch):
    def worse(x, counts, resp, means, stds, scales, fixed):
        return means + 5.0, stds, scales

    monkeypatch.setattr(pp, "_m_step", worse)
    rng = np.random.default_rng(0)
    with pytest.raises(NonConvergenceError) as info:
        fit_mixture(rng.standard_normal(500), 2, em_iters=50)
    assert info.value.iterations == pp.STALL_LIMIT


# --- contrast enhancement --------------------------------------------------------

def test_constant_image_is_degenerate():
    with pytest.raises(DegenerateInputError):
        enhance_contrast(np.full((20, 20), 5.0))


def test_single_gaussian_component_preserves_ranking():
    rng = np.random.default_rng(1)
    img = np.exp(rng.normal(3.0, 0.5, size=(40, 50))) - 1.0
    out = enhance_contrast(img, n_components=1, laplace_scale=1e-6)
    order = np.argsort(img.ravel(), kind="stable")
    vals = out.ravel()[order]
    src = img.ravel()[order]
    assert np.all(np.diff(vals)[np.diff(src) > 0] > 0)
    # affine in the log domain: log(out) is an affine function of log(1 + img)
    A = np.column_stack([np.log1p(img.ravel()), np.ones(img.size)])
    coef, *_ = np.linalg.lstsq(A, np.log(out.ravel()), rcond=None)
    np.testing.assert_allclose(A @ coef, np.log(out.ravel()), atol=1e-6)


def test_enhance_output_shape_and_range():
    img = synthetic_bscan(rows=80, cols=60, seed=4)
    out, model = enhance_contrast(img, return_model=True)
    assert out.shape == img.shape
    assert np.all(np.isfinite(out)) and np.all(out >= 0)
    assert model.n_components == 3


# --- RPE estimation ----------------------------------------------------------------

def rpe_oracle(img, window):
    rows, cols = img.shape
    raw = []
    for j in range(cols):
        pairs = sorted(((img[i, j], i) for i in range(rows)), reverse=True)
        raw.append(max(pairs[0][1], pairs[1][1]))
    half = window // 2
    out = []
    for j in range(cols):
        win = [raw[min(max(k, 0), cols - 1)] for k in range(j - half, j + half + 1)]
        out.append(int(np.median(win)))
    return np.array(out)


def test_rpe_outer_of_two_maxima():
    img = np.zeros((10, 3))
    img[2] = 9.0
    img[7] = 8.0
    assert estimate_rpe(img, median_window=1).row_at.tolist() == [7, 7, 7]


def test_rpe_median_removes_outlier():
    img = np.zeros((10, 3))
    img[2] = 9.0
    img[7] = 8.0
    img[7, 1] = 0.0
    img[9, 1] = 8.0
    assert estimate_rpe(img, median_window=1).row_at.tolist() == [7, 9, 7]
    assert estimate_rpe(img, median_window=3).row_at[1] == 7


@given(st.integers(0, 2 ** 20), st.sampled_from([1, 3, 5, 15]))
@settings(max_examples=30, deadline=None)
def test_rpe_matches_brute_force(seed, window):
    img = np.random.default_rng(seed).random((24, 30))
    curve = estimate_rpe(img, median_window=window)
    np.testing.assert_array_equal(curve.row_at, rpe_oracle(img, window))


def test_rpe_noise_bounds():
    img = np.random.default_rng(5).random((64, 64))
    curve = estimate_rpe(img)
    assert np.all((curve.row_at >= 0) & (curve.row_at < 64))


def test_rpe_constant_columns_invalid():
    img = np.random.default_rng(0).random((12, 6))
    img[:, 2] = 1.0
    curve = estimate_rpe(img, median_window=3)
    assert not curve.valid[2] and curve.valid.sum() == 5


# --- baseline fitting ------------------------------------------------------------

@pytest.mark.parametrize("method", ["convex_hull", "fraction"])
def test_baseline_recovers_line(method):
    cols = np.arange(50)
    curve = RpeCurve(row_at=3 + 0.5 * cols, valid=np.ones(50, bool))
    b = fit_baseline(curve, method=method, degree=1, fraction=1.0)
    np.testing.assert_allclose(b.coeffs, [3.0, 0.5], atol=1e-9)
    assert b.coeffs.size == b.degree + 1


def test_fraction_excludes_contaminated_points():
    cols = np.arange(200)
    rows = 100 + 10 * ((cols - 100) / 100.0) ** 2
    bad = np.random.default_rng(2).choice(200, 10, replace=False)
    rows[bad] = 20.0
    curve = RpeCurve(row_at=rows, valid=np.ones(200, bool))
    b = fit_baseline(curve, method="fraction", degree=2, fraction=0.3)
    d = rows.max() - rows.min()
    expected = np.flatnonzero(rows >= rows.max() - 0.3 * d)
    np.testing.assert_array_equal(np.sort(b.support_cols), expected)
    assert not set(bad) & set(b.support_cols.tolist())
    np.testing.assert_allclose(b(cols[np.setdiff1d(cols, bad)]), rows[np.setdiff1d(cols, bad)], atol=1e-8)


def test_baseline_insufficient_support():
    valid = np.zeros(10, bool)
    valid[[2, 5]] = True
    curve = RpeCurve(row_at=np.where(valid, 4, -1), valid=valid)
    with pytest.raises(InsufficientSupportError):
        fit_baseline(curve, degree=4)


# --- flatten and crop ------------------------------------------------------------

def constant_baseline(value, degree=2):
    return Baseline(degree=degree, coeffs=np.array([value] + [0.0] * degree), method="fraction")


def test_flatten_zero_shift_is_identity():
    img = np.random.default_rng(0).random((30, 20))
    np.testing.assert_array_equal(flatten(img, constant_baseline(12.0), 12), img)


def test_flatten_linear_band():
    rows, cols = 60, 80
    img = np.zeros((rows, cols))
    band = np.rint(10 + np.arange(cols) / 4).astype(int)
    img[band, np.arange(cols)] = 1.0
    img[band - 1, np.arange(cols)] = 0.5
    curve = estimate_rpe(img, median_window=1)
    b = fit_baseline(curve, method="fraction", degree=1, fraction=1.0)
    out = flatten(img, b, 20)
    # the band position after an independently computed shift
    shifts = np.rint(20 - (10 + np.arange(cols) / 4)).astype(int)
    assert np.all(np.abs(band + shifts - 20) <= 1)
    assert np.all(np.abs(np.argmax(out, axis=0) - 20) <= 1)


@given(st.integers(-5, 5), st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_shift_inverse(s, seed):
    img = np.random.default_rng(seed).random((20, 7))
    back = shift_columns(shift_columns(img, np.full(7, s)), np.full(7, -s))
    lo, hi = abs(s), 20 - abs(s)
    np.testing.assert_array_equal(back[lo:hi], img[lo:hi])


def test_crop_examples():
    img = np.arange(100 * 380, dtype=float).reshape(100, 380)
    out = crop(img, 70)
    assert out.shape == (65, 380)
    np.testing.assert_array_equal(out, img[10:75])
    wide = np.random.default_rng(0).random((100, 500))
    np.testing.assert_array_equal(crop(wide, 70), wide[10:75, 60:440])
    with pytest.raises(OutOfBoundsError) as info:
        crop(np.zeros((64, 380)), 61)
    assert info.value.dimension == "rows"
    with pytest.raises(OutOfBoundsError) as info:
        crop(np.zeros((100, 379)), 70)
    assert info.value.dimension == "cols"


@given(st.integers(60, 130), st.integers(300, 450), st.integers(0, 140))
@settings(max_examples=40, deadline=None)
def test_crop_shape_or_error(rows, cols, flat_row):
    img = np.zeros((rows, cols))
    try:
        out = crop(img, flat_row)
    except OutOfBoundsError:
        return
    assert out.shape == (65, 380)


def test_flatten_synthetic_band_within_one_pixel():
    for seed in range(10):
        img, rpe = synthetic_bscan(seed=seed, return_rpe=True)
        b = fit_baseline(estimate_rpe(img), method="hull", degree=2)
        target = int(np.median(rpe))
        re = estimate_rpe(flatten(img, b, target))
        assert np.max(np.abs(re.row_at[re.valid] - target)) <= 1


def test_preprocess_chain_and_transformer():
    imgs = [synthetic_bscan(seed=s) for s in range(2)]
    out = BScanPreprocessor(denoise=False).fit_transform(imgs)
    assert out.shape == (2, 65, 380)
    np.testing.assert_array_equal(out[0], preprocess_bscan(imgs[0], denoise=False))
    assert BScanPreprocessor(degree=3).get_params()["degree"] == 3
