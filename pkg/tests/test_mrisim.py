import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhmamba.fourier import fft2_array
from dhmamba.mrisim import (
    Ellipse,
    cartesian_mask,
    from_channels,
    magnitude,
    make_mask,
    metrics,
    nmse,
    phantom,
    psnr,
    radial_mask,
    radial_spokes,
    random_mask,
    ssim,
    to_channels,
    undersample,
)


def center_cols(w, frac):
    n = int(math.floor(frac * w + 0.5))
    start = w // 2 - n // 2
    return list(range(start, start + n))


# -------------------------------------------------------------------- masks
def test_cartesian_w100_center_and_expectation():
    cols = center_cols(100, 0.08)
    assert len(cols) == 8
    counts = []
    for seed in range(400):
        m = cartesian_mask(16, 100, 4, seed).mask
        assert np.all(m[:, cols] == 1)
        counts.append(m[0].sum())
    assert abs(np.mean(counts) - 25) < 0.6  # 400 draws, sd of the mean ~0.2 lines


def test_cartesian_columns_constant():
    m = cartesian_mask(12, 40, 8, 3).mask
    assert np.all(m == m[:1])
    assert set(np.unique(m)) <= {0.0, 1.0}


def test_cartesian_monte_carlo_fraction():
    frac = np.mean([cartesian_mask(1, 256, 4, s).mask.mean() for s in range(1000)])
    assert 0.225 <= frac <= 0.275


def test_cartesian_clamp_warns():
    with pytest.warns(UserWarning):
        spec = cartesian_mask(4, 20, 4, 0, center_fraction=0.5)
    assert spec.mask[0].sum() == 10  # only the band


def test_cartesian_bad_af_or_width():
    with pytest.raises(ValueError):
        cartesian_mask(8, 32, 5, 0)
    with pytest.raises(ValueError):
        cartesian_mask(8, 4, 4, 0)


def test_masks_deterministic():
    for kind in ("cartesian", "radial", "random"):
        a, b = make_mask(kind, 32, 32, 4, 11), make_mask(kind, 32, 32, 4, 11)
        np.testing.assert_array_equal(a.mask, b.mask)
    assert not np.array_equal(make_mask("random", 32, 32, 4, 1).mask, make_mask("random", 32, 32, 4, 2).mask)


def test_random_af1_all_ones():
    np.testing.assert_array_equal(random_mask(9, 7, 1, 0).mask, 1.0)


def test_radial_two_spokes_hit_center():
    m = radial_spokes(9, 9, 2)
    assert m[4, 4] == 1


@pytest.mark.parametrize("af", [4, 5, 8, 10])
def test_calibrated_fraction_64(af):
    for seed in range(5):
        for fn in (radial_mask, random_mask):
            f = fn(64, 64, af, seed).sampled_fraction
            assert 0.95 / af <= f <= 1.05 / af


def test_random_center_square_sampled():
    m = random_mask(50, 50, 8, 4).mask
    side = int(math.floor(0.2 * 50 + 0.5))
    s = 25 - side // 2
    assert np.all(m[s : s + side, s : s + side] == 1)


def test_random_unreachable():
    with pytest.raises(ValueError):
        random_mask(10, 10, 40, 0)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_mask("spiral", 8, 8, 4, 0)


# ----------------------------------------------------------------- phantoms
def test_phantom_deterministic():
    a, b = phantom(24, 20, 5), phantom(24, 20, 5)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.magnitude.min() >= 0 and a.magnitude.max() <= 1
    assert np.all(np.isfinite(a.image))


def test_single_centered_ellipse_symmetry():
    ph = phantom(32, 32, 0, ellipses=[Ellipse(0.8, (0.0, 0.0), (0.6, 0.4), 0.0)])
    m = ph.magnitude
    np.testing.assert_array_equal(m, m[::-1, :])
    np.testing.assert_array_equal(m, m[:, ::-1])


def test_phantom_mean_magnitude():
    mean = np.mean([phantom(32, 32, s).magnitude.mean() for s in range(100)])
    assert 0 < mean < 1


def test_phantom_needs_ellipse():
    with pytest.raises(ValueError):
        phantom(8, 8, 0, n_ellipses=0)


# ---------------------------------------------------------------- undersample
def test_identity_mask_lossless():
    img = phantom(16, 16, 2).image
    ks, zf = undersample(img, np.ones((16, 16)))
    assert np.max(np.abs(zf - img)) < 1e-10


def test_zero_mask():
    _, zf = undersample(phantom(16, 16, 2).image, np.zeros((16, 16)))
    assert np.all(zf == 0)


def test_masked_entries_match_fft():
    img = phantom(32, 32, 9).image
    spec = cartesian_mask(32, 32, 4, 9)
    ks, _ = undersample(img, spec)
    k = fft2_array(img)
    m = np.fft.ifftshift(spec.mask).astype(bool)  # layout check only, against numpy's own shift
    z = ks.to_complex()
    assert np.all(z[~m] == 0)
    np.testing.assert_array_equal(z[m], k[m])


def test_undersample_shape_mismatch():
    with pytest.raises(ValueError):
        undersample(np.zeros((4, 4)), np.ones((4, 5)))


def test_zero_filled_below_cap():
    for seed in range(5):
        ph = phantom(32, 32, seed)
        for kind, af in (("cartesian", 4), ("radial", 4), ("random", 8)):
            _, zf = undersample(ph.image, make_mask(kind, 32, 32, af, seed))
            assert psnr(np.abs(zf), ph.magnitude) < 100


def test_channels_roundtrip(rng):
    z = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    np.testing.assert_array_equal(from_channels(to_channels(z)), z)
    np.testing.assert_allclose(magnitude(to_channels(z)), np.abs(z))


# ------------------------------------------------------------------- metrics
def ssim_reference(x_hat, x, win=7, k1=0.01, k2=0.03):
    """Per-window loops with explicit sample statistics."""
    L = x.max()
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    npx = win * win
    vals = []
    for i in range(x.shape[0] - win + 1):
        for j in range(x.shape[1] - win + 1):
            a = x_hat[i : i + win, j : j + win].ravel()
            b = x[i : i + win, j : j + win].ravel()
            ma, mb = sum(a) / npx, sum(b) / npx
            va = sum((t - ma) ** 2 for t in a) / (npx - 1)
            vb = sum((t - mb) ** 2 for t in b) / (npx - 1)
            cov = sum((s - ma) * (t - mb) for s, t in zip(a, b)) / (npx - 1)
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return sum(vals) / len(vals)


def test_perfect_reconstruction():
    x = phantom(16, 16, 1).magnitude
    r = metrics(x, x)
    assert (r.nmse, r.ssim, r.psnr) == (0.0, 1.0, 100.0)


def test_constant_offset_psnr():
    x = np.zeros((8, 8))
    x[0, 0] = 1.0  # range 1
    c = 0.05
    assert abs(psnr(x + c, x) - (-20 * math.log10(c))) < 1e-9


def test_ssim_matches_reference(rng):
    x = rng.uniform(size=(8, 8))
    y = x + 0.1 * rng.normal(size=(8, 8))
    assert abs(ssim(y, x) - ssim_reference(y, x)) < 1e-10
    x2 = rng.uniform(size=(12, 9))
    y2 = rng.uniform(size=(12, 9))
    assert abs(ssim(y2, x2) - ssim_reference(y2, x2)) < 1e-10


def test_nmse_formula_and_zero_reference(rng):
    x, y = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
    assert abs(nmse(y, x) - np.sum((y - x) ** 2) / np.sum(x**2)) < 1e-14
    with pytest.raises(ValueError):
        nmse(x, np.zeros((5, 5)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16), noise=st.floats(0.0, 0.5))
def test_metric_ranges(seed, noise):
    r = np.random.default_rng(seed)
    x = r.uniform(0.1, 1, size=(10, 10))
    y = x + noise * r.normal(size=(10, 10))
    m = metrics(y, x)
    assert m.nmse >= 0 and -1 <= m.ssim <= 1 and m.psnr <= 100


def test_no_warnings_on_default_masks():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for af in (4, 8):
            cartesian_mask(32, 32, af, 0)
