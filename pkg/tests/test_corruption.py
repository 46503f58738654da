"""Corruption simulators against their closed-form frequency-domain oracles."""

import numpy as np
import pytest
from scipy import ndimage, stats

from jointrec.errors import ConfigError, DataError, ShapeError
from jointrec.corruption import (
    MotionTrace,
    NoiseSpec,
    UndersampleSpec,
    acceleration_preset,
    add_noise,
    make_mask,
    normalize_pair,
    random_motion_trace,
    rotate_kspace,
    simulate_motion,
    translate_kspace_phase,
    undersample,
)
from jointrec.fourier import (
    FREQUENCY,
    IMAGE,
    complex_from_field,
    fft2c_array,
    field_from_complex,
    ifft2c_array,
)


def smooth_phantom(n=64):
    """Two offset anisotropic bumps, deliberately not symmetric."""
    yy, xx = np.mgrid[0:n, 0:n]
    img = np.exp(-(((yy - 20) / 8.0) ** 2 + ((xx - 30) / 14.0) ** 2))
    img = img + 0.6 * np.exp(-(((yy - 42) / 12.0) ** 2 + ((xx - 22) / 6.0) ** 2))
    return img.astype(np.complex128)


def freq_field(z):
    return field_from_complex(np.asarray(z, dtype=np.complex128), FREQUENCY)


def image_field(z):
    return field_from_complex(np.asarray(z, dtype=np.complex128), IMAGE)


# -- masks ------------------------------------------------------------------------


def test_full_sampling_keeps_everything():
    mask = make_mask(UndersampleSpec(gamma_s=1.0), 64)
    assert mask.all()


def test_uniform_mask_cardinality_paper_rates():
    for gamma, n, want in [(0.25, 256, 64), (0.33, 256, 84), (0.10, 256, 26)]:
        mask = make_mask(UndersampleSpec(gamma_s=gamma, seed=3), n)
        assert mask.sum() == want == round(gamma * n)


def test_center_dense_mask_example():
    spec = UndersampleSpec(mode="center_dense", gamma_s=0.25, center_fraction=0.08, seed=1)
    mask = make_mask(spec, 100)
    assert mask.sum() == 25
    start = (100 - 8) // 2
    assert mask[start : start + 8].all()


def test_acceleration_presets_cardinalities():
    for factor, total, center in [(4, 64, 21), (8, 32, 11)]:
        spec = acceleration_preset(factor)
        mask = make_mask(spec, 256)
        assert mask.sum() == total
        nc = int(np.ceil(spec.center_fraction * 256))
        assert nc == center
        start = (256 - nc) // 2
        assert mask[start : start + nc].all()
    with pytest.raises(ConfigError):
        acceleration_preset(6)


def test_mask_determinism_and_seed_sensitivity():
    spec = UndersampleSpec(gamma_s=0.25, seed=7)
    a = make_mask(spec, 128)
    b = make_mask(spec, 128)
    assert np.array_equal(a, b)
    c = make_mask(UndersampleSpec(gamma_s=0.25, seed=8), 128)
    assert not np.array_equal(a, c)


def test_mask_validation():
    with pytest.raises(ConfigError):
        UndersampleSpec(gamma_s=0.0)
    with pytest.raises(ConfigError):
        UndersampleSpec(gamma_s=1.5)
    with pytest.raises(ConfigError):
        UndersampleSpec(mode="radial")
    with pytest.raises(ConfigError):
        # center block larger than the total budget
        make_mask(UndersampleSpec(mode="center_dense", gamma_s=0.25, center_fraction=0.5), 100)
    with pytest.raises(ShapeError):
        make_mask(UndersampleSpec(), 0)


# -- undersampling ------------------------------------------------------------------


def test_undersample_identity_and_zero():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    f = freq_field(z)
    kept = complex_from_field(undersample(f, np.ones(8, dtype=bool)))
    assert np.array_equal(kept[0, 0], z)
    gone = complex_from_field(undersample(f, np.zeros(8, dtype=bool)))
    assert not gone.any()


def test_undersample_energy_and_idempotence():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    f = freq_field(z)
    mask = make_mask(UndersampleSpec(gamma_s=0.5, seed=2), 16)
    once = undersample(f, mask)
    assert np.sum(np.abs(complex_from_field(once)) ** 2) < np.sum(np.abs(z) ** 2)
    twice = undersample(once, mask)
    assert np.array_equal(once.tensor.data, twice.tensor.data)
    rows = complex_from_field(once)[0, 0]
    assert np.array_equal(rows[mask], z[mask])
    assert not rows[~mask].any()


def test_undersample_contract_errors():
    f = freq_field(np.ones((8, 8)))
    with pytest.raises(ShapeError):
        undersample(f, np.ones(7, dtype=bool))
    with pytest.raises(ConfigError):
        undersample(image_field(np.ones((8, 8))), np.ones(8, dtype=bool))


# -- translation phase oracle ----------------------------------------------------------


def test_translate_zero_is_identity():
    f = freq_field(smooth_phantom(32))
    out = translate_kspace_phase(f, 0.0, 0.0)
    assert np.abs(complex_from_field(out) - complex_from_field(f)).max() < 1e-14


def test_translate_preserves_magnitude():
    f = freq_field(fft2c_array(smooth_phantom(64)))
    out = translate_kspace_phase(f, 3.7, -1.2)
    assert np.abs(np.abs(complex_from_field(out)) - np.abs(complex_from_field(f))).max() < 1e-10


def test_integer_translation_is_circular_shift():
    img = smooth_phantom(64)
    f = freq_field(fft2c_array(img))
    out = complex_from_field(translate_kspace_phase(f, 5, 3))[0, 0]
    shifted = ifft2c_array(out)
    assert np.abs(shifted - np.roll(img, (3, 5), axis=(0, 1))).max() < 1e-8


def test_translate_line_subset_only_touches_those_lines():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    f = freq_field(z)
    lines = np.zeros(16, dtype=bool)
    lines[4:8] = True
    out = complex_from_field(translate_kspace_phase(f, 2.0, 1.0, lines=lines))[0, 0]
    assert np.array_equal(out[~lines], z[~lines])
    assert not np.allclose(out[lines], z[lines])


# -- rotation oracle ---------------------------------------------------------------------


def test_rotate_zero_is_identity():
    f = freq_field(smooth_phantom(32))
    out = rotate_kspace(f, 0.0)
    assert np.abs(complex_from_field(out) - complex_from_field(f)).max() < 1e-14


def test_rotate_90_degrees_is_a_lattice_permutation():
    n = 64
    rng = np.random.default_rng(3)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    out = complex_from_field(rotate_kspace(freq_field(z), 90.0))[0, 0]
    # on an even centered grid the source column is n - i; the single row
    # whose source leaves the grid is zero-filled
    want = np.zeros_like(z)
    rows = np.arange(1, n)
    cols = np.arange(n)
    want[rows[:, None], cols[None, :]] = z[cols[None, :], (n - rows)[:, None]]
    assert np.abs(out - want).max() < 1e-10
    assert np.abs(out[0]).max() == 0.0


def test_rotate_10_degrees_matches_image_domain_rotation():
    img = smooth_phantom(64)
    spectrum = rotate_kspace(freq_field(fft2c_array(img)), 10.0)
    got = np.abs(complex_from_field(spectrum)).ravel()
    ref = np.abs(fft2c_array(ndimage.rotate(img.real, 10.0, reshape=False, order=1).astype(np.complex128))).ravel()
    r = np.corrcoef(got, ref)[0, 1]
    assert r > 0.99


# -- motion simulation ----------------------------------------------------------------


def test_empty_trace_is_plain_transform():
    img = smooth_phantom(32)
    out = simulate_motion(image_field(img), MotionTrace())
    assert out.domain == FREQUENCY
    assert np.abs(complex_from_field(out)[0, 0] - fft2c_array(img)).max() < 1e-12


def test_motion_translation_matches_phase_oracle():
    img = smooth_phantom(64)
    moved = simulate_motion(image_field(img), MotionTrace(events=((0, 5.0, 0.0, 0.0),)))
    oracle = translate_kspace_phase(freq_field(fft2c_array(img)), 5.0, 0.0)
    assert np.abs(complex_from_field(moved) - complex_from_field(oracle)).max() < 1e-8


def test_motion_rotation_correlates_with_kspace_oracle():
    img = smooth_phantom(64)
    moved = simulate_motion(image_field(img), MotionTrace(events=((0, 0.0, 0.0, 10.0),)))
    oracle = rotate_kspace(freq_field(fft2c_array(img)), 10.0)
    r = np.corrcoef(
        np.abs(complex_from_field(moved)).ravel(),
        np.abs(complex_from_field(oracle)).ravel(),
    )[0, 1]
    assert r > 0.99


def test_mid_scan_event_splits_lines():
    img = smooth_phantom(32)
    clean = fft2c_array(img)
    out = complex_from_field(simulate_motion(image_field(img), MotionTrace(events=((16, 4.0, -2.0, 0.0),))))[0, 0]
    # identity pose before the event
    assert np.abs(out[:16] - clean[:16]).max() < 1e-12
    moved = complex_from_field(translate_kspace_phase(freq_field(clean), 4.0, -2.0))[0, 0]
    assert np.abs(out[16:] - moved[16:]).max() < 1e-8


def test_motion_trace_validation():
    with pytest.raises(ConfigError):
        MotionTrace(events=((8, 0.0, 0.0, 0.0), (4, 0.0, 0.0, 0.0)))
    with pytest.raises(ConfigError):
        MotionTrace(events=((4, 0.0, 0.0, 0.0), (4, 1.0, 0.0, 0.0)))
    with pytest.raises(ConfigError):
        MotionTrace(events=((4, 25.0, 0.0, 0.0),))
    with pytest.raises(ConfigError):
        MotionTrace(events=((4, 0.0, 0.0, 20.0),))
    with pytest.raises(ConfigError):
        simulate_motion(image_field(np.ones((8, 8))), MotionTrace(events=((9, 0.0, 0.0, 0.0),)))
    with pytest.raises(ConfigError):
        simulate_motion(freq_field(np.ones((8, 8))), MotionTrace())


def test_random_trace_counts_and_ranges():
    trace = random_motion_trace(64, gamma_m=0.05, seed=4)
    assert len(trace.events) == round(0.05 * 64)
    trace = random_motion_trace(256, gamma_m=0.03, seed=5)
    assert len(trace.events) == 8
    lines = [e[0] for e in trace.events]
    assert lines == sorted(lines)
    for _, dx, dy, phi in trace.events:
        assert abs(dx) <= 20.0 and abs(dy) <= 20.0
        assert abs(phi) <= 15.0
    again = random_motion_trace(256, gamma_m=0.03, seed=5)
    assert again.events == trace.events


# -- noise ---------------------------------------------------------------------------


def test_zero_noise_is_identity():
    f = freq_field(smooth_phantom(16))
    out = add_noise(f, NoiseSpec(sigma=0.0, seed=0))
    assert np.array_equal(out.tensor.data, f.tensor.data)


def test_noise_statistics_at_paper_scale():
    sigma = 5000.0
    f = freq_field(np.zeros((256, 256), dtype=np.complex128))
    out = add_noise(f, NoiseSpec(sigma=sigma, seed=11))
    noise = out.tensor.data  # clean field was zero
    n = noise.size
    assert abs(noise.std() - sigma) / sigma < 0.01
    assert abs(noise.mean()) < 3 * sigma / np.sqrt(n)
    r = np.corrcoef(noise[..., 0].ravel(), noise[..., 1].ravel())[0, 1]
    assert abs(r) < 0.02


def test_noise_variance_chi2_bound_over_ten_seeds():
    sigma = 3.0
    f = freq_field(np.zeros((64, 64), dtype=np.complex128))
    n = 64 * 64 * 2
    lo = stats.chi2.ppf(0.005, n - 1)
    hi = stats.chi2.ppf(0.995, n - 1)
    for seed in range(10):
        noise = add_noise(f, NoiseSpec(sigma=sigma, seed=seed)).tensor.data
        stat = noise.var(ddof=1) * (n - 1) / sigma**2
        assert lo < stat < hi


def test_noise_determinism_and_spec_validation():
    f = freq_field(smooth_phantom(16))
    a = add_noise(f, NoiseSpec(sigma=2.0, seed=3)).tensor.data
    b = add_noise(f, NoiseSpec(sigma=2.0, seed=3)).tensor.data
    assert np.array_equal(a, b)
    c = add_noise(f, NoiseSpec(sigma=2.0, seed=4)).tensor.data
    assert not np.array_equal(a, c)
    with pytest.raises(ConfigError):
        NoiseSpec(sigma=-1.0)
    with pytest.raises(ConfigError):
        add_noise(image_field(smooth_phantom(16)), NoiseSpec(sigma=1.0))


# -- normalization -------------------------------------------------------------------


def test_normalize_pair_scales_to_unit_peak():
    img = smooth_phantom(64) * 3.0
    f = freq_field(fft2c_array(img))
    f_n, i_n, scale = normalize_pair(f, image_field(img))
    peak = np.abs(complex_from_field(f_n.to_image())).max()
    assert abs(peak - 1.0) < 1e-6
    # clean image divided by the same factor
    assert np.abs(complex_from_field(i_n) - img / scale[0]).max() < 1e-12


def test_normalize_pair_halves_when_peak_is_two():
    img = smooth_phantom(32)
    img = img / np.abs(img).max() * 2.0  # zero-filled peak of the clean spectrum is 2
    f = freq_field(fft2c_array(img))
    f_n, i_n, scale = normalize_pair(f, image_field(img))
    assert abs(scale[0] - 2.0) < 1e-10
    assert np.abs(complex_from_field(f_n) - fft2c_array(img) / 2.0).max() < 1e-12


def test_normalize_roundtrip_and_zero_error():
    img = smooth_phantom(32)
    f = freq_field(fft2c_array(img))
    f_n, i_n, scale = normalize_pair(f, image_field(img))
    back = complex_from_field(f_n) * scale.reshape(-1, 1, 1, 1)
    rel = np.abs(back - complex_from_field(f)).max() / np.abs(complex_from_field(f)).max()
    assert rel < 1e-7
    with pytest.raises(DataError):
        normalize_pair(freq_field(np.zeros((8, 8))), image_field(np.ones((8, 8))))
    with pytest.raises(ConfigError):
        normalize_pair(image_field(img), image_field(img))
