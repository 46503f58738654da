"""Losses and metrics against brute-force window oracles and closed forms."""

import math

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view

from jointrec.errors import ConfigError, NumericError, ShapeError
from jointrec.fourier import FREQUENCY, IMAGE, ComplexField, fft2c, field_from_complex
from jointrec.losses import (
    JOINT_LAMBDA,
    LOSS_KINDS,
    MSSSIM_WEIGHTS,
    LossSpec,
    joint_l1,
    l1_image,
    l1_kspace,
    metric_value,
    ms_ssim,
    needs_frequency,
    needs_image,
    psnr,
    ssim,
    training_objective,
)
from jointrec.harness.optim import Adam
from jointrec.tensor import Parameter, Tensor, finite_diff_directional


def image_pair(rng, n=16, b=1, dtype=np.float64):
    a = rng.uniform(-1, 1, (b, n, n, 2)).astype(dtype)
    c = rng.uniform(-1, 1, (b, n, n, 2)).astype(dtype)
    return ComplexField(Tensor(a), IMAGE), ComplexField(Tensor(c), IMAGE)


def const_image(value_re, n=16, b=1, dtype=np.float64):
    data = np.zeros((b, n, n, 2), dtype=dtype)
    data[..., 0] = value_re
    return ComplexField(Tensor(data), IMAGE)


# -- independent window-by-window references --------------------------------------


def ssim_maps_brute(xm, ym, window, c1, c2):
    wx = sliding_window_view(xm, (window, window))
    wy = sliding_window_view(ym, (window, window))
    mx = wx.mean(axis=(-2, -1))
    my = wy.mean(axis=(-2, -1))
    vx = wx.var(axis=(-2, -1))
    vy = wy.var(axis=(-2, -1))
    cov = (wx * wy).mean(axis=(-2, -1)) - mx * my
    lum = (2 * mx * my + c1) / (mx**2 + my**2 + c1)
    cs = (2 * cov + c2) / (vx + vy + c2)
    return lum, cs


def ssim_brute(pred, ref, window=7, k1=0.01, k2=0.03):
    """Per-sample magnitude SSIM via explicit sliding windows."""
    px = pred.tensor.data
    rx = ref.tensor.data
    vals = []
    for s in range(px.shape[0]):
        xm = np.hypot(px[s, :, :, 0], px[s, :, :, 1])
        ym = np.hypot(rx[s, :, :, 0], rx[s, :, :, 1])
        L = ym.max()
        lum, cs = ssim_maps_brute(xm, ym, window, (k1 * L) ** 2, (k2 * L) ** 2)
        vals.append((lum * cs).mean())
    return float(np.mean(vals))


def ms_ssim_brute(pred, ref, window=7, k1=0.01, k2=0.03):
    px = pred.tensor.data
    rx = ref.tensor.data
    vals = []
    for s in range(px.shape[0]):
        xm = np.hypot(px[s, :, :, 0], px[s, :, :, 1])
        ym = np.hypot(rx[s, :, :, 0], rx[s, :, :, 1])
        L = ym.max()
        c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
        sizes = [xm.shape]
        while (
            len(sizes) < len(MSSSIM_WEIGHTS)
            and sizes[-1][0] % 2 == 0
            and sizes[-1][1] % 2 == 0
            and sizes[-1][0] // 2 >= window
            and sizes[-1][1] // 2 >= window
        ):
            sizes.append((sizes[-1][0] // 2, sizes[-1][1] // 2))
        wts = np.asarray(MSSSIM_WEIGHTS[: len(sizes)])
        wts = wts / wts.sum()
        total = 1.0
        for j in range(len(sizes)):
            lum, cs = ssim_maps_brute(xm, ym, window, c1, c2)
            term = (lum * cs).mean() if j == len(sizes) - 1 else cs.mean()
            if wts[j] != 1.0:
                term = max(term, 0.0) ** wts[j]
            total *= term
            if j != len(sizes) - 1:
                xm = xm.reshape(xm.shape[0] // 2, 2, xm.shape[1] // 2, 2).mean(axis=(1, 3))
                ym = ym.reshape(ym.shape[0] // 2, 2, ym.shape[1] // 2, 2).mean(axis=(1, 3))
        vals.append(total)
    return float(np.mean(vals))


# -- L1 family ----------------------------------------------------------------------


def test_l1_zero_on_equal_inputs():
    rng = np.random.default_rng(0)
    a, _ = image_pair(rng)
    assert l1_image(a, a).item() == 0.0
    f = ComplexField(a.tensor, FREQUENCY)
    assert l1_kspace(f, f).item() == 0.0
    assert joint_l1(a, a, f, f).item() == 0.0


def test_l1_constant_offset_is_one():
    rng = np.random.default_rng(1)
    ref, _ = image_pair(rng)
    pred = ComplexField(Tensor(ref.tensor.data + 1.0), IMAGE)
    assert l1_image(pred, ref).item() == pytest.approx(1.0, abs=1e-12)


def test_l1_matches_brute_force():
    rng = np.random.default_rng(2)
    pred, ref = image_pair(rng, b=3)
    want = np.abs(pred.tensor.data - ref.tensor.data).mean()
    assert abs(l1_image(pred, ref).item() - want) < 1e-7


def test_joint_l1_weighting_example():
    n = 8
    ref_i = const_image(0.0, n)
    pred_i = const_image(1.0, n)  # image error exactly 1... on the real channel only
    # both channels offset by 1 so the mean is 1
    data = np.ones((1, n, n, 2))
    pred_i = ComplexField(Tensor(data), IMAGE)
    ref_f = ComplexField(Tensor(np.zeros((1, n, n, 2))), FREQUENCY)
    pred_f = ComplexField(Tensor(np.full((1, n, n, 2), 2.0)), FREQUENCY)
    out = joint_l1(pred_i, ref_i, pred_f, ref_f).item()
    assert out == pytest.approx(1.2, abs=1e-6)


def test_l1_contract_errors():
    rng = np.random.default_rng(3)
    a, b = image_pair(rng)
    with pytest.raises(ConfigError):
        l1_image(ComplexField(a.tensor, FREQUENCY), b)
    with pytest.raises(ShapeError):
        l1_image(a, ComplexField(Tensor(np.ones((1, 8, 8, 2))), IMAGE))


def test_loss_spec_validation():
    for kind in LOSS_KINDS:
        LossSpec(kind=kind)
    with pytest.raises(ConfigError):
        LossSpec(kind="l2")
    with pytest.raises(ConfigError):
        LossSpec(kind="joint-l1", lam=0.5)
    with pytest.raises(ConfigError):
        LossSpec(kind="ssim", window=6)
    with pytest.raises(ConfigError):
        LossSpec(kind="ssim", k1=0.0)
    assert JOINT_LAMBDA == 0.1


# -- ssim ---------------------------------------------------------------------------


def test_ssim_self_similarity_is_one():
    rng = np.random.default_rng(4)
    a, _ = image_pair(rng)
    assert abs(ssim(a, a).item() - 1.0) < 1e-12


def test_ssim_matches_brute_force_windows():
    rng = np.random.default_rng(5)
    pred, ref = image_pair(rng, n=16, b=2)
    got = ssim(pred, ref).item()
    want = ssim_brute(pred, ref)
    assert abs(got - want) < 1e-8


def test_ssim_constant_images_closed_form():
    # zero prediction vs constant reference c: windows have zero variance
    # and zero covariance, so the contrast-structure ratio is exactly 1
    # and only the luminance term survives: C1 / (c^2 + C1)
    c = 0.8
    pred = const_image(0.0)
    ref = const_image(c)
    c1 = (0.01 * c) ** 2
    want = c1 / (c * c + c1)
    assert ssim(pred, ref).item() == pytest.approx(want, rel=1e-10)


def test_ssim_symmetry():
    rng = np.random.default_rng(6)
    # symmetric comparison needs a shared dynamic range; scale both to max 1
    a, b = image_pair(rng)
    for f in (a, b):
        mag = np.hypot(f.tensor.data[..., 0], f.tensor.data[..., 1]).max()
        f.tensor.data /= mag
    assert abs(ssim(a, b).item() - ssim(b, a).item()) < 1e-10


def test_ssim_range_and_errors():
    rng = np.random.default_rng(7)
    a, b = image_pair(rng)
    v = ssim(a, b).item()
    assert -1.0 <= v <= 1.0
    with pytest.raises(ShapeError):
        ssim(const_image(1.0, n=6), const_image(1.0, n=6))
    with pytest.raises(NumericError):
        ssim(const_image(1.0), const_image(0.0))


# -- ms-ssim -------------------------------------------------------------------------


def test_ms_ssim_self_similarity_is_one():
    rng = np.random.default_rng(8)
    a, _ = image_pair(rng, n=32)
    assert abs(ms_ssim(a, a).item() - 1.0) < 1e-10


def test_ms_ssim_single_scale_fallback_equals_ssim():
    rng = np.random.default_rng(9)
    pred, ref = image_pair(rng, n=8)  # 8 -> 4 < window, so one scale only
    assert abs(ms_ssim(pred, ref).item() - ssim(pred, ref).item()) < 1e-8


def test_ms_ssim_matches_brute_force_ladder():
    rng = np.random.default_rng(10)
    pred, ref = image_pair(rng, n=32, b=2)  # three scales: 32, 16, 8
    got = ms_ssim(pred, ref).item()
    want = ms_ssim_brute(pred, ref)
    assert abs(got - want) < 1e-7


def test_ms_ssim_range_on_aligned_smooth_pair():
    n = 32
    yy, xx = np.mgrid[0:n, 0:n] / n
    base = np.exp(-((yy - 0.5) ** 2 + (xx - 0.4) ** 2) * 8)
    noisy = base + 0.05 * np.random.default_rng(11).standard_normal((n, n))
    pred = field_from_complex(noisy.astype(np.complex128), IMAGE)
    ref = field_from_complex(base.astype(np.complex128), IMAGE)
    v = ms_ssim(pred, ref).item()
    assert 0.0 < v <= 1.0


# -- psnr ----------------------------------------------------------------------------


def test_psnr_zero_db_when_mse_equals_peak_squared():
    ref = const_image(2.0)
    pred = const_image(0.0)  # |diff| = 2 = peak everywhere
    assert psnr(pred, ref).item() == pytest.approx(0.0, abs=1e-6)


def test_psnr_twenty_db_at_one_percent_mse():
    ref = const_image(2.0)
    pred = const_image(2.2)  # |diff| = peak/10, MSE = peak^2/100
    assert psnr(pred, ref).item() == pytest.approx(20.0, abs=1e-6)


def test_psnr_identical_inputs_give_inf_sentinel():
    a = const_image(1.0)
    out = psnr(a, a)
    assert out == math.inf
    with pytest.raises(NumericError):
        training_objective(LossSpec(kind="psnr"), a, a, None, None)


def test_psnr_matches_direct_formula():
    rng = np.random.default_rng(12)
    pred, ref = image_pair(rng, b=2)
    pm = np.hypot(pred.tensor.data[..., 0], pred.tensor.data[..., 1])
    rm = np.hypot(ref.tensor.data[..., 0], ref.tensor.data[..., 1])
    want = np.mean(
        [
            10 * np.log10(rm[s].max() ** 2 / np.mean((pm[s] - rm[s]) ** 2))
            for s in range(2)
        ]
    )
    assert abs(psnr(pred, ref).item() - want) < 1e-8


# -- gradients -------------------------------------------------------------------------


def directional_check(build_loss, data, trials=4, tol=1e-4):
    rng = np.random.default_rng(99)
    x = Tensor(data, requires_grad=True)
    build_loss(x).backward()
    for _ in range(trials):
        v = rng.standard_normal(data.shape)
        v /= np.abs(v).max()
        got = float((x.grad * v).sum())
        fd = finite_diff_directional(lambda t: build_loss(t), Tensor(data), v, h=1e-6)
        assert abs(got - fd) / max(abs(fd), 1e-10) < tol


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_loss_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(13)
    n = 16
    ref_data = rng.uniform(-1, 1, (1, n, n, 2))
    pred_data = rng.uniform(-1, 1, (1, n, n, 2))
    spec = LossSpec(kind=kind)
    ref_i = ComplexField(Tensor(ref_data), IMAGE)
    ref_f = ComplexField(Tensor(fft2c(Tensor(ref_data)).data), FREQUENCY)

    def build(t):
        pred_i = ComplexField(t, IMAGE)
        pred_f = ComplexField(fft2c(t), FREQUENCY)
        return training_objective(spec, pred_i, ref_i, pred_f, ref_f)

    directional_check(build, pred_data)


def test_training_direction_sanity_over_random_trials():
    # one optimizer step from a fixed state should reduce each loss nearly always
    n = 8
    decreases = {kind: 0 for kind in LOSS_KINDS}
    trials = 100
    for t in range(trials):
        rng = np.random.default_rng(1000 + t)
        ref_data = rng.uniform(-1, 1, (1, n, n, 2)).astype(np.float32)
        start = rng.uniform(-1, 1, (1, n, n, 2)).astype(np.float32)
        ref_i = ComplexField(Tensor(ref_data), IMAGE)
        ref_f = ComplexField(Tensor(fft2c(Tensor(ref_data)).data), FREQUENCY)
        for kind in LOSS_KINDS:
            spec = LossSpec(kind=kind)
            p = Parameter(start.copy(), "x")
            opt = Adam([p], lr=1e-3)

            def objective():
                pred_i = ComplexField(p.tensor, IMAGE)
                pred_f = ComplexField(fft2c(p.tensor), FREQUENCY)
                return training_objective(spec, pred_i, ref_i, pred_f, ref_f)

            loss0 = objective()
            p.zero_grad()
            loss0.backward()
            opt.step()
            loss1 = objective()
            if loss1.item() < loss0.item():
                decreases[kind] += 1
    for kind, count in decreases.items():
        assert count >= 95, f"{kind}: only {count}/{trials} trials decreased"


# -- dispatch ---------------------------------------------------------------------------


def test_needs_flags():
    assert needs_frequency("freq-l1") and needs_frequency("joint-l1")
    assert not needs_frequency("image-l1") and not needs_frequency("ssim")
    assert needs_image("ssim") and needs_image("image-l1")
    assert not needs_image("freq-l1")


def test_training_objective_flips_similarity_metrics():
    rng = np.random.default_rng(14)
    pred, ref = image_pair(rng)
    v = ssim(pred, ref).item()
    obj = training_objective(LossSpec(kind="ssim"), pred, ref, None, None).item()
    assert obj == pytest.approx(1.0 - v, abs=1e-12)
    vp = psnr(pred, ref).item()
    objp = training_objective(LossSpec(kind="psnr"), pred, ref, None, None).item()
    assert objp == pytest.approx(-vp, abs=1e-12)


def test_metric_value_returns_plain_floats():
    rng = np.random.default_rng(15)
    pred, ref = image_pair(rng)
    pred_f = ComplexField(Tensor(rng.uniform(-1, 1, (1, 16, 16, 2))), FREQUENCY)
    ref_f = ComplexField(Tensor(pred_f.tensor.data + 0.5), FREQUENCY)
    for kind in LOSS_KINDS:
        v = metric_value(kind, pred, ref, pred_f, ref_f)
        assert isinstance(v, float)
        assert np.isfinite(v)
