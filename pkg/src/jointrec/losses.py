"""Differentiable losses and image-quality metrics for complex field pairs.

All functions take image- or frequency-domain ComplexFields and return scalar
Tensors, so any of them can be trained against directly. Quality metrics
(SSIM, MS-SSIM, PSNR) are computed on channel magnitudes with per-slice max
normalization constants. ``training_objective`` maps a LossSpec onto a
quantity that is minimized: L1 losses pass through, similarity metrics train
as 1 - metric, PSNR as its negation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .fourier import FREQUENCY, IMAGE
from .tensor import (
    Tensor,
    abs_,
    add,
    avg_pool2,
    box_mean_valid,
    complex_magnitude,
    div,
    log,
    mean_all,
    mean_axes,
    mul,
    neg,
    pow_const,
    relu,
    scalar,
    sub,
)

LOSS_KINDS = ("image-l1", "freq-l1", "joint-l1", "ssim", "ms-ssim", "psnr")

JOINT_LAMBDA = 0.1
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# standard five-scale exponents, renormalized when fewer scales fit
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class LossSpec:
    """Which loss to train with, plus the fixed metric constants."""

    kind: str
    lam: float = JOINT_LAMBDA
    window: int = SSIM_WINDOW
    k1: float = SSIM_K1
    k2: float = SSIM_K2

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.kind == "joint-l1" and self.lam != JOINT_LAMBDA:
            raise ConfigError(f"joint-l1 weight is fixed at {JOINT_LAMBDA}, got {self.lam}")
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError(f"ssim window must be odd and positive, got {self.window}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ConfigError("ssim constants must be positive")


def _check_pair(pred, ref, domain, name):
    if pred.domain != domain or ref.domain != domain:
        raise ConfigError(
            f"{name} expects {domain}-domain fields, got {pred.domain}/{ref.domain}"
        )
    if pred.tensor.shape != ref.tensor.shape:
        raise ShapeError(
            f"{name} shape mismatch: {pred.tensor.shape} vs {ref.tensor.shape}"
        )


# -- L1 family -------------------------------------------------------------------


def l1_image(pred, ref):
    """Mean absolute error over real and imaginary channels of image fields."""
    _check_pair(pred, ref, IMAGE, "l1_image")
    return mean_all(abs_(sub(pred.tensor, ref.tensor)))


def l1_kspace(pred, ref):
    """Mean absolute error over frequency-domain channels."""
    _check_pair(pred, ref, FREQUENCY, "l1_kspace")
    return mean_all(abs_(sub(pred.tensor, ref.tensor)))


def joint_l1(pred_image, ref_image, pred_freq, ref_freq, lam=JOINT_LAMBDA):
    """Image L1 plus lam times frequency L1."""
    a = l1_image(pred_image, ref_image)
    b = l1_kspace(pred_freq, ref_freq)
    return add(a, mul(scalar(lam, dtype=b.dtype), b))


# -- similarity metrics ----------------------------------------------------------


def _magnitude_pair(pred, ref, name):
    _check_pair(pred, ref, IMAGE, name)
    if pred.tensor.shape[3] % 2:
        raise ShapeError(f"{name} needs interleaved re/im channels, got {pred.tensor.shape}")
    return complex_magnitude(pred.tensor), complex_magnitude(ref.tensor)


def _slice_max(ref_mag):
    """Per-sample dynamic range taken from the reference magnitude.

    Treated as a constant of the metric, not differentiated through.
    """
    m = ref_mag.data.max(axis=(1, 2, 3), keepdims=True)
    if np.any(m <= 0):
        raise NumericError("reference magnitude is identically zero in some slice")
    return m


def _ssim_maps(x, y, window, c1, c2):
    """Local luminance and contrast-structure maps over valid uniform windows."""
    mx = box_mean_valid(x, window)
    my = box_mean_valid(y, window)
    mxx = box_mean_valid(mul(x, x), window)
    myy = box_mean_valid(mul(y, y), window)
    mxy = box_mean_valid(mul(x, y), window)
    vx = sub(mxx, mul(mx, mx))
    vy = sub(myy, mul(my, my))
    cov = sub(mxy, mul(mx, my))
    c1t = Tensor(np.broadcast_to(c1, (c1.shape[0], 1, 1, 1)).astype(x.dtype))
    c2t = Tensor(np.broadcast_to(c2, (c2.shape[0], 1, 1, 1)).astype(x.dtype))
    two = scalar(2.0, dtype=x.dtype)
    lum = div(
        add(mul(two, mul(mx, my)), c1t),
        add(add(mul(mx, mx), mul(my, my)), c1t),
    )
    cs = div(add(mul(two, cov), c2t), add(add(vx, vy), c2t))
    return lum, cs


def ssim(pred, ref, window=SSIM_WINDOW, k1=SSIM_K1, k2=SSIM_K2):
    """Mean structural similarity between magnitude images, in [-1, 1].

    Uniform valid windows, population window statistics, dynamic range set
    per slice from the reference magnitude.
    """
    x, y = _magnitude_pair(pred, ref, "ssim")
    h, w = x.shape[1], x.shape[2]
    if h < window or w < window:
        raise ShapeError(f"ssim window {window} does not fit {h}x{w} image")
    mx = _slice_max(y)
    c1 = (k1 * mx) ** 2
    c2 = (k2 * mx) ** 2
    lum, cs = _ssim_maps(x, y, window, c1, c2)
    return mean_all(mul(lum, cs))


def ms_ssim(pred, ref, window=SSIM_WINDOW, k1=SSIM_K1, k2=SSIM_K2):
    """Multiscale SSIM with dyadic average-pool downsampling.

    Contrast-structure means at every scale, luminance folded in only at the
    coarsest, combined as a weighted product with the standard five-scale
    exponents. Images too small for five scales use however many fit (the
    window must fit and dims must stay even), with the weights renormalized.
    A one-scale fallback therefore reduces to plain ssim.
    """
    x, y = _magnitude_pair(pred, ref, "ms_ssim")
    h, w = x.shape[1], x.shape[2]
    if h < window or w < window:
        raise ShapeError(f"ms_ssim window {window} does not fit {h}x{w} image")
    mx = _slice_max(y)
    c1 = (k1 * mx) ** 2
    c2 = (k2 * mx) ** 2

    sizes = [(h, w)]
    while (
        len(sizes) < len(MSSSIM_WEIGHTS)
        and sizes[-1][0] % 2 == 0
        and sizes[-1][1] % 2 == 0
        and sizes[-1][0] // 2 >= window
        and sizes[-1][1] // 2 >= window
    ):
        sizes.append((sizes[-1][0] // 2, sizes[-1][1] // 2))
    nsc = len(sizes)
    wts = np.asarray(MSSSIM_WEIGHTS[:nsc], dtype=np.float64)
    wts = wts / wts.sum()

    out = None
    for j in range(nsc):
        last = j == nsc - 1
        lum, cs = _ssim_maps(x, y, window, c1, c2)
        term = mean_all(mul(lum, cs)) if last else mean_all(cs)
        # fractional exponents need a nonnegative base; a unit weight (the
        # one-scale fallback) passes through so it degrades to plain ssim
        if float(wts[j]) != 1.0:
            term = pow_const(relu(term), float(wts[j]))
        out = term if out is None else mul(out, term)
        if not last:
            x = avg_pool2(x)
            y = avg_pool2(y)
    return out


def psnr(pred, ref):
    """Peak signal-to-noise ratio in dB over magnitude images.

    Per-slice peak from the reference, per-slice MSE, averaged over the
    batch. Identical inputs give the float +inf sentinel instead of a
    Tensor so the degenerate case never enters a gradient.
    """
    x, y = _magnitude_pair(pred, ref, "psnr")
    mx = _slice_max(y)
    d = sub(x, y)
    mse = mean_axes(mul(d, d), (1, 2, 3))
    if np.any(mse.data == 0.0):
        return math.inf
    peak = Tensor((mx * mx).astype(x.dtype))
    ratio = div(peak, mse)
    return mean_all(mul(scalar(10.0 / _LN10, dtype=x.dtype), log(ratio)))


# -- harness-facing dispatch -----------------------------------------------------


def needs_frequency(kind):
    """Whether a loss kind reads frequency-domain fields."""
    return kind in ("freq-l1", "joint-l1")


def needs_image(kind):
    return kind != "freq-l1"


def training_objective(spec, pred_image, ref_image, pred_freq, ref_freq):
    """Scalar Tensor to minimize for the given LossSpec.

    Fields not needed by the kind may be passed as None.
    """
    k = spec.kind
    if k == "image-l1":
        return l1_image(pred_image, ref_image)
    if k == "freq-l1":
        return l1_kspace(pred_freq, ref_freq)
    if k == "joint-l1":
        return joint_l1(pred_image, ref_image, pred_freq, ref_freq, spec.lam)
    if k == "ssim":
        v = ssim(pred_image, ref_image, spec.window, spec.k1, spec.k2)
        return sub(scalar(1.0, dtype=v.dtype), v)
    if k == "ms-ssim":
        v = ms_ssim(pred_image, ref_image, spec.window, spec.k1, spec.k2)
        return sub(scalar(1.0, dtype=v.dtype), v)
    if k == "psnr":
        v = psnr(pred_image, ref_image)
        if not isinstance(v, Tensor):
            raise NumericError("psnr objective is degenerate: reconstruction is exact")
        return neg(v)
    raise ConfigError(f"unknown loss kind {k!r}")


def metric_value(kind, pred_image, ref_image, pred_freq, ref_freq, spec=None):
    """Evaluate one metric as a plain float (no gradients)."""
    sp = spec or LossSpec(kind=kind if kind in LOSS_KINDS else "image-l1")
    if kind == "image-l1":
        return float(l1_image(pred_image, ref_image).item())
    if kind == "freq-l1":
        return float(l1_kspace(pred_freq, ref_freq).item())
    if kind == "joint-l1":
        return float(joint_l1(pred_image, ref_image, pred_freq, ref_freq, sp.lam).item())
    if kind == "ssim":
        return float(ssim(pred_image, ref_image, sp.window, sp.k1, sp.k2).item())
    if kind == "ms-ssim":
        return float(ms_ssim(pred_image, ref_image, sp.window, sp.k1, sp.k2).item())
    if kind == "psnr":
        v = psnr(pred_image, ref_image)
        return float(v) if not isinstance(v, Tensor) else float(v.item())
    raise ConfigError(f"unknown metric kind {kind!r}")
