"""k-space corruption simulators: undersampling, line-wise rigid motion, noise.

All simulators are pure functions of (input, spec, seed) operating on
ComplexField values. Acquisition lines are rows: index k_y runs along
the height axis, k_x along width, matching the centered frequency grid
of :mod:`jointrec.fourier` (DC at h//2, w//2).

Motion uses the line-wise rigid model: the object sits still while a
frequency line is read and may move between lines, so each acquired row
k_y comes from the transform of a differently-posed image. The pose map
is the literal inverse-map form

    I~[x, y] = I[(x - dx) cos p - (y - dy) sin p,
                 (x - dx) sin p + (y - dy) cos p]

about the image center. Pure translations sample with circular wrap so
the frequency-domain phase-shift identity is exact for integer shifts;
any rotation switches to zero fill outside the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .fourier import (
    FREQUENCY,
    IMAGE,
    ComplexField,
    complex_from_field,
    fft2c_array,
    field_from_complex,
    ifft2c_array,
)
from .tensor import Tensor

UNIFORM = "uniform"
CENTER_DENSE = "center_dense"


def _round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class UndersampleSpec:
    """Which fraction of frequency lines survives, and how they are picked."""

    mode: str = UNIFORM
    gamma_s: float = 0.25
    center_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (UNIFORM, CENTER_DENSE):
            raise ConfigError(f"unknown undersampling mode {self.mode!r}")
        if not 0.0 < self.gamma_s <= 1.0:
            raise ConfigError(f"gamma_s must be in (0, 1], got {self.gamma_s}")
        if not 0.0 <= self.center_fraction <= 1.0:
            raise ConfigError(f"center_fraction must be in [0, 1], got {self.center_fraction}")


@dataclass(frozen=True)
class MotionTrace:
    """Rigid-motion events, one per line where a new pose is adopted.

    Each event is (k_y, dx_px, dy_px, phi_deg). The pose holds from its
    line until the next event; lines before the first event see the
    identity pose. Ranges are carried so traces validate themselves.
    """

    events: tuple = ()
    gamma_m: float | None = None
    max_shift_px: float = 20.0
    max_angle_deg: float = 15.0
    seed: int | None = None

    def __post_init__(self):
        ev = tuple(tuple(e) for e in self.events)
        object.__setattr__(self, "events", ev)
        lines = [e[0] for e in ev]
        if lines != sorted(lines):
            raise ConfigError("motion events must be sorted by line index")
        if len(set(lines)) != len(lines):
            raise ConfigError("duplicate motion event lines")
        for ky, dx, dy, phi in ev:
            if abs(dx) > self.max_shift_px or abs(dy) > self.max_shift_px:
                raise ConfigError(f"shift ({dx}, {dy}) outside +-{self.max_shift_px} px")
            if abs(phi) > self.max_angle_deg:
                raise ConfigError(f"angle {phi} outside +-{self.max_angle_deg} deg")


@dataclass(frozen=True)
class NoiseSpec:
    """i.i.d. complex Gaussian noise of standard deviation sigma per channel."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"noise sigma must be >= 0, got {self.sigma}")


def acceleration_preset(factor: int, seed: int = 0) -> UndersampleSpec:
    """Center-dense spec for the standard 4x / 8x accelerated acquisitions.

    4x keeps the central 8% of lines and samples 25% in total; 8x keeps
    the central 4% and samples 12.5% in total.
    """
    if factor == 4:
        return UndersampleSpec(mode=CENTER_DENSE, gamma_s=0.25, center_fraction=0.08, seed=seed)
    if factor == 8:
        return UndersampleSpec(mode=CENTER_DENSE, gamma_s=0.125, center_fraction=0.04, seed=seed)
    raise ConfigError(f"no preset for acceleration factor {factor}, only 4 and 8")


# -- masks and undersampling ---------------------------------------------------


def make_mask(spec: UndersampleSpec, n_lines: int) -> np.ndarray:
    """Boolean keep-mask over frequency lines, deterministic in spec.seed.

    The kept count is round(gamma_s * n_lines) in every mode. Center-dense
    mode always keeps the central ceil(center_fraction * n) block and fills
    the rest uniformly at random outside it.
    """
    n = int(n_lines)
    if n <= 0:
        raise ShapeError(f"need a positive line count, got {n}")
    total = _round_half_up(spec.gamma_s * n)
    rng = np.random.default_rng(spec.seed)
    mask = np.zeros(n, dtype=bool)
    if spec.mode == UNIFORM:
        kept = rng.choice(n, size=total, replace=False)
        mask[kept] = True
        return mask
    nc = math.ceil(spec.center_fraction * n)
    if total < nc:
        raise ConfigError(
            f"center block of {nc} lines exceeds the {total}-line budget "
            f"(gamma_s={spec.gamma_s}, n={n})"
        )
    start = (n - nc) // 2
    mask[start : start + nc] = True
    outside = np.setdiff1d(np.arange(n), np.arange(start, start + nc))
    extra = rng.choice(outside, size=total - nc, replace=False)
    mask[extra] = True
    return mask


def undersample(field: ComplexField, mask: np.ndarray) -> ComplexField:
    """Zero out the frequency lines where mask is False."""
    if field.domain != FREQUENCY:
        raise ConfigError("undersample expects a frequency-domain field")
    data = field.tensor.data
    h = data.shape[1]
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (h,):
        raise ShapeError(f"mask length {mask.shape} does not match {h} lines")
    out = data.copy()
    out[:, ~mask, :, :] = 0
    return ComplexField(Tensor(out), field.domain)


# -- rigid motion ----------------------------------------------------------------


def _bilinear_wrap(img, row, col):
    h, w = img.shape[-2:]
    r0 = np.floor(row).astype(np.intp)
    c0 = np.floor(col).astype(np.intp)
    fr = row - r0
    fc = col - c0
    r0 %= h
    c0 %= w
    r1 = (r0 + 1) % h
    c1 = (c0 + 1) % w
    return (
        img[..., r0, c0] * (1 - fr) * (1 - fc)
        + img[..., r0, c1] * (1 - fr) * fc
        + img[..., r1, c0] * fr * (1 - fc)
        + img[..., r1, c1] * fr * fc
    )


def _bilinear_zero(img, row, col):
    h, w = img.shape[-2:]
    r0 = np.floor(row).astype(np.intp)
    c0 = np.floor(col).astype(np.intp)
    fr = row - r0
    fc = col - c0
    out = np.zeros(img.shape[:-2] + row.shape, dtype=img.dtype)
    for dr, dc, wgt in (
        (0, 0, (1 - fr) * (1 - fc)),
        (0, 1, (1 - fr) * fc),
        (1, 0, fr * (1 - fc)),
        (1, 1, fr * fc),
    ):
        rr = r0 + dr
        cc = c0 + dc
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        out += img[..., np.clip(rr, 0, h - 1), np.clip(cc, 0, w - 1)] * (wgt * ok)
    return out


def _rigid_resample(img, dx, dy, phi_deg):
    """Apply the inverse-map pose transform to complex [..., h, w] data."""
    h, w = img.shape[-2:]
    cy, cx = h // 2, w // 2
    v, u = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    a = u - dx
    b = v - dy
    if phi_deg == 0.0:
        if dx == 0.0 and dy == 0.0:
            return img.copy()
        return _bilinear_wrap(img, b + cy, a + cx)
    p = math.radians(phi_deg)
    sx = a * math.cos(p) - b * math.sin(p)
    sy = a * math.sin(p) + b * math.cos(p)
    return _bilinear_zero(img, sy + cy, sx + cx)


def simulate_motion(image: ComplexField, trace: MotionTrace) -> ComplexField:
    """Assemble motion-corrupted k-space line by line.

    Consecutive lines sharing a pose are grouped so each pose costs one
    resample plus one transform.
    """
    if image.domain != IMAGE:
        raise ConfigError("simulate_motion expects an image-domain field")
    z = complex_from_field(image)
    h, w = z.shape[-2:]
    if h != w:
        raise ShapeError(f"motion simulation needs a square image, got {h}x{w}")
    for ky, *_ in trace.events:
        if not 0 <= ky < h:
            raise ConfigError(f"motion event line {ky} outside [0, {h})")

    # segment boundaries: identity pose from line 0, then each event
    poses = [(0, 0.0, 0.0, 0.0)] + [tuple(e) for e in trace.events]
    out = np.empty_like(z)
    for i, (start, dx, dy, phi) in enumerate(poses):
        stop = poses[i + 1][0] if i + 1 < len(poses) else h
        if stop <= start:
            continue
        moved = _rigid_resample(z, dx, dy, phi)
        out[..., start:stop, :] = fft2c_array(moved)[..., start:stop, :]
    return field_from_complex(out, FREQUENCY)


def random_motion_trace(n_lines, gamma_m, max_shift_px=20.0, max_angle_deg=15.0, seed=0):
    """Draw round(gamma_m * n) motion events uniformly over lines and ranges."""
    n = int(n_lines)
    count = _round_half_up(gamma_m * n)
    rng = np.random.default_rng(seed)
    lines = np.sort(rng.choice(n, size=count, replace=False))
    events = []
    for ky in lines:
        dx, dy = rng.uniform(-max_shift_px, max_shift_px, size=2)
        phi = rng.uniform(-max_angle_deg, max_angle_deg)
        events.append((int(ky), float(dx), float(dy), float(phi)))
    return MotionTrace(
        events=tuple(events),
        gamma_m=gamma_m,
        max_shift_px=max_shift_px,
        max_angle_deg=max_angle_deg,
        seed=seed,
    )


# -- frequency-domain oracles ------------------------------------------------------


def _line_subset(lines, h):
    if lines is None:
        return np.arange(h)
    lines = np.asarray(lines)
    if lines.dtype == bool:
        if lines.shape != (h,):
            raise ShapeError(f"boolean line mask must have length {h}")
        return np.nonzero(lines)[0]
    return lines.astype(np.intp)


def translate_kspace_phase(field: ComplexField, dx, dy, lines=None) -> ComplexField:
    """Translation as a frequency-domain phase ramp on the selected lines.

    Multiplies F[kx, ky] by exp(-2 pi j (kx dx + ky dy) / N) with centered
    integer frequencies; the image-domain effect is a circular shift of
    (dx, dy) pixels.
    """
    if field.domain != FREQUENCY:
        raise ConfigError("translate_kspace_phase expects a frequency-domain field")
    z = complex_from_field(field)
    h, w = z.shape[-2:]
    if h != w:
        raise ShapeError(f"phase-shift identity stated for square grids, got {h}x{w}")
    n = h
    kx = np.arange(w) - w // 2
    ky = np.arange(h) - h // 2
    phase = np.exp(-2j * np.pi * (kx[None, :] * dx + ky[:, None] * dy) / n)
    rows = _line_subset(lines, h)
    out = z.copy()
    out[..., rows, :] *= phase[rows]
    return field_from_complex(out, FREQUENCY)


def rotate_kspace(field: ComplexField, phi_deg, lines=None) -> ComplexField:
    """Rotation applied directly in frequency space on the selected lines.

    Each output coefficient samples the input spectrum at
    (kx cos p - ky sin p, kx sin p + ky cos p) with bilinear interpolation
    and zero outside the grid.
    """
    if field.domain != FREQUENCY:
        raise ConfigError("rotate_kspace expects a frequency-domain field")
    z = complex_from_field(field)
    h, w = z.shape[-2:]
    if h != w:
        raise ShapeError(f"rotation identity stated for square grids, got {h}x{w}")
    cy, cx = h // 2, w // 2
    ky, kx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    p = math.radians(phi_deg)
    sx = kx * math.cos(p) - ky * math.sin(p)
    sy = kx * math.sin(p) + ky * math.cos(p)
    rotated = _bilinear_zero(z, sy + cy, sx + cx)
    rows = _line_subset(lines, h)
    out = z.copy()
    out[..., rows, :] = rotated[..., rows, :]
    return field_from_complex(out, FREQUENCY)


# -- noise ---------------------------------------------------------------------------


def add_noise(field: ComplexField, spec: NoiseSpec) -> ComplexField:
    """Add independent N(0, sigma^2) to real and imaginary parts."""
    if field.domain != FREQUENCY:
        raise ConfigError("add_noise expects a frequency-domain field")
    if spec.sigma == 0.0:
        return ComplexField(Tensor(field.tensor.data.copy()), field.domain)
    rng = np.random.default_rng(spec.seed)
    data = field.tensor.data
    noise = rng.normal(0.0, spec.sigma, size=data.shape)
    return ComplexField(Tensor(data + noise.astype(data.dtype)), field.domain)


# -- normalization ---------------------------------------------------------------------


def normalize_pair(corrupted: ComplexField, clean_image: ComplexField):
    """Scale a (corrupted k-space, clean image) pair into network range.

    Both are divided by the per-sample maximum complex magnitude of the
    zero-filled reconstruction ifft2c(corrupted). Returns the two scaled
    fields plus the scale array [batch] for undoing the normalization.
    """
    if corrupted.domain != FREQUENCY:
        raise ConfigError("normalize_pair expects corrupted data in the frequency domain")
    if clean_image.domain != IMAGE:
        raise ConfigError("normalize_pair expects the clean reference in the image domain")
    zf = complex_from_field(corrupted)
    recon = ifft2c_array(zf)
    scale = np.abs(recon).max(axis=(1, 2, 3))
    if (scale == 0).any():
        raise DataError("corrupted field is identically zero, cannot normalize")
    s = scale.reshape(-1, 1, 1, 1).astype(corrupted.tensor.dtype)
    f_out = ComplexField(Tensor(corrupted.tensor.data / s), corrupted.domain)
    i_out = ComplexField(Tensor(clean_image.tensor.data / s), clean_image.domain)
    return f_out, i_out, scale
