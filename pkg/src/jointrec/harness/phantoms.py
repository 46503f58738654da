"""Synthetic ellipse phantoms standing in for acquired images.

Each phantom is a max-composition of randomly placed rotated ellipses with a
Gaussian blur over the result, so boundaries are smooth and pixel values stay
inside [0, intensity hi]. Generation is deterministic per (seed, index) and
independent of how many phantoms are asked for.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import ConfigError
from ..fourier import IMAGE, ComplexField
from ..tensor import DEFAULT_DTYPE, Tensor


@dataclass(frozen=True)
class PhantomSpec:
    """How many phantoms, their size, and the ellipse statistics."""

    count: int = 64
    size: int = 64
    ellipses: tuple = (4, 9)
    intensity: tuple = (0.3, 1.0)
    smoothness: float = 1.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(int(v) for v in self.ellipses))
        object.__setattr__(self, "intensity", tuple(float(v) for v in self.intensity))
        if self.count < 0:
            raise ConfigError(f"phantom count must be >= 0, got {self.count}")
        if self.size < 16:
            raise ConfigError(f"phantom size must be >= 16, got {self.size}")
        lo, hi = self.ellipses
        if lo < 0 or hi < lo:
            raise ConfigError(f"bad ellipse count range {self.ellipses}")
        ilo, ihi = self.intensity
        if not (0.0 < ilo <= ihi):
            raise ConfigError(f"bad intensity range {self.intensity}")
        if self.smoothness < 0:
            raise ConfigError(f"smoothness must be >= 0, got {self.smoothness}")


def phantom_image(spec, index):
    """One phantom as a [size, size] float64 array, deterministic per index."""
    n = spec.size
    rng = np.random.default_rng([spec.seed, int(index)])
    lo, hi = spec.ellipses
    count = int(rng.integers(lo, hi + 1))
    canvas = np.zeros((n, n))
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    for _ in range(count):
        cy, cx = rng.uniform(0.2 * n, 0.8 * n, size=2)
        a, b = rng.uniform(n / 16.0, n / 4.0, size=2)
        th = rng.uniform(0.0, np.pi)
        amp = rng.uniform(*spec.intensity)
        dy, dx = yy - cy, xx - cx
        u = dx * np.cos(th) + dy * np.sin(th)
        v = -dx * np.sin(th) + dy * np.cos(th)
        inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0
        canvas = np.maximum(canvas, np.where(inside, amp, 0.0))
    if spec.smoothness > 0:
        canvas = gaussian_filter(canvas, spec.smoothness)
    return canvas


def generate_phantoms(spec, dtype=DEFAULT_DTYPE):
    """All phantoms of a spec as one image-domain field, imaginary part zero."""
    n = spec.size
    out = np.zeros((spec.count, n, n, 2), dtype=dtype)
    for i in range(spec.count):
        out[i, :, :, 0] = phantom_image(spec, i)
    return ComplexField(Tensor(out), IMAGE)
