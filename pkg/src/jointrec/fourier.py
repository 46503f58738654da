"""Centered unitary 2-D Fourier transforms for channel-paired complex data.

Convention used everywhere in this package: the DC coefficient sits at
(h//2, w//2), and both directions carry a 1/sqrt(h*w) factor so the
transform is unitary (Parseval holds exactly and the inverse is the
adjoint). On arrays this is ``fftshift(FFT(ifftshift(x))) / sqrt(h*w)``.

The FFT engine itself is written here: an iterative radix-2
decimation-in-time kernel for power-of-two lengths and a Bluestein
chirp-z fallback for everything else. ``set_fft_backend("pocketfft")``
swaps in scipy's engine for long training runs; the two are checked
against each other and against ``dft2c_naive``, a direct evaluation of
the centered transform definition that shares no code with either.

Tensor-level ``fft2c``/``ifft2c`` record themselves on the autodiff tape.
Viewed as a map on stacked (real, imag) channels the transform is
orthogonal, so each one's backward pass is simply the opposite
transform applied to the cotangent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as _sfft

from .errors import ConfigError, ShapeError
from .tensor import Tensor, _make

# -- 1-D engines --------------------------------------------------------------

_bitrev_cache = {}
_twiddle_cache = {}
_bluestein_cache = {}


def _bitrev(n):
    if n not in _bitrev_cache:
        bits = n.bit_length() - 1
        rev = np.zeros(n, dtype=np.intp)
        j = np.arange(n)
        for _ in range(bits):
            rev = (rev << 1) | (j & 1)
            j >>= 1
        _bitrev_cache[n] = rev
    return _bitrev_cache[n]


def _twiddles(n, inverse, cdtype):
    key = (n, inverse, np.dtype(cdtype).name)
    if key not in _twiddle_cache:
        sign = 2j * np.pi if inverse else -2j * np.pi
        stages = []
        m = 2
        while m <= n:
            stages.append(np.exp(sign * np.arange(m // 2) / m).astype(cdtype))
            m *= 2
        _twiddle_cache[key] = stages
    return _twiddle_cache[key]


def _fft_pow2(x, inverse):
    """Unnormalized DFT along the last axis, length a power of two.

    Iterative decimation in time: bit-reversal permutation then log2(n)
    butterfly passes, vectorized over all leading axes.
    """
    n = x.shape[-1]
    out = x[..., _bitrev(n)]
    for tw in _twiddles(n, inverse, out.dtype):
        m = tw.shape[0] * 2
        v = out.reshape(out.shape[:-1] + (n // m, m))
        u = v[..., : m // 2]
        t = v[..., m // 2 :] * tw
        v[..., m // 2 :] = u - t
        v[..., : m // 2] = u + t
    return out


def _bluestein_tables(n, inverse, cdtype):
    key = (n, inverse, np.dtype(cdtype).name)
    if key not in _bluestein_cache:
        sign = 1j if inverse else -1j
        j = np.arange(n)
        # chirp with exponents reduced mod 2n to keep the angle small
        w = np.exp(sign * np.pi * ((j * j) % (2 * n)) / n).astype(cdtype)
        M = 1
        while M < 2 * n - 1:
            M *= 2
        d = np.zeros(M, dtype=cdtype)
        d[:n] = np.conj(w)
        d[M - n + 1 :] = np.conj(w[1:][::-1])
        _bluestein_cache[key] = (w, _fft_pow2(d, False), M)
    return _bluestein_cache[key]


def _bluestein(x, inverse):
    n = x.shape[-1]
    w, Df, M = _bluestein_tables(n, inverse, x.dtype)
    a = np.zeros(x.shape[:-1] + (M,), dtype=x.dtype)
    a[..., :n] = x * w
    conv = _fft_pow2(_fft_pow2(a, False) * Df, True)
    return conv[..., :n] * (w / M)


def _fft1(x, inverse):
    n = x.shape[-1]
    if n & (n - 1) == 0:
        return _fft_pow2(x, inverse)
    return _bluestein(x, inverse)


def _fft2_builtin(z, inverse):
    if not np.iscomplexobj(z):
        # the butterfly passes write complex products in place
        z = z.astype(np.complex64 if z.dtype == np.float32 else np.complex128)
    z = _fft1(z, inverse)
    z = _fft1(z.swapaxes(-1, -2), inverse).swapaxes(-1, -2)
    return z


def _fft2_pocketfft(z, inverse):
    if inverse:
        return _sfft.ifft2(z, norm="forward")
    return _sfft.fft2(z)


_fft_backend = "builtin"


def set_fft_backend(name):
    """Pick the FFT engine: "builtin" (default) or "pocketfft"."""
    global _fft_backend
    if name not in ("builtin", "pocketfft"):
        raise ConfigError(f"unknown fft backend {name!r}")
    _fft_backend = name


def get_fft_backend():
    return _fft_backend


def _fft2_any(z, inverse):
    if _fft_backend == "builtin":
        return _fft2_builtin(z, inverse)
    return _fft2_pocketfft(z, inverse)


# -- centered unitary transforms on complex arrays -----------------------------


def fftshift2(a):
    return np.roll(a, (a.shape[-2] // 2, a.shape[-1] // 2), axis=(-2, -1))


def ifftshift2(a):
    return np.roll(a, (-(a.shape[-2] // 2), -(a.shape[-1] // 2)), axis=(-2, -1))


def fft2c_array(z):
    """Centered unitary forward transform of complex [..., h, w] arrays."""
    h, w = z.shape[-2:]
    # python-float scale so complex64 input stays complex64
    return fftshift2(_fft2_any(ifftshift2(z), False)) * (1.0 / math.sqrt(h * w))


def ifft2c_array(z):
    """Centered unitary inverse transform of complex [..., h, w] arrays."""
    h, w = z.shape[-2:]
    return fftshift2(_fft2_any(ifftshift2(z), True)) * (1.0 / math.sqrt(h * w))


def dft2c_naive(z, inverse=False):
    """Direct evaluation of the centered unitary DFT, for verification.

    Writes out the definition with centered indices,
        X[k1,k2] = sum_n x[n1,n2] exp(-+ 2 pi i ((k1-ch)(n1-ch)/h + (k2-cw)(n2-cw)/w)) / sqrt(hw),
    with ch = h//2, cw = w//2. Quadratic work per output point, so sides
    are capped at 32.
    """
    z = np.asarray(z, dtype=np.complex128)
    h, w = z.shape[-2:]
    if h > 32 or w > 32:
        raise ShapeError(f"naive DFT capped at side 32, got {h}x{w}")
    sign = 2j if inverse else -2j
    kh = np.arange(h) - h // 2
    kw = np.arange(w) - w // 2
    e1 = np.exp(sign * np.pi * np.outer(kh, kh) / h)
    e2 = np.exp(sign * np.pi * np.outer(kw, kw) / w)
    flat = z.reshape(-1, h, w)
    out = np.einsum("kn,lm,bnm->bkl", e1, e2, flat)
    return out.reshape(z.shape) / np.sqrt(h * w)


# -- channel-pair packing -------------------------------------------------------


def pairs_to_complex(data):
    """[b,h,w,2c] float with (re, im) channel pairs -> complex [b,c,h,w]."""
    if data.shape[3] % 2 != 0:
        raise ShapeError(f"complex data needs an even channel count, got {data.shape[3]}")
    z = data[..., 0::2] + 1j * data[..., 1::2]
    return z.transpose(0, 3, 1, 2)


def complex_to_pairs(z, dtype):
    """complex [b,c,h,w] -> [b,h,w,2c] float with (re, im) channel pairs."""
    b, c, h, w = z.shape
    out = np.empty((b, h, w, 2 * c), dtype=dtype)
    out[..., 0::2] = z.real.transpose(0, 2, 3, 1)
    out[..., 1::2] = z.imag.transpose(0, 2, 3, 1)
    return out


# -- autodiff ops ----------------------------------------------------------------


def _transform_op(x, inverse):
    z = pairs_to_complex(x.data)
    out = ifft2c_array(z) if inverse else fft2c_array(z)
    data = complex_to_pairs(out, x.dtype)

    def backward(g):
        gz = pairs_to_complex(g)
        # the transform is orthogonal on stacked (re, im) channels, so the
        # transpose is the opposite-direction transform
        gout = fft2c_array(gz) if inverse else ifft2c_array(gz)
        return (complex_to_pairs(gout, g.dtype),)

    return _make(data, (x,), backward)


def fft2c(x):
    """Tape-recorded centered unitary FFT on (re, im) channel pairs."""
    return _transform_op(x, inverse=False)


def ifft2c(x):
    """Tape-recorded centered unitary inverse FFT on (re, im) channel pairs."""
    return _transform_op(x, inverse=True)


# -- domain-tagged container ------------------------------------------------------

IMAGE = "image"
FREQUENCY = "frequency"


@dataclass
class ComplexField:
    """A complex field plus the domain its values live in.

    The tensor stores interleaved (re, im) channel pairs. Moving between
    domains returns a new field with the tag flipped; asking for the
    domain it is already in is a no-op returning self.
    """

    tensor: Tensor
    domain: str

    def __post_init__(self):
        if self.domain not in (IMAGE, FREQUENCY):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.tensor.shape[3] % 2 != 0:
            raise ShapeError(f"complex field needs paired channels, got {self.tensor.shape[3]}")

    def to_frequency(self):
        if self.domain == FREQUENCY:
            return self
        return ComplexField(fft2c(self.tensor), FREQUENCY)

    def to_image(self):
        if self.domain == IMAGE:
            return self
        return ComplexField(ifft2c(self.tensor), IMAGE)


def field_from_complex(z, domain):
    """Build a ComplexField from a complex array ([h,w], [b,h,w], or [b,c,h,w])."""
    z = np.asarray(z)
    if not np.iscomplexobj(z):
        z = z.astype(np.complex128)
    if z.ndim == 2:
        z = z[None]
    if z.ndim == 3:
        z = z[:, None]
    if z.ndim != 4:
        raise ShapeError(f"expected at most 4 dims, got {z.ndim}")
    dtype = np.float32 if z.dtype == np.complex64 else np.float64
    return ComplexField(Tensor(complex_to_pairs(z, dtype)), domain)


def complex_from_field(field):
    """Complex [b,c,h,w] view of a ComplexField's channel pairs."""
    return pairs_to_complex(field.tensor.data)
