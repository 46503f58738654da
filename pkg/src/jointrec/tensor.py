"""Reverse-mode autodiff over 4-D numpy arrays.

There is a single Tensor type shaped [batch, height, width, channels].
Ops build a tape of parent links plus backward closures, and
``backward()`` walks the tape once in reverse topological order
accumulating gradients into ``.grad``. float32 is the working precision;
float64 is accepted everywhere so gradients can be verified against
finite differences without float32 noise.

Convolution has two interchangeable implementations: an im2col GEMM
("direct") and a padded FFT pointwise product ("fft"). Both compute the
same linear map and are cross-checked in the tests; "auto" picks by
kernel size. The fft path caches the input and kernel spectra on the
tape so the backward pass reuses them.
"""

from __future__ import annotations

import contextlib

import numpy as np
import scipy.fft as _sfft

from .errors import ConfigError, NumericError, ShapeError

DEFAULT_DTYPE = np.float32

_REAL_DTYPES = (np.float32, np.float64)

# crude allocation audit, read by the training loop's memory report
_ALLOC = {"tensors": 0, "bytes": 0}


def reset_alloc_stats():
    _ALLOC["tensors"] = 0
    _ALLOC["bytes"] = 0


def alloc_stats():
    return dict(_ALLOC)


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape construction inside the block (forward-only eval)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_real4(data):
    arr = np.asarray(data)
    if arr.dtype not in _REAL_DTYPES:
        arr = arr.astype(DEFAULT_DTYPE)
    if arr.ndim != 4:
        raise ShapeError(f"Tensor data must be 4-D [b,h,w,c], got shape {arr.shape}")
    return arr


class Tensor:
    """A [batch, height, width, channels] array node on the autodiff tape."""

    __slots__ = ("data", "grad", "parents", "_backward", "requires_grad")

    def __init__(self, data, parents=(), backward=None, requires_grad=False):
        self.data = _as_real4(data)
        self.grad = None
        self.parents = tuple(parents)
        self._backward = backward
        self.requires_grad = bool(requires_grad)
        _ALLOC["tensors"] += 1
        _ALLOC["bytes"] += self.data.nbytes

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    # -- graph --------------------------------------------------------------

    def backward(self):
        """Backprop from this scalar node through the recorded tape."""
        if self.data.shape != (1, 1, 1, 1):
            raise ShapeError(f"backward() starts from a scalar [1,1,1,1] tensor, got {self.shape}")
        if not self.requires_grad:
            raise NumericError("backward() called on a tensor with no tape behind it")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, _coerce(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other, self.dtype))

    def __rsub__(self, other):
        return sub(_coerce(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _coerce(other, self.dtype))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_coerce(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_const(self, p)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def abs(self):
        return abs_(self)

    def sqrt(self):
        return sqrt(self)

    def log(self):
        return log(self)

    def sum(self):
        return sum_all(self)

    def mean(self):
        return mean_all(self)


def scalar(value, dtype=DEFAULT_DTYPE):
    """Wrap a python number as a [1,1,1,1] constant tensor."""
    return Tensor(np.full((1, 1, 1, 1), value, dtype=dtype))


def _coerce(other, dtype):
    if isinstance(other, Tensor):
        return other
    return Tensor(np.full((1, 1, 1, 1), other, dtype=dtype))


def _check_same_dtype(a, b):
    if a.dtype != b.dtype:
        raise TypeError(f"mixed dtypes in op: {a.dtype} vs {b.dtype}")


def _make(data, parents, backward):
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, parents, backward, requires_grad=True)
    return Tensor(data)


def _unbroadcast(g, shape):
    """Sum a gradient down to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    axes = tuple(i for i in range(4) if shape[i] == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise ------------------------------------------------------------


def add(a, b):
    _check_same_dtype(a, b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), backward)


def sub(a, b):
    _check_same_dtype(a, b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(out, (a, b), backward)


def mul(a, b):
    _check_same_dtype(a, b)
    out = a.data * b.data
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _make(out, (a, b), backward)


def div(a, b):
    _check_same_dtype(a, b)
    out = a.data / b.data
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g / bd, ad.shape)
        gb = _unbroadcast(-g * ad / (bd * bd), bd.shape)
        return ga, gb

    return _make(out, (a, b), backward)


def neg(x):
    def backward(g):
        return (-g,)

    return _make(-x.data, (x,), backward)


def relu(x):
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype)

    def backward(g):
        return (g * mask,)

    return _make(out, (x,), backward)


def sigmoid(x):
    xd = x.data
    # split by sign so exp never overflows
    out = np.empty_like(xd)
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _make(out, (x,), backward)


def abs_(x):
    sign = np.sign(x.data)

    def backward(g):
        return (g * sign,)

    return _make(np.abs(x.data), (x,), backward)


def sqrt(x):
    if (x.data < 0).any():
        raise NumericError("sqrt of a negative value")
    out = np.sqrt(x.data)

    def backward(g):
        denom = 2.0 * out
        return (np.where(denom > 0, g / np.where(denom > 0, denom, 1), 0.0),)

    return _make(out, (x,), backward)


def pow_const(x, p):
    """x ** p for a python-number exponent."""
    p = float(p)
    if p != int(p) and (x.data < 0).any():
        raise NumericError(f"x**{p} with negative base")
    out = x.data**p
    xd = x.data

    def backward(g):
        base = np.where(xd != 0, xd, 1.0)
        dg = p * base ** (p - 1.0)
        # at an exact zero: slope is 0 except for the identity power
        dg = np.where(xd != 0, dg, 1.0 if p == 1.0 else 0.0)
        return ((g * dg).astype(xd.dtype),)

    return _make(out, (x,), backward)


def log(x):
    if (x.data <= 0).any():
        raise NumericError("log of a non-positive value")
    out = np.log(x.data)
    xd = x.data

    def backward(g):
        return (g / xd,)

    return _make(out, (x,), backward)


# -- reductions -------------------------------------------------------------


def sum_axes(x, axes):
    axes = tuple(sorted(axes))
    out = x.data.sum(axis=axes, keepdims=True)
    shape = x.data.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _make(out, (x,), backward)


def mean_axes(x, axes):
    axes = tuple(sorted(axes))
    n = 1
    for ax in axes:
        n *= x.data.shape[ax]
    out = x.data.mean(axis=axes, keepdims=True)
    shape = x.data.shape
    inv = 1.0 / n

    def backward(g):
        return (np.broadcast_to(g * inv, shape).astype(g.dtype),)

    return _make(out, (x,), backward)


def sum_all(x):
    return sum_axes(x, (0, 1, 2, 3))


def mean_all(x):
    return mean_axes(x, (0, 1, 2, 3))


# -- shape / channel ops ------------------------------------------------------


def tile_channels(x, reps):
    """Repeat the whole channel block ``reps`` times: [b,h,w,c] -> [b,h,w,c*reps]."""
    reps = int(reps)
    if reps < 1:
        raise ShapeError(f"tile_channels needs reps >= 1, got {reps}")
    out = np.tile(x.data, (1, 1, 1, reps))
    c = x.data.shape[3]

    def backward(g):
        b, h, w, _ = g.shape
        return (g.reshape(b, h, w, reps, c).sum(axis=3),)

    return _make(out, (x,), backward)


def complex_magnitude(x, eps=0.0):
    """Magnitude of channel-paired complex data: [b,h,w,2c] -> [b,h,w,c].

    Channels (2i, 2i+1) hold (real, imag). Gradient at an exact zero is
    taken as zero.
    """
    cc = x.data.shape[3]
    if cc % 2 != 0:
        raise ShapeError(f"complex_magnitude needs an even channel count, got {cc}")
    re = x.data[..., 0::2]
    im = x.data[..., 1::2]
    mag = np.sqrt(re * re + im * im + eps).astype(x.dtype)

    def backward(g):
        safe = np.where(mag > 0, mag, 1.0)
        gre = g * re / safe
        gim = g * im / safe
        if eps == 0.0:
            gre = np.where(mag > 0, gre, 0.0)
            gim = np.where(mag > 0, gim, 0.0)
        gx = np.empty_like(x.data)
        gx[..., 0::2] = gre
        gx[..., 1::2] = gim
        return (gx,)

    return _make(mag, (x,), backward)


def avg_pool2(x):
    """2x2 average pooling with stride 2. Height and width must be even."""
    b, h, w, c = x.data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    v = x.data.reshape(b, h // 2, 2, w // 2, 2, c)
    out = v.mean(axis=(2, 4))

    def backward(g):
        gx = np.empty((b, h // 2, 2, w // 2, 2, c), dtype=g.dtype)
        gx[...] = (g * 0.25)[:, :, None, :, None, :]
        return (gx.reshape(b, h, w, c),)

    return _make(out, (x,), backward)


def _integral_box_sum(arr, k):
    """Valid-mode k x k box sums over axes 1, 2 via an integral image."""
    s = arr.cumsum(axis=1).cumsum(axis=2)
    s = np.pad(s, ((0, 0), (1, 0), (1, 0), (0, 0)))
    return s[:, k:, k:] - s[:, :-k, k:] - s[:, k:, :-k] + s[:, :-k, :-k]


def box_mean_valid(x, k):
    """Valid-mode k x k box (uniform window) mean: [b,h,w,c] -> [b,h-k+1,w-k+1,c]."""
    k = int(k)
    b, h, w, c = x.data.shape
    if k < 1 or k > h or k > w:
        raise ShapeError(f"box_mean_valid window {k} does not fit {h}x{w}")
    acc = x.data.astype(np.float64) if x.dtype == np.float32 else x.data
    out = (_integral_box_sum(acc, k) / (k * k)).astype(x.dtype)
    inv = 1.0 / (k * k)

    def backward(g):
        # adjoint of a valid box mean is a full box scatter, which is the
        # same box sum applied to the zero-padded cotangent
        gp = np.pad(g, ((0, 0), (k - 1, k - 1), (k - 1, k - 1), (0, 0)))
        acc = gp.astype(np.float64) if gp.dtype == np.float32 else gp
        return ((_integral_box_sum(acc, k) * inv).astype(g.dtype),)

    return _make(out, (x,), backward)


# -- batch norm ----------------------------------------------------------------


def batch_norm(x, scale, shift, running_mean, running_var, *, training,
               momentum=0.99, eps=1e-3):
    """Per-channel batch normalization with running statistics.

    ``scale`` and ``shift`` are [1,1,1,c] tensors; ``running_mean`` and
    ``running_var`` are [1,1,1,c] tensors that are updated in place when
    ``training`` and used as fixed statistics otherwise. Statistics are
    taken over batch and both spatial axes.
    """
    _check_same_dtype(x, scale)
    _check_same_dtype(x, shift)
    b, h, w, c = x.data.shape
    if b * h * w == 0:
        raise ShapeError("batch_norm over an empty batch")
    for t, name in ((scale, "scale"), (shift, "shift")):
        if t.data.shape != (1, 1, 1, c):
            raise ShapeError(f"batch_norm {name} must be [1,1,1,{c}], got {t.data.shape}")

    if training:
        mu = x.data.mean(axis=(0, 1, 2), keepdims=True)
        var = x.data.var(axis=(0, 1, 2), keepdims=True)
        running_mean.data *= momentum
        running_mean.data += (1.0 - momentum) * mu
        running_var.data *= momentum
        running_var.data += (1.0 - momentum) * var
    else:
        mu = running_mean.data
        var = running_var.data

    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * ivar
    out = xhat * scale.data + shift.data
    n = b * h * w
    sc = scale.data

    if training:

        def backward(g):
            dxhat = g * sc
            # classic three-term batch norm gradient
            gsum = dxhat.sum(axis=(0, 1, 2), keepdims=True)
            gxhat = (dxhat * xhat).sum(axis=(0, 1, 2), keepdims=True)
            gx = (ivar / n) * (n * dxhat - gsum - xhat * gxhat)
            gscale = (g * xhat).sum(axis=(0, 1, 2), keepdims=True)
            gshift = g.sum(axis=(0, 1, 2), keepdims=True)
            return gx.astype(g.dtype), gscale, gshift

    else:

        def backward(g):
            gx = g * sc * ivar
            gscale = (g * xhat).sum(axis=(0, 1, 2), keepdims=True)
            gshift = g.sum(axis=(0, 1, 2), keepdims=True)
            return gx.astype(g.dtype), gscale, gshift

    return _make(out.astype(x.dtype), (x, scale, shift), backward)


# -- convolution ----------------------------------------------------------------

_conv_backend = "auto"


def set_conv_backend(name):
    """Select the convolution implementation: "auto", "direct", or "fft"."""
    global _conv_backend
    if name not in ("auto", "direct", "fft"):
        raise ConfigError(f"unknown conv backend {name!r}")
    _conv_backend = name


def get_conv_backend():
    return _conv_backend


def _conv_checks(x, w, bias, padding):
    if padding not in ("zero", "circular"):
        raise ConfigError(f"unknown conv padding {padding!r}")
    if w.data.ndim != 4:
        raise ShapeError(f"conv kernel must be [k,k,cin,cout], got {w.data.shape}")
    k0, k1, ci, co = w.data.shape
    if k0 != k1:
        raise ShapeError(f"conv kernel must be square, got {k0}x{k1}")
    if k0 % 2 == 0:
        raise ConfigError(f"conv kernel side must be odd to preserve shape, got {k0}")
    if x.data.shape[3] != ci:
        raise ShapeError(f"conv input has {x.data.shape[3]} channels, kernel expects {ci}")
    _check_same_dtype(x, w)
    if bias is not None:
        _check_same_dtype(x, bias)
        if bias.data.shape != (1, 1, 1, co):
            raise ShapeError(f"conv bias must be [1,1,1,{co}], got {bias.data.shape}")
    return k0, ci, co


def _pad_hw(arr, c, padding):
    if c == 0:
        return arr
    mode = "constant" if padding == "zero" else "wrap"
    return np.pad(arr, ((0, 0), (c, c), (c, c), (0, 0)), mode=mode)


def _im2col(xp, k, h, w):
    """Extract k x k patches into a [b*h*w, k*k*ci] matrix (one copy)."""
    v = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    # v: [b, h, w, ci, k, k] -> align with the [k,k,ci] kernel flattening
    v = v.transpose(0, 1, 2, 4, 5, 3)
    b = xp.shape[0]
    ci = xp.shape[3]
    return np.ascontiguousarray(v).reshape(b * h * w, k * k * ci)


def _conv_direct_forward(xd, wd, k, padding):
    b, h, w, ci = xd.shape
    co = wd.shape[3]
    c = k // 2
    cols = _im2col(_pad_hw(xd, c, padding), k, h, w)
    y = cols @ wd.reshape(k * k * ci, co)
    return y.reshape(b, h, w, co)


def _conv_direct_wgrad(xd, g, k, padding):
    b, h, w, ci = xd.shape
    co = g.shape[3]
    c = k // 2
    cols = _im2col(_pad_hw(xd, c, padding), k, h, w)
    dw = cols.T @ g.reshape(b * h * w, co)
    return dw.reshape(k, k, ci, co)


_fft_phase_cache = {}


def _flip_phase(L, M, k, cdtype):
    """Spectrum factor relating a flipped kernel embedding to the plain one."""
    key = (L, M, k, np.dtype(cdtype).name)
    if key not in _fft_phase_cache:
        fy = np.arange(L)
        fx = np.arange(M // 2 + 1)
        py = np.exp(-2j * np.pi * (k - 1) * fy / L)
        px = np.exp(-2j * np.pi * (k - 1) * fx / M)
        _fft_phase_cache[key] = (py[:, None] * px[None, :]).astype(cdtype)
    return _fft_phase_cache[key]


_wgrad_basis_cache = {}


def _wgrad_basis(L, M, k, cdtype):
    """Inverse-DFT bases evaluated only on the k x k kernel window.

    The weight gradient needs just k*k spatial points of an L x M inverse
    transform, so instead of a full irfft2 we contract the half-spectrum
    against these two small matrices and take the real part (the rfft
    column weights fold the missing conjugate half back in).
    """
    key = (L, M, k, np.dtype(cdtype).name)
    if key not in _wgrad_basis_cache:
        c = k // 2
        Mr = M // 2 + 1
        s1 = (np.arange(k) - c) % L
        s2 = (np.arange(k) - c) % M
        f1 = np.arange(L)
        m = np.arange(Mr)
        d1 = np.exp(-2j * np.pi * np.outer(f1, s1) / L)
        wgt = np.full(Mr, 2.0)
        wgt[0] = 1.0
        if M % 2 == 0:
            wgt[Mr - 1] = 1.0
        d2 = wgt[:, None] * np.exp(-2j * np.pi * np.outer(m, s2) / M) / (L * M)
        _wgrad_basis_cache[key] = (d1.astype(cdtype), d2.astype(cdtype))
    return _wgrad_basis_cache[key]


def _conv_fft_forward(xd, wd, k, padding):
    """Same-size correlation via zero-padded FFTs.

    Returns the output plus the cached spectra the backward pass reuses.
    Layout inside: channels-first [.., L, M] so the transforms run over
    contiguous axes, spectra flattened to [L*Mr, ., .] for batched GEMM.
    """
    b, h, w, ci = xd.shape
    co = wd.shape[3]
    c = k // 2
    if padding == "zero":
        L = _sfft.next_fast_len(h + k - 1, real=True)
        M = _sfft.next_fast_len(w + k - 1, real=True)
    else:
        L, M = h, w
    Mr = M // 2 + 1

    xp = np.zeros((b, ci, L, M), dtype=xd.dtype)
    xp[:, :, :h, :w] = xd.transpose(0, 3, 1, 2)
    Xf = _sfft.rfft2(xp)

    kb = np.zeros((ci, co, L, M), dtype=wd.dtype)
    wk = wd[::-1, ::-1].transpose(2, 3, 0, 1)
    if k <= L and k <= M:
        kb[:, :, :k, :k] = wk
    else:
        # circular mode with a kernel wider than the image: taps a full
        # period apart touch the same samples, so they fold onto one cell
        rows = (np.arange(k) % L)[:, None]
        cols = (np.arange(k) % M)[None, :]
        np.add.at(kb, (slice(None), slice(None), rows, cols), wk)
    Wf = _sfft.rfft2(kb)

    XfT = np.ascontiguousarray(Xf.transpose(2, 3, 0, 1)).reshape(L * Mr, b, ci)
    WfT = np.ascontiguousarray(Wf.transpose(2, 3, 0, 1)).reshape(L * Mr, ci, co)
    # pocketfft is much faster on contiguous transform axes, so copy first
    Yf = np.ascontiguousarray((XfT @ WfT).reshape(L, Mr, b, co).transpose(2, 3, 0, 1))
    y = _sfft.irfft2(Yf, s=(L, M))
    if padding == "zero":
        y = y[:, :, c:c + h, c:c + w]
    else:
        y = np.roll(y, (-c, -c), axis=(2, 3))
    y = np.ascontiguousarray(y.transpose(0, 2, 3, 1))
    return y, (XfT, WfT, L, M)


def _conv_fft_backward(g, cache, xshape, k, padding):
    XfT, WfT, L, M = cache
    b, h, w, ci = xshape
    co = g.shape[3]
    c = k // 2
    Mr = M // 2 + 1
    cdtype = XfT.dtype

    gp = np.zeros((b, co, L, M), dtype=g.dtype)
    gp[:, :, :h, :w] = g.transpose(0, 3, 1, 2)
    GfT = np.ascontiguousarray(_sfft.rfft2(gp).transpose(2, 3, 0, 1)).reshape(L * Mr, b, co)

    # input gradient: convolve the cotangent with the unflipped kernel,
    # whose spectrum is conj(flipped) times a linear phase
    phase = _flip_phase(L, M, k, cdtype)
    WufT = np.conjugate(WfT.transpose(0, 2, 1), out=np.empty((L * Mr, co, ci), dtype=cdtype))
    WufT *= phase.reshape(L * Mr, 1, 1)
    dXf = np.ascontiguousarray((GfT @ WufT).reshape(L, Mr, b, ci).transpose(2, 3, 0, 1))
    dxp = _sfft.irfft2(dXf, s=(L, M))
    if padding == "zero":
        dx = dxp[:, :, c:c + h, c:c + w]
    else:
        dx = np.roll(dxp, (-c, -c), axis=(2, 3))
    dx = np.ascontiguousarray(dx.transpose(0, 2, 3, 1))

    # weight gradient: circular cross-correlation of input with cotangent.
    # Only the k x k window around zero shift survives the gather, so the
    # inverse transform is done by two small window-restricted contractions
    # rather than a full irfft2.
    Cf = (XfT.transpose(0, 2, 1).conj() @ GfT).reshape(L, Mr * ci * co)
    d1, d2 = _wgrad_basis(L, M, k, cdtype)
    q = (d1.T @ Cf).reshape(k, Mr, ci * co)
    q = np.ascontiguousarray(q.transpose(0, 2, 1)).reshape(k * ci * co, Mr)
    r = (q @ d2).reshape(k, ci, co, k)
    dw = np.ascontiguousarray(r.real.transpose(0, 3, 1, 2))
    return dx, dw


def conv2d(x, w, bias=None, *, padding="zero", backend=None):
    """Shape-preserving 2-D correlation: [b,h,w,ci] x [k,k,ci,co] -> [b,h,w,co].

    The kernel side must be odd. ``padding`` is "zero" (default) or
    "circular". ``backend`` overrides the module-level selection for this
    call.
    """
    k, ci, co = _conv_checks(x, w, bias, padding)
    which = backend or _conv_backend
    if which == "auto":
        which = "fft" if k >= 5 else "direct"
    if which not in ("direct", "fft"):
        raise ConfigError(f"unknown conv backend {which!r}")

    xd, wd = x.data, w.data

    if which == "direct":
        y = _conv_direct_forward(xd, wd, k, padding)

        def backward_xw(g):
            wflip = np.ascontiguousarray(wd[::-1, ::-1].transpose(0, 1, 3, 2))
            dx = _conv_direct_forward(g, wflip, k, padding)
            dw = _conv_direct_wgrad(xd, g, k, padding)
            return dx, dw

    else:
        y, cache = _conv_fft_forward(xd, wd, k, padding)

        def backward_xw(g):
            return _conv_fft_backward(g, cache, xd.shape, k, padding)

    if bias is None:

        def backward(g):
            return backward_xw(g)

        return _make(y, (x, w), backward)

    y = y + bias.data

    def backward(g):
        dx, dw = backward_xw(g)
        db = g.sum(axis=(0, 1, 2)).reshape(1, 1, 1, co)
        return dx, dw, db

    return _make(y, (x, w, bias), backward)


# -- finite differences -------------------------------------------------------


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of a scalar-valued ``f`` at tensor ``x``.

    Evaluates f 2*x.size times, so keep x small. Use float64 data for
    meaningful comparisons.
    """
    base = x.data.copy()
    out = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        xp = base.copy()
        xp[idx] += h
        fp = f(Tensor(xp)).item()
        xm = base.copy()
        xm[idx] -= h
        fm = f(Tensor(xm)).item()
        out[idx] = (fp - fm) / (2 * h)
    return out


def finite_diff_directional(f, x, v, h=1e-5):
    """Central-difference directional derivative of scalar ``f`` along ``v``."""
    v = np.asarray(v, dtype=x.data.dtype)
    fp = f(Tensor(x.data + h * v)).item()
    fm = f(Tensor(x.data - h * v)).item()
    return (fp - fm) / (2 * h)


class Parameter:
    """A named leaf tensor. Non-trainable ones carry state like running stats."""

    __slots__ = ("tensor", "name", "trainable")

    def __init__(self, data, name, trainable=True, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype)
        elif arr.dtype not in _REAL_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        self.tensor = Tensor(arr, requires_grad=trainable)
        self.name = name
        self.trainable = bool(trainable)

    @property
    def data(self):
        return self.tensor.data

    @data.setter
    def data(self, value):
        self.tensor.data = _as_real4(value)

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self):
        self.tensor.grad = None

    def __repr__(self):
        kind = "param" if self.trainable else "buffer"
        return f"Parameter({self.name!r}, {kind}, shape={self.tensor.shape})"
