"""The four reconstruction networks: Interleaved, Alternating, Frequency, Image.

All four share one building brick: a conv block that batch-normalizes its
input, applies a 9x9 convolution to 32 features, an activation, and adds
the (channel-tiled) network input back as a skip. Frequency-side blocks
use a piecewise-linear activation that keeps gradient flowing for
negative values; image-side blocks use ReLU.

The joint architectures differ in how the two domains talk to each
other. Interleaved layers blend each domain's running state with the
transform of the other domain's state through learned sigmoid mixing
coefficients, then run both domain blocks in parallel. Alternating
layers thread a single state through a frequency block, an inverse
transform, an image block, and a forward transform. The pure Frequency
and Image networks are plain chains of blocks in one domain. Every
network ends with a single bias-only 9x9 convolution down to 2 channels
(one complex channel), with no normalization or activation.

Checkpoints are a small binary container: magic "ILCR1", the build
config as JSON, then each named parameter as raw little-endian float32.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .fourier import FREQUENCY, IMAGE, ComplexField, fft2c, ifft2c
from .tensor import (
    DEFAULT_DTYPE,
    Parameter,
    Tensor,
    batch_norm,
    conv2d,
    relu,
    sigmoid,
    tile_channels,
)

INTERLEAVED = "interleaved"
ALTERNATING = "alternating"
FREQUENCY_NET = "frequency"
IMAGE_NET = "image"

ARCHITECTURES = (INTERLEAVED, ALTERNATING, FREQUENCY_NET, IMAGE_NET)

BN_EPS = 1e-3
BN_MOMENTUM = 0.99


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``layers`` counts joint layers for the two joint architectures and
    conv blocks for the pure ones, so the publication-scale settings are
    8 and 16 respectively (the defaults via :func:`default_layers`).
    """

    architecture: str
    layers: int
    kernel: int = 9
    features: int = 32
    freq_activation: str = "custom"
    in_channels: int = 2
    padding: str = "zero"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ConfigError(f"kernel must be odd and positive, got {self.kernel}")
        if self.freq_activation not in ("custom", "relu"):
            raise ConfigError(f"unknown frequency activation {self.freq_activation!r}")
        if self.in_channels % 2 != 0:
            raise ConfigError(f"in_channels must be even (re/im pairs), got {self.in_channels}")
        if self.layers < 1:
            raise ConfigError(f"need at least one layer, got {self.layers}")
        if self.features % self.in_channels != 0:
            raise ConfigError(
                f"features ({self.features}) must be a multiple of in_channels "
                f"({self.in_channels}) for the tiled skip"
            )


def default_layers(architecture):
    return 8 if architecture in (INTERLEAVED, ALTERNATING) else 16


# -- activations ----------------------------------------------------------------


def custom_freq_activation(x):
    """Piecewise-linear activation for frequency-space features.

    sigma(x) = x + ReLU((x-1)/2) + ReLU(-(x+1)/2): slope 3/2 above 1,
    1 on [-1, 1], and 1/2 below -1, so the magnitude keeps growing with
    the input on both sides of zero.
    """
    return x + relu((x - 1.0) * 0.5) + relu((x + 1.0) * (-0.5))


def residual_tile(skip, body):
    """Add a low-channel skip onto a wider body by whole-block channel tiling."""
    sc = skip.shape[3]
    bc = body.shape[3]
    if bc % sc != 0:
        raise ShapeError(f"body channels {bc} not a multiple of skip channels {sc}")
    reps = bc // sc
    if reps == 1:
        return body + skip
    return body + tile_channels(skip, reps)


# -- blocks -----------------------------------------------------------------------


class ConvBlock:
    """BN -> 9x9 conv -> activation, plus a tiled skip added by the caller."""

    def __init__(self, name, c_in, c_out, kernel, activation, rng, dtype, padding):
        if activation not in ("custom", "relu"):
            raise ConfigError(f"unknown activation {activation!r}")
        std = np.sqrt(2.0 / (kernel * kernel * c_in))
        w = rng.standard_normal((kernel, kernel, c_in, c_out)) * std
        self.name = name
        self.activation = activation
        self.padding = padding
        self.bn_scale = Parameter(np.ones((1, 1, 1, c_in)), f"{name}/bn/scale", dtype=dtype)
        self.bn_shift = Parameter(np.zeros((1, 1, 1, c_in)), f"{name}/bn/shift", dtype=dtype)
        self.bn_mean = Parameter(
            np.zeros((1, 1, 1, c_in)), f"{name}/bn/running_mean", trainable=False, dtype=dtype
        )
        self.bn_var = Parameter(
            np.ones((1, 1, 1, c_in)), f"{name}/bn/running_var", trainable=False, dtype=dtype
        )
        self.weight = Parameter(w, f"{name}/conv/weight", dtype=dtype)
        self.bias = Parameter(np.zeros((1, 1, 1, c_out)), f"{name}/conv/bias", dtype=dtype)

    def parameters(self):
        return [self.bn_scale, self.bn_shift, self.bn_mean, self.bn_var, self.weight, self.bias]


def conv_block_forward(block, x, skip, mode):
    """Eq-for-eq block application: activation(conv(BN(x))) + tiled skip."""
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    h = batch_norm(
        x,
        block.bn_scale.tensor,
        block.bn_shift.tensor,
        block.bn_mean.tensor,
        block.bn_var.tensor,
        training=(mode == "train"),
        momentum=BN_MOMENTUM,
        eps=BN_EPS,
    )
    y = conv2d(h, block.weight.tensor, block.bias.tensor, padding=block.padding)
    if block.activation == "custom":
        y = custom_freq_activation(y)
    else:
        y = relu(y)
    return residual_tile(skip, y)


class MixCoeff:
    """Per-layer scalar mixing logits; sigmoid keeps the blend weights in (0,1)."""

    def __init__(self, name, dtype):
        self.alpha = Parameter(np.zeros((1, 1, 1, 1)), f"{name}/mix/alpha", dtype=dtype)
        self.beta = Parameter(np.zeros((1, 1, 1, 1)), f"{name}/mix/beta", dtype=dtype)

    def parameters(self):
        return [self.alpha, self.beta]


def interleaved_mix(u, v, mix):
    """Blend the two domain states through each other's transform.

    u_hat = s(alpha) u + (1 - s(alpha)) fft(v)
    v_hat = s(beta) v + (1 - s(beta)) ifft(u)
    """
    if u.domain != FREQUENCY or v.domain != IMAGE:
        raise ConfigError(
            f"interleaved_mix expects (frequency, image) fields, got ({u.domain}, {v.domain})"
        )
    sa = sigmoid(mix.alpha.tensor)
    sb = sigmoid(mix.beta.tensor)
    one = 1.0
    u_hat = sa * u.tensor + (one - sa) * fft2c(v.tensor)
    v_hat = sb * v.tensor + (one - sb) * ifft2c(u.tensor)
    return ComplexField(u_hat, FREQUENCY), ComplexField(v_hat, IMAGE)


def interleaved_layer(u, v, layer, u0, v0, mode):
    u_hat, v_hat = interleaved_mix(u, v, layer["mix"])
    u_next = conv_block_forward(layer["fblock"], u_hat.tensor, u0.tensor, mode)
    v_next = conv_block_forward(layer["iblock"], v_hat.tensor, v0.tensor, mode)
    return ComplexField(u_next, FREQUENCY), ComplexField(v_next, IMAGE)


def alternating_layer(u, layer, u0, v0, mode):
    v = ifft2c(conv_block_forward(layer["fblock"], u.tensor, u0.tensor, mode))
    u_next = fft2c(conv_block_forward(layer["iblock"], v, v0.tensor, mode))
    return ComplexField(u_next, FREQUENCY)


# -- the model -----------------------------------------------------------------------


class Model:
    def __init__(self, config, layers, final_weight, final_bias, dtype):
        self.config = config
        self.layers = layers
        self.final_weight = final_weight
        self.final_bias = final_bias
        self.dtype = dtype

    def parameters(self):
        out = []
        for layer in self.layers:
            for part in ("mix", "fblock", "iblock", "block"):
                if part in layer:
                    out.extend(layer[part].parameters())
        out.extend([self.final_weight, self.final_bias])
        return out

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.trainable]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def count_trainable_params(model):
    return sum(p.data.size for p in model.trainable_parameters())


def build_model(config, seed=0, dtype=DEFAULT_DTYPE):
    """Construct and He-initialize a network in a fixed parameter order."""
    rng = np.random.default_rng(seed)
    k = config.kernel
    feat = config.features
    cin = config.in_channels
    arch = config.architecture
    pad = config.padding
    layers = []

    if arch in (INTERLEAVED, ALTERNATING):
        for n in range(config.layers):
            f_in = cin if n == 0 else feat
            i_in = cin if (n == 0 and arch == INTERLEAVED) else feat
            layer = {}
            if arch == INTERLEAVED:
                layer["mix"] = MixCoeff(f"layer{n}", dtype)
            layer["fblock"] = ConvBlock(
                f"layer{n}/f", f_in, feat, k, config.freq_activation, rng, dtype, pad
            )
            layer["iblock"] = ConvBlock(
                f"layer{n}/i", i_in, feat, k, "relu", rng, dtype, pad
            )
            layers.append(layer)
    else:
        activation = config.freq_activation if arch == FREQUENCY_NET else "relu"
        for n in range(config.layers):
            c = cin if n == 0 else feat
            layers.append(
                {"block": ConvBlock(f"block{n}", c, feat, k, activation, rng, dtype, pad)}
            )

    std = np.sqrt(2.0 / (k * k * feat))
    fw = rng.standard_normal((k, k, feat, cin)) * std
    final_weight = Parameter(fw, "final/weight", dtype=dtype)
    final_bias = Parameter(np.zeros((1, 1, 1, cin)), "final/bias", dtype=dtype)
    return Model(config, layers, final_weight, final_bias, dtype)


def model_forward(model, field, mode="eval"):
    """Run the network on corrupted k-space; returns its native-domain output.

    Joint and frequency architectures emit a frequency-domain field; the
    image architecture emits the image directly.
    """
    if field.domain != FREQUENCY:
        raise ConfigError("model input must be a frequency-domain field")
    cfg = model.config
    if field.tensor.shape[3] != cfg.in_channels:
        raise ShapeError(
            f"model expects {cfg.in_channels} input channels, got {field.tensor.shape[3]}"
        )
    u0 = field
    arch = cfg.architecture

    if arch == INTERLEAVED:
        v0 = u0.to_image()
        u, v = u0, v0
        for layer in model.layers:
            u, v = interleaved_layer(u, v, layer, u0, v0, mode)
        out = u.tensor
        out_domain = FREQUENCY
    elif arch == ALTERNATING:
        v0 = u0.to_image()
        u = u0
        for layer in model.layers:
            u = alternating_layer(u, layer, u0, v0, mode)
        out = u.tensor
        out_domain = FREQUENCY
    elif arch == FREQUENCY_NET:
        u = u0
        for layer in model.layers:
            u = ComplexField(
                conv_block_forward(layer["block"], u.tensor, u0.tensor, mode), FREQUENCY
            )
        out = u.tensor
        out_domain = FREQUENCY
    else:
        v0 = u0.to_image()
        v = v0
        for layer in model.layers:
            v = ComplexField(
                conv_block_forward(layer["block"], v.tensor, v0.tensor, mode), IMAGE
            )
        out = v.tensor
        out_domain = IMAGE

    out = conv2d(out, model.final_weight.tensor, model.final_bias.tensor, padding=cfg.padding)
    return ComplexField(out, out_domain)


def reconstruct_image(model, field, mode="eval"):
    """Forward pass followed by the inverse transform when needed: always an image."""
    return model_forward(model, field, mode).to_image()


# -- checkpoints -----------------------------------------------------------------------

CHECKPOINT_MAGIC = b"ILCR1"


def save_checkpoint(model, path):
    """Write config and all named parameters (including BN running stats)."""
    blob = io.BytesIO()
    blob.write(CHECKPOINT_MAGIC)
    cfg = json.dumps(asdict(model.config)).encode("utf-8")
    blob.write(struct.pack("<I", len(cfg)))
    blob.write(cfg)
    params = model.parameters()
    blob.write(struct.pack("<I", len(params)))
    for p in params:
        name = p.name.encode("utf-8")
        blob.write(struct.pack("<H", len(name)))
        blob.write(name)
        blob.write(struct.pack("<B", 1 if p.trainable else 0))
        blob.write(struct.pack("<4I", *p.data.shape))
        blob.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(blob.getvalue())


def load_checkpoint(path, dtype=DEFAULT_DTYPE, seed=0):
    """Rebuild the model a checkpoint describes and restore every parameter."""
    with open(path, "rb") as fh:
        raw = fh.read()
    view = io.BytesIO(raw)

    def need(n, what):
        chunk = view.read(n)
        if len(chunk) != n:
            raise DataError(f"checkpoint truncated while reading {what}")
        return chunk

    if need(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise DataError(f"{path} is not a model checkpoint (bad magic)")
    (cfg_len,) = struct.unpack("<I", need(4, "config length"))
    try:
        cfg = ModelConfig(**json.loads(need(cfg_len, "config")))
    except (ValueError, TypeError) as exc:
        raise DataError(f"checkpoint config is invalid: {exc}") from exc
    model = build_model(cfg, seed=seed, dtype=dtype)
    by_name = {p.name: p for p in model.parameters()}
    (n_params,) = struct.unpack("<I", need(4, "parameter count"))
    if n_params != len(by_name):
        raise DataError(
            f"checkpoint holds {n_params} parameters, model defines {len(by_name)}"
        )
    for _ in range(n_params):
        (name_len,) = struct.unpack("<H", need(2, "name length"))
        name = need(name_len, "name").decode("utf-8")
        (trainable,) = struct.unpack("<B", need(1, "trainable flag"))
        shape = struct.unpack("<4I", need(16, "shape"))
        count = int(np.prod(shape))
        data = np.frombuffer(need(4 * count, f"data of {name}"), dtype="<f4").reshape(shape)
        p = by_name.get(name)
        if p is None:
            raise DataError(f"checkpoint parameter {name!r} not defined by the model")
        if p.data.shape != shape:
            raise DataError(
                f"checkpoint parameter {name!r} has shape {shape}, model expects {p.data.shape}"
            )
        if bool(trainable) != p.trainable:
            raise DataError(f"checkpoint parameter {name!r} trainable flag mismatch")
        p.data = data.astype(dtype)
    if view.read(1):
        raise DataError("checkpoint has trailing bytes")
    return model
