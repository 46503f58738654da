"""Experiment configuration: composite corruption plus the training config.

Configs live in a single JSON document whose keys mirror the dataclass
fields below. Unknown keys are rejected everywhere so typos fail loudly
instead of silently training the wrong thing.
"""

import json
from dataclasses import dataclass, field

from ..corruption import MotionTrace, NoiseSpec, UndersampleSpec
from ..errors import ConfigError
from ..losses import LossSpec
from ..models import ModelConfig, default_layers
from .optim import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from .phantoms import PhantomSpec

SOURCE_PHANTOM = "phantom"
SOURCE_DIRECTORY = "directory"


@dataclass(frozen=True)
class CorruptionSpec:
    """What to do to clean data, applied as motion, then undersampling, then
    noise (the acquisition-time effect first, the receiver effect last)."""

    undersample: UndersampleSpec | None = None
    motion: MotionTrace | None = None
    noise: NoiseSpec | None = None

    def is_noop(self):
        return self.undersample is None and self.motion is None and self.noise is None


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on."""

    architecture: str
    epochs: int
    loss: LossSpec = field(default_factory=lambda: LossSpec(kind="image-l1"))
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    lr: float = 0.001
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    batch_size: int = 4
    seed: int = 0
    size: int = 64
    source: str = SOURCE_PHANTOM
    phantoms: PhantomSpec | None = None
    data_dir: str | None = None
    patience: int = 10
    layers: int | None = None
    kernel: int = 9
    features: int = 32
    freq_activation: str = "custom"
    padding: str = "zero"

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.size % 2:
            raise ConfigError(f"image size must be even, got {self.size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.source not in (SOURCE_PHANTOM, SOURCE_DIRECTORY):
            raise ConfigError(f"unknown dataset source {self.source!r}")
        if self.source == SOURCE_DIRECTORY and not self.data_dir:
            raise ConfigError("directory source needs data_dir")
        if self.source == SOURCE_PHANTOM and self.phantoms is None:
            object.__setattr__(
                self, "phantoms", PhantomSpec(size=self.size, seed=self.seed)
            )
        if self.phantoms is not None and self.phantoms.size != self.size:
            raise ConfigError(
                f"phantom size {self.phantoms.size} differs from config size {self.size}"
            )
        self.model_config()  # validates the architecture fields eagerly

    def model_config(self):
        layers = self.layers if self.layers is not None else default_layers(self.architecture)
        return ModelConfig(
            architecture=self.architecture,
            layers=layers,
            kernel=self.kernel,
            features=self.features,
            freq_activation=self.freq_activation,
            padding=self.padding,
        )


# -- dict/JSON parsing -------------------------------------------------------------


def _take(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(d).__name__}")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    return d


def undersample_from_dict(d):
    _take(d, ("mode", "gamma_s", "center_fraction", "seed"), "undersample")
    return UndersampleSpec(**d)


def motion_from_dict(d):
    _take(d, ("events", "gamma_m", "max_shift_px", "max_angle_deg", "seed"), "motion")
    d = dict(d)
    if "events" in d:
        d["events"] = tuple(tuple(e) for e in d["events"])
    return MotionTrace(**d)


def noise_from_dict(d):
    _take(d, ("sigma", "seed"), "noise")
    return NoiseSpec(**d)


def corruption_from_dict(d):
    _take(d, ("undersample", "motion", "noise"), "corruption")
    u = d.get("undersample")
    m = d.get("motion")
    n = d.get("noise")
    return CorruptionSpec(
        undersample=undersample_from_dict(u) if u is not None else None,
        motion=motion_from_dict(m) if m is not None else None,
        noise=noise_from_dict(n) if n is not None else None,
    )


def loss_from_dict(d):
    _take(d, ("kind", "lam", "window", "k1", "k2"), "loss")
    return LossSpec(**d)


def phantoms_from_dict(d, size, seed):
    _take(d, ("count", "size", "ellipses", "intensity", "smoothness", "seed"), "phantoms")
    d = dict(d)
    d.setdefault("size", size)
    d.setdefault("seed", seed)
    if "ellipses" in d:
        d["ellipses"] = tuple(d["ellipses"])
    if "intensity" in d:
        d["intensity"] = tuple(d["intensity"])
    return PhantomSpec(**d)


_TOP_KEYS = (
    "architecture", "epochs", "loss", "corruption", "lr", "adam", "batch_size",
    "seed", "size", "source", "phantoms", "data_dir", "patience",
    "layers", "kernel", "features", "freq_activation", "padding",
)


def train_config_from_dict(d):
    _take(d, _TOP_KEYS, "config")
    if "architecture" not in d or "epochs" not in d:
        raise ConfigError("config needs at least architecture and epochs")
    kw = {k: v for k, v in d.items() if k in (
        "architecture", "epochs", "lr", "batch_size", "seed", "size", "source",
        "data_dir", "patience", "layers", "kernel", "features",
        "freq_activation", "padding",
    )}
    if "adam" in d:
        adam = _take(d["adam"], ("beta1", "beta2", "eps"), "adam")
        kw.update({k: adam[k] for k in adam})
    if "loss" in d:
        kw["loss"] = loss_from_dict(d["loss"])
    if "corruption" in d:
        kw["corruption"] = corruption_from_dict(d["corruption"])
    if "phantoms" in d:
        kw["phantoms"] = phantoms_from_dict(
            d["phantoms"], d.get("size", 64), d.get("seed", 0)
        )
    return TrainConfig(**kw)


def load_train_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return train_config_from_dict(doc)


def train_config_to_dict(cfg):
    """Round-trippable plain-dict form, written next to run outputs."""
    out = {
        "architecture": cfg.architecture,
        "epochs": cfg.epochs,
        "loss": {"kind": cfg.loss.kind, "lam": cfg.loss.lam, "window": cfg.loss.window,
                 "k1": cfg.loss.k1, "k2": cfg.loss.k2},
        "corruption": {},
        "lr": cfg.lr,
        "adam": {"beta1": cfg.beta1, "beta2": cfg.beta2, "eps": cfg.eps},
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
        "size": cfg.size,
        "source": cfg.source,
        "patience": cfg.patience,
        "layers": cfg.layers,
        "kernel": cfg.kernel,
        "features": cfg.features,
        "freq_activation": cfg.freq_activation,
        "padding": cfg.padding,
    }
    c = cfg.corruption
    if c.undersample is not None:
        u = c.undersample
        out["corruption"]["undersample"] = {
            "mode": u.mode, "gamma_s": u.gamma_s,
            "center_fraction": u.center_fraction, "seed": u.seed,
        }
    if c.motion is not None:
        m = c.motion
        out["corruption"]["motion"] = {
            "events": [list(e) for e in m.events], "gamma_m": m.gamma_m,
            "max_shift_px": m.max_shift_px, "max_angle_deg": m.max_angle_deg,
            "seed": m.seed,
        }
    if c.noise is not None:
        out["corruption"]["noise"] = {"sigma": c.noise.sigma, "seed": c.noise.seed}
    if cfg.source == SOURCE_PHANTOM:
        p = cfg.phantoms
        out["phantoms"] = {
            "count": p.count, "size": p.size, "ellipses": list(p.ellipses),
            "intensity": list(p.intensity), "smoothness": p.smoothness, "seed": p.seed,
        }
    else:
        out["data_dir"] = cfg.data_dir
    return out
