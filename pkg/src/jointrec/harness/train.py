"""Dataset assembly, the training loop, and evaluation sweeps."""

import math
import os
from dataclasses import replace

import numpy as np

from ..corruption import (
    add_noise,
    make_mask,
    normalize_pair,
    random_motion_trace,
    simulate_motion,
    undersample,
)
from ..errors import ConfigError, DataError, NumericError
from ..fourier import (
    FREQUENCY,
    IMAGE,
    ComplexField,
    fft2c_array,
    pairs_to_complex,
    complex_to_pairs,
    set_fft_backend,
)
from ..losses import metric_value, needs_frequency, training_objective
from ..models import build_model, model_forward, save_checkpoint
from ..tensor import Tensor, no_grad, set_conv_backend
from .config import SOURCE_DIRECTORY, SOURCE_PHANTOM
from .data import IMAGE_EXT, list_field_files, load_field
from .optim import Adam
from .phantoms import generate_phantoms


def child_seed(base, *tags):
    """Stable derived seed so per-sample randomness never aliases."""
    base = 0 if base is None else int(base)
    seq = np.random.SeedSequence([base, *[int(t) for t in tags]])
    return int(seq.generate_state(1)[0])


def make_training_pair(image, corruption, seed):
    """Corrupt one clean image into a normalized (k-space, target) pair.

    Motion acts first (it models the acquisition itself), then line
    undersampling, then receiver noise. Sub-spec seeds are replaced with
    children of ``seed`` so every sample gets independent randomness; a
    motion spec with explicit events is used verbatim.
    """
    n = image.tensor.shape[1]
    if corruption.motion is not None:
        tr = corruption.motion
        if not tr.events and tr.gamma_m:
            tr = random_motion_trace(
                n, tr.gamma_m, tr.max_shift_px, tr.max_angle_deg,
                seed=child_seed(seed, 1),
            )
        freq = simulate_motion(image, tr)
    else:
        freq = image.to_frequency()
    if corruption.undersample is not None:
        spec = replace(corruption.undersample, seed=child_seed(seed, 2))
        freq = undersample(freq, make_mask(spec, n))
    if corruption.noise is not None:
        spec = replace(corruption.noise, seed=child_seed(seed, 3))
        freq = add_noise(freq, spec)
    f_norm, i_norm, _ = normalize_pair(freq, image)
    return f_norm, i_norm


def split_indices(count, seed):
    """Deterministic 80/20 split: every fifth position of a shuffled order."""
    perm = np.random.default_rng([0 if seed is None else int(seed), 17]).permutation(count)
    val_mask = np.arange(count) % 5 == 4
    val = np.sort(perm[val_mask])
    train = np.sort(perm[~val_mask])
    return train, val


def _clean_images(cfg):
    if cfg.source == SOURCE_PHANTOM:
        return generate_phantoms(cfg.phantoms).tensor.data
    files = list_field_files(cfg.data_dir, IMAGE_EXT)
    samples = []
    for path in files:
        f = load_field(path)
        if f.domain != IMAGE:
            raise DataError(f"{path} does not hold image-domain data")
        if f.tensor.shape[1:3] != (cfg.size, cfg.size):
            raise DataError(
                f"{path} is {f.tensor.shape[1]}x{f.tensor.shape[2]}, "
                f"config wants {cfg.size}x{cfg.size}"
            )
        samples.append(f.tensor.data[0])
    return np.stack(samples)


def build_dataset(cfg):
    """Corrupted inputs and normalized targets for every sample, pre-split.

    Returns a dict of arrays: inputs "f", targets "i", optional target
    spectra "rf" (only when the loss reads frequency data), plus "train"
    and "val" index arrays into them.
    """
    clean = _clean_images(cfg)
    count = clean.shape[0]
    if count < 5:
        raise ConfigError(f"need at least 5 samples to split 80/20, got {count}")
    f_all = np.empty_like(clean)
    i_all = np.empty_like(clean)
    for i in range(count):
        img = ComplexField(Tensor(clean[i:i + 1]), IMAGE)
        fp, ip = make_training_pair(img, cfg.corruption, child_seed(cfg.seed, 5, i))
        f_all[i] = fp.tensor.data[0]
        i_all[i] = ip.tensor.data[0]
    out = {"f": f_all, "i": i_all}
    if needs_frequency(cfg.loss.kind):
        out["rf"] = complex_to_pairs(fft2c_array(pairs_to_complex(i_all)), i_all.dtype)
    train, val = split_indices(count, cfg.seed)
    out["train"], out["val"] = train, val
    return out


def _batch_fields(data, idx, kind):
    """Tensors for one minibatch, keyed by what the loss will read."""
    u0 = ComplexField(Tensor(data["f"][idx]), FREQUENCY)
    ref_i = ComplexField(Tensor(data["i"][idx]), IMAGE)
    ref_f = None
    if needs_frequency(kind):
        ref_f = ComplexField(Tensor(data["rf"][idx]), FREQUENCY)
    return u0, ref_i, ref_f


def _objective(model, u0, ref_i, ref_f, spec, mode):
    out = model_forward(model, u0, mode=mode)
    if out.domain == FREQUENCY:
        pred_f = out
        pred_i = out.to_image()
    else:
        pred_i = out
        pred_f = out.to_frequency() if needs_frequency(spec.kind) else None
    return training_objective(spec, pred_i, ref_i, pred_f, ref_f)


def train(cfg, out_dir=None, log=None):
    """Train one model per the config; returns (model, history).

    History is a list of per-epoch dicts with train/val losses. When
    ``out_dir`` is given, the latest and best checkpoints plus a loss CSV
    are maintained there after every epoch. Aborts with NumericError the
    moment the loss stops being finite.

    Uses the accelerated transform backends; their agreement with the
    reference implementations is covered by the test suite.
    """
    set_fft_backend("pocketfft")
    set_conv_backend("auto")
    say = log if log is not None else lambda msg: None

    data = build_dataset(cfg)
    model = build_model(cfg.model_config(), seed=child_seed(cfg.seed, 23))
    opt = Adam(model.parameters(), lr=cfg.lr, beta1=cfg.beta1,
               beta2=cfg.beta2, eps=cfg.eps)
    tr_idx, va_idx = data["train"], data["val"]
    bs = cfg.batch_size
    spec = cfg.loss

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    history = []
    best_val = math.inf
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        order = np.random.default_rng([cfg.seed, 31, epoch]).permutation(len(tr_idx))
        tr_sum, tr_n = 0.0, 0
        for s in range(0, len(order), bs):
            idx = tr_idx[order[s:s + bs]]
            u0, ref_i, ref_f = _batch_fields(data, idx, spec.kind)
            model.zero_grad()
            loss = _objective(model, u0, ref_i, ref_f, spec, "train")
            lv = loss.item()
            if not math.isfinite(lv):
                raise NumericError(
                    f"training loss became {lv} at epoch {epoch}, step {s // bs}"
                )
            loss.backward()
            opt.step()
            tr_sum += lv * len(idx)
            tr_n += len(idx)

        va_sum, va_n = 0.0, 0
        with no_grad():
            for s in range(0, len(va_idx), bs):
                idx = va_idx[s:s + bs]
                u0, ref_i, ref_f = _batch_fields(data, idx, spec.kind)
                lv = _objective(model, u0, ref_i, ref_f, spec, "eval").item()
                va_sum += lv * len(idx)
                va_n += len(idx)
        row = {
            "epoch": epoch,
            "train_loss": tr_sum / max(tr_n, 1),
            "val_loss": va_sum / max(va_n, 1),
        }
        history.append(row)
        say(f"epoch {epoch:3d}  train {row['train_loss']:.6f}  val {row['val_loss']:.6f}")

        improved = row["val_loss"] < best_val
        if improved:
            best_val = row["val_loss"]
            stale = 0
        else:
            stale += 1
        if out_dir is not None:
            save_checkpoint(model, os.path.join(out_dir, "last.ckpt"))
            if improved:
                save_checkpoint(model, os.path.join(out_dir, "best.ckpt"))
            _write_history_csv(os.path.join(out_dir, "loss.csv"), history)
        if cfg.patience > 0 and stale >= cfg.patience:
            say(f"stopping early: no validation improvement in {cfg.patience} epochs")
            break
    return model, history


def _write_history_csv(path, history):
    lines = ["epoch,train_loss,val_loss"]
    for row in history:
        lines.append(f"{row['epoch']},{row['train_loss']:.8g},{row['val_loss']:.8g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


DEFAULT_METRICS = ("image-l1", "freq-l1", "joint-l1", "ssim", "ms-ssim", "psnr")


def evaluate(model, cfg, metrics=DEFAULT_METRICS, split="val", loss_label=None):
    """Per-sample metric rows over a config's data, plus per-metric medians.

    Rebuilds the corrupted dataset exactly as training did (same seeds),
    runs the model in eval mode one sample at a time, and reports rows of
    (sample_id, architecture, loss, metric, value).
    """
    if split not in ("val", "train", "all"):
        raise ConfigError(f"unknown split {split!r}")
    for m in metrics:
        if m not in DEFAULT_METRICS:
            raise ConfigError(f"unknown metric {m!r}")
    data = build_dataset(cfg)
    if "rf" not in data:
        data["rf"] = complex_to_pairs(
            fft2c_array(pairs_to_complex(data["i"])), data["i"].dtype
        )
    if split == "val":
        ids = data["val"]
    elif split == "train":
        ids = data["train"]
    else:
        ids = np.arange(data["f"].shape[0])
    label = loss_label if loss_label is not None else cfg.loss.kind
    arch = model.config.architecture

    rows = []
    per_metric = {m: [] for m in metrics}
    with no_grad():
        for i in ids:
            sel = np.asarray([i])
            u0 = ComplexField(Tensor(data["f"][sel]), FREQUENCY)
            ref_i = ComplexField(Tensor(data["i"][sel]), IMAGE)
            ref_f = ComplexField(Tensor(data["rf"][sel]), FREQUENCY)
            out = model_forward(model, u0, mode="eval")
            if out.domain == FREQUENCY:
                pred_f, pred_i = out, out.to_image()
            else:
                pred_i, pred_f = out, out.to_frequency()
            for m in metrics:
                v = metric_value(m, pred_i, ref_i, pred_f, ref_f)
                rows.append({
                    "sample_id": int(i), "architecture": arch,
                    "loss": label, "metric": m, "value": v,
                })
                per_metric[m].append(v)
    for m in metrics:
        vals = [v for v in per_metric[m] if math.isfinite(v)]
        med = float(np.median(vals)) if vals else math.nan
        rows.append({
            "sample_id": "median", "architecture": arch,
            "loss": label, "metric": m, "value": med,
        })
    return rows
