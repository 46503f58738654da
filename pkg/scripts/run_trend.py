"""Desk-scale architecture comparison: 4 architectures x 3 seeds.

Each run trains on the same 512 synthetic 64x64 phantoms under 25% uniform
line undersampling with the image L1 loss for up to 30 epochs (validation
patience 10, the configured convergence stand-in), then scores the best
checkpoint's median validation image L1. Rows land in summary.csv as they
finish, so the sweep is restartable: completed (architecture, seed) pairs
are skipped on the next invocation.

Run from the repository root:  python3 scripts/run_trend.py [--out results/trend]
"""

import argparse
import csv
import os
import sys
import time

from jointrec.harness.config import train_config_from_dict
from jointrec.harness.train import evaluate, train
from jointrec.models import load_checkpoint
from jointrec.harness import report

ARCHITECTURES = ("interleaved", "alternating", "frequency", "image")
SEEDS = (0, 1, 2)

BASE_CONFIG = {
    "epochs": 30,
    "loss": {"kind": "image-l1"},
    "corruption": {"undersample": {"mode": "uniform", "gamma_s": 0.25}},
    "batch_size": 8,
    "size": 64,
    "phantoms": {"count": 512},
    "patience": 10,
}

SUMMARY_FIELDS = ("seed", "architecture", "epochs_run", "median_image_l1")


def load_done(path):
    done = set()
    if os.path.exists(path):
        with open(path) as fh:
            for row in csv.DictReader(fh):
                done.add((int(row["seed"]), row["architecture"]))
    return done


def append_row(path, row):
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        if new:
            w.writeheader()
        w.writerow(row)


def run_one(arch, seed, out_dir, log):
    cfg = train_config_from_dict({**BASE_CONFIG, "architecture": arch, "seed": seed})
    t0 = time.time()
    _, history = train(cfg, out_dir=out_dir, log=log)
    best = load_checkpoint(os.path.join(out_dir, "best.ckpt"))
    rows = evaluate(best, cfg, metrics=("image-l1",), split="val")
    median = next(r["value"] for r in rows if r["sample_id"] == "median")
    report.render_loss_curves(
        history, os.path.join(out_dir, "loss.png"), title=f"{arch} seed {seed}"
    )
    log(f"[{arch} s{seed}] median val image-l1 {median:.6f} "
        f"({len(history)} epochs, {time.time() - t0:.0f}s)")
    return {"seed": seed, "architecture": arch,
            "epochs_run": len(history), "median_image_l1": f"{median:.8g}"}


def render_summary(path, fig_path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.8, 4.2), dpi=110)
    for i, arch in enumerate(ARCHITECTURES):
        pts = [(int(r["seed"]), float(r["median_image_l1"]))
               for r in rows if r["architecture"] == arch]
        if pts:
            xs, ys = zip(*sorted(pts))
            ax.plot(xs, ys, "o-", label=arch)
    ax.set_xlabel("seed")
    ax.set_ylabel("median val image L1")
    ax.set_xticks(list(SEEDS))
    ax.legend()
    ax.grid(alpha=0.3)
    ax.set_title("architecture comparison, 512 phantoms, 25% lines")
    fig.tight_layout()
    fig.savefig(fig_path)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/trend")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    summary = os.path.join(args.out, "summary.csv")
    log_path = os.path.join(args.out, "sweep.log")

    def log(msg):
        line = f"{time.strftime('%H:%M:%S')} {msg}"
        print(line, flush=True)
        with open(log_path, "a") as fh:
            fh.write(line + "\n")

    done = load_done(summary)
    for seed in SEEDS:
        for arch in ARCHITECTURES:
            if (seed, arch) in done:
                log(f"[{arch} s{seed}] already done, skipping")
                continue
            run_dir = os.path.join(args.out, "runs", f"{arch}_s{seed}")
            os.makedirs(run_dir, exist_ok=True)
            log(f"[{arch} s{seed}] starting")
            row = run_one(arch, seed, run_dir, log)
            append_row(summary, row)
    render_summary(summary, os.path.join(args.out, "summary.png"))
    log("sweep complete")


if __name__ == "__main__":
    sys.exit(main())
