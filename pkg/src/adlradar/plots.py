"""Matplotlib figure rendering for the pipeline report path.

Every function draws one figure and saves it to a file; nothing is shown
interactively.  Figures carry physical axes (seconds, metres, Hz) taken
from the image metadata so they can be eyeballed against the CSV output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 120


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def save_radar_image(img, path, title=""):
    rows, cols = img.shape
    extent = [img.col_axis.start, img.col_axis.value(cols - 1),
              img.row_axis.start, img.row_axis.value(rows - 1)]
    fig, ax = plt.subplots(figsize=(9, 4))
    im = ax.imshow(img.pixels, aspect="auto", origin="lower", extent=extent,
                   cmap="viridis", interpolation="nearest")
    ax.set_xlabel("slow time (s)")
    ax.set_ylabel("Doppler (Hz)" if img.kind == "spectrogram" else "range (m)")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="level")
    return _save(fig, path)


def save_radon_image(ri, path, lines=None, title="Radon transform"):
    fig, ax = plt.subplots(figsize=(7, 5))
    extent = [ri.theta_grid[0], ri.theta_grid[-1],
              ri.xprime_offsets[0], ri.xprime_offsets[-1]]
    im = ax.imshow(ri.values, aspect="auto", origin="lower", extent=extent,
                   cmap="magma", interpolation="nearest")
    if lines:
        for ln in lines:
            marker = "o" if ln.kind == "inplace" else "^"
            ax.plot(ln.theta, -ln.xprime, marker, mfc="none", mec="cyan", ms=12)
    ax.set_xlabel("theta (deg)")
    ax.set_ylabel("x' offset (pixels)")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="projection sum")
    return _save(fig, path)


def save_pbc_curve(t, pc, pcf, threshold, segments, path):
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(t, pc, lw=0.6, color="0.6", label="raw")
    ax.plot(t, pcf, lw=1.4, color="C0", label="filtered")
    ax.axhline(threshold, color="C3", ls="--", lw=1, label="threshold")
    for seg in segments:
        ax.axvspan(seg.onset, seg.offset, color="C2", alpha=0.2)
    ax.set_xlabel("slow time (s)")
    ax.set_ylabel("band power")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("power burst curve")
    return _save(fig, path)


def save_timeline(segments, path, decoded=None):
    fig, ax = plt.subplots(figsize=(9, 2.8))
    colors = {"radon": "C0", "merged": "C1", "pbc": "C2"}
    for i, seg in enumerate(segments):
        y = {"radon": 2, "merged": 1, "pbc": 0}[seg.source]
        ax.broken_barh([(seg.onset, seg.offset - seg.onset)], (y - 0.35, 0.7),
                       facecolors=colors[seg.source], alpha=0.7)
        if decoded is not None and decoded[i] is not None:
            ax.annotate(decoded[i], ((seg.onset + seg.offset) / 2, y),
                        ha="center", va="center", fontsize=8)
    ax.set_yticks([0, 1, 2], labels=["pbc", "merged", "radon"])
    ax.set_xlabel("time (s)")
    ax.set_title("motion segments")
    return _save(fig, path)


def save_confusion(cm, path, title="confusion matrix (%)"):
    n = len(cm.classes)
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * n, 0.8 + 0.6 * n))
    im = ax.imshow(cm.rates, cmap="Blues", vmin=0, vmax=100)
    ax.set_xticks(range(n), labels=cm.classes, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(n), labels=cm.classes, fontsize=7)
    for i in range(n):
        for j in range(n):
            if cm.rates[i, j] > 0:
                ax.text(j, i, f"{cm.rates[i, j]:.0f}",
                        ha="center", va="center", fontsize=6,
                        color="white" if cm.rates[i, j] > 50 else "black")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.8)
    return _save(fig, path)
