"""Image cleaning chains for range maps and micro-Doppler spectrograms.

Range maps go through four stages: column-max normalization, histogram
thresholding (eCLEAN), removal of small 8-connected components, and the
sliding-kernel line tracker that keeps only a fixed-width target line.
Spectrograms get only eCLEAN and outlier removal.  All stages are
non-amplifying: every output pixel is either zero or the corresponding
input pixel (scaled into [0, 1] by the normalization for nonnegative
input).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

_CONN8 = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class CleanParams:
    keep_bins: int = 20              # eCLEAN range-map mode: top histogram bins kept
    keep_fraction: float = 0.6       # eCLEAN spectrogram mode: top fraction of bins kept
    histogram_bins: int = 100
    outlier_min_pixels_rm: int = 50
    outlier_min_pixels_md: int = 150
    kernel_win: int = 6

    def __post_init__(self):
        if self.keep_bins < 1 or self.histogram_bins < 1:
            raise ValueError("keep_bins and histogram_bins must be >= 1")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.kernel_win < 1:
            raise ValueError("kernel_win must be >= 1")


def column_normalize(img: np.ndarray) -> np.ndarray:
    """Divide every element by its column maximum; all-zero columns stay zero."""
    img = np.asarray(img, dtype=float)
    col_max = img.max(axis=0)
    safe = np.where(col_max != 0, col_max, 1.0)
    return img / safe[np.newaxis, :]


def eclean(img: np.ndarray, params: CleanParams = CleanParams(),
           mode: str = "rangemap") -> np.ndarray:
    """Histogram threshold: keep pixels in the top histogram bins, zero the rest.

    The histogram uses ``histogram_bins`` equal-width bins over the nonzero
    pixel values.  'rangemap' keeps the top ``keep_bins`` bins; 'spectrogram'
    keeps the top ``keep_fraction`` of the bins.
    """
    if mode not in ("rangemap", "spectrogram"):
        raise ValueError(f"unknown eclean mode {mode!r}")
    img = np.asarray(img, dtype=float)
    nz = img != 0
    if not nz.any():
        return img.copy()
    values = img[nz]
    lo, hi = values.min(), values.max()
    n_bins = params.histogram_bins
    kept = params.keep_bins if mode == "rangemap" else int(np.ceil(params.keep_fraction * n_bins))
    kept = min(kept, n_bins)
    if lo == hi or kept == n_bins:
        return img.copy()
    edges = np.linspace(lo, hi, n_bins + 1)
    threshold = edges[n_bins - kept]  # lower edge of the first kept bin
    out = img.copy()
    out[~(nz & (img >= threshold))] = 0.0
    return out


def remove_outliers(img: np.ndarray, min_pixels: int) -> np.ndarray:
    """Zero every 8-connected nonzero component with fewer than ``min_pixels`` pixels."""
    if min_pixels < 1:
        raise ValueError("min_pixels must be >= 1")
    img = np.asarray(img, dtype=float)
    labels, n = ndimage.label(img != 0, structure=_CONN8)
    if n == 0:
        return img.copy()
    sizes = np.bincount(labels.ravel())
    small = sizes < min_pixels
    small[0] = False
    out = img.copy()
    out[small[labels]] = 0.0
    return out


def kernel_clean(rm: np.ndarray, win: int = 6) -> np.ndarray:
    """Track the target line with a sliding win x win kernel.

    The first slow-time block is scanned from the farthest range bin toward
    the radar until a nonzero row is found; the kernel is placed over the
    detected line.  Sliding one column at a time, the summed power of the
    kernel shifted -1/0/+1 range bins decides where the line went, and the
    winning win x win block is copied into an initially zero output.  Ties
    go first to the away-shift, then to the unshifted kernel.  Because the
    kernel moves at most one bin per column, disjoint horizontal noise lines
    are never picked up.
    """
    rm = np.asarray(rm, dtype=float)
    rows, cols = rm.shape
    if win > min(rows, cols):
        raise ValueError("kernel window larger than image")
    out = np.zeros_like(rm)

    # integral image makes each win x win block sum O(1)
    s = np.zeros((rows + 1, cols + 1))
    s[1:, 1:] = rm.cumsum(axis=0).cumsum(axis=1)

    def block_sum(top: int, left: int) -> float:
        return (s[top + win, left + win] - s[top, left + win]
                - s[top + win, left] + s[top, left])

    # initial scan: farthest bin downward at the first nonzero slow-time block
    m = None
    start_n = 0
    for n in range(0, cols - win + 1):
        col_block = rm[:, n:n + win]
        hit_rows = np.nonzero(col_block.any(axis=1))[0]
        if hit_rows.size:
            bottom = hit_rows[-1]
            m = int(np.clip(bottom - win + 1, 0, rows - win))
            start_n = n
            break
    if m is None:
        return out

    for n in range(start_n, cols - win + 1):
        pwr2 = block_sum(m, n)
        pwr1 = block_sum(m + 1, n) if m + 1 + win <= rows else -np.inf
        pwr3 = block_sum(m - 1, n) if m - 1 >= 0 else -np.inf
        if pwr1 >= pwr2 and pwr1 >= pwr3:
            m += 1
        elif pwr2 >= pwr1 and pwr2 >= pwr3:
            pass
        else:
            m -= 1
        out[m:m + win, n:n + win] = rm[m:m + win, n:n + win]
    return out


def clean_range_map(img: np.ndarray, params: CleanParams = CleanParams(),
                    kernel: bool = True) -> np.ndarray:
    """Full range-map chain: normalize -> eCLEAN -> outlier removal [-> kernel clean]."""
    out = column_normalize(img)
    out = eclean(out, params, mode="rangemap")
    out = remove_outliers(out, params.outlier_min_pixels_rm)
    if kernel:
        out = kernel_clean(out, params.kernel_win)
    return out


def clean_spectrogram(img: np.ndarray, params: CleanParams = CleanParams()) -> np.ndarray:
    """Spectrogram chain: eCLEAN (fraction mode) -> outlier removal."""
    out = eclean(img, params, mode="spectrogram")
    return remove_outliers(out, params.outlier_min_pixels_md)
