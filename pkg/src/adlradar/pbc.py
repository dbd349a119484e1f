"""Power burst curve: band-limited spectrogram energy vs time.

Summing squared spectrogram values over the +-[20, 270] Hz bands gives a
curve whose rises and falls mark in-place motion; a short causal moving
average removes flicker and a threshold 3 % above the minimum separates
active from inactive frames.  ``merge_events`` combines these bursts with
the Radon breaking points into the ordered capture list the decoder
consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .radon import BreakPoint, TimelineInterval

EXIT_CAPTURE_BEFORE = 1.5   # s of translation kept before a translation->inplace break
EXIT_CAPTURE_AFTER = 0.5    # s of in-place kept after it
ENTRY_CAPTURE_LEN = 3.0     # s after an inplace->translation break


@dataclass(frozen=True)
class PbcParams:
    pos_band: tuple[float, float] = (20.0, 270.0)     # Hz
    neg_band: tuple[float, float] = (-270.0, -20.0)   # Hz
    smooth_extent: int = 5                            # moving-average samples
    threshold_frac: float = 0.03                      # over the minimum
    min_duration: float = 0.3                         # s, discard shorter runs

    def __post_init__(self):
        kp1, kp2 = self.pos_band
        kn1, kn2 = self.neg_band
        if not (kn1 < kn2 < 0 < kp1 < kp2):
            raise ValueError("bands must satisfy K_N1 < K_N2 < 0 < K_P1 < K_P2")
        if self.smooth_extent < 1:
            raise ValueError("smooth_extent must be >= 1")
        if not 0 < self.threshold_frac < 1:
            raise ValueError("threshold_frac must be in (0, 1)")


@dataclass
class MotionSegment:
    onset: float
    offset: float
    kind: str                      # 'inplace' | 'translation'
    direction: str = "unknown"     # 'toward' | 'away' | 'unknown'
    source: str = "pbc"            # 'radon' | 'pbc' | 'merged'
    capture: tuple[float, float] = field(default=None)

    def __post_init__(self):
        if self.offset <= self.onset:
            raise ValueError("segment needs onset < offset")
        if self.capture is None:
            self.capture = (self.onset, self.offset)


def _band_rows(img, lo_hz: float, hi_hz: float) -> tuple[int, int]:
    rows = img.shape[0]
    lo = int(np.rint(img.row_axis.index(lo_hz)))
    hi = int(np.rint(img.row_axis.index(hi_hz)))
    if not (0 <= lo <= hi < rows):
        raise ValueError(f"band [{lo_hz}, {hi_hz}] Hz outside the Doppler span")
    return lo, hi


def power_burst(md, params: PbcParams = PbcParams()) -> np.ndarray:
    """PC(n): squared spectrogram values summed over the positive and negative
    Doppler bands, per frame.  Band edges map to the nearest Doppler bins."""
    if md.kind != "spectrogram":
        raise ValueError("power_burst expects a spectrogram image")
    p_lo, p_hi = _band_rows(md, *params.pos_band)
    n_lo, n_hi = _band_rows(md, *params.neg_band)
    pix = md.pixels
    return (pix[p_lo:p_hi + 1, :] ** 2).sum(axis=0) + (pix[n_lo:n_hi + 1, :] ** 2).sum(axis=0)


def smooth_pbc(pc: np.ndarray, w: int = 5) -> np.ndarray:
    """Causal length-w moving mean; the first w-1 samples average over the
    history available so far."""
    if w < 1:
        raise ValueError("w must be >= 1")
    pc = np.asarray(pc, dtype=float)
    csum = np.concatenate(([0.0], np.cumsum(pc)))
    idx = np.arange(1, len(pc) + 1)
    lo = np.maximum(0, idx - w)
    return (csum[idx] - csum[lo]) / (idx - lo)


def threshold_segments(pcf: np.ndarray, threshold_frac: float, frame_rate: float,
                       min_duration: float = 0.3) -> list[MotionSegment]:
    """Maximal runs with PC_f >= min + frac * (max - min) become in-place
    segments; runs shorter than ``min_duration`` seconds are discarded."""
    pcf = np.asarray(pcf, dtype=float)
    if pcf.size == 0:
        raise ValueError("empty curve")
    lo, hi = pcf.min(), pcf.max()
    threshold = lo + threshold_frac * (hi - lo)
    active = pcf >= threshold
    segments = []
    start = None
    for i, a in enumerate(np.concatenate([active, [False]])):
        if a and start is None:
            start = i
        elif not a and start is not None:
            onset = start / frame_rate
            offset = i / frame_rate
            if offset - onset >= min_duration - 1e-12:
                segments.append(MotionSegment(onset=onset, offset=offset,
                                              kind="inplace", source="pbc"))
            start = None
    return segments


def detect_bursts(md, params: PbcParams = PbcParams()) -> list[MotionSegment]:
    """power_burst -> smooth -> threshold, using the image's own frame rate."""
    pc = power_burst(md, params)
    pcf = smooth_pbc(pc, params.smooth_extent)
    frame_rate = 1.0 / md.col_axis.step
    return threshold_segments(pcf, params.threshold_frac, frame_rate, params.min_duration)


def _overlaps(a0, a1, b0, b1) -> bool:
    return a0 < b1 and b0 < a1


def merge_events(radon_timeline: tuple[list[TimelineInterval], list[BreakPoint]],
                 pbc_segments: list[MotionSegment],
                 capture_len: float = 2.0) -> list[MotionSegment]:
    """Merge the Radon timeline with PBC bursts into one ordered capture list.

    * translation intervals pass through (source 'radon');
    * a translation->inplace break at t emits a merged capture
      [t - 1.5 s, t + 0.5 s] holding the walk-merged action;
    * an inplace->translation break at t emits a merged capture [t, t + 3 s]
      holding the action that leads back into walking;
    * PBC bursts strictly inside an in-place interval keep their own
      onset/offset as capture, unless they overlap a merged capture (those
      motions are time-inseparable and already covered).
    """
    intervals, breakpoints = radon_timeline
    if not intervals:
        raise ValueError("empty radon timeline")
    t_end = intervals[-1].offset
    before = capture_len * EXIT_CAPTURE_BEFORE / (EXIT_CAPTURE_BEFORE + EXIT_CAPTURE_AFTER)
    after = capture_len - before

    events: list[MotionSegment] = []
    for iv in intervals:
        if iv.kind == "translation":
            events.append(MotionSegment(onset=iv.onset, offset=iv.offset,
                                        kind="translation", direction=iv.direction,
                                        source="radon"))

    def interval_before(t):
        prev = [iv for iv in intervals if iv.offset <= t + 1e-9]
        return prev[-1] if prev else intervals[0]

    def interval_after(t):
        nxt = [iv for iv in intervals if iv.onset >= t - 1e-9]
        return nxt[0] if nxt else intervals[-1]

    merged_windows = []
    for bp in breakpoints:
        if bp.from_kind == "translation" and bp.to_kind == "inplace":
            cap = (max(0.0, bp.t - before), min(t_end, bp.t + after))
            direction = interval_before(bp.t).direction
            events.append(MotionSegment(onset=cap[0], offset=cap[1], kind="inplace",
                                        direction=direction, source="merged", capture=cap))
            merged_windows.append(cap)
        elif bp.from_kind == "inplace" and bp.to_kind == "translation":
            cap = (bp.t, min(t_end, bp.t + ENTRY_CAPTURE_LEN))
            direction = interval_after(bp.t).direction
            events.append(MotionSegment(onset=cap[0], offset=cap[1], kind="translation",
                                        direction=direction, source="merged", capture=cap))
            merged_windows.append(cap)

    inplace_spans = [(iv.onset, iv.offset) for iv in intervals if iv.kind == "inplace"]
    for seg in pbc_segments:
        inside = any(seg.onset > a + 1e-9 and seg.offset < b - 1e-9
                     for a, b in inplace_spans)
        clashes = any(_overlaps(seg.onset, seg.offset, w0, w1) for w0, w1 in merged_windows)
        if inside and not clashes:
            events.append(MotionSegment(onset=seg.onset, offset=seg.offset,
                                        kind="inplace", direction="unknown",
                                        source="pbc", capture=(seg.onset, seg.offset)))

    # merged entry events must precede the translation interval they open
    order = {"merged": 0, "pbc": 1, "radon": 2}
    events.sort(key=lambda s: (s.onset, order[s.source]))
    return events


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------

_SEGMENT_HEADER = "onset_s,offset_s,kind,direction,source,capture_start_s,capture_end_s"


def write_segments_csv(segments: list[MotionSegment], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_SEGMENT_HEADER + "\n")
        for s in segments:
            fh.write(f"{s.onset:.6f},{s.offset:.6f},{s.kind},{s.direction},"
                     f"{s.source},{s.capture[0]:.6f},{s.capture[1]:.6f}\n")


def read_segments_csv(path) -> list[MotionSegment]:
    segments = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != _SEGMENT_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            onset, offset, kind, direction, source, c0, c1 = line.strip().split(",")
            segments.append(MotionSegment(onset=float(onset), offset=float(offset),
                                          kind=kind, direction=direction, source=source,
                                          capture=(float(c0), float(c1))))
    return segments


def write_pbc_csv(pc: np.ndarray, pcf: np.ndarray, frame_rate: float, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t_s,pc,pc_filtered\n")
        for i, (a, b) in enumerate(zip(pc, pcf)):
            fh.write(f"{i / frame_rate:.6f},{a:.9g},{b:.9g}\n")


def read_pbc_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (t, pc, pc_filtered)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "t_s,pc,pc_filtered":
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = [tuple(float(x) for x in line.strip().split(",")) for line in fh]
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]
