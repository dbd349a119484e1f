"""Radon-transform motion segmentation of cleaned range maps.

Coordinate conventions (fixed here and used consistently everywhere):

* The Radon projection runs in a centred frame with x rightward along slow
  time and y upward, i.e. y = cy - row, so a horizontal target line peaks
  at theta = 90 deg and angles grow counter-clockwise.
* Detected lines are reported in the centred (x = col - cx, y = row - cy)
  frame where y grows with range bin; there a peak at (theta, x') is the
  line y = slope * x + intercept with slope = cot(theta) and
  intercept = xprime / sin(theta), ``xprime`` being the signed centre
  offset stored on the line.  Negative slope means motion toward the radar.
* Slow-time pixels convert to seconds at a fixed column rate
  (32 columns per second on the default 128 x 384 twelve-second grid).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

THETA_DEG = np.arange(180.0)          # 0..179 in 1 degree steps
COLUMNS_PER_S = 32.0
INPLACE_TOL_DEG = 2.0
PEAK_REL_THRESHOLD = 0.4
SUPPRESS_THETA_DEG = 5
SUPPRESS_XPRIME = 10


class NoIntersectionError(ValueError):
    """The two lines are parallel (or degenerate)."""


@dataclass
class RadonImage:
    values: np.ndarray        # (n_xprime, n_theta)
    theta_grid: np.ndarray    # degrees
    xprime_step: float
    center: int               # index of the x' = 0 bin

    @property
    def xprime_offsets(self) -> np.ndarray:
        return (np.arange(self.values.shape[0]) - self.center) * self.xprime_step


@dataclass
class DetectedLine:
    theta: float              # degrees
    xprime: float             # signed offset; intercept = xprime / sin(theta)
    slope: float              # range bins per slow-time pixel, cot(theta)
    intercept: float          # range bins at the image centre column
    kind: str                 # 'inplace' | 'translation'
    strength: float

    @property
    def direction(self) -> str:
        if self.kind == "inplace":
            return "unknown"
        return "toward" if self.slope < 0 else "away"

    def y_at(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass
class TimelineInterval:
    onset: float              # s
    offset: float             # s
    kind: str                 # 'inplace' | 'translation'
    direction: str            # 'toward' | 'away' | 'unknown'


@dataclass
class BreakPoint:
    t: float                  # s
    from_kind: str
    to_kind: str
    chosen_segment_energy: float


def radon_transform(img: np.ndarray) -> RadonImage:
    """Line-integral projections R_theta(x') of the image onto
    x' = x cos(theta) + y sin(theta), origin at the image centre.

    Pixels are splat with linear interpolation between the two adjacent x'
    bins; nonnegative input therefore gives nonnegative output, and zero
    images map to zero.
    """
    img = np.asarray(img, dtype=float)
    if not np.all(np.isfinite(img)):
        raise ValueError("image must be finite")
    rows, cols = img.shape
    cy, cx = (rows - 1) / 2.0, (cols - 1) / 2.0
    r_idx, c_idx = np.nonzero(img)
    vals = img[r_idx, c_idx]
    x = c_idx - cx
    y = cy - r_idx             # y up
    k = int(np.ceil(np.hypot(rows, cols) / 2.0))
    n_xp = 2 * k + 1
    out = np.zeros((n_xp + 1, THETA_DEG.size))
    if vals.size:
        rad = np.deg2rad(THETA_DEG)
        for ti, (ct, st) in enumerate(zip(np.cos(rad), np.sin(rad))):
            pos = x * ct + y * st + k
            lo = np.floor(pos).astype(int)
            frac = pos - lo
            out[:, ti] += np.bincount(lo, weights=vals * (1 - frac), minlength=n_xp + 1)
            out[:, ti] += np.bincount(lo + 1, weights=vals * frac, minlength=n_xp + 1)
    return RadonImage(values=out[:n_xp], theta_grid=THETA_DEG.copy(),
                      xprime_step=1.0, center=k)


def _line_from_peak(theta_deg: float, xprime_up: float, strength: float,
                    inplace_tol: float) -> DetectedLine:
    th = np.deg2rad(theta_deg)
    st, ct = np.sin(th), np.cos(th)
    if st < 1e-12:
        # vertical structure; no finite row-per-column description
        return DetectedLine(theta=theta_deg, xprime=xprime_up, slope=np.inf,
                            intercept=np.nan, kind="translation", strength=strength)
    # flip into the y-down (range-bin) frame: slope cot(theta), offset negated
    xprime = -xprime_up
    return DetectedLine(
        theta=theta_deg,
        xprime=xprime,
        slope=ct / st,
        intercept=xprime / st,
        kind="inplace" if abs(theta_deg - 90.0) <= inplace_tol else "translation",
        strength=strength,
    )


def _parabolic_offset(fm1: float, f0: float, fp1: float) -> float:
    """Vertex offset of the parabola through three equidistant samples."""
    denom = fm1 - 2.0 * f0 + fp1
    if denom >= -1e-12:
        return 0.0
    return float(np.clip(0.5 * (fm1 - fp1) / denom, -0.5, 0.5))


def find_lines(ri: RadonImage, max_lines: int = 4,
               rel_threshold: float = PEAK_REL_THRESHOLD,
               suppress_theta: int = SUPPRESS_THETA_DEG,
               suppress_xprime: int = SUPPRESS_XPRIME,
               inplace_tol: float = INPLACE_TOL_DEG) -> list[DetectedLine]:
    """Greedy peak extraction: take the global maximum, record the line,
    suppress its (theta, x') neighbourhood, repeat.  Peaks below
    ``rel_threshold`` of the first maximum are ignored.  Peak positions are
    refined to sub-bin accuracy with a three-point parabola in both axes
    (symmetric peaks like an exactly horizontal line stay on-grid)."""
    if max_lines < 1:
        raise ValueError("max_lines must be >= 1")
    work = ri.values.copy()
    n_xp, n_th = work.shape
    global_max = work.max()
    if global_max <= 0:
        return []
    lines = []
    for _ in range(max_lines):
        xi, ti = np.unravel_index(np.argmax(work), work.shape)
        val = work[xi, ti]
        if val <= 0 or val < rel_threshold * global_max:
            break
        dx = dt = 0.0
        if 0 < xi < n_xp - 1:
            dx = _parabolic_offset(work[xi - 1, ti], val, work[xi + 1, ti])
        if 0 < ti < n_th - 1:
            dt = _parabolic_offset(work[xi, ti - 1], val, work[xi, ti + 1])
        xprime_up = (xi + dx - ri.center) * ri.xprime_step
        lines.append(_line_from_peak(ri.theta_grid[ti] + dt, xprime_up,
                                     float(val), inplace_tol))
        for dt in range(-suppress_theta, suppress_theta + 1):
            t = ti + dt
            xc = xi
            if t < 0 or t >= n_th:
                t = t % n_th
                xc = 2 * ri.center - xi   # theta wraps with x' mirrored
            lo = max(0, xc - suppress_xprime)
            hi = min(n_xp, xc + suppress_xprime + 1)
            work[lo:hi, t] = 0.0
    return lines


def intersect(a: DetectedLine, b: DetectedLine) -> tuple[float, float]:
    """Intersection of two detected lines, solving
    [[m_a, -1], [m_b, -1]] @ [x, y] = [-n_a, -n_b] in centred coordinates."""
    if not (np.isfinite(a.slope) and np.isfinite(b.slope)):
        raise NoIntersectionError("line with non-finite slope")
    if abs(a.slope - b.slope) < 1e-9:
        raise NoIntersectionError("parallel lines have no unique intersection")
    mat = np.array([[a.slope, -1.0], [b.slope, -1.0]])
    rhs = np.array([-a.intercept, -b.intercept])
    x, y = np.linalg.solve(mat, rhs)
    return float(x), float(y)


def bresenham(p0: tuple[int, int], p1: tuple[int, int]) -> list[tuple[int, int]]:
    """Integer (x, y) pixels of the segment p0 -> p1 (endpoints included)."""
    x0, y0 = p0
    x1, y1 = p1
    dx, sx = abs(x1 - x0), 1 if x1 >= x0 else -1
    dy, sy = abs(y1 - y0), 1 if y1 >= y0 else -1
    pts = []
    if dx >= dy:
        err = 2 * dy - dx
        y = y0
        for x in range(x0, x1 + sx, sx):
            pts.append((x, y))
            if err >= 0:
                y += sy
                err -= 2 * dx
            err += 2 * dy
    else:
        err = 2 * dx - dy
        x = x0
        for y in range(y0, y1 + sy, sy):
            pts.append((x, y))
            if err >= 0:
                x += sx
                err -= 2 * dy
            err += 2 * dx
    return pts


def segment_energy(img: np.ndarray, p0: tuple[int, int], p1: tuple[int, int]) -> float:
    """Mean pixel value along the Bresenham rasterization of p0 -> p1.

    Points are (x=column, y=row) and must lie inside the image.
    """
    img = np.asarray(img, dtype=float)
    rows, cols = img.shape
    for x, y in (p0, p1):
        if not (0 <= x < cols and 0 <= y < rows):
            raise ValueError(f"endpoint ({x}, {y}) outside a {rows}x{cols} image")
    pts = bresenham((int(p0[0]), int(p0[1])), (int(p1[0]), int(p1[1])))
    total = sum(img[y, x] for x, y in pts)
    return total / len(pts)


def _clamp(v, lo, hi):
    return max(lo, min(hi, v))


def _refit_line(img: np.ndarray, col_lo: int, col_hi: int):
    """Weighted least-squares line through the per-column ridge centroids of
    a cleaned range map (centred coordinates); None when underdetermined."""
    rows, cols = img.shape
    col_lo, col_hi = max(0, col_lo), min(cols - 1, col_hi)
    cs, ys, ws = [], [], []
    row_idx = np.arange(rows)
    for c in range(col_lo, col_hi + 1):
        w = img[:, c]
        total = w.sum()
        if total > 0:
            cs.append(c)
            ys.append(float((w * row_idx).sum() / total))
            ws.append(total)
    if len(cs) < max(8, (col_hi - col_lo) // 4):
        return None
    cy, cx = (rows - 1) / 2.0, (cols - 1) / 2.0
    x = np.asarray(cs, dtype=float) - cx
    y = np.asarray(ys, dtype=float) - cy
    w = np.asarray(ws, dtype=float)
    wsum = w.sum()
    xm, ym = (w * x).sum() / wsum, (w * y).sum() / wsum
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        return None
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return slope, ym - slope * xm


def _refine_breakpoint(img, x_cut, a_span, b_span, columns_per_s):
    """Intersect centroid-based refits of the two spans around a cut; the
    coarse Radon peaks are biased when a span mixes structures."""
    left = _refit_line(img, int(np.floor(a_span[0])), int(np.floor(x_cut)) - 1)
    right = _refit_line(img, int(np.ceil(x_cut)) + 1, int(np.ceil(b_span[1])))
    if left is None or right is None:
        return x_cut
    (m1, n1), (m2, n2) = left, right
    if abs(m1 - m2) < 1e-6:
        return x_cut
    x = (n2 - n1) / (m1 - m2)
    cx = (img.shape[1] - 1) / 2.0
    x_abs = x + cx
    if abs(x_abs - x_cut) > 0.75 * columns_per_s:
        return x_cut
    return x_abs


def build_timeline(img: np.ndarray, lines: list[DetectedLine],
                   columns_per_s: float = COLUMNS_PER_S,
                   ) -> tuple[list[TimelineInterval], list[BreakPoint]]:
    """Partition [0, t_max] into motion intervals using detected lines.

    Candidate breaking points are the in-image pairwise intersections; on
    each span between them every line is scored by its normalized energy
    along the (row-clamped) Bresenham segment, the strongest line wins the
    span, and a breaking point is emitted wherever the winner changes.
    Breaking-point times are then refined by intersecting least-squares
    ridge fits of the two adjacent spans.
    """
    if not lines:
        raise ValueError("need at least one detected line")
    img = np.asarray(img, dtype=float)
    rows, cols = img.shape
    cy, cx = (rows - 1) / 2.0, (cols - 1) / 2.0
    usable = [ln for ln in lines if np.isfinite(ln.slope)]
    if not usable:
        raise ValueError("no line with finite slope")

    cuts = set()
    for i in range(len(usable)):
        for j in range(i + 1, len(usable)):
            try:
                x, y = intersect(usable[i], usable[j])
            except NoIntersectionError:
                continue
            x_abs, y_abs = x + cx, y + cy
            if 0.0 <= x_abs <= cols - 1 and -5.0 <= y_abs <= rows + 4:
                cuts.add(x_abs)
    xs = [0.0] + sorted(cuts) + [float(cols - 1)]

    def span_winner(a: float, b: float):
        best, best_e = None, -1.0
        for ln in usable:
            ya = _clamp(ln.y_at(a - cx) + cy, 0, rows - 1)
            yb = _clamp(ln.y_at(b - cx) + cy, 0, rows - 1)
            e = segment_energy(img, (int(round(a)), int(round(ya))),
                               (int(round(b)), int(round(yb))))
            if e > best_e:
                best, best_e = ln, e
        return best, best_e

    spans = []
    for a, b in zip(xs[:-1], xs[1:]):
        if b - a < 1.0:
            continue
        winner, energy = span_winner(a, b)
        spans.append([a, b, winner, energy])
    if not spans:
        winner, energy = span_winner(xs[0], xs[-1])
        spans = [[xs[0], xs[-1], winner, energy]]

    # merge consecutive spans won by the same line
    merged = [spans[0]]
    for a, b, winner, energy in spans[1:]:
        if winner is merged[-1][2]:
            merged[-1][1] = b
            merged[-1][3] = max(merged[-1][3], energy)
        else:
            merged.append([a, b, winner, energy])

    t_max = cols / columns_per_s
    cut_times = []
    for i in range(1, len(merged)):
        x_cut = merged[i][0]
        refined = _refine_breakpoint(img, x_cut, merged[i - 1], merged[i],
                                     columns_per_s)
        cut_times.append(refined / columns_per_s)
    # refined cuts must stay ordered; fall back to the coarse ones otherwise
    if any(b <= a for a, b in zip(cut_times[:-1], cut_times[1:])):
        cut_times = [m[0] / columns_per_s for m in merged[1:]]

    intervals, breakpoints = [], []
    for i, (a, b, winner, energy) in enumerate(merged):
        onset = 0.0 if i == 0 else intervals[-1].offset
        offset = t_max if i == len(merged) - 1 else cut_times[i]
        intervals.append(TimelineInterval(onset=onset, offset=offset,
                                          kind=winner.kind, direction=winner.direction))
        if i > 0:
            breakpoints.append(BreakPoint(t=onset,
                                          from_kind=merged[i - 1][2].kind,
                                          to_kind=winner.kind,
                                          chosen_segment_energy=energy))
    return intervals, breakpoints


def write_timeline_csv(intervals: list[TimelineInterval], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("onset_s,offset_s,kind,direction,source\n")
        for iv in intervals:
            fh.write(f"{iv.onset:.6f},{iv.offset:.6f},{iv.kind},{iv.direction},radon\n")


def read_timeline_csv(path) -> list[TimelineInterval]:
    intervals = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "onset_s,offset_s,kind,direction,source":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            onset, offset, kind, direction, _src = line.strip().split(",")
            intervals.append(TimelineInterval(float(onset), float(offset), kind, direction))
    return intervals
