"""Range map and micro-Doppler spectrogram computation.

The range map is the per-PRI DFT (1/N scaled) of the baseband matrix; the
micro-Doppler signature is the squared-magnitude STFT of the slow-time
vector obtained by summing a band of range bins.  Log scaling and the two
resizing flavours (uniform sub-sampling for the Radon input, bilinear for
classifier snippets) live here as well, together with the RDM1 matrix file
format and PGM export used for visual inspection.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

RANGE_BIN_LO = 10     # default summation band: 0.75 m ...
RANGE_BIN_HI = 128    # ... 9.6 m at 7.5 cm resolution
LOG_FLOOR_DB = -120.0


@dataclass(frozen=True)
class AxisSpec:
    step: float    # physical units per bin
    start: float   # physical value of index 0
    unit: str = ""

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("axis step must be positive")

    def value(self, idx):
        return self.start + self.step * np.asarray(idx, dtype=float)

    def index(self, value):
        return (np.asarray(value, dtype=float) - self.start) / self.step


@dataclass
class RadarImage:
    """Real-valued 2-D image with calibrated axes.

    kind 'rangemap': rows are range bins; kind 'spectrogram': rows are
    Doppler bins with zero frequency at the centre.
    """

    pixels: np.ndarray
    row_axis: AxisSpec
    col_axis: AxisSpec
    kind: str = "rangemap"

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be 2-D")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixels must be finite")
        if self.kind not in ("rangemap", "spectrogram"):
            raise ValueError(f"unknown image kind {self.kind!r}")

    @property
    def shape(self):
        return self.pixels.shape


@dataclass(frozen=True)
class StftParams:
    window_len: int = 128   # L
    hop: int = 8            # samples between frames (93.75 % overlap at L=128)
    window: str = "hann"

    def __post_init__(self):
        if not (1 <= self.hop <= self.window_len):
            raise ValueError("need 1 <= hop <= window_len")

    @property
    def overlap(self) -> float:
        return (self.window_len - self.hop) / self.window_len

    def taper(self) -> np.ndarray:
        if self.window == "hann":
            return np.hanning(self.window_len)
        if self.window in ("rect", "boxcar"):
            return np.ones(self.window_len)
        raise ValueError(f"unknown window {self.window!r}")


def range_map(bb) -> np.ndarray:
    """Per-column DFT of the baseband: out[p, m] = (1/N) sum_n s(n,m) e^{-j2pi pn/N}."""
    data = np.asarray(bb.data, dtype=np.complex128)
    return np.fft.fft(data, axis=0) / data.shape[0]


def range_bin_sum(rm: np.ndarray, r1: int = RANGE_BIN_LO, r2: int = RANGE_BIN_HI) -> np.ndarray:
    """Sum the complex range map over bins r1..r2 inclusive -> slow-time vector V(m)."""
    n_bins = rm.shape[0]
    if not (0 <= r1 <= r2 < n_bins):
        raise ValueError(f"bin range [{r1}, {r2}] out of bounds for {n_bins} bins")
    return rm[r1:r2 + 1, :].sum(axis=0)


def spectrogram(v: np.ndarray, params: StftParams = StftParams(), pri: float = 1e-3) -> RadarImage:
    """Squared-magnitude STFT of the slow-time vector.

    Frames are centred every ``hop`` samples starting at sample 0, with the
    sequence zero-padded by half a window on both sides so every slow-time
    sample is covered.  Rows are fftshifted so zero Doppler sits mid-image;
    the Doppler axis spans +-PRF/2 and the frame rate is 1/(hop*PRI).
    """
    v = np.asarray(v, dtype=np.complex128)
    L, hop = params.window_len, params.hop
    if v.size < L:
        raise ValueError(f"need at least {L} samples, got {v.size}")
    w = params.taper()
    half = L // 2
    padded = np.concatenate([np.zeros(half, v.dtype), v, np.zeros(L, v.dtype)])
    n_frames = int(np.ceil(v.size / hop))
    idx = np.arange(L)[np.newaxis, :] + hop * np.arange(n_frames)[:, np.newaxis]
    frames = padded[idx] * w[np.newaxis, :]
    spect = np.abs(np.fft.fft(frames, axis=1)) ** 2
    spect = np.fft.fftshift(spect, axes=1).T  # (L doppler bins, n_frames)
    dop_step = 1.0 / (L * pri)
    return RadarImage(
        pixels=spect,
        row_axis=AxisSpec(step=dop_step, start=-half * dop_step, unit="Hz"),
        col_axis=AxisSpec(step=hop * pri, start=0.0, unit="s"),
        kind="spectrogram",
    )


def log_magnitude(x: np.ndarray, floor_db: float = LOG_FLOOR_DB) -> np.ndarray:
    """10*log10(|x|) with exact zeros mapped to ``floor_db``."""
    mag = np.abs(np.asarray(x))
    out = np.full(mag.shape, floor_db, dtype=float)
    nz = mag > 0
    np.log10(mag, out=out, where=nz)
    out[nz] = np.maximum(10.0 * out[nz], floor_db)
    return out


def _subsample_indices(src: int, dst: int) -> np.ndarray:
    idx = np.rint(np.arange(dst) * (src / dst)).astype(int)
    return np.minimum(idx, src - 1)


def _linear_positions(src: int, dst: int) -> np.ndarray:
    if dst == 1:
        return np.array([0.0])
    return np.arange(dst) * ((src - 1) / (dst - 1))


def resize_array(a: np.ndarray, rows: int, cols: int, method: str = "subsample") -> np.ndarray:
    """Resize a matrix by uniform sub-sampling or separable linear interpolation."""
    if rows < 1 or cols < 1:
        raise ValueError("target shape must be at least 1x1")
    a = np.asarray(a, dtype=float)
    if method == "subsample":
        return a[np.ix_(_subsample_indices(a.shape[0], rows),
                        _subsample_indices(a.shape[1], cols))].copy()
    if method != "linear":
        raise ValueError(f"unknown resize method {method!r}")
    out = a
    for axis, dst in ((0, rows), (1, cols)):
        pos = _linear_positions(out.shape[axis], dst)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, out.shape[axis] - 1)
        frac = pos - lo
        moved = np.moveaxis(out, axis, 0)
        interp = moved[lo] * (1.0 - frac)[:, np.newaxis] + moved[hi] * frac[:, np.newaxis]
        out = np.moveaxis(interp, 0, axis)
    return out


def resize(img: RadarImage, rows: int, cols: int, method: str = "subsample") -> RadarImage:
    """Resize an image, rescaling the axis metadata consistently."""
    pixels = resize_array(img.pixels, rows, cols, method)
    r0, c0 = img.shape

    def scale(axis: AxisSpec, src: int, dst: int) -> AxisSpec:
        if method == "subsample":
            factor = src / dst
        else:
            factor = (src - 1) / (dst - 1) if dst > 1 else float(src)
        return AxisSpec(step=axis.step * factor, start=axis.start, unit=axis.unit)

    return RadarImage(pixels=pixels,
                      row_axis=scale(img.row_axis, r0, rows),
                      col_axis=scale(img.col_axis, c0, cols),
                      kind=img.kind)


def smooth3x3(a: np.ndarray) -> np.ndarray:
    """3x3 unit-coefficient smoothing (zero padded at the borders)."""
    a = np.asarray(a, dtype=float)
    padded = np.pad(a, 1)
    out = np.zeros_like(a)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            out += padded[dr:dr + a.shape[0], dc:dc + a.shape[1]]
    return out


# ---------------------------------------------------------------------------
# RDM1 matrix file and PGM export
# ---------------------------------------------------------------------------

_RDM_MAGIC = b"RDM1"
_RDM_HEADER = struct.Struct("<4sIIBdd")
_KIND_CODE = {"rangemap": 0, "spectrogram": 1}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


def save_rdm(img: RadarImage, path) -> None:
    """Write an image as RDM1: magic, u32 rows/cols, u8 kind, f64 axis steps,
    then float32 little-endian row-major pixels."""
    rows, cols = img.shape
    header = _RDM_HEADER.pack(_RDM_MAGIC, rows, cols, _KIND_CODE[img.kind],
                              img.row_axis.step, img.col_axis.step)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img.pixels, dtype="<f4").tobytes())


def load_rdm(path) -> RadarImage:
    with open(path, "rb") as fh:
        raw = fh.read(_RDM_HEADER.size)
        if len(raw) != _RDM_HEADER.size:
            raise ValueError(f"{path}: truncated RDM header")
        magic, rows, cols, kind_code, row_step, col_step = _RDM_HEADER.unpack(raw)
        if magic != _RDM_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        body = np.frombuffer(fh.read(), dtype="<f4")
    if body.size != rows * cols:
        raise ValueError(f"{path}: payload size mismatch")
    kind = _KIND_NAME.get(kind_code)
    if kind is None:
        raise ValueError(f"{path}: unknown image kind code {kind_code}")
    # Doppler axes are centred by convention; range/time axes start at zero.
    row_start = -(rows // 2) * row_step if kind == "spectrogram" else 0.0
    return RadarImage(
        pixels=body.reshape(rows, cols).astype(float),
        row_axis=AxisSpec(step=row_step, start=row_start,
                          unit="Hz" if kind == "spectrogram" else "m"),
        col_axis=AxisSpec(step=col_step, start=0.0, unit="s"),
        kind=kind,
    )


def save_pgm(a: np.ndarray, path, sidecar: bool = True) -> None:
    """Export as 8-bit binary PGM with min-max scaling; the scale goes to a
    '<path>.scale.txt' sidecar so the mapping stays recoverable."""
    a = np.asarray(a, dtype=float)
    lo, hi = float(a.min()), float(a.max())
    span = hi - lo
    scaled = np.zeros_like(a) if span == 0 else (a - lo) / span * 255.0
    img = np.rint(scaled).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    if sidecar:
        with open(f"{path}.scale.txt", "w", encoding="ascii") as fh:
            fh.write(f"min {lo!r}\nmax {hi!r}\n")


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows = (int(x) for x in parts[1].split())
    if parts[2] != b"255":
        raise ValueError(f"{path}: unsupported maxval")
    pix = np.frombuffer(parts[3][:rows * cols], dtype=np.uint8)
    if pix.size != rows * cols:
        raise ValueError(f"{path}: truncated pixel data")
    return pix.reshape(rows, cols).astype(float)
