"""Synthetic dechirped FMCW baseband generation from scripted kinematic scenarios.

A scenario is a set of point-scatterer tracks (piecewise-linear range vs time,
optionally with a sinusoidal limb scatterer riding on top) plus complex
Gaussian receiver noise.  The dechirped model puts a single stationary
scatterer at range R into range-DFT bin R / range_resolution, and gives a
closing target positive Doppler, so the generated data doubles as a ground
truth oracle for the whole processing chain.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

C0 = 3.0e8  # propagation speed used for all range/Doppler conversions


class InvalidScenarioError(ValueError):
    """Scenario violates a structural invariant (coverage, positivity, ...)."""


@dataclass(frozen=True)
class RadarParams:
    """FMCW front-end description (defaults mirror a 25 GHz / 2 GHz K-band unit)."""

    fc: float = 25e9          # carrier frequency, Hz
    bandwidth: float = 2e9    # sweep bandwidth, Hz
    pri: float = 1e-3         # pulse repetition interval, s
    n_fast: int = 512         # fast-time samples per PRI (range bins)
    n_slow: int = 12000       # number of PRIs
    gain: float = 1.0         # antenna gain, linear
    power: float = 1.0        # transmit power, W
    loss_system: float = 1.0
    loss_atmos: float = 1.0

    def __post_init__(self):
        if self.fc <= 0 or self.bandwidth <= 0 or self.pri <= 0:
            raise ValueError("fc, bandwidth and pri must be positive")
        if self.n_fast < 2 or self.n_slow < 1:
            raise ValueError("need n_fast >= 2 and n_slow >= 1")

    @property
    def range_resolution(self) -> float:
        return C0 / (2.0 * self.bandwidth)

    @property
    def wavelength(self) -> float:
        return C0 / self.fc

    @property
    def chirp_rate(self) -> float:
        return self.bandwidth / self.pri

    @property
    def prf(self) -> float:
        return 1.0 / self.pri

    @property
    def duration(self) -> float:
        return self.n_slow * self.pri


@dataclass(frozen=True)
class MicroMotion:
    """Sinusoidal range offset modelling limb swing as one extra scatterer.

    ``speed_gate`` scales the swing with the body's radial speed (full
    amplitude above that speed, none at rest) so limbs only swing while the
    person translates; 0 disables the gating.
    """

    amplitude: float = 0.12   # m
    freq: float = 2.0         # Hz
    rcs_fraction: float = 0.35
    phase: float = 0.0        # rad
    speed_gate: float = 0.5   # m/s


@dataclass
class ScattererTrack:
    """Point scatterer with piecewise-linear range profile R(t).

    ``times`` must be strictly increasing; evaluation outside the breakpoint
    span holds the end values, so a track built for a sub-interval can be
    embedded in a longer scenario.
    """

    times: np.ndarray
    ranges: np.ndarray
    rcs: float = 1.0
    label: str = ""
    micro_motion: MicroMotion | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.ranges = np.asarray(self.ranges, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.ranges.shape:
            raise InvalidScenarioError("times and ranges must be 1-D arrays of equal length")
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise InvalidScenarioError("track needs >= 2 strictly increasing breakpoints")
        if np.any(self.ranges <= 0):
            raise InvalidScenarioError("range profile must stay positive")

    def range_at(self, t: np.ndarray) -> np.ndarray:
        return np.interp(t, self.times, self.ranges)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])


@dataclass
class Scenario:
    params: RadarParams
    tracks: list[ScattererTrack]
    noise_sigma: float = 0.0
    truth: list[tuple[str, float, float]] = field(default_factory=list)
    range_falloff: bool = False   # radar-equation 1/R^2 amplitude scaling

    def validate(self) -> None:
        dur = self.params.duration
        for tr in self.tracks:
            t0, t1 = tr.span
            if t0 > 1e-9 or t1 < dur - 1e-9:
                raise InvalidScenarioError(
                    f"track '{tr.label}' covers [{t0:.3f}, {t1:.3f}] s "
                    f"but the scenario needs [0, {dur:.3f}] s"
                )
        last = 0.0
        for label, onset, offset in self.truth:
            if offset <= onset:
                raise InvalidScenarioError(f"truth interval {label} has offset <= onset")
            if onset < last - 1e-9:
                raise InvalidScenarioError("truth intervals must be sorted and non-overlapping")
            last = offset


@dataclass
class BasebandMatrix:
    """Dechirped samples s(n, m): fast-time rows x slow-time columns."""

    data: np.ndarray  # complex64, shape (n_fast, n_slow)
    params: RadarParams

    def __post_init__(self):
        if self.data.shape != (self.params.n_fast, self.params.n_slow):
            raise ValueError("baseband shape does not match radar params")


def synthesize_baseband(scenario: Scenario, seed: int = 0) -> BasebandMatrix:
    """Generate the dechirped baseband matrix for a scenario.

    Each scatterer at range R(t_m) contributes, at fast-time sample n of
    PRI m, the phasor

        exp(j*2*pi*(2*alpha*R/C0)*n*Ts) * exp(-j*4*pi*fc*R/C0)

    so the per-column range DFT peaks at bin R / range_resolution and a
    closing target (dR/dt < 0) shows positive Doppler across slow time.
    Circular complex Gaussian noise of std ``noise_sigma`` per sample is
    added from a seeded generator; output is deterministic for fixed seed.
    """
    scenario.validate()
    p = scenario.params
    n_fast, n_slow = p.n_fast, p.n_slow
    ts = p.pri / n_fast
    t_slow = np.arange(n_slow) * p.pri
    n_idx = np.arange(n_fast)

    acc = np.zeros((n_fast, n_slow), dtype=np.complex128)
    for tr in scenario.tracks:
        r_main = tr.range_at(t_slow)
        scatterers = [(r_main, tr.rcs)]
        if tr.micro_motion is not None:
            mm = tr.micro_motion
            swing = mm.amplitude * np.sin(2 * np.pi * mm.freq * t_slow + mm.phase)
            if mm.speed_gate > 0:
                speed = np.abs(np.gradient(r_main, t_slow)) if n_slow > 1 else np.zeros(1)
                swing = swing * np.clip(speed / mm.speed_gate, 0.0, 1.0)
            r_limb = r_main + swing
            scatterers.append((r_limb, tr.rcs * mm.rcs_fraction))
        for r, amp in scatterers:
            if np.any(r <= 0):
                raise InvalidScenarioError("scatterer range went non-positive")
            if scenario.range_falloff:
                # received amplitude G*lambda*sqrt(P*sigma) / ((4pi)^1.5 R^2 ...)
                amp = (p.gain * p.wavelength * np.sqrt(p.power * amp)
                       / ((4 * np.pi) ** 1.5 * r ** 2
                          * np.sqrt(p.loss_system) * np.sqrt(p.loss_atmos)))
            beat = 2.0 * p.chirp_rate * r / C0            # beat frequency per PRI, Hz
            fast_phase = 2 * np.pi * ts * np.outer(n_idx, beat)
            slow_phase = -4 * np.pi * p.fc * r / C0
            acc += amp * np.exp(1j * (fast_phase + slow_phase[np.newaxis, :]))

    if scenario.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((n_fast, n_slow)) + 1j * rng.standard_normal((n_fast, n_slow))
        acc += scenario.noise_sigma / np.sqrt(2.0) * noise

    return BasebandMatrix(acc.astype(np.complex64), p)


def noise_sigma_for_snr(snr_db: float, rcs: float = 1.0) -> float:
    """Noise std for a baseband-sample SNR of ``snr_db`` (rcs^2 / sigma^2).

    The range DFT adds 10*log10(n_fast) dB of processing gain on top: the
    per-bin noise std after the 1/N-scaled DFT is sigma/sqrt(n_fast) while a
    point target keeps amplitude ~rcs.
    """
    return rcs / 10.0 ** (snr_db / 20.0)


# ---------------------------------------------------------------------------
# Activity kinematics
# ---------------------------------------------------------------------------

# Base radial velocity profiles are defined for a person *facing the radar*;
# positive velocity increases range.  "away" mirrors the sign.  Pulse widths
# scale with the activity window (capped so long windows keep the canonical
# shape); all values are calibration knobs, not measured quantities.
_INPLACE_KINDS = {
    #            peak m/s, width fraction of window, width cap s, pattern
    "sit":            (0.50, 0.20, 0.45, "mono"),
    "stand_from_sit": (-0.45, 0.20, 0.40, "mono"),
    "bend_standing":  (-0.35, 0.16, 0.50, "bipolar"),
    "bend_sitting":   (-0.22, 0.17, 0.42, "bipolar"),
    "fall":           (-1.70, 0.15, 0.20, "mono"),
    "stand_from_fall": (0.75, 0.18, 0.45, "mono"),
}

WALK_SPEED_DEFAULT = 1.0  # m/s
_PROFILE_DT = 0.02        # s, breakpoint grid for generated profiles

ACTIVITY_KINDS = (
    "walk", "walk_stop", "walk_fall", "start_walk", "stand_up_walk",
) + tuple(_INPLACE_KINDS)


def _gauss_pulse(t, center, peak, width):
    return peak * np.exp(-0.5 * ((t - center) / width) ** 2)


def _velocity_profile(kind, t, duration, speed):
    """Radial velocity on grid t in [0, duration] for a toward-facing person."""
    mid = duration / 2.0
    if kind == "walk":
        return np.full_like(t, -speed)
    if kind == "walk_stop":
        # constant walk blending smoothly to rest in the last quarter
        stop = 0.75 * duration
        v = -speed / (1.0 + np.exp((t - stop) / 0.12))
        return v
    if kind == "walk_fall":
        stop = 0.72 * duration
        v = -speed / (1.0 + np.exp((t - stop) / 0.10))
        v += _gauss_pulse(t, stop + 0.35, -1.7, 0.18)
        return v
    if kind == "start_walk":
        start = 0.30 * duration
        return -speed / (1.0 + np.exp(-(t - start) / 0.15))
    if kind == "stand_up_walk":
        # the rise overlaps the walk onset, briefly overshooting the gait speed
        start = 0.40 * duration
        v = -speed / (1.0 + np.exp(-(t - start) / 0.12))
        v += _gauss_pulse(t, start + 0.25, -0.55, 0.30)
        return v
    if kind in _INPLACE_KINDS:
        peak, width_frac, width_cap, pattern = _INPLACE_KINDS[kind]
        width = min(width_frac * duration, width_cap)
        if pattern == "mono":
            return _gauss_pulse(t, mid, peak, width)
        # bipolar: lean out then rebound, near-zero net displacement
        sep = 0.30 * duration
        return (_gauss_pulse(t, mid - sep, peak, width)
                + _gauss_pulse(t, mid + sep, -peak, width))
    raise ValueError(f"unknown activity kind: {kind!r}")


def merged_break_time(kind: str, duration: float) -> float:
    """Nominal breaking point inside a merged walking activity: the stop
    point for walk_stop, the fall instant for walk_fall, and the moment
    translation resumes for the walking-entry kinds."""
    if kind == "walk_stop":
        return 0.75 * duration
    if kind == "walk_fall":
        return 0.72 * duration + 0.35
    if kind == "start_walk":
        return 0.30 * duration
    if kind == "stand_up_walk":
        return 0.40 * duration
    raise ValueError(f"{kind!r} is not a merged walking kind")


def build_activity_profile(
    kind: str,
    start: float,
    duration: float,
    start_range: float,
    direction: str = "toward",
    speed: float = WALK_SPEED_DEFAULT,
    rcs: float = 1.0,
    label: str = "",
) -> ScattererTrack:
    """Build a scatterer track for one activity over [start, start+duration].

    Walking kinds produce a range ramp with a limb micro-motion scatterer;
    in-place kinds produce a mean-range-preserving velocity pulse whose peak
    Doppler and duration are kind-specific (a fall is short and fast, a bend
    long and slow), with net range change well under a metre.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if direction not in ("toward", "away"):
        raise ValueError("direction must be 'toward' or 'away'")
    t = np.arange(0.0, duration + _PROFILE_DT / 2, _PROFILE_DT)
    v = _velocity_profile(kind, t, duration, speed)
    if direction == "away":
        v = -v
    r = start_range + np.concatenate(([0.0], np.cumsum((v[1:] + v[:-1]) / 2.0 * np.diff(t))))
    micro = None
    if kind in ("walk", "walk_stop", "walk_fall", "start_walk", "stand_up_walk"):
        micro = MicroMotion()
    return ScattererTrack(times=t + start, ranges=r, rcs=rcs,
                          label=label or kind, micro_motion=micro)


def chain_activities(
    specs: list[tuple[str, float, str]],
    start_range: float,
    total_duration: float,
    speed: float = WALK_SPEED_DEFAULT,
    rcs: float = 1.0,
    sway: tuple[float, float] | None = (0.05, 0.08),
) -> tuple[ScattererTrack, list[tuple[str, float, float]]]:
    """Stitch sequential activities into one continuous person track.

    ``specs`` is a list of (kind, duration, direction); a trailing "still"
    kind holds position.  ``sway`` = (amplitude m, freq Hz) adds the slow
    postural wobble a resting torso always shows; its Doppler stays in the
    single-digit Hz range.  Returns the track (padded to cover the whole
    scenario) and truth intervals [(kind, onset, offset), ...].
    """
    times = [np.array([0.0])]
    ranges = [np.array([start_range])]
    truth = []
    t_cur, r_cur = 0.0, start_range
    for kind, dur, direction in specs:
        if kind == "still":
            t_cur += dur
            times.append(np.array([t_cur]))
            ranges.append(np.array([r_cur]))
            continue
        seg = build_activity_profile(kind, t_cur, dur, r_cur, direction, speed=speed, rcs=rcs)
        times.append(seg.times[1:])
        ranges.append(seg.ranges[1:])
        truth.append((kind, t_cur, t_cur + dur))
        t_cur += dur
        r_cur = float(seg.ranges[-1])
    if t_cur < total_duration:
        times.append(np.array([total_duration]))
        ranges.append(np.array([r_cur]))
    t_all = np.concatenate(times)
    r_all = np.concatenate(ranges)
    keep = np.concatenate(([True], np.diff(t_all) > 1e-9))
    t_all, r_all = t_all[keep], r_all[keep]
    if sway is not None:
        grid = np.arange(0.0, total_duration + _PROFILE_DT / 2, _PROFILE_DT)
        amp, freq = sway
        r_all = np.interp(grid, t_all, r_all) + amp * np.sin(2 * np.pi * freq * grid)
        t_all = grid
    track = ScattererTrack(times=t_all, ranges=r_all, rcs=rcs, label="person")
    # walking segments need the limb scatterer; approximate by attaching the
    # micro-motion to the whole track when any walking occurs (the limb is
    # present throughout a real recording anyway)
    if any(k in ("walk", "walk_stop", "walk_fall", "start_walk", "stand_up_walk")
           for k, _, _ in specs):
        track.micro_motion = MicroMotion()
    return track, truth


# ---------------------------------------------------------------------------
# Scenario JSON + IQF file formats
# ---------------------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "params": {
            "fc": sc.params.fc, "bandwidth": sc.params.bandwidth, "pri": sc.params.pri,
            "n_fast": sc.params.n_fast, "n_slow": sc.params.n_slow,
            "gain": sc.params.gain, "power": sc.params.power,
            "loss_system": sc.params.loss_system, "loss_atmos": sc.params.loss_atmos,
        },
        "tracks": [
            {
                "breakpoints": [[float(t), float(r)] for t, r in zip(tr.times, tr.ranges)],
                "rcs": tr.rcs,
                "label": tr.label,
                "micro_motion": None if tr.micro_motion is None else {
                    "amplitude": tr.micro_motion.amplitude,
                    "freq": tr.micro_motion.freq,
                    "rcs_fraction": tr.micro_motion.rcs_fraction,
                    "phase": tr.micro_motion.phase,
                },
            }
            for tr in sc.tracks
        ],
        "noise_sigma": sc.noise_sigma,
        "range_falloff": sc.range_falloff,
        "truth": [{"label": l, "onset": a, "offset": b} for l, a, b in sc.truth],
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        params = RadarParams(**d.get("params", {}))
        tracks = []
        for td in d["tracks"]:
            bp = np.asarray(td["breakpoints"], dtype=float)
            mm = td.get("micro_motion")
            tracks.append(ScattererTrack(
                times=bp[:, 0], ranges=bp[:, 1],
                rcs=float(td.get("rcs", 1.0)), label=td.get("label", ""),
                micro_motion=None if mm is None else MicroMotion(**mm),
            ))
        truth = [(x["label"], float(x["onset"]), float(x["offset"]))
                 for x in d.get("truth", [])]
        sc = Scenario(params=params, tracks=tracks,
                      noise_sigma=float(d.get("noise_sigma", 0.0)), truth=truth,
                      range_falloff=bool(d.get("range_falloff", False)))
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidScenarioError(f"malformed scenario: {exc}") from exc
    sc.validate()
    return sc


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)


_IQF_MAGIC = b"IQF1"
_IQF_HEADER = struct.Struct("<4sII ddd".replace(" ", ""))


def save_iqf(bb: BasebandMatrix, path) -> None:
    """Write baseband to the IQF1 format: header then interleaved little-endian
    float32 (I, Q) pairs, column-major by PRI."""
    p = bb.params
    header = _IQF_HEADER.pack(_IQF_MAGIC, p.n_fast, p.n_slow, p.fc, p.bandwidth, p.pri)
    cols = np.ascontiguousarray(bb.data.T)  # (n_slow, n_fast) complex64
    inter = np.empty((p.n_slow, p.n_fast, 2), dtype="<f4")
    inter[:, :, 0] = cols.real
    inter[:, :, 1] = cols.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(inter.tobytes())


def load_iqf(path) -> BasebandMatrix:
    with open(path, "rb") as fh:
        raw = fh.read(_IQF_HEADER.size)
        if len(raw) != _IQF_HEADER.size:
            raise ValueError(f"{path}: truncated IQF header")
        magic, n_fast, n_slow, fc, bw, pri = _IQF_HEADER.unpack(raw)
        if magic != _IQF_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        body = np.frombuffer(fh.read(), dtype="<f4")
    if body.size != n_fast * n_slow * 2:
        raise ValueError(f"{path}: payload size mismatch")
    inter = body.reshape(n_slow, n_fast, 2)
    data = (inter[:, :, 0] + 1j * inter[:, :, 1]).astype(np.complex64).T
    params = RadarParams(fc=fc, bandwidth=bw, pri=pri, n_fast=int(n_fast), n_slow=int(n_slow))
    return BasebandMatrix(np.ascontiguousarray(data), params)


def with_duration(params: RadarParams, duration: float) -> RadarParams:
    """Same radar, different recording length (rounded to whole PRIs)."""
    return replace(params, n_slow=int(round(duration / params.pri)))
