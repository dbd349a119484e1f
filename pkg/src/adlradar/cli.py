"""Command-line surface tying the pipeline together.

Subcommands: simulate, pipeline, train, decode, evaluate, plot.
Exit codes: 0 ok, 1 usage, 2 IO/parse failure, 3 processing failure.

The processing helpers (``run_pipeline``, ``extract_snippet``, ...) are the
canonical composition of the library stages; tests drive them directly and
the subcommands only add file handling.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ethogram, features, pbc, preprocess, radon, rdmap, sim

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PROCESSING = 0, 1, 2, 3


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage


@dataclass
class PipelineConfig:
    range_rows: int = 256                 # range bins kept before sub-sampling
    image_rows: int = 128
    columns_per_s: float = 32.0
    bin_sum: tuple[int, int] = (10, 128)
    log_floor_db: float = rdmap.LOG_FLOOR_DB
    clean: preprocess.CleanParams = field(default_factory=preprocess.CleanParams)
    stft: rdmap.StftParams = field(default_factory=rdmap.StftParams)
    pbc: pbc.PbcParams = field(default_factory=pbc.PbcParams)
    max_lines: int = 4
    peak_threshold: float = radon.PEAK_REL_THRESHOLD
    inplace_tol_deg: float = radon.INPLACE_TOL_DEG
    capture_len: float = 2.0
    md_dynamic_range_db: float = 45.0     # receiver dynamic range on the dB spectrogram
    eta: int = features.ETA_DEFAULT
    d_md: int = features.D_MD_DEFAULT
    d_rm: int = features.D_RM_DEFAULT
    dims_by_classifier: dict = field(default_factory=dict)   # id -> (d_md, d_rm)
    margin_tau: float = 0.05
    k_neighbors: int = 1

    @staticmethod
    def from_json(path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        cfg = PipelineConfig()
        for key in ("range_rows", "image_rows", "columns_per_s", "log_floor_db",
                    "max_lines", "peak_threshold", "inplace_tol_deg", "capture_len",
                    "md_dynamic_range_db", "eta", "d_md", "d_rm", "margin_tau",
                    "k_neighbors"):
            if key in doc:
                setattr(cfg, key, doc[key])
        if "bin_sum" in doc:
            cfg.bin_sum = tuple(doc["bin_sum"])
        if "clean" in doc:
            cfg.clean = preprocess.CleanParams(**doc["clean"])
        if "stft" in doc:
            cfg.stft = rdmap.StftParams(**doc["stft"])
        if "pbc" in doc:
            raw = dict(doc["pbc"])
            for band in ("pos_band", "neg_band"):
                if band in raw:
                    raw[band] = tuple(raw[band])
            cfg.pbc = pbc.PbcParams(**raw)
        if "dims_by_classifier" in doc:
            cfg.dims_by_classifier = {}
            for cid, dims in doc["dims_by_classifier"].items():
                cid = int(cid)
                if cid not in ethogram.CLASSIFIER_REGISTRY:
                    raise ValueError(f"unknown classifier id {cid} in config")
                cfg.dims_by_classifier[cid] = tuple(dims)
        return cfg


# ---------------------------------------------------------------------------
# processing chain
# ---------------------------------------------------------------------------

def process_range_map(bb, config: PipelineConfig):
    """Baseband -> cleaned range-map images on the fixed 32 column/s grid.

    Returns a dict with the complex range map plus the 'clean' (no kernel)
    and 'kernel' (tracker output, 3x3 smoothed) images used downstream.
    """
    rm_complex = rdmap.range_map(bb)
    rm_db = rdmap.log_magnitude(rm_complex, config.log_floor_db)
    rows = min(config.range_rows, rm_db.shape[0])
    n_cols = max(2, int(round(bb.params.duration * config.columns_per_s)))
    small = rdmap.resize_array(rm_db[:rows], config.image_rows, n_cols, "subsample")
    small = small - config.log_floor_db          # floor -> 0, everything >= 0
    cleaned = preprocess.clean_range_map(small, config.clean, kernel=False)
    kernel = preprocess.kernel_clean(cleaned, config.clean.kernel_win)
    smoothed = rdmap.smooth3x3(kernel)
    row_step = rows / config.image_rows * bb.params.range_resolution
    axis_kwargs = dict(
        row_axis=rdmap.AxisSpec(step=row_step, start=0.0, unit="m"),
        col_axis=rdmap.AxisSpec(step=1.0 / config.columns_per_s, start=0.0, unit="s"),
        kind="rangemap",
    )
    return {
        "complex": rm_complex,
        "clean": rdmap.RadarImage(pixels=cleaned, **axis_kwargs),
        "kernel": rdmap.RadarImage(pixels=smoothed, **axis_kwargs),
    }


def process_spectrogram(bb, rm_complex, config: PipelineConfig):
    """Complex range map -> cleaned micro-Doppler spectrogram image.

    The dB spectrogram is clipped to ``md_dynamic_range_db`` below its peak
    before cleaning: a real receiver's quantization floors the image there,
    while unquantized synthetic noise fades arbitrarily deep and would
    stretch the histogram the threshold is computed over.
    """
    r1, r2 = config.bin_sum
    v = rdmap.range_bin_sum(rm_complex, r1, r2)
    raw = rdmap.spectrogram(v, config.stft, pri=bb.params.pri)
    db = rdmap.log_magnitude(raw.pixels, config.log_floor_db)
    floor = db.max() - config.md_dynamic_range_db
    db = np.maximum(db, floor) - floor
    cleaned = preprocess.clean_spectrogram(db, config.clean)
    return rdmap.RadarImage(pixels=cleaned, row_axis=raw.row_axis,
                            col_axis=raw.col_axis, kind="spectrogram")


def extract_snippet(rm_img, md_img, capture, eta=128, recenter=True) -> features.Snippet:
    """Cut the capture window out of the cleaned images and square it.

    Both crops are bilinearly resized to eta x eta; the range-map crop is
    first shifted so the target's energy-weighted mean range bin sits
    mid-image, removing the range bias from the classifier input.
    """
    t0, t1 = capture

    def crop(img):
        step = img.col_axis.step
        c0 = max(0, int(np.floor((t0 - img.col_axis.start) / step)))
        c1 = min(img.shape[1], int(np.ceil((t1 - img.col_axis.start) / step)) + 1)
        if c1 - c0 < 2:
            raise ValueError(f"capture [{t0}, {t1}] s too narrow for the image grid")
        return img.pixels[:, c0:c1]

    md = rdmap.resize_array(crop(md_img), eta, eta, "linear")
    rm = crop(rm_img)
    shifted = False
    if recenter:
        weights = rm.sum(axis=1)
        total = weights.sum()
        if total > 0:
            mean_row = float((weights * np.arange(rm.shape[0])).sum() / total)
            shift = rm.shape[0] // 2 - int(round(mean_row))
            if shift:
                moved = np.zeros_like(rm)
                src0, src1 = max(0, -shift), min(rm.shape[0], rm.shape[0] - shift)
                moved[src0 + shift:src1 + shift, :] = rm[src0:src1, :]
                rm = moved
            shifted = True
    rm = rdmap.resize_array(rm, eta, eta, "linear")
    return features.Snippet(md=md, rm=rm, center_shifted=shifted)


def segment_snippets(segments, rm_img, md_img, config: PipelineConfig):
    """One snippet per classifiable segment (None for plain walking spans)."""
    out = []
    for seg in segments:
        if seg.source == "radon":
            out.append(None)
        else:
            out.append(extract_snippet(rm_img, md_img, seg.capture, eta=config.eta))
    return out


def run_pipeline(bb, config: PipelineConfig | None = None) -> dict:
    """Full chain from baseband to motion segments and snippets."""
    config = config or PipelineConfig()
    art: dict = {"config": config}

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineError(name, exc) from exc

    maps = stage("range-map", lambda: process_range_map(bb, config))
    art.update(rangemap_clean=maps["clean"], rangemap_kernel=maps["kernel"])

    md = stage("spectrogram", lambda: process_spectrogram(bb, maps["complex"], config))
    art["spectrogram"] = md

    def radon_stage():
        ri = radon.radon_transform(maps["kernel"].pixels)
        lines = radon.find_lines(ri, max_lines=config.max_lines,
                                 rel_threshold=config.peak_threshold,
                                 inplace_tol=config.inplace_tol_deg)
        if not lines:
            raise ValueError("no line structure detected in the range map")
        timeline = radon.build_timeline(maps["kernel"].pixels, lines,
                                        columns_per_s=config.columns_per_s)
        return ri, lines, timeline

    ri, lines, timeline = stage("radon", radon_stage)
    art.update(radon_image=ri, lines=lines, timeline=timeline)

    def pbc_stage():
        pc = pbc.power_burst(md, config.pbc)
        pcf = pbc.smooth_pbc(pc, config.pbc.smooth_extent)
        frame_rate = 1.0 / md.col_axis.step
        bursts = pbc.threshold_segments(pcf, config.pbc.threshold_frac,
                                        frame_rate, config.pbc.min_duration)
        return pc, pcf, bursts

    pc, pcf, bursts = stage("pbc", pbc_stage)
    art.update(pbc_raw=pc, pbc_filtered=pcf, pbc_bursts=bursts)

    segments = stage("merge", lambda: pbc.merge_events(timeline, bursts,
                                                       capture_len=config.capture_len))
    art["segments"] = segments
    art["snippets"] = stage("snippets", lambda: segment_snippets(
        segments, maps["clean"], md, config))
    return art


def write_pipeline_artifacts(art: dict, out_dir, figures: bool = True) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config: PipelineConfig = art["config"]
    written = []

    def emit(name, fn):
        path = out_dir / name
        fn(path)
        written.append(str(path))

    emit("rangemap.pgm", lambda p: rdmap.save_pgm(art["rangemap_clean"].pixels, p))
    emit("rangemap_kernel.pgm", lambda p: rdmap.save_pgm(art["rangemap_kernel"].pixels, p))
    emit("spectrogram.pgm", lambda p: rdmap.save_pgm(art["spectrogram"].pixels, p))
    emit("radon.pgm", lambda p: rdmap.save_pgm(art["radon_image"].values, p))
    emit("timeline.csv", lambda p: radon.write_timeline_csv(art["timeline"][0], p))
    frame_rate = 1.0 / art["spectrogram"].col_axis.step
    emit("pbc.csv", lambda p: pbc.write_pbc_csv(art["pbc_raw"], art["pbc_filtered"],
                                                frame_rate, p))
    emit("segments.csv", lambda p: pbc.write_segments_csv(art["segments"], p))

    snip_dir = out_dir / "snippets"
    snip_dir.mkdir(exist_ok=True)
    for i, snip in enumerate(art["snippets"]):
        if snip is None:
            continue
        for part in ("md", "rm"):
            img = rdmap.RadarImage(
                pixels=getattr(snip, part),
                row_axis=rdmap.AxisSpec(1.0, 0.0), col_axis=rdmap.AxisSpec(1.0, 0.0),
                kind="spectrogram" if part == "md" else "rangemap")
            path = snip_dir / f"seg_{i:03d}.{part}.rdm"
            rdmap.save_rdm(img, path)
            written.append(str(path))

    if figures:
        from . import plots
        emit("rangemap.png", lambda p: plots.save_radar_image(
            art["rangemap_clean"], p, title="cleaned range map"))
        emit("spectrogram.png", lambda p: plots.save_radar_image(
            art["spectrogram"], p, title="cleaned micro-Doppler spectrogram"))
        emit("radon.png", lambda p: plots.save_radon_image(
            art["radon_image"], p, lines=art["lines"]))
        pcf = art["pbc_filtered"]
        threshold = pcf.min() + config.pbc.threshold_frac * (pcf.max() - pcf.min())
        t = np.arange(len(pcf)) / frame_rate
        emit("pbc.png", lambda p: plots.save_pbc_curve(
            t, art["pbc_raw"], pcf, threshold, art["pbc_bursts"], p))
        emit("timeline.png", lambda p: plots.save_timeline(art["segments"], p))
    return written


# ---------------------------------------------------------------------------
# snippet datasets (RDM1 pairs named <label>__<tag>.{md,rm}.rdm)
# ---------------------------------------------------------------------------

def save_snippet_pair(snippet: features.Snippet, directory, tag: str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for part in ("md", "rm"):
        img = rdmap.RadarImage(
            pixels=getattr(snippet, part),
            row_axis=rdmap.AxisSpec(1.0, 0.0), col_axis=rdmap.AxisSpec(1.0, 0.0),
            kind="spectrogram" if part == "md" else "rangemap")
        rdmap.save_rdm(img, directory / f"{snippet.label}__{tag}.{part}.rdm")


def load_snippet_dataset(directory) -> list[features.Snippet]:
    directory = Path(directory)
    snippets = []
    for md_path in sorted(directory.glob("*.md.rdm")):
        rm_path = md_path.with_name(md_path.name.replace(".md.rdm", ".rm.rdm"))
        if not rm_path.exists():
            raise FileNotFoundError(f"missing range-map half for {md_path.name}")
        label = md_path.name.split("__", 1)[0]
        snippets.append(features.Snippet(md=rdmap.load_rdm(md_path).pixels,
                                         rm=rdmap.load_rdm(rm_path).pixels,
                                         label=label, center_shifted=True))
    if not snippets:
        raise FileNotFoundError(f"no snippet pairs in {directory}")
    return snippets


def load_segment_snippets(directory, n_segments: int, eta: int):
    """Snippets written by the pipeline, indexed seg_NNN; None where missing."""
    directory = Path(directory)
    out = []
    for i in range(n_segments):
        md_path = directory / f"seg_{i:03d}.md.rdm"
        rm_path = directory / f"seg_{i:03d}.rm.rdm"
        if md_path.exists() and rm_path.exists():
            out.append(features.Snippet(md=rdmap.load_rdm(md_path).pixels,
                                        rm=rdmap.load_rdm(rm_path).pixels))
        else:
            out.append(None)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        scenario = sim.load_scenario(args.scenario)
    except (OSError, json.JSONDecodeError, sim.InvalidScenarioError, ValueError) as exc:
        print(f"simulate: cannot load scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        bb = sim.synthesize_baseband(scenario, seed=args.seed)
        sim.save_iqf(bb, args.out)
    except sim.InvalidScenarioError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    except OSError as exc:
        print(f"simulate: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out} ({bb.params.n_fast} x {bb.params.n_slow} samples)")
    if scenario.truth:
        print("truth:")
        print("  label            onset_s  offset_s")
        for label, onset, offset in scenario.truth:
            print(f"  {label:<16} {onset:7.2f}  {offset:8.2f}")
    return EXIT_OK


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def cmd_pipeline(args) -> int:
    try:
        config = _load_config(args)
        bb = sim.load_iqf(args.input)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"pipeline: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        art = run_pipeline(bb, config)
        written = write_pipeline_artifacts(art, args.out_dir,
                                           figures=not args.no_figures)
    except PipelineError as exc:
        print(f"pipeline: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    print(f"wrote {len(written)} artifacts to {args.out_dir}")
    for seg in art["segments"]:
        print(f"  {seg.onset:7.2f}-{seg.offset:7.2f} s  {seg.kind:<12} "
              f"{seg.direction:<8} {seg.source}")
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        snippets = load_snippet_dataset(args.dataset)
    except (OSError, ValueError) as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_IO
    counts: dict[str, int] = {}
    for s in snippets:
        counts[s.label] = counts.get(s.label, 0) + 1
    if args.classes:
        wanted = args.classes.split(",")
        missing = [c for c in wanted if counts.get(c, 0) == 0]
        if missing:
            print(f"train: classes with zero samples: {', '.join(missing)}",
                  file=sys.stderr)
            return EXIT_PROCESSING
    d_md, d_rm = (int(x) for x in args.dims.split(","))
    try:
        model = features.train_model(snippets, d_md=d_md, d_rm=d_rm)
    except ValueError as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    features.save_model(model, args.out)
    print(f"trained on {len(snippets)} snippets, eta={model.eta}, "
          f"d_md={d_md}, d_rm={d_rm}")
    for label in sorted(counts, key=lambda l: ethogram.ROMAN.index(l)
                        if l in ethogram.ROMAN else 99):
        print(f"  {label:<6} {counts[label]} samples")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_decode(args) -> int:
    if args.direction not in ("forward", "backward", "both"):
        print(f"decode: unknown direction {args.direction!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = _load_config(args)
        segments = pbc.read_segments_csv(args.segments)
        model = features.load_model(args.model)
        snippets = load_segment_snippets(args.snippets, len(segments), config.eta)
    except (OSError, ValueError) as exc:
        print(f"decode: {exc}", file=sys.stderr)
        return EXIT_IO
    classify = ethogram.make_model_classifier(model, snippets, k=config.k_neighbors,
                                              dims_by_id=config.dims_by_classifier)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fwd = bwd = None
    try:
        if args.direction in ("forward", "both"):
            fwd = ethogram.decode_forward(segments, classify, margin_tau=config.margin_tau)
        if args.direction in ("backward", "both"):
            bwd = ethogram.decode_backward(segments, classify, margin_tau=config.margin_tau)
    except ethogram.DecodeInconsistencyError as exc:
        print(f"decode: inconsistency: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    ethogram.write_decoded_csv(fwd, bwd, out_dir / "decoded.csv")
    print(f"wrote {out_dir / 'decoded.csv'}")
    if fwd and bwd:
        report = ethogram.reconcile(fwd, bwd)
        ethogram.write_reconcile_csv(report, out_dir / "reconcile.csv")
        print(f"wrote {out_dir / 'reconcile.csv'} "
              f"(agreement {report.agreement_rate * 100:.1f} %)")
    ref = fwd or bwd
    for ev in ref.events:
        label = ev.label if ev.label is not None else "(unclassified)"
        print(f"  {ev.segment.onset:7.2f}-{ev.segment.offset:7.2f} s  "
              f"{label:<14} -> {ev.state_after}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        model = features.load_model(args.model)
        snippets = load_snippet_dataset(args.dataset)
    except (OSError, ValueError) as exc:
        print(f"evaluate: {exc}", file=sys.stderr)
        return EXIT_IO
    config = _load_config(args)
    if args.classifier is not None:
        if args.classifier not in ethogram.CLASSIFIER_REGISTRY:
            print(f"evaluate: unknown classifier id {args.classifier}", file=sys.stderr)
            return EXIT_USAGE
        cls_set, d_md, d_rm = ethogram.CLASSIFIER_REGISTRY[args.classifier]
        d_md, d_rm = min(d_md, model.d_md), min(d_rm, model.d_rm)
        classes = sorted(cls_set, key=ethogram.ROMAN.index)
    else:
        classes = (args.classes.split(",") if args.classes
                   else sorted({s.label for s in snippets},
                               key=lambda l: ethogram.ROMAN.index(l)
                               if l in ethogram.ROMAN else 99))
        d_md = d_rm = None
    test = [s for s in snippets if s.label in classes]
    if not test:
        print("evaluate: no snippets for the requested classes", file=sys.stderr)
        return EXIT_PROCESSING
    try:
        cm = features.evaluate(model, test, classes, k=config.k_neighbors,
                               d_md=d_md, d_rm=d_rm)
    except ValueError as exc:
        print(f"evaluate: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cm.to_csv(out_dir / "confusion.csv")
    from . import plots
    plots.save_confusion(cm, out_dir / "confusion.png")
    print(f"accuracy {cm.accuracy * 100:.1f} % over {len(test)} snippets, "
          f"{len(classes)} classes")
    print(f"wrote {out_dir / 'confusion.csv'} and confusion.png")
    return EXIT_OK


_STAGES = ("normalize", "eclean", "outliers", "kernel", "smooth")


def cmd_stage(args) -> int:
    """Apply one cleaning stage to an RDM1 matrix (pipeline debugging)."""
    if args.stage not in _STAGES:
        print(f"stage: unknown stage {args.stage!r} (choose from {', '.join(_STAGES)})",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        config = _load_config(args)
        img = rdmap.load_rdm(args.input)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"stage: {exc}", file=sys.stderr)
        return EXIT_IO
    clean = config.clean
    try:
        if args.stage == "normalize":
            out = preprocess.column_normalize(img.pixels)
        elif args.stage == "eclean":
            mode = "spectrogram" if img.kind == "spectrogram" else "rangemap"
            out = preprocess.eclean(img.pixels, clean, mode)
        elif args.stage == "outliers":
            min_px = (clean.outlier_min_pixels_md if img.kind == "spectrogram"
                      else clean.outlier_min_pixels_rm)
            out = preprocess.remove_outliers(img.pixels, min_px)
        elif args.stage == "kernel":
            out = preprocess.kernel_clean(img.pixels, clean.kernel_win)
        else:
            out = rdmap.smooth3x3(img.pixels)
    except ValueError as exc:
        print(f"stage: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    rdmap.save_rdm(rdmap.RadarImage(pixels=out, row_axis=img.row_axis,
                                    col_axis=img.col_axis, kind=img.kind), args.out)
    print(f"{args.stage}: {args.input} -> {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        config = _load_config(args)
        bb = sim.load_iqf(args.input)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        art = run_pipeline(bb, config)
    except PipelineError as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from . import plots
    frame_rate = 1.0 / art["spectrogram"].col_axis.step
    pcf = art["pbc_filtered"]
    threshold = pcf.min() + config.pbc.threshold_frac * (pcf.max() - pcf.min())
    t = np.arange(len(pcf)) / frame_rate
    paths = [
        plots.save_radar_image(art["rangemap_clean"], out_dir / "rangemap.png",
                               title="cleaned range map"),
        plots.save_radar_image(art["spectrogram"], out_dir / "spectrogram.png",
                               title="cleaned micro-Doppler spectrogram"),
        plots.save_radon_image(art["radon_image"], out_dir / "radon.png",
                               lines=art["lines"]),
        plots.save_pbc_curve(t, art["pbc_raw"], pcf, threshold,
                             art["pbc_bursts"], out_dir / "pbc.png"),
        plots.save_timeline(art["segments"], out_dir / "timeline.png"),
    ]
    print(f"wrote {len(paths)} figures to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adlradar",
                     description="FMCW radar motion-sequence analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[], help="synthesize baseband from a scenario")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("out", help="output IQF file")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("pipeline", help="range map, spectrogram, segmentation")
    p.add_argument("input", help="input IQF file")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--no-figures", action="store_true",
                   help="skip the PNG report figures")
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("train", help="train the 2-D PCA fusion model")
    p.add_argument("dataset", help="directory of <label>__<tag>.{md,rm}.rdm pairs")
    p.add_argument("out", help="output model file")
    p.add_argument("--dims", default="14,4", help="d_md,d_rm (default 14,4)")
    p.add_argument("--classes", help="comma list that must all have samples")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("decode", help="ethogram-constrained sequence decoding")
    p.add_argument("segments", help="segments CSV from the pipeline")
    p.add_argument("snippets", help="snippet directory from the pipeline")
    p.add_argument("model", help="trained model file")
    p.add_argument("--direction", default="both",
                   help="forward | backward | both")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("evaluate", help="confusion matrix on a labeled dataset")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--classifier", type=int,
                   help="registry id 1-11 selecting class set and dims")
    p.add_argument("--classes", help="explicit comma list of classes")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("plot", help="render the report figures only")
    p.add_argument("input", help="input IQF file")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("stage", help="apply one cleaning stage to an RDM1 file")
    p.add_argument("stage", help="|".join(_STAGES))
    p.add_argument("input", help="input RDM1 matrix")
    p.add_argument("out", help="output RDM1 matrix")
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(fn=cmd_stage)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
