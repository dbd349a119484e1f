"""Acceptance gate: one test per criterion, each timed against its budget
and reporting a pass/fail line.  Run with -s to see the lines."""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from adlradar import cli, ethogram, features, pbc, preprocess, radon, rdmap, sim

import corpus
import scenarios
from oracles import area_open_oracle

CLASS_ORDER = list(corpus.CLASS_TEMPLATES)


@contextmanager
def criterion(number, description, budget_s):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[FAIL] criterion {number}: {description} "
              f"({time.perf_counter() - start:.1f} s)")
        raise
    elapsed = time.perf_counter() - start
    print(f"[PASS] criterion {number}: {description} ({elapsed:.1f} s)")
    assert elapsed < budget_s, f"criterion {number} exceeded {budget_s} s budget"


_CORPUS_CACHE: dict = {}


def trained_corpus():
    """30 snippets per class; first 20 of each train the fusion model.
    Built once, inside whichever criterion needs it first, so its cost is
    charged against that criterion's budget."""
    if not _CORPUS_CACHE:
        snippets = corpus.build_corpus(per_class=30)
        train, test = corpus.split_corpus(snippets, 20)
        model = features.train_model(train, d_md=14, d_rm=4)
        _CORPUS_CACHE["model"] = model
        _CORPUS_CACHE["train"] = train
        _CORPUS_CACHE["test"] = test
    return _CORPUS_CACHE["model"], _CORPUS_CACHE["train"], _CORPUS_CACHE["test"]


def test_criterion_1_range_resolution():
    with criterion(1, "range resolution 7.5 cm and single-scatterer "
                      "localization within +-1 bin over 100 ranges", 5.0):
        params = sim.RadarParams(n_fast=512, n_slow=2)
        assert params.range_resolution == 0.075  # exact with B = 2 GHz
        rng = np.random.default_rng(42)
        for _ in range(100):
            r = rng.uniform(1.0, 18.0)
            track = sim.ScattererTrack(times=[0.0, params.duration], ranges=[r, r])
            bb = sim.synthesize_baseband(sim.Scenario(params, [track]))
            spectrum = np.abs(np.fft.fft(bb.data[:, 0].astype(np.complex128)))
            assert abs(int(np.argmax(spectrum)) - r / 0.075) <= 1.0


def test_criterion_2_spectrogram_calibration():
    with criterion(2, "93.75 % window overlap and 100 Hz tone within "
                      "+-1 Doppler bin", 5.0):
        params = rdmap.StftParams(window_len=128, hop=8)
        assert params.overlap == 0.9375
        assert round(params.overlap * 100) == 94
        m = np.arange(4000)
        tone = np.exp(2j * np.pi * 0.1 * m)  # 100 Hz at PRF 1 kHz
        img = rdmap.spectrogram(tone, params, pri=1e-3)
        freqs = img.row_axis.value(np.arange(img.shape[0]))
        step = img.row_axis.step
        for k in range(img.shape[1]):
            peak = freqs[np.argmax(img.pixels[:, k])]
            assert abs(peak - 100.0) <= step


def test_criterion_3_preprocessing_suite():
    with criterion(3, "eCLEAN support/monotonicity, outlier-removal oracle "
                      "equality and idempotence, kernel-clean hand trace, "
                      "column normalization", 30.0):
        rng = np.random.default_rng(7)
        # eclean: support shrinking + monotonicity in the kept-bin count
        for _ in range(10):
            img = rng.uniform(0, 3, size=(64, 64))
            img[rng.uniform(size=img.shape) < 0.3] = 0.0
            kept = None
            for keep in (10, 20, 40, 100):
                out = preprocess.eclean(img, preprocess.CleanParams(keep_bins=keep))
                assert np.all((out != 0) <= (img != 0))
                mask = out != 0
                assert np.array_equal(out[mask], img[mask])
                if kept is not None:
                    assert np.all(kept <= mask)
                kept = mask
        # remove_outliers: flood-fill oracle equality on 50 random images
        for i in range(50):
            img = (rng.uniform(size=(48, 48)) < 0.28).astype(float)
            img *= rng.uniform(0.5, 1.5, size=img.shape)
            mp = int(rng.integers(2, 30))
            got = preprocess.remove_outliers(img, mp)
            np.testing.assert_array_equal(got, area_open_oracle(img, mp))
            np.testing.assert_array_equal(preprocess.remove_outliers(got, mp), got)
        # kernel clean: hand-traced horizontal line comes through exactly
        line = np.zeros((128, 384))
        line[70:76, :] = 0.9
        np.testing.assert_array_equal(preprocess.kernel_clean(line, 6), line)
        noisy = line.copy()
        noisy[20:23, 40:160] = 0.8
        out = preprocess.kernel_clean(noisy, 6)
        np.testing.assert_array_equal(out, line)
        # column normalization: nonzero columns peak at exactly 1
        img = rng.uniform(0.1, 5, size=(40, 50))
        img[:, 7] = 0.0
        out = preprocess.column_normalize(img)
        assert np.all(out[:, 7] == 0)
        peaks = out.max(axis=0)
        assert np.all(peaks[np.arange(50) != 7] == 1.0)


def test_criterion_4_radon_segmentation():
    with criterion(4, "breaking points within +-0.5 s on 20 scenarios, "
                      "horizontal peak at 90 deg, intersect residual", 120.0):
        # exact 90 deg peak for a horizontal line
        img = np.zeros((64, 96))
        img[40, :] = 1.0
        ri = radon.radon_transform(img)
        _, ti = np.unravel_index(np.argmax(ri.values), ri.values.shape)
        assert ri.theta_grid[ti] == 90.0
        # intersect round trip
        rng = np.random.default_rng(11)
        for _ in range(100):
            m1, m2 = rng.uniform(-2, 2, size=2)
            if abs(m1 - m2) < 1e-3:
                continue
            n1, n2 = rng.uniform(-40, 40, size=2)
            a = radon.DetectedLine(0, 0, m1, n1, "translation", 1.0)
            b = radon.DetectedLine(0, 0, m2, n2, "translation", 1.0)
            x, y = radon.intersect(a, b)
            assert abs(m1 * x + n1 - y) < 1e-9
            assert abs(m2 * x + n2 - y) < 1e-9
        # 20 randomized walk -> in-place scenarios (sample SNR >= 10 dB)
        for seed in range(20):
            scenario, t_break = scenarios.walk_then_inplace(seed=seed)
            bb = sim.synthesize_baseband(scenario, seed=seed)
            art = cli.run_pipeline(bb)
            _, breaks = art["timeline"]
            assert len(breaks) == 1, f"seed {seed}: {len(breaks)} breakpoints"
            assert abs(breaks[0].t - t_break) <= 0.5, (
                f"seed {seed}: {breaks[0].t:.2f} vs truth {t_break:.2f}")


def test_criterion_5_pbc():
    with criterion(5, "PBC onset/offset within +-0.5 s on 20 burst scenarios "
                      "and threshold rule vs labeling oracle", 60.0):
        config = cli.PipelineConfig()
        for seed in range(20):
            scenario, bursts = scenarios.inplace_bursts(seed=seed)
            bb = sim.synthesize_baseband(scenario, seed=seed)
            rm_complex = rdmap.range_map(bb)
            md = cli.process_spectrogram(bb, rm_complex, config)
            pc = pbc.power_burst(md, config.pbc)
            pcf = pbc.smooth_pbc(pc, config.pbc.smooth_extent)
            frame_rate = 1.0 / md.col_axis.step
            segs = pbc.threshold_segments(pcf, 0.03, frame_rate,
                                          config.pbc.min_duration)
            assert len(segs) == len(bursts), (
                f"seed {seed}: {len(segs)} segments vs {len(bursts)} bursts")
            for got, (a, b) in zip(segs, bursts):
                assert abs(got.onset - a) <= 0.5, f"seed {seed} onset"
                assert abs(got.offset - b) <= 0.5, f"seed {seed} offset"
            # threshold rule against a brute-force labeling oracle
            th = pcf.min() + 0.03 * (pcf.max() - pcf.min())
            active = pcf >= th
            for got in segs:
                i0 = int(round(got.onset * frame_rate))
                i1 = int(round(got.offset * frame_rate))
                assert active[i0:i1].all()
                assert i0 == 0 or not active[i0 - 1]
                assert i1 == len(active) or not active[i1]


def test_criterion_6_pca():
    with criterion(6, "H symmetric PSD, reconstruction monotone in d and "
                      "exact at full rank, projection vs brute force", 30.0):
        rng = np.random.default_rng(3)
        eta = 64
        images = [rng.standard_normal((eta, eta)) for _ in range(10)]
        stack = np.stack(images)
        mean = stack.mean(axis=0)
        h = sum((x - mean).T @ (x - mean) for x in images) / len(images)
        np.testing.assert_allclose(h, h.T, atol=1e-10)
        for _ in range(50):
            v = rng.standard_normal(eta)
            assert v @ h @ v >= -1e-9
        _, phi_full, eigvals = features.pca2d_train(images, d=eta)
        assert np.all(np.diff(eigvals) <= 1e-9)
        for x in images:
            errors = []
            for d in range(1, eta + 1):
                phi = phi_full[:, :d]
                xhat = features.reconstruct(features.project(x, phi), phi)
                errors.append(np.linalg.norm(x - xhat))
            assert all(b <= a + 1e-9 for a, b in zip(errors[:-1], errors[1:]))
            assert errors[-1] / np.linalg.norm(x) < 1e-6
        # projection equals the naive triple loop
        x = rng.standard_normal((eta, eta))
        phi = phi_full[:, :5]
        naive = np.zeros((eta, 5))
        for i in range(eta):
            for j in range(5):
                for k in range(eta):
                    naive[i, j] += x[i, k] * phi[k, j]
        np.testing.assert_allclose(features.project(x, phi), naive, atol=1e-9)


def test_criterion_7_classifier():
    with criterion(7, "15-class fused NN held-out accuracy >= 95 %, class-set "
                      "restriction, confusion dimensions for 11 configs", 300.0):
        model, train, test = trained_corpus()
        cm = features.evaluate(model, test, CLASS_ORDER)
        print(f"    held-out accuracy {cm.accuracy * 100:.1f} % "
              f"({len(test)} snippets)")
        assert cm.accuracy >= 0.95
        np.testing.assert_allclose(cm.rates.sum(axis=1), 100.0, atol=0.1)
        # restricting to the walking-state forward set never leaves the set
        for snip in test[:40]:
            vec = model.feature_vector(snip, d_md=2, d_rm=1)
            label, _ = features.nn_classify(vec, model, ("I", "II"),
                                            d_md=2, d_rm=1)
            assert label in ("I", "II")
        # confusion-matrix dimension equals the class-set size per config
        for cid, (cls_set, d_md, d_rm) in ethogram.CLASSIFIER_REGISTRY.items():
            classes = sorted(cls_set, key=ethogram.ROMAN.index)
            subset = [s for s in test if s.label in cls_set]
            cm = features.evaluate(model, subset, classes, d_md=d_md, d_rm=d_rm)
            assert cm.counts.shape == (len(cls_set), len(cls_set)), cid


def test_criterion_8_decoder():
    with criterion(8, "examples decode to truth states with a stub; real "
                      "classifier label agreement >= 90 % over 20 seeds; no "
                      "repeated in-place actions", 300.0):
        config = cli.PipelineConfig()
        # (a) perfect-classifier stub reproduces the ground-truth state traces
        for n in (1, 2, 3):
            _, segments, labels, base_states = scenarios.EXAMPLES[n]()
            stub = ethogram.make_stub_classifier(labels)
            fwd = ethogram.decode_forward(segments, stub)
            bwd = ethogram.decode_backward(segments, stub)
            assert fwd.base_trace() == base_states, f"example {n} forward"
            assert bwd.base_trace() == base_states, f"example {n} backward"
        # (b) real classifier over 20 noise seeds per example
        model, _, _ = trained_corpus()
        agree = total = 0
        for seed in range(20):
            for n in (1, 2, 3):
                scenario, segments, labels, _ = scenarios.EXAMPLES[n](seed=seed)
                bb = sim.synthesize_baseband(scenario, seed=seed)
                maps = cli.process_range_map(bb, config)
                md = cli.process_spectrogram(bb, maps["complex"], config)
                snippets = cli.segment_snippets(segments, maps["clean"], md, config)
                classify = ethogram.make_model_classifier(model, snippets)
                fwd = ethogram.decode_forward(segments, classify)
                bwd = ethogram.decode_backward(segments, classify)
                for truth, fe, be in zip(labels, fwd.events, bwd.events):
                    agree += (fe.label == truth) + (be.label == truth)
                    total += 2
                for timeline in (fwd, bwd):
                    inplace = [e.label for e in timeline.events
                               if e.segment.kind == "inplace"]
                    for a, b in zip(inplace[:-1], inplace[1:]):
                        assert a is None or a != b, "repeated in-place action"
        rate = agree / total
        print(f"    event-label agreement {rate * 100:.1f} % over {total} labels")
        assert rate >= 0.90


def test_criterion_9_pipeline_determinism(tmp_path):
    with criterion(9, "cmd_pipeline twice on one input gives byte-identical "
                      "artifacts", 120.0):
        scenario, _ = scenarios.walk_then_inplace(seed=4, snr_db=18.0)
        bb = sim.synthesize_baseband(scenario, seed=4)
        iqf = tmp_path / "input.iqf"
        sim.save_iqf(bb, iqf)
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        assert cli.main(["pipeline", str(iqf), "--out-dir", str(out1)]) == 0
        assert cli.main(["pipeline", str(iqf), "--out-dir", str(out2)]) == 0
        files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
        assert files1 == files2 and files1
        for rel in files1:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel
