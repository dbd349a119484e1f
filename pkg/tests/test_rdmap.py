import numpy as np
import pytest

from adlradar import rdmap, sim

from conftest import constant_velocity_scenario, stationary_scenario
from oracles import naive_stft_power


def test_range_map_matches_dft_basis_vector():
    n = 64
    col = np.exp(-2j * np.pi * 40 * np.arange(n) / n)

    class FakeBB:
        data = np.tile(col[:, None], (1, 3))

    rm = rdmap.range_map(FakeBB)
    assert rm.shape == (64, 3)
    for m in range(3):
        assert np.argmax(np.abs(rm[:, m])) == n - 40  # e^{-j..} peaks at N-p under forward DFT
    # and the +40 basis vector peaks at 40 with magnitude ~1 from the 1/N scale
    FakeBB.data = np.tile(np.exp(2j * np.pi * 40 * np.arange(n) / n)[:, None], (1, 2))
    rm = rdmap.range_map(FakeBB)
    assert np.argmax(np.abs(rm[:, 0])) == 40
    assert np.abs(rm[40, 0]) == pytest.approx(1.0)


def test_range_map_zero_input():
    class FakeBB:
        data = np.zeros((32, 8), dtype=complex)

    assert not rdmap.range_map(FakeBB).any()


def test_range_map_walk_ridge_descends(small_params):
    # 3 m -> 1 m over the recording: per-column argmax goes 40 -> 13-ish
    p = sim.RadarParams(n_fast=256, n_slow=2000)
    sc = constant_velocity_scenario(p, r0=3.0, velocity=1.0, noise_sigma=0.0)
    bb = sim.synthesize_baseband(sc)
    rm = rdmap.range_map(bb)
    argmax = np.abs(rm).argmax(axis=0)
    assert abs(argmax[0] - 40) <= 1
    assert abs(argmax[-1] - (3.0 - 1.0 * p.duration) / 0.075) <= 1
    assert np.all(np.diff(argmax.astype(int)) <= 0)


def test_range_bin_sum_selects_rows():
    rm = np.arange(24, dtype=complex).reshape(6, 4)
    np.testing.assert_array_equal(rdmap.range_bin_sum(rm, 5, 5), rm[5])
    np.testing.assert_array_equal(rdmap.range_bin_sum(rm, 1, 3), rm[1:4].sum(axis=0))
    assert not rdmap.range_bin_sum(np.zeros((16, 5), complex), 2, 9).any()
    with pytest.raises(ValueError):
        rdmap.range_bin_sum(rm, 2, 6)
    with pytest.raises(ValueError):
        rdmap.range_bin_sum(rm, -1, 3)


def test_range_bin_sum_stationary_magnitude_constant():
    p = sim.RadarParams(n_fast=256, n_slow=400)
    bb = sim.synthesize_baseband(stationary_scenario(p, range_m=3.0))
    rm = rdmap.range_map(bb)
    v = rdmap.range_bin_sum(rm, 10, 128)
    mags = np.abs(v)
    assert mags.std() / mags.mean() < 0.01


def test_stft_params_overlap():
    p = rdmap.StftParams(window_len=128, hop=8)
    assert p.overlap == pytest.approx(0.9375)
    with pytest.raises(ValueError):
        rdmap.StftParams(window_len=16, hop=0)
    with pytest.raises(ValueError):
        rdmap.StftParams(window_len=16, hop=17)


def test_spectrogram_tone_peaks_at_100hz():
    m = np.arange(1024)
    v = np.exp(2j * np.pi * 0.1 * m)  # 100 Hz at PRF 1 kHz
    img = rdmap.spectrogram(v, rdmap.StftParams(), pri=1e-3)
    freqs = img.row_axis.value(np.arange(img.shape[0]))
    tone_bin = np.argmin(np.abs(freqs - 100.0))
    for k in range(img.shape[1]):
        assert np.argmax(img.pixels[:, k]) == tone_bin
    assert img.row_axis.start == pytest.approx(-500.0)
    assert freqs[-1] == pytest.approx(500.0 - 1000.0 / 128)
    assert img.col_axis.step == pytest.approx(8e-3)


def test_spectrogram_matches_naive_oracle():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(96) + 1j * rng.standard_normal(96)
    params = rdmap.StftParams(window_len=32, hop=8)
    img = rdmap.spectrogram(v, params, pri=1e-3)
    oracle = naive_stft_power(v, np.hanning(32), hop=8)
    assert img.shape == oracle.shape
    np.testing.assert_allclose(img.pixels, oracle, rtol=1e-9, atol=1e-9)


def test_spectrogram_zero_and_short_input():
    img = rdmap.spectrogram(np.zeros(256, complex))
    assert not img.pixels.any()
    with pytest.raises(ValueError):
        rdmap.spectrogram(np.zeros(100, complex))  # shorter than L=128


def test_spectrogram_energy_bound_and_tone_equality():
    # frame energy bound: sum_k |X_k|^2 = L * sum |w x|^2 <= L * sum(w^2) * sum(|x|^2)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    params = rdmap.StftParams(window_len=16, hop=4)
    w = np.hanning(16)
    img = rdmap.spectrogram(v, params, pri=1e-3)
    L = 16
    half = L // 2
    padded = np.concatenate([np.zeros(half, complex), v, np.zeros(L, complex)])
    for k in range(img.shape[1]):
        frame = padded[k * 4:k * 4 + L]
        bound = L * np.sum(w ** 2) * np.sum(np.abs(frame) ** 2)
        assert img.pixels[:, k].sum() <= bound * (1 + 1e-12)
    # unit-magnitude tone: equality pattern sum_k = L * sum(w^2) on full frames
    tone = np.exp(2j * np.pi * 0.2 * np.arange(64))
    img2 = rdmap.spectrogram(tone, params, pri=1e-3)
    interior = range(2, img2.shape[1] - 4)
    for k in interior:
        assert img2.pixels[:, k].sum() == pytest.approx(L * np.sum(w ** 2), rel=1e-9)


def test_log_magnitude():
    assert rdmap.log_magnitude(np.array([1.0]))[0] == 0.0
    assert rdmap.log_magnitude(np.array([10.0]))[0] == pytest.approx(10.0)
    assert rdmap.log_magnitude(np.array([0.0]))[0] == -120.0
    assert rdmap.log_magnitude(np.array([3 + 4j]))[0] == pytest.approx(10 * np.log10(5))
    out = rdmap.log_magnitude(np.array([0.0, 2.0]), floor_db=-60)
    assert out[0] == -60.0


def test_resize_identity_and_constant():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((12, 17))
    img = rdmap.RadarImage(a, rdmap.AxisSpec(0.075, 0.0, "m"), rdmap.AxisSpec(0.01, 0.0, "s"))
    for method in ("subsample", "linear"):
        out = rdmap.resize(img, 12, 17, method)
        np.testing.assert_allclose(out.pixels, a)
    const = rdmap.RadarImage(np.full((9, 9), 2.5), rdmap.AxisSpec(1, 0), rdmap.AxisSpec(1, 0))
    for method in ("subsample", "linear"):
        out = rdmap.resize(const, 4, 7, method)
        assert np.all(out.pixels == 2.5)


def test_resize_subsample_matches_index_map_oracle():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((256, 12000))
    out = rdmap.resize_array(a, 128, 384, "subsample")
    rows = np.minimum(np.rint(np.arange(128) * 2.0).astype(int), 255)
    cols = np.minimum(np.rint(np.arange(384) * 31.25).astype(int), 11999)
    np.testing.assert_array_equal(out, a[np.ix_(rows, cols)])


def test_resize_linear_preserves_bounds():
    rng = np.random.default_rng(7)
    a = rng.uniform(-3, 5, size=(20, 30))
    out = rdmap.resize_array(a, 128, 128, "linear")
    assert out.min() >= a.min() - 1e-12
    assert out.max() <= a.max() + 1e-12


def test_resize_axis_metadata():
    img = rdmap.RadarImage(np.zeros((256, 12000)),
                           rdmap.AxisSpec(0.075, 0.0, "m"),
                           rdmap.AxisSpec(1e-3, 0.0, "s"))
    out = rdmap.resize(img, 128, 384, "subsample")
    assert out.row_axis.step == pytest.approx(0.15)
    assert out.col_axis.step == pytest.approx(0.03125)


def test_smooth3x3_constant_and_sum():
    a = np.zeros((5, 5))
    a[2, 2] = 1.0
    out = rdmap.smooth3x3(a)
    assert out[2, 2] == 1.0
    assert out.sum() == pytest.approx(9.0)
    assert out[0, 0] == 0.0


def test_rdm_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    img = rdmap.RadarImage(rng.standard_normal((40, 60)).astype(np.float32).astype(float),
                           rdmap.AxisSpec(7.8125, -500.0, "Hz"),
                           rdmap.AxisSpec(8e-3, 0.0, "s"),
                           kind="spectrogram")
    path = tmp_path / "img.rdm"
    rdmap.save_rdm(img, path)
    back = rdmap.load_rdm(path)
    assert back.kind == "spectrogram"
    assert back.row_axis.step == pytest.approx(7.8125)
    assert back.row_axis.start == pytest.approx(-20 * 7.8125)  # reconstructed centre convention
    np.testing.assert_array_equal(back.pixels, img.pixels)


def test_pgm_roundtrip(tmp_path):
    a = np.linspace(0, 1, 12).reshape(3, 4)
    path = tmp_path / "img.pgm"
    rdmap.save_pgm(a, path)
    back = rdmap.load_pgm(path)
    assert back.shape == (3, 4)
    assert back[0, 0] == 0 and back[-1, -1] == 255
    assert (tmp_path / "img.pgm.scale.txt").exists()
