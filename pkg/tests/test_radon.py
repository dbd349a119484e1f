import numpy as np
import pytest

from adlradar import radon

from oracles import radon_point_oracle, rasterize_oracle


# ---------------------------------------------------------------------------
# radon_transform
# ---------------------------------------------------------------------------

def test_radon_zero_image():
    ri = radon.radon_transform(np.zeros((32, 48)))
    assert not ri.values.any()
    assert ri.theta_grid[0] == 0 and ri.theta_grid[-1] == 179 and len(ri.theta_grid) == 180


def test_radon_horizontal_line_peaks_at_90():
    img = np.zeros((41, 61))
    img[12, :] = 1.0
    ri = radon.radon_transform(img)
    xi, ti = np.unravel_index(np.argmax(ri.values), ri.values.shape)
    assert ri.theta_grid[ti] == 90.0


def test_radon_diagonal_line_matches_lineintegral_oracle():
    # 45-degree diagonal (row = col): expected peak where cot(theta) = +1
    img = np.zeros((21, 21))
    for i in range(21):
        img[i, i] = 1.0
    ri = radon.radon_transform(img)
    oracle = radon_point_oracle(img, ri.theta_grid, ri.xprime_offsets)
    np.testing.assert_allclose(ri.values, oracle, atol=1e-9)
    _, ti = np.unravel_index(np.argmax(ri.values), ri.values.shape)
    theta = ri.theta_grid[ti]
    assert 1.0 / np.tan(np.deg2rad(theta)) == pytest.approx(1.0, abs=0.02)


def test_radon_matches_oracle_random(rng):
    img = rng.uniform(0, 1, size=(12, 18))
    img[img < 0.5] = 0.0
    ri = radon.radon_transform(img)
    oracle = radon_point_oracle(img, ri.theta_grid, ri.xprime_offsets)
    np.testing.assert_allclose(ri.values, oracle, atol=1e-9)


def test_radon_nonnegative_and_mass_preserving(rng):
    img = rng.uniform(0, 2, size=(16, 16))
    ri = radon.radon_transform(img)
    assert ri.values.min() >= 0
    # splatting conserves total mass at every angle
    np.testing.assert_allclose(ri.values.sum(axis=0), img.sum(), rtol=1e-9)


def test_radon_transpose_moves_90_peak_to_0_or_180():
    img = np.zeros((33, 49))
    img[20, :] = 1.0
    ri = radon.radon_transform(img.T)
    _, ti = np.unravel_index(np.argmax(ri.values), ri.values.shape)
    assert ri.theta_grid[ti] in (0.0, 179.0)


def test_radon_rejects_nonfinite():
    img = np.zeros((4, 4))
    img[0, 0] = np.nan
    with pytest.raises(ValueError):
        radon.radon_transform(img)


# ---------------------------------------------------------------------------
# find_lines
# ---------------------------------------------------------------------------

def test_find_lines_single_horizontal():
    img = np.zeros((64, 96))
    img[40, :] = 1.0
    lines = radon.find_lines(radon.radon_transform(img), max_lines=3)
    assert len(lines) == 1
    ln = lines[0]
    assert ln.kind == "inplace"
    assert ln.theta == pytest.approx(90.0)
    assert ln.slope == pytest.approx(0.0)
    # intercept is the centred row of the line
    assert ln.intercept == pytest.approx(40 - (64 - 1) / 2.0, abs=0.75)
    assert ln.intercept == pytest.approx(ln.xprime / np.sin(np.deg2rad(ln.theta)))


def test_find_lines_flat_image_empty():
    assert radon.find_lines(radon.radon_transform(np.zeros((16, 16)))) == []
    with pytest.raises(ValueError):
        radon.find_lines(radon.radon_transform(np.zeros((16, 16))), max_lines=0)


def test_find_lines_two_structures():
    img = np.zeros((64, 96))
    img[30, :] = 1.0                       # horizontal, strong
    for c in range(96):
        r = 10 + int(round(0.5 * c))      # away-going slope +0.5
        if r < 64:
            img[r, c] = 1.0
    lines = radon.find_lines(radon.radon_transform(img), max_lines=4)
    kinds = {ln.kind for ln in lines}
    assert "inplace" in kinds and "translation" in kinds
    trans = [ln for ln in lines if ln.kind == "translation"][0]
    assert trans.slope == pytest.approx(0.5, abs=0.05)
    assert trans.direction == "away"


def test_detected_line_slope_matches_cot_theta():
    img = np.zeros((64, 96))
    for c in range(96):
        r = 55 - int(round(0.4 * c))       # toward the radar
        if 0 <= r < 64:
            img[r, c] = 1.0
    lines = radon.find_lines(radon.radon_transform(img), max_lines=1)
    ln = lines[0]
    assert ln.slope == pytest.approx(1.0 / np.tan(np.deg2rad(ln.theta)), rel=1e-12)
    assert ln.slope == pytest.approx(-0.4, abs=0.05)
    assert ln.direction == "toward"


# ---------------------------------------------------------------------------
# intersect
# ---------------------------------------------------------------------------

def _line(slope, intercept):
    return radon.DetectedLine(theta=np.nan, xprime=np.nan, slope=slope,
                              intercept=intercept, kind="translation", strength=1.0)


def test_intersect_trivial_cases():
    assert radon.intersect(_line(0.0, 0.0), _line(1.0, 0.0)) == (0.0, 0.0)
    x, y = radon.intersect(_line(0.0, 1.0), _line(-1.0, 3.0))
    assert (x, y) == (pytest.approx(2.0), pytest.approx(1.0))


def test_intersect_parallel_raises():
    with pytest.raises(radon.NoIntersectionError):
        radon.intersect(_line(0.0, 1.0), _line(0.0, 5.0))
    with pytest.raises(radon.NoIntersectionError):
        radon.intersect(_line(np.inf, 0.0), _line(1.0, 0.0))


def test_intersect_roundtrip_residual(rng):
    for _ in range(200):
        m1, m2 = rng.uniform(-3, 3, size=2)
        if abs(m1 - m2) < 1e-3:
            continue
        n1, n2 = rng.uniform(-50, 50, size=2)
        x, y = radon.intersect(_line(m1, n1), _line(m2, n2))
        assert abs(m1 * x + n1 - y) < 1e-9
        assert abs(m2 * x + n2 - y) < 1e-9


# ---------------------------------------------------------------------------
# bresenham / segment_energy
# ---------------------------------------------------------------------------

def test_bresenham_exhaustive_against_oracle():
    n = 7
    for x0 in range(n):
        for y0 in range(n):
            for x1 in range(n):
                for y1 in range(n):
                    got = radon.bresenham((x0, y0), (x1, y1))
                    want = rasterize_oracle((x0, y0), (x1, y1))
                    assert got == want, f"({x0},{y0})->({x1},{y1}): {got} != {want}"


def test_segment_energy_uniform_regions():
    ones = np.ones((10, 20))
    assert radon.segment_energy(ones, (0, 0), (19, 9)) == 1.0
    assert radon.segment_energy(np.zeros((10, 20)), (0, 5), (19, 5)) == 0.0


def test_segment_energy_matches_rasterize_oracle(rng):
    img = rng.uniform(0, 1, size=(15, 25))
    for _ in range(50):
        x0, x1 = rng.integers(0, 25, size=2)
        y0, y1 = rng.integers(0, 15, size=2)
        pts = rasterize_oracle((int(x0), int(y0)), (int(x1), int(y1)))
        want = np.mean([img[y, x] for x, y in pts])
        got = radon.segment_energy(img, (int(x0), int(y0)), (int(x1), int(y1)))
        assert got == pytest.approx(want, rel=1e-12)


def test_segment_energy_endpoint_validation():
    with pytest.raises(ValueError):
        radon.segment_energy(np.ones((5, 5)), (0, 0), (5, 2))


# ---------------------------------------------------------------------------
# build_timeline
# ---------------------------------------------------------------------------

def test_timeline_single_inplace_line():
    img = np.zeros((64, 96))
    img[40, :] = 1.0
    lines = radon.find_lines(radon.radon_transform(img))
    intervals, breaks = radon.build_timeline(img, lines, columns_per_s=32.0)
    assert len(intervals) == 1 and not breaks
    assert intervals[0].onset == 0.0
    assert intervals[0].offset == pytest.approx(96 / 32.0)
    assert intervals[0].kind == "inplace"


def test_timeline_walk_then_stop_geometry():
    # translation line for the first half, horizontal afterwards
    rows, cols = 128, 384
    img = np.zeros((rows, cols))
    t_break_col = 192
    for c in range(cols):
        if c < t_break_col:
            r = 100 - int(round(0.3 * c))
        else:
            r = 100 - int(round(0.3 * t_break_col))
        img[r:r + 3, c] = 1.0
    lines = radon.find_lines(radon.radon_transform(img), max_lines=3)
    intervals, breaks = radon.build_timeline(img, lines)
    assert [iv.kind for iv in intervals] == ["translation", "inplace"]
    assert intervals[0].direction == "toward"
    assert len(breaks) == 1
    assert breaks[0].t == pytest.approx(t_break_col / 32.0, abs=0.5)
    assert breaks[0].from_kind == "translation"
    assert breaks[0].to_kind == "inplace"
    # partition property
    assert intervals[0].onset == 0.0
    assert intervals[-1].offset == pytest.approx(384 / 32.0)
    for a, b in zip(intervals[:-1], intervals[1:]):
        assert a.offset == b.onset


def test_timeline_requires_lines():
    with pytest.raises(ValueError):
        radon.build_timeline(np.zeros((8, 8)), [])


def test_timeline_csv_roundtrip(tmp_path):
    intervals = [radon.TimelineInterval(0.0, 6.0, "translation", "toward"),
                 radon.TimelineInterval(6.0, 12.0, "inplace", "unknown")]
    path = tmp_path / "timeline.csv"
    radon.write_timeline_csv(intervals, path)
    back = radon.read_timeline_csv(path)
    assert back == intervals
