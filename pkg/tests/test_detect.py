import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mistguard.detect import (DetectError, DetectorConfig, GrayFrame, HybridDetector,
                              MotionDetectorState, RoiConfig, hybrid_step, method_a_step,
                              method_b)

BLOCKS = [(slice(0, 60), slice(0, 80)), (slice(0, 60), slice(80, 160)),
          (slice(60, 120), slice(0, 80)), (slice(60, 120), slice(80, 160))]


def frame_with_active(k, value=255):
    px = np.zeros(19200, dtype=np.uint8)
    px[:k] = value
    return GrayFrame(px.reshape(120, 160))


def seeded(background):
    return MotionDetectorState(background=background)


def brute_force_active(a, b, thr=25):
    return sum(1 for x, y in zip(a.pixels.ravel().tolist(), b.pixels.ravel().tolist())
               if abs(x - y) > thr)


def test_first_frame_bootstraps_background(backend):
    f = frame_with_active(5000)
    res, st2 = method_a_step(MotionDetectorState(), f)
    assert (res.positive, res.active_pixel_count, res.background_updated) == (False, 0, True)
    assert st2.background == f


def test_identical_frame_is_negative(backend, rng):
    b = GrayFrame(rng.integers(0, 256, (120, 160), dtype=np.uint8))
    res, st2 = method_a_step(seeded(b), GrayFrame(b.pixels))
    assert not res.positive and res.active_pixel_count == 0 and res.background_updated
    assert st2.background == b


def test_threshold_constant():
    assert MotionDetectorState().min_active() == 960
    assert MotionDetectorState(active_fraction_threshold=0.1).min_active() == 1920
    assert MotionDetectorState(active_fraction_threshold=0.00001).min_active() == 1


@pytest.mark.parametrize("k,expected", [(0, False), (959, False), (960, True), (961, True),
                                        (19200, True)])
def test_method_a_boundary(backend, k, expected):
    bg = GrayFrame.filled(0)
    f = frame_with_active(k, 26)
    res, st2 = method_a_step(seeded(bg), f)
    assert res.active_pixel_count == k == brute_force_active(f, bg)
    assert res.positive is expected
    assert res.background_updated is (not expected)
    assert st2.background == (bg if expected else f)


def test_method_a_diff_of_exactly_threshold_is_inactive(backend):
    res, _ = method_a_step(seeded(GrayFrame.filled(0)), frame_with_active(5000, 25))
    assert res.active_pixel_count == 0


def test_method_a_dimension_mismatch():
    with pytest.raises(DetectError):
        method_a_step(MotionDetectorState(), GrayFrame(np.zeros((10, 10), dtype=np.uint8)))


def test_method_a_state_validation():
    with pytest.raises(ValueError):
        MotionDetectorState(pixel_diff_threshold=0)
    with pytest.raises(ValueError):
        MotionDetectorState(active_fraction_threshold=1.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_background_adaptation_is_bit_exact(seed):
    rng = np.random.default_rng(seed)
    state = MotionDetectorState()
    for _ in range(6):
        # alternate small and large changes
        base = state.background.pixels if state.background is not None else np.zeros((120, 160))
        delta = rng.integers(-60, 61, (120, 160)) * (rng.random((120, 160)) < rng.random())
        f = GrayFrame(np.clip(base + delta, 0, 255).astype(np.uint8))
        before = state.background
        res, state = method_a_step(state, f)
        if res.positive:
            assert state.background is before
        else:
            assert state.background == f
        assert res.background_updated is (not res.positive)


def test_uniform_frame_negative(backend):
    r = method_b(GrayFrame.filled(100))
    assert r.frame_mean == 100 and r.quadrant_means == (100, 100, 100, 100)
    assert not r.positive and r.quadrant_flags == (False,) * 4


@pytest.mark.parametrize("hot", range(4))
def test_one_hot_quadrant(backend, hot):
    px = np.full((120, 160), 100, dtype=np.uint8)
    px[BLOCKS[hot]] = 200
    r = method_b(GrayFrame(px))
    assert r.frame_mean == 125.0
    assert r.quadrant_means[hot] == 200.0
    assert r.quadrant_flags == tuple(q == hot for q in range(4))
    assert r.positive and r.flagged == (hot,)


def test_all_zero_frame_guarded(backend):
    r = method_b(GrayFrame.filled(0))
    assert not r.positive and r.frame_mean == 0


def test_exact_twenty_percent_tie_flags():
    # u=100, v=160: mean=115, 1.2*115=138 <= 160; v such that v == 1.2*(v+3u)/4 -> v=1.2*3u/2.8
    # u=70, v=90: (90+210)/4=75, 1.2*75=90 -> exact tie, must flag
    px = np.full((120, 160), 70, dtype=np.uint8)
    px[BLOCKS[2]] = 90
    assert method_b(GrayFrame(px)).quadrant_flags == (False, False, True, False)
    px[BLOCKS[2]] = 89
    assert not method_b(GrayFrame(px)).positive


def test_method_b_dimension_mismatch():
    with pytest.raises(DetectError):
        method_b(GrayFrame(np.zeros((60, 80), dtype=np.uint8)))


def test_roi_quadrants_tile_frame():
    quads = RoiConfig.quadrants()
    cover = np.zeros((120, 160), dtype=int)
    for x0, y0, x1, y1 in quads:
        assert (x1 - x0, y1 - y0) == (80, 60)
        cover[y0:y1, x0:x1] += 1
    assert (cover == 1).all()


@settings(max_examples=200, deadline=None)
@given(u=st.integers(1, 255), v=st.integers(0, 255), q=st.integers(0, 3))
def test_method_b_scale_threshold(u, v, q):
    px = np.full((120, 160), u, dtype=np.uint8)
    px[BLOCKS[q]] = v
    r = method_b(GrayFrame(px))
    mean = (v + 3 * u) / 4
    assert abs(r.frame_mean - mean) < 1e-9
    if v + 3 * u < 4:  # frame mean below the floor
        assert r.quadrant_flags == (False,) * 4
        return
    # integer cross-multiplication: 5 * 4 * block >= 6 * (v + 3u)
    expected = tuple(20 * (v if i == q else u) >= 6 * (v + 3 * u) for i in range(4))
    assert r.quadrant_flags == expected
    assert r.positive == any(expected)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.permutations(range(4)))
def test_method_b_permutation_symmetry(seed, perm):
    px = np.random.default_rng(seed).integers(0, 256, (120, 160), dtype=np.uint8)
    perm_px = np.empty_like(px)
    for dst, src in enumerate(perm):
        perm_px[BLOCKS[dst]] = px[BLOCKS[src]]
    a = method_b(GrayFrame(px))
    b = method_b(GrayFrame(perm_px))
    assert b.quadrant_flags == tuple(a.quadrant_flags[src] for src in perm)
    assert a.positive == b.positive


def test_center_heat_splits_across_quadrants(backend):
    """Heat straddling the exact center dilutes evenly: no quadrant stands out."""
    px = np.full((120, 160), 30, dtype=np.uint8)
    px[40:80, 60:100] = 120  # 40x40 hot square, 20x20 in each quadrant
    centered = method_b(GrayFrame(px))
    assert centered.quadrant_flags == (False,) * 4
    assert not centered.positive
    # the same heat mass inside one quadrant is detected
    px = np.full((120, 160), 30, dtype=np.uint8)
    px[10:50, 20:60] = 120
    assert method_b(GrayFrame(px)).quadrant_flags == (True, False, False, False)


@pytest.mark.parametrize("b_pos,a_pos", list(itertools.product([False, True], repeat=2)))
def test_hybrid_or_fusion(backend, b_pos, a_pos):
    bg = GrayFrame.filled(30)
    px = np.full((120, 160), 30, dtype=np.uint8)
    if b_pos:
        px[BLOCKS[0]] = 55  # difference 25 is not active, but quadrant 0 stands out
    if a_pos:
        px[:8, :] = 60  # 1280 active pixels split evenly over quadrants 0 and 1
    det, _ = hybrid_step(seeded(bg), GrayFrame(px), RoiConfig())
    assert det.method_b.positive is b_pos
    assert det.method_a.positive is a_pos
    assert det.positive is (a_pos or b_pos)


def test_hybrid_steps_method_a_even_when_b_positive():
    bg = GrayFrame.filled(30)
    px = np.full((120, 160), 30, dtype=np.uint8)
    px[BLOCKS[0]] = 55
    f = GrayFrame(px)
    det, st2 = hybrid_step(seeded(bg), f, RoiConfig())
    assert det.method_b.positive and not det.method_a.positive
    assert st2.background == f


def test_hybrid_detector_is_deterministic(rng):
    frames = [GrayFrame(rng.integers(0, 256, (120, 160), dtype=np.uint8)) for _ in range(10)]
    runs = []
    for _ in range(2):
        d = HybridDetector()
        runs.append([d.step(f) for f in frames])
    assert runs[0] == runs[1]
    assert [d.frame_seq for d in runs[0]] == list(range(1, 11))


def test_detector_config_builds_components():
    cfg = DetectorConfig(kernel_size=3, pixel_diff_threshold=10, ratio_threshold=0.5)
    assert cfg.kernel().size == 3
    assert cfg.motion_state().pixel_diff_threshold == 10
    assert cfg.roi().ratio_threshold == 0.5
    assert math.isclose(cfg.kernel().weights.sum(), 1.0)
