import numpy as np
import pytest

from elsd.errors import InvalidParameterError, ScenarioError
from elsd.synth import SynthScenario, generate


def test_determinism_bit_identical():
    scn = SynthScenario(height=12, width=14, n_frames=10, rank=2, n_targets=2,
                        target_contrast=0.3, target_speed=1.0,
                        noise_sigma=0.02, seed=42)
    a = generate(scn)
    b = generate(scn)
    assert np.array_equal(a.d.data, b.d.data)
    assert np.array_equal(a.background, b.background)
    assert np.array_equal(a.foreground, b.foreground)
    assert np.array_equal(a.residual, b.residual)
    assert a.boxes == b.boxes


def test_exact_rank_no_targets():
    for rank in [1, 2, 4]:
        scn = SynthScenario(height=16, width=16, n_frames=20, rank=rank,
                            n_targets=0, noise_sigma=0.0, seed=1)
        res = generate(scn)
        sigma = np.linalg.svd(res.d.data, compute_uv=False)
        tol = max(res.d.data.shape) * sigma[0] * 1e-12
        assert int((sigma > tol).sum()) == rank
        assert np.all(res.foreground == 0) and np.all(res.residual == 0)


def test_bookkeeping_before_clip():
    scn = SynthScenario(height=10, width=10, n_frames=8, rank=2, n_targets=1,
                        target_contrast=0.3, target_speed=0.5,
                        noise_sigma=0.01, seed=2)
    res = generate(scn)
    total = res.background + res.foreground + res.residual
    inactive = (total >= 0) & (total <= 1)
    assert np.allclose(res.d.data[inactive], total[inactive])
    assert res.clip_delta == np.max(np.abs(res.d.data - total))


def test_clip_inactive_for_margined_scenario():
    scn = SynthScenario(height=40, width=40, n_frames=60, rank=2, n_targets=2,
                        target_contrast=0.3, target_speed=0.5,
                        noise_sigma=0.02, seed=7)
    res = generate(scn)
    assert res.clip_delta == 0.0
    assert np.all(res.background > 0.05) and np.all(res.background < 0.95)


def test_boxes_translate_at_unit_speed():
    scn = SynthScenario(height=20, width=30, n_frames=12, rank=1, n_targets=2,
                        target_contrast=0.3, target_speed=1.0,
                        noise_sigma=0.0, seed=3)
    res = generate(scn)
    assert all(len(frame) == 2 for frame in res.boxes)
    for tid in range(2):
        track = [frame[tid].box for frame in res.boxes]
        steps = [(b.x - a.x, b.y - a.y) for a, b in zip(track, track[1:])]
        assert all(s == steps[0] for s in steps)  # straight line
        assert max(abs(steps[0][0]), abs(steps[0][1])) == 1  # 1 px/frame
        for b in track:
            assert 0 <= b.x and b.x + b.w <= 30
            assert 0 <= b.y and b.y + b.h <= 20


def test_foreground_matches_boxes():
    scn = SynthScenario(height=15, width=15, n_frames=6, rank=1, n_targets=1,
                        target_contrast=0.4, target_speed=0.5,
                        noise_sigma=0.0, seed=4)
    res = generate(scn)
    for f, frame in enumerate(res.boxes):
        mask = np.zeros((15, 15), dtype=bool)
        for gt in frame:
            mask[gt.box.y:gt.box.y + gt.box.h, gt.box.x:gt.box.x + gt.box.w] = True
        S = res.foreground[:, f].reshape(15, 15)
        assert np.all(S[mask] == 0.4)
        assert np.all(S[~mask] == 0.0)


def test_noise_frobenius_matches_expectation():
    scn = SynthScenario(height=20, width=20, n_frames=30, rank=1, n_targets=0,
                        noise_sigma=0.02, seed=5)
    res = generate(scn)
    expected = 0.02 * np.sqrt(400 * 30)
    actual = np.linalg.norm(res.residual)
    assert abs(actual - expected) <= 0.2 * expected


def test_targets_that_cannot_fit():
    with pytest.raises(ScenarioError):
        generate(SynthScenario(height=5, width=5, n_frames=4, rank=1,
                               n_targets=1, target_size=(6, 6), seed=0))
    with pytest.raises(ScenarioError):
        # 1 px/frame for 200 frames cannot fit inside 10 px
        generate(SynthScenario(height=10, width=10, n_frames=200, rank=1,
                               n_targets=1, target_speed=1.0, seed=0))


def test_validation():
    with pytest.raises(InvalidParameterError):
        SynthScenario(height=10, width=10, n_frames=5, rank=0)
    with pytest.raises(InvalidParameterError):
        SynthScenario(height=10, width=10, n_frames=5, rank=1,
                      target_contrast=0.0)


def test_json_round_trip():
    scn = SynthScenario(height=10, width=12, n_frames=5, rank=1, n_targets=1,
                        target_contrast=0.25, target_speed=0.75,
                        noise_sigma=0.01, seed=9)
    assert SynthScenario.from_json(scn.to_json()) == scn
