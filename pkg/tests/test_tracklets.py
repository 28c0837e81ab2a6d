import math

import numpy as np
import pytest

from tracklink.flow import solve_paths
from tracklink.model import Detection, RunConfig
from tracklink.tracklets import build_generation_graph, detection_cost, generate_initial_tracklets


def det(frame, cx, cy=60.0, score=0.9, hint=None, size=(10.0, 20.0)):
    w, h = size
    return Detection(
        frame=frame, box=(cx - w / 2, cy - h / 2, w, h), score=score, id_hint=hint
    )


def single_target(n_frames=10, score=0.9, step=3.0):
    return {
        f: [det(f, 50.0 + step * (f - 1), score=score, hint=1)]
        for f in range(1, n_frames + 1)
    }


class TestDetectionCost:
    def test_even_odds(self):
        assert detection_cost(0.5) == pytest.approx(0.0)

    def test_confident(self):
        assert detection_cost(0.9) == pytest.approx(-math.log(9.0))

    def test_unconfident_symmetry(self):
        assert detection_cost(0.1) == pytest.approx(math.log(9.0))
        assert detection_cost(0.1) == pytest.approx(-detection_cost(0.9))

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.3, 1.7])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            detection_cost(bad)


class TestGeneration:
    def test_single_clean_target(self):
        tracklets = generate_initial_tracklets(single_target(), RunConfig())
        assert len(tracklets) == 1
        assert tracklets[0].length == 10

    def test_unprofitable_scores_yield_nothing(self):
        dets = single_target(score=0.4)
        assert generate_initial_tracklets(dets, RunConfig()) == []

    def test_two_separated_targets_identity_pure(self):
        dets: dict[int, list[Detection]] = {}
        for f in range(1, 11):
            dets[f] = [
                det(f, 50.0 + 3.0 * f, 60.0, hint=1),
                det(f, 400.0 - 3.0 * f, 300.0, hint=2),
            ]
        tracklets = generate_initial_tracklets(dets, RunConfig())
        assert len(tracklets) == 2
        for t in tracklets:
            hints = {d.id_hint for d in t.detections}
            assert len(hints) == 1
            assert t.length == 10

    def test_no_shared_detections(self):
        rng = np.random.default_rng(3)
        dets: dict[int, list[Detection]] = {}
        for f in range(1, 16):
            dets[f] = [
                det(f, 100 + 4 * f + rng.normal(0, 1), 60, score=0.85, hint=1),
                det(f, 110 + 4 * f + rng.normal(0, 1), 60, score=0.85, hint=2),
            ]
        tracklets = generate_initial_tracklets(dets, RunConfig())
        seen = set()
        for t in tracklets:
            for d in t.detections:
                key = (d.frame, d.box)
                assert key not in seen
                seen.add(key)

    def test_links_are_consecutive_and_gated(self):
        dets = single_target(12)
        for t in generate_initial_tracklets(dets, RunConfig()):
            for a, b in zip(t.detections, t.detections[1:]):
                assert b.frame == a.frame + 1
                (ax, ay), (bx, by) = a.center, b.center
                assert math.hypot(bx - ax, by - ay) < 0.5 * (a.box[2] + b.box[2])

    def test_endpoints_above_threshold(self):
        dets = single_target(8, score=0.9)
        # middle frames dip below the endpoint threshold but stay confident
        dets[4] = [det(4, 50.0 + 3.0 * 3, score=0.55, hint=1)]
        tracklets = generate_initial_tracklets(dets, RunConfig())
        assert len(tracklets) == 1
        t = tracklets[0]
        assert t.detections[0].score > 0.6
        assert t.detections[-1].score > 0.6
        assert t.length == 8  # low-score detection still linkable inside

    def test_low_score_gap_splits_chain(self):
        dets = single_target(9)
        dets[5] = []  # missed detection: consecutive-frame rule forbids bridging
        tracklets = generate_initial_tracklets(dets, RunConfig())
        assert sorted(t.length for t in tracklets) == [4, 4]

    def test_dp_matches_flow_free_mode_without_contention(self):
        dets: dict[int, list[Detection]] = {}
        for f in range(1, 9):
            dets[f] = [
                det(f, 60.0 + 5 * f, 60.0, score=0.9, hint=1),
                det(f, 500.0 - 5 * f, 300.0, score=0.8, hint=2),
            ]
        cfg = RunConfig()
        tracklets = generate_initial_tracklets(dets, cfg)
        dp_total = 0.0
        for t in tracklets:
            dp_total += 2 * (-math.log(cfg.entry_exit_prob))
            dp_total += sum(detection_cost(d.score) for d in t.detections)
        flow_total = solve_paths(build_generation_graph(dets, cfg), mode="free").total_cost
        assert dp_total == pytest.approx(flow_total)

    def test_empty_input(self):
        assert generate_initial_tracklets({}, RunConfig()) == []
