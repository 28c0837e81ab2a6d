import json

import numpy as np
import pytest

from tracklink.cli import main
from tracklink.mot_io import load_detections, load_ground_truth
from tracklink.synth import (
    OcclusionSpec,
    ScenarioSpec,
    TargetSpec,
    generate_scenario,
    simplex_directions,
    write_scenario,
)


def crossing_spec(seed=5, **overrides):
    base = dict(
        n_frames=70,
        width=640.0,
        height=480.0,
        targets=(
            TargetSpec(id=1, start=1, end=70, box=(60.0, 200.0, 16.0, 32.0),
                       velocity=(6.0, 0.5)),
            TargetSpec(id=2, start=1, end=70, box=(480.0, 230.0, 16.0, 32.0),
                       velocity=(-6.0, -0.5)),
        ),
        occlusions=(OcclusionSpec(targets=(1, 2), frames=(31, 40)),),
        pos_noise=0.5,
        seed=seed,
    )
    base.update(overrides)
    return ScenarioSpec(**base)


class TestSimplex:
    def test_antipodal_for_two(self, rng):
        dirs = simplex_directions(2, 32, rng)
        assert np.allclose(dirs[0], -dirs[1])
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)

    def test_equal_pairwise_distances(self, rng):
        dirs = simplex_directions(4, 16, rng)
        dists = [
            np.linalg.norm(dirs[i] - dirs[j])
            for i in range(4)
            for j in range(i + 1, 4)
        ]
        assert np.allclose(dists, dists[0])


class TestGenerate:
    def test_occlusion_hole_and_full_gt(self):
        detections, gt = generate_scenario(crossing_spec())
        frames_with_1 = {f for f, dets in detections.items() for d in dets if d.id_hint == 1}
        assert not frames_with_1 & set(range(31, 41))
        assert [f for f, _ in gt[1]] == list(range(1, 71))
        assert sorted(gt) == [1, 2]

    def test_noise_free_detections_equal_gt(self):
        detections, gt = generate_scenario(crossing_spec(pos_noise=0.0, miss_prob=0.0))
        gt_map = {ident: dict(track) for ident, track in gt.items()}
        for frame, dets in detections.items():
            for d in dets:
                assert d.box == pytest.approx(gt_map[d.id_hint][frame])

    def test_deterministic_files(self, tmp_path):
        spec = crossing_spec()
        a = write_scenario(spec, tmp_path / "a")
        b = write_scenario(spec, tmp_path / "b")
        for key in a:
            assert a[key].read_bytes() == b[key].read_bytes()

    def test_duplicate_ids_rejected(self):
        spec = crossing_spec(targets=(
            TargetSpec(id=1, start=1, end=10, box=(10, 10, 5, 5)),
            TargetSpec(id=1, start=1, end=10, box=(50, 10, 5, 5)),
        ))
        with pytest.raises(ValueError, match="unique"):
            generate_scenario(spec)

    def test_velocity_swap_changes_paths(self):
        plain = crossing_spec(pos_noise=0.0)
        bounce = crossing_spec(
            pos_noise=0.0,
            occlusions=(OcclusionSpec(targets=(1, 2), frames=(31, 40), swap_velocities=True),),
        )
        _, gt_plain = generate_scenario(plain)
        _, gt_bounce = generate_scenario(bounce)
        # identical before the swap midpoint, different after
        assert gt_plain[1][:30] == gt_bounce[1][:30]
        assert gt_plain[1][-1] != gt_bounce[1][-1]


def scenario_json(tmp_path, spec):
    data = {
        "n_frames": spec.n_frames,
        "width": spec.width,
        "height": spec.height,
        "feature_dim": spec.feature_dim,
        "cluster_sep": spec.cluster_sep,
        "feature_noise": spec.feature_noise,
        "pos_noise": spec.pos_noise,
        "seed": spec.seed,
        "targets": [
            {
                "id": t.id, "start": t.start, "end": t.end, "box": list(t.box),
                "motion": t.motion, "velocity": list(t.velocity),
            }
            for t in spec.targets
        ],
        "occlusions": [
            {
                "targets": list(o.targets), "frames": list(o.frames),
                "swap_velocities": o.swap_velocities,
            }
            for o in spec.occlusions
        ],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestCli:
    def test_synth_track_evaluate_pipeline(self, tmp_path, capsys):
        scn = scenario_json(tmp_path, crossing_spec())
        out = tmp_path / "data"
        assert main(["synth", "--scenario", str(scn), "--out-dir", str(out)]) == 0
        result = tmp_path / "result.csv"
        code = main([
            "track",
            "--det", str(out / "detections.csv"),
            "--features", str(out / "features.csv"),
            "--out", str(result),
            "--summary", str(tmp_path / "summary.json"),
        ])
        assert code == 0
        assert result.exists()
        assert json.loads((tmp_path / "summary.json").read_text())
        code = main(["evaluate", "--result", str(result), "--gt", str(out / "gt.csv"),
                     "--json", str(tmp_path / "report.json")])
        assert code == 0
        captured = capsys.readouterr()
        assert "MOTA" in captured.out
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["ids"] == 0

    def test_track_determinism(self, tmp_path):
        scn = scenario_json(tmp_path, crossing_spec())
        out = tmp_path / "data"
        main(["synth", "--scenario", str(scn), "--out-dir", str(out)])
        r1, r2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        for r in (r1, r2):
            assert main([
                "track", "--det", str(out / "detections.csv"),
                "--features", str(out / "features.csv"), "--out", str(r),
            ]) == 0
        assert r1.read_bytes() == r2.read_bytes()

    def test_learn_weights_command(self, tmp_path, capsys):
        scn = scenario_json(tmp_path, crossing_spec())
        out = tmp_path / "data"
        main(["synth", "--scenario", str(scn), "--out-dir", str(out)])
        code = main([
            "learn-weights",
            "--det", str(out / "detections.csv"),
            "--features", str(out / "features.csv"),
            "--gt", str(out / "gt.csv"),
            "--out", str(tmp_path / "lambdas.json"),
        ])
        assert code == 0
        assert "lambda1=" in capsys.readouterr().out
        data = json.loads((tmp_path / "lambdas.json").read_text())
        assert 0.0 <= data["lambda1"] <= 1.0
        assert 0.0 <= data["lambda2"] <= 1.0

    def test_dump_affinity_command(self, tmp_path):
        scn = scenario_json(tmp_path, crossing_spec())
        out = tmp_path / "data"
        main(["synth", "--scenario", str(scn), "--out-dir", str(out)])
        dump = tmp_path / "aff"
        code = main([
            "dump-affinity",
            "--det", str(out / "detections.csv"),
            "--features", str(out / "features.csv"),
            "--out-dir", str(dump),
        ])
        assert code == 0
        files = list(dump.glob("affinity_segment_*.csv"))
        assert files
        header = files[0].read_text().splitlines()[0]
        assert header == "i,j,p_m,p_a,c_t,c_e,flagged,gap,lambda,score,cost"

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["track", "--out", "x.csv"])
        assert err.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_missing_file_exits_1(self, tmp_path, capsys):
        code = main(["track", "--det", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "r.csv")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_malformed_input_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,-1,10,10,-5,5,0.9\n", encoding="utf-8")
        code = main(["track", "--det", str(bad), "--out", str(tmp_path / "r.csv")])
        assert code == 1
        assert "input error" in capsys.readouterr().err
