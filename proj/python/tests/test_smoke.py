import json
import math
import os
import subprocess

import numpy as np
import pytest

import pfsplat


def small_spec(seed=3):
    spec = pfsplat.SceneSpec()
    spec.num_views = 3
    spec.num_gaussians = 10
    spec.image_size = 20
    spec.num_candidates = 8
    spec.num_eval = 2
    spec.seed = seed
    return spec


def test_orthogonalize_gives_rotation():
    rng = np.random.default_rng(0)
    r = pfsplat.orthogonalize_9d(rng.normal(size=(3, 3)))
    assert np.allclose(r.T @ r, np.eye(3), atol=1e-10)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-10)


def test_rotation_angle_and_pose_loss():
    a = pfsplat.so3_exp(np.array([0.0, 0.0, math.pi / 2]))
    assert math.degrees(pfsplat.rotation_angle_between(np.eye(3), a)) == pytest.approx(90.0, abs=1e-9)
    poses = [pfsplat.CameraPose(pfsplat.so3_exp(np.array([0.1 * i, 0.2, -0.1])), np.array([i, 0.5, 0.0]))
             for i in range(3)]
    assert pfsplat.pose_loss(poses, poses, pfsplat.LossWeights()) < 1e-12


def test_render_and_metrics():
    scene = pfsplat.generate_scene(small_spec())
    view = scene.eval_views[0]
    img = pfsplat.render(scene.gt_gaussians, view.pose, scene.gt_intrinsics)
    assert img.shape == (20, 20, 3)
    assert np.all(np.isfinite(img))
    assert pfsplat.ssim(img, img) == pytest.approx(1.0)
    assert pfsplat.psnr(np.zeros((4, 4, 3)), np.full((4, 4, 3), 0.1)) == pytest.approx(20.0)
    assert pfsplat.pose_auc(scene.gt_poses(), scene.gt_poses()) == pytest.approx([1.0, 1.0, 1.0])


def test_schedule():
    s = pfsplat.ForcingSchedule()
    assert pfsplat.predicted_pose_probability(s, 0) == 0.0
    assert pfsplat.predicted_pose_probability(s, 10**6) == pytest.approx(0.1)


def test_short_training_run():
    scene = pfsplat.generate_scene(small_spec())
    cfg = pfsplat.TrainConfig()
    cfg.steps = 30
    cfg.grid = 3
    poses, report = pfsplat.train(scene, cfg)
    assert len(poses) == 3
    assert len(report.losses) == 30
    assert report.losses[-1] < report.losses[0]
    assert report.evaluated
    assert len(report.final_metrics.pose_auc) == 3


def test_errors_map_to_python():
    with pytest.raises(pfsplat.IoError):
        pfsplat.load_scene("/nonexistent/scene")
    with pytest.raises(pfsplat.Error):
        pfsplat.orthogonalize_9d(np.zeros((3, 3)))


def test_cli_synth_and_eval(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps({"num_views": 2, "num_gaussians": 6, "image_size": 16,
                                                    "num_candidates": 6, "num_eval": 1, "seed": 2}))
    assert pfsplat.run_cli(["synth", str(tmp_path / "spec.json"), str(tmp_path / "scene")]) == 0
    assert pfsplat.run_cli(["eval", str(tmp_path / "scene"), str(tmp_path / "scene")]) == 0
    assert pfsplat.run_cli(["bogus"]) == 2

    cli = os.environ.get("PFSPLAT_CLI")
    if cli:
        done = subprocess.run([cli, "eval", str(tmp_path / "scene"), str(tmp_path / "scene")],
                              capture_output=True, text=True)
        assert done.returncode == 0
        assert "PSNR" in done.stdout
