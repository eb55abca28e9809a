import math

import numpy as np
import pytest
import torch

from graspgen.evaluation import (decode_maps, evaluate_rectangle_metric,
                                 extract_grasps, benchmark_samples,
                                 render_heatmaps, best_metric_scores)
from graspgen.geometry import GraspImage, GraspRectangle
from graspgen.maps import GraspMaps
from graspgen.network import NetworkConfig, NetworkOutput, build_network

from conftest import make_block_sample


def _raw(q, s, c, w):
    return NetworkOutput(*(torch.as_tensor(p, dtype=torch.float32)
                           for p in (q, s, c, w)))


def _maps(quality, angle=0.0, width_px=30.0, width_scale=150.0):
    h, w = quality.shape
    return GraspMaps(
        quality=quality.astype(np.float32),
        angle_sin=np.full((h, w), math.sin(2 * angle), dtype=np.float32),
        angle_cos=np.full((h, w), math.cos(2 * angle), dtype=np.float32),
        width=np.full((h, w), width_px / width_scale, dtype=np.float32),
        width_scale=width_scale)


def _bump(h, w, cv, cu, sigma=3.0, amp=1.0):
    vv, uu = np.mgrid[0:h, 0:w]
    return amp * np.exp(-((uu - cu) ** 2 + (vv - cv) ** 2) / (2 * sigma ** 2))


class TestDecodeMaps:
    def test_zero_angle(self):
        raw = _raw(np.zeros((8, 8)), np.zeros((8, 8)),
                   np.ones((8, 8)), np.zeros((8, 8)))
        maps = decode_maps(raw, smooth_sigma=0)
        np.testing.assert_allclose(maps.angle(), 0.0, atol=1e-7)

    def test_quarter_pi_angle(self):
        raw = _raw(np.zeros((8, 8)), np.ones((8, 8)),
                   np.zeros((8, 8)), np.zeros((8, 8)))
        maps = decode_maps(raw, smooth_sigma=0)
        np.testing.assert_allclose(maps.angle(), math.pi / 4, atol=1e-7)

    def test_sigma_zero_identity(self):
        q = np.random.default_rng(0).normal(size=(16, 16))
        raw = _raw(q, np.zeros_like(q), np.ones_like(q), np.zeros_like(q))
        maps = decode_maps(raw, smooth_sigma=0)
        np.testing.assert_allclose(maps.quality, 1 / (1 + np.exp(-q)),
                                   atol=1e-6)

    def test_quality_in_unit_interval(self):
        q = np.random.default_rng(1).normal(scale=10, size=(16, 16))
        raw = _raw(q, np.zeros_like(q), np.ones_like(q), np.zeros_like(q))
        maps = decode_maps(raw)
        assert maps.quality.min() >= 0.0
        assert maps.quality.max() <= 1.0

    def test_width_clamped(self):
        w = np.array([[-1.0, 0.5], [2.0, 1.0]])
        raw = _raw(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2)), w)
        maps = decode_maps(raw, width_scale=100.0, smooth_sigma=0)
        np.testing.assert_allclose(maps.width_px(),
                                   [[0, 50], [100, 100]], atol=1e-5)


class TestExtractGrasps:
    def test_single_bump(self):
        maps = _maps(_bump(64, 64, 30, 40))
        grasps = extract_grasps(maps, k=5, min_distance=5)
        assert len(grasps) == 1
        assert (grasps[0].u, grasps[0].v) == (40, 30)

    def test_two_bumps_ordered_by_height(self):
        q = _bump(128, 128, 30, 30, amp=0.6) + _bump(128, 128, 80, 80, amp=0.9)
        grasps = extract_grasps(_maps(q), k=5, min_distance=20)
        assert len(grasps) == 2
        assert (grasps[0].u, grasps[0].v) == (80, 80)
        assert grasps[0].quality > grasps[1].quality

    def test_all_zero_empty(self):
        assert extract_grasps(_maps(np.zeros((32, 32)))) == []

    def test_min_distance_separation(self):
        rng = np.random.default_rng(2)
        q = rng.random((64, 64)).astype(np.float32)
        grasps = extract_grasps(_maps(q), k=5, min_distance=7)
        for i, a in enumerate(grasps):
            for b in grasps[i + 1:]:
                assert max(abs(a.u - b.u), abs(a.v - b.v)) >= 7

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        q = rng.random((64, 64)).astype(np.float32)
        sig = (1 / (1 + np.exp(-q))).astype(np.float32)
        a = extract_grasps(_maps(q), k=5, min_distance=6)
        b = extract_grasps(_maps(sig), k=5, min_distance=6)
        assert [(g.u, g.v) for g in a] == [(g.u, g.v) for g in b]

    def test_carries_decoded_angle_and_width(self):
        maps = _maps(_bump(64, 64, 32, 32), angle=0.6, width_px=45.0)
        (g,) = extract_grasps(maps, k=1)
        assert g.angle == pytest.approx(0.6, abs=1e-6)
        assert g.width == pytest.approx(45.0, abs=1e-4)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            extract_grasps(_maps(np.zeros((8, 8))), k=0)


class TestRectangleMetric:
    def test_perfect_match(self):
        gt = GraspRectangle(50, 50, 0.3, 40, 20)
        pred = gt.as_grasp()
        assert evaluate_rectangle_metric(pred, [gt], (100, 100))

    def test_overlapping_within_thresholds(self):
        gt = GraspRectangle(50, 50, 0.0, 40, 20)
        pred = GraspImage(55, 50, math.radians(10), 40)
        iou, ang = best_metric_scores(pred, [gt], (100, 100))
        assert iou > 0.25 and ang < 30
        assert evaluate_rectangle_metric(pred, [gt], (100, 100))

    def test_angle_gate_rejects(self):
        gt = GraspRectangle(50, 50, 0.0, 40, 20)
        pred = GraspImage(50, 50, math.radians(45), 40)
        # heavy overlap but 45 degree offset
        assert not evaluate_rectangle_metric(pred, [gt], (100, 100))

    def test_empty_gt_false(self):
        assert not evaluate_rectangle_metric(GraspImage(10, 10, 0, 20), [],
                                             (64, 64))

    def test_monotone_in_overlap(self):
        gt = GraspRectangle(50, 50, 0.0, 40, 20)
        prev = False
        for du in (30, 20, 10, 5, 0):   # increasing overlap
            pred = GraspImage(50 + du, 50, 0.0, 40)
            ok = evaluate_rectangle_metric(pred, [gt], (120, 120))
            assert ok >= prev
            prev = ok
        assert prev


class TestBenchmark:
    def _samples(self, n=3, size=96):
        return [make_block_sample(sample_id=f"b{i}", h=size, w=size,
                                  center=(48 + 4 * i, 48), block=(36, 14))
                for i in range(n)]

    def _net(self):
        torch.manual_seed(0)
        return build_network(NetworkConfig(
            input_channels=1, stem_channels=8, channel_schedule=[16, 32, 32],
            num_residual_blocks=1, decoder_channels=[16, 8], head_channels=8))

    def test_report_bookkeeping(self, tmp_path):
        net = self._net()
        samples = self._samples()
        report = benchmark_samples(net, samples, "d", dataset="synthetic",
                                   out_dir=tmp_path)
        assert report.n_samples == 3
        assert report.accuracy == report.n_correct / 3
        assert report.mean_inference_ms > 0
        assert report.mean_forward_ms > 0
        assert (tmp_path / "report.json").exists()
        per_sample = (tmp_path / "per_sample.csv").read_text().splitlines()
        assert per_sample[0] == "id,correct,iou_best,angle_offset_deg,ms"
        assert len(per_sample) == 4
        # accuracy cross-checked against the per-sample booleans
        correct = sum(int(r.split(",")[1]) for r in per_sample[1:])
        assert correct == report.n_correct

    def test_zeroed_head_near_zero_accuracy(self):
        net = self._net()
        for head in net.heads:
            torch.nn.init.zeros_(head.weight)
            torch.nn.init.zeros_(head.bias)
        report = benchmark_samples(net, self._samples(), "d")
        assert report.accuracy == 0.0


class TestRenderHeatmaps:
    def test_writes_planes_and_overlay(self, tmp_path):
        maps = _maps(_bump(64, 64, 32, 32))
        grasps = extract_grasps(maps, k=1)
        files = render_heatmaps(maps, grasps, tmp_path)
        names = sorted(f.name for f in files)
        assert any(n.startswith("quality") for n in names)
        assert any(n.startswith("angle") for n in names)
        assert any(n.startswith("width") for n in names)
        assert "overlay.png" in names
        for f in files:
            assert f.stat().st_size > 0

    def test_minmax_in_filename(self, tmp_path):
        maps = _maps(np.zeros((32, 32)))
        files = render_heatmaps(maps, [], tmp_path)
        (qfile,) = [f for f in files if f.name.startswith("quality")]
        assert "min0.000" in qfile.name and "max0.000" in qfile.name
