"""Tests for SSIM, FID, feature extractors and the evaluation protocol."""

from pathlib import Path

import numpy as np
import pytest
import torch

from uwtranslate.core.types import ImageTensor, Method, normalize
from uwtranslate.data.manifest import DatasetManifest
from uwtranslate.engine.trainers import make_trainer
from uwtranslate.errors import CheckpointError, ConfigError, DataError, MetricError
from uwtranslate.evaluation.evaluator import (
    STATUS_FAILED,
    ReportRow,
    evaluate_checkpoint,
    evaluate_translator,
    failed_rows,
    identity_translate,
    load_test_set,
    resolve_subsets,
)
from uwtranslate.evaluation.extractors import FeatureExtractor, RandomProjectionExtractor, build_extractor
from uwtranslate.evaluation.metrics import (
    GaussianStats,
    fid,
    fid_report,
    fit_gaussian,
    frechet_distance,
    gaussian_window,
    luminance,
    ssim,
)
from tests.conftest import make_scene, toy_config


def _grey(plane: np.ndarray) -> ImageTensor:
    """Single-channel image from a [0, 1] plane."""
    return ImageTensor(torch.from_numpy(plane * 2.0 - 1.0).float().unsqueeze(0))


def _brute_force_ssim(x: np.ndarray, y: np.ndarray, size: int = 11, sigma: float = 1.5) -> float:
    w = gaussian_window(size, sigma)
    c1, c2 = 0.01**2, 0.03**2
    scores = []
    for i in range(x.shape[0] - size + 1):
        for j in range(x.shape[1] - size + 1):
            px, py = x[i : i + size, j : j + size], y[i : i + size, j : j + size]
            mx, my = (w * px).sum(), (w * py).sum()
            vx = (w * (px - mx) ** 2).sum()
            vy = (w * (py - my) ** 2).sum()
            cxy = (w * (px - mx) * (py - my)).sum()
            scores.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(scores))


def _checkerboard(size: int = 16, cell: int = 2) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    return (((yy // cell) + (xx // cell)) % 2).astype(np.float64)


def _scene_images(n: int, seed: int = 0) -> list[ImageTensor]:
    rng = np.random.default_rng(seed)
    return [normalize(make_scene(rng, 32)[1], (0, 255)) for _ in range(n)]


@pytest.fixture
def extractor() -> RandomProjectionExtractor:
    """Seeded random-projection features."""
    return RandomProjectionExtractor(output_dim=64, seed=0)


class TestSsim:
    """Tests for ssim."""

    def test_identity(self) -> None:
        """ssim(x, x) is 1 for 100 random images."""
        gen = torch.Generator().manual_seed(0)
        for _ in range(100):
            x = ImageTensor(torch.rand(3, 16, 16, generator=gen) * 2 - 1)
            assert ssim(x, x) == pytest.approx(1.0, abs=1e-6)

    def test_symmetry(self) -> None:
        """ssim(a, b) == ssim(b, a)."""
        gen = torch.Generator().manual_seed(1)
        a = ImageTensor(torch.rand(3, 24, 24, generator=gen) * 2 - 1)
        b = ImageTensor(torch.rand(3, 24, 24, generator=gen) * 2 - 1)
        assert abs(ssim(a, b) - ssim(b, a)) <= 1e-9

    @pytest.mark.parametrize("fixture", ["checkerboard", "ramp", "noise"])
    def test_matches_windowed_brute_force(self, fixture: str) -> None:
        """The filtered implementation equals an explicit window loop on 16x16 fixtures."""
        rng = np.random.default_rng(7)
        ramp = np.tile(np.linspace(0.0, 1.0, 16), (16, 1))
        planes = {
            "checkerboard": (_checkerboard(), np.clip(ramp + 0.1 * _checkerboard(), 0, 1)),
            "ramp": (ramp, ramp.T),
            "noise": (rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))),
        }
        x, y = planes[fixture]
        a, b = _grey(x), _grey(y)

        expected = _brute_force_ssim(luminance(a), luminance(b))

        assert ssim(a, b) == pytest.approx(expected, abs=1e-8)

    def test_inverted_checkerboard_is_negative(self) -> None:
        """A binary image against its inverse scores below zero."""
        board = _checkerboard()
        assert ssim(_grey(board), _grey(1.0 - board)) < 0.0

    def test_rgb_uses_luma(self) -> None:
        """RGB images are compared on their BT.601 luma plane."""
        rgb = torch.zeros(3, 12, 12)
        rgb[1] = 0.5
        expected = 0.299 * 0.5 + 0.587 * 0.75 + 0.114 * 0.5
        assert luminance(ImageTensor(rgb))[0, 0] == pytest.approx(expected)

    def test_shape_mismatch(self) -> None:
        """Images must share a shape."""
        with pytest.raises(ValueError, match="equal shapes"):
            ssim(ImageTensor(torch.zeros(3, 16, 16)), ImageTensor(torch.zeros(3, 16, 17)))

    def test_smaller_than_window(self) -> None:
        """Images below 11x11 cannot be scored."""
        with pytest.raises(ValueError, match="smaller than the 11x11"):
            ssim(ImageTensor(torch.zeros(3, 8, 8)), ImageTensor(torch.zeros(3, 8, 8)))


class TestGaussianFit:
    """Tests for fit_gaussian."""

    def test_two_scalars(self) -> None:
        """{0, 2} has mean 1 and unbiased variance 2."""
        stats = fit_gaussian(np.array([0.0, 2.0]))
        assert stats.mean.tolist() == [1.0]
        assert stats.covariance.tolist() == [[2.0]]

    def test_identical_vectors(self) -> None:
        """Identical samples have zero covariance."""
        stats = fit_gaussian(np.ones((4, 3)))
        assert np.array_equal(stats.covariance, np.zeros((3, 3)))

    def test_matches_nested_loop(self) -> None:
        """The covariance equals an explicit double loop."""
        x = np.random.default_rng(3).normal(size=(7, 4))
        stats = fit_gaussian(x)
        mean = x.mean(axis=0)
        for i in range(4):
            for j in range(4):
                expected = sum((x[k, i] - mean[i]) * (x[k, j] - mean[j]) for k in range(7)) / 6
                assert stats.covariance[i, j] == pytest.approx(expected, abs=1e-10)
        assert np.abs(stats.covariance - stats.covariance.T).max() <= 1e-10

    def test_singularity_warning(self) -> None:
        """Six samples of 2048-D features carry a singularity warning."""
        stats = fit_gaussian(np.random.default_rng(0).normal(size=(6, 2048)))
        assert stats.sample_count == 6
        assert any("singular covariance" in w for w in stats.warnings)

    def test_needs_two_samples(self) -> None:
        """One sample has no covariance."""
        with pytest.raises(ValueError, match="covariance undefined"):
            fit_gaussian(np.zeros((1, 3)))


class TestFrechetDistance:
    """Tests for frechet_distance."""

    def test_identical_stats(self) -> None:
        """A distribution is at distance 0 from itself, singular or not."""
        stats = fit_gaussian(np.random.default_rng(0).normal(size=(20, 5)))
        assert frechet_distance(stats, stats) == pytest.approx(0.0, abs=1e-5)
        singular = GaussianStats(np.zeros(3), np.zeros((3, 3)), 2)
        assert frechet_distance(singular, singular) == pytest.approx(0.0, abs=1e-5)

    def test_diagonal_example(self) -> None:
        """diag(1, 4) vs identity gives 7 - 6 = 1."""
        g1 = GaussianStats(np.zeros(2), np.diag([1.0, 4.0]), 10)
        g2 = GaussianStats(np.zeros(2), np.eye(2), 10)
        assert frechet_distance(g1, g2) == pytest.approx(1.0, abs=1e-8)

    def test_mean_shift_only(self) -> None:
        """Equal covariances leave only the squared mean difference."""
        g1 = GaussianStats(np.array([3.0, 4.0]), np.eye(2), 10)
        g2 = GaussianStats(np.zeros(2), np.eye(2), 10)
        assert frechet_distance(g1, g2) == pytest.approx(25.0, abs=1e-8)

    def test_random_diagonal_closed_form(self) -> None:
        """100 random diagonal instances match sum(a + b - 2 sqrt(ab)) + |dmu|^2."""
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = rng.uniform(0.1, 5.0, size=4), rng.uniform(0.1, 5.0, size=4)
            mu1, mu2 = rng.normal(size=4), rng.normal(size=4)
            expected = float(np.sum((mu1 - mu2) ** 2) + np.sum(a + b - 2 * np.sqrt(a * b)))
            got = frechet_distance(GaussianStats(mu1, np.diag(a), 10), GaussianStats(mu2, np.diag(b), 10))
            assert got == pytest.approx(expected, abs=1e-8)

    def test_dimension_mismatch(self) -> None:
        """Stats of different dimension cannot be compared."""
        with pytest.raises(ValueError, match="dimension mismatch"):
            frechet_distance(GaussianStats(np.zeros(2), np.eye(2), 3), GaussianStats(np.zeros(3), np.eye(3), 3))

    def test_ill_conditioned_product(self) -> None:
        """A covariance with a large negative eigenvalue is rejected."""
        bad = GaussianStats(np.zeros(2), np.diag([1.0, -1.0]), 3)
        good = GaussianStats(np.zeros(2), np.eye(2), 3)
        with pytest.raises(MetricError, match="ill-conditioned covariance product"):
            frechet_distance(good, bad)


class TestFid:
    """Tests for fid over image sets."""

    def test_same_set(self, extractor: RandomProjectionExtractor) -> None:
        """A set is at FID 0 from itself."""
        images = _scene_images(10)
        assert fid(images, images, extractor) == pytest.approx(0.0, abs=1e-5)

    def test_permutation_invariant(self, extractor: RandomProjectionExtractor) -> None:
        """Reordering either set leaves FID unchanged."""
        a, b = _scene_images(12, seed=1), _scene_images(12, seed=2)
        assert fid(a[::-1], b, extractor) == pytest.approx(fid(a, b, extractor), rel=1e-9)

    def test_singularity_warning_propagates(self, extractor: RandomProjectionExtractor) -> None:
        """64-D features of 6 images are flagged."""
        _, warnings = fid_report(_scene_images(6, 1), _scene_images(6, 2), extractor)
        assert warnings == ["singular covariance: 64-D features from only 6 samples"]

    def test_halves_converge(self, extractor: RandomProjectionExtractor) -> None:
        """Disjoint halves of one set get closer as the set grows from 10 to 25 to 50."""
        images = _scene_images(50, seed=3)
        orders = [np.random.default_rng(s).permutation(50) for s in range(5)]

        def mean_fid(n: int) -> float:
            halves = [([images[i] for i in o[:n:2]], [images[i] for i in o[1:n:2]]) for o in orders]
            return float(np.mean([fid(a, b, extractor) for a, b in halves]))

        scores = [mean_fid(n) for n in (10, 25, 50)]
        assert scores[0] > scores[1] > scores[2] > 0.0


class TestExtractors:
    """Tests for feature extractors."""

    def test_random_projection_is_deterministic(self, extractor: RandomProjectionExtractor) -> None:
        """Same image, same features; a fresh extractor with the same seed agrees."""
        images = _scene_images(3)
        feats = extractor(images)

        assert feats.shape == (3, 64)
        assert np.array_equal(feats, RandomProjectionExtractor(output_dim=64, seed=0)(images))
        assert isinstance(extractor, FeatureExtractor)

    def test_depth_plane_is_ignored(self, extractor: RandomProjectionExtractor) -> None:
        """RGBD images are featurized from their RGB planes."""
        rgb = _scene_images(1)[0]
        rgbd = ImageTensor(torch.cat([rgb.data, torch.zeros(1, 32, 32)]))
        assert np.array_equal(extractor([rgb]), extractor([rgbd]))

    def test_build_extractor(self, tmp_path: Path) -> None:
        """No weights file gives the random projection; a missing file is a config error."""
        assert isinstance(build_extractor(), RandomProjectionExtractor)
        with pytest.raises(ConfigError, match="extractor weights file not found"):
            build_extractor(tmp_path / "inception.pt")


class TestResolveSubsets:
    """Tests for subset specifications."""

    AVAILABLE = [f"{i:05d}" for i in range(10)]

    def test_default_is_everything(self) -> None:
        """No specs give one subset named all."""
        assert resolve_subsets([], self.AVAILABLE) == [("all", self.AVAILABLE)]

    def test_random_draw_is_seeded(self) -> None:
        """random:K draws K distinct ids, reproducibly, in test-set order."""
        first = resolve_subsets(["six=random:6"], self.AVAILABLE, seed=4)
        again = resolve_subsets(["six=random:6"], self.AVAILABLE, seed=4)

        name, ids = first[0]
        assert name == "six"
        assert first == again
        assert len(set(ids)) == 6
        assert ids == sorted(ids)

    def test_explicit_ids_and_file(self, tmp_path: Path) -> None:
        """Ids can be listed inline or in a file."""
        id_file = tmp_path / "ids.txt"
        id_file.write_text("00001\n00003\n\n", encoding="utf-8")

        subsets = resolve_subsets(["a=00000,00002", f"b=@{id_file}"], self.AVAILABLE)

        assert subsets == [("a", ["00000", "00002"]), ("b", ["00001", "00003"])]

    @pytest.mark.parametrize("spec", ["six", "=all", "six="])
    def test_malformed(self, spec: str) -> None:
        """Specs need a name and a rule."""
        with pytest.raises(ConfigError, match="must look like"):
            resolve_subsets([spec], self.AVAILABLE)

    def test_too_many_random(self) -> None:
        """Cannot draw more ids than exist."""
        with pytest.raises(ConfigError, match="cannot draw 11 of 10"):
            resolve_subsets(["big=random:11"], self.AVAILABLE)

    def test_unknown_ids(self) -> None:
        """Ids outside the test set are a data error."""
        with pytest.raises(DataError, match="not in the test set"):
            resolve_subsets(["x=99999"], self.AVAILABLE)


class TestEvaluate:
    """Tests for evaluate_translator and evaluate_checkpoint."""

    def test_identity_baseline_two_subsets(
        self, manifest: DatasetManifest, extractor: RandomProjectionExtractor
    ) -> None:
        """The identity translator scores the input against the ground truth on every subset."""
        test_set = load_test_set(manifest, 32)
        subsets = [("six", test_set.ids[:6]), ("all", test_set.ids)]

        report = evaluate_translator(identity_translate, "identity", test_set, subsets, extractor)

        assert [(r.method, r.subset, r.n) for r in report.rows] == [("identity", "six", 6), ("identity", "all", 8)]
        expected = np.mean([ssim(test_set.inputs[i], test_set.targets[i]) for i in test_set.ids])
        assert report.row("identity", "all").ssim == pytest.approx(expected)
        assert report.row("identity", "six").fid > 0.0
        assert report.extractor == extractor.name
        assert report.failed == []

    def test_missing_ground_truth_omits_ssim(
        self, manifest: DatasetManifest, varos_root: Path, extractor: RandomProjectionExtractor
    ) -> None:
        """Without full ground truth SSIM is absent but FID is still computed."""
        (varos_root / "A" / "00007.png").unlink()
        test_set = load_test_set(manifest, 32)

        report = evaluate_translator(identity_translate, "identity", test_set, [("all", test_set.ids)], extractor)

        row = report.rows[0]
        assert row.ssim is None
        assert row.fid is not None
        assert any("SSIM omitted" in w for w in row.warnings)

    def test_no_subsets(self, manifest: DatasetManifest, extractor: RandomProjectionExtractor) -> None:
        """At least one subset is required."""
        with pytest.raises(ConfigError, match="at least one evaluation subset"):
            evaluate_translator(identity_translate, "identity", load_test_set(manifest, 32), [], extractor)

    def test_checkpoint_with_depth(
        self, manifest: DatasetManifest, tmp_path: Path, extractor: RandomProjectionExtractor
    ) -> None:
        """A CUT + depth checkpoint is evaluated on RGBD test inputs."""
        trainer = make_trainer(toy_config(Method.CUT_DEPTH), depth_range=(0.0, 65535.0), device="cpu")
        checkpoint = trainer.save(tmp_path / "ckpt")

        report = evaluate_checkpoint(checkpoint, manifest, [("all", [f"{i:05d}" for i in range(8)])], extractor)

        row = report.rows[0]
        assert row.method == "cut_depth"
        assert row.status == "ok"
        assert -1.0 <= row.ssim <= 1.0

    def test_failed_rows(self) -> None:
        """An unloadable checkpoint yields failed rows carrying the error."""
        report = failed_rows("cut", [("six", ["a"] * 6), ("all", ["a"] * 8)], CheckpointError("boom"))

        assert [r.status for r in report.rows] == [STATUS_FAILED, STATUS_FAILED]
        assert report.rows[1].n == 8
        assert report.rows[0].warnings == ["boom"]

    def test_ill_conditioned_fid_becomes_a_warning(
        self, manifest: DatasetManifest, extractor: RandomProjectionExtractor, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """An FID that cannot be computed leaves the row ok with SSIM and a warning."""

        def ill_conditioned(*args: object) -> tuple[float, list[str]]:
            raise MetricError("ill-conditioned covariance product (eigenvalue -0.5)")

        monkeypatch.setattr("uwtranslate.evaluation.evaluator.fid_report", ill_conditioned)
        test_set = load_test_set(manifest, 32)

        report = evaluate_translator(identity_translate, "identity", test_set, [("all", test_set.ids)], extractor)

        row = report.rows[0]
        assert row.status == "ok"
        assert row.fid is None
        assert row.ssim is not None
        assert row.warnings == ["FID omitted: ill-conditioned covariance product (eigenvalue -0.5)"]

    def test_row_ranges(self) -> None:
        """Report rows reject SSIM outside [-1, 1] and negative FID."""
        with pytest.raises(ValueError, match="outside"):
            ReportRow("m", "s", 1, ssim=1.5)
        with pytest.raises(ValueError, match="negative FID"):
            ReportRow("m", "s", 1, fid=-0.1)
