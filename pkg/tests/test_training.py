"""Tests for the trainers: step mechanics, toy descent, determinism and resume."""

import math
from pathlib import Path

import pytest
import torch
from torch import nn

from uwtranslate.core.types import Method
from uwtranslate.data.manifest import DatasetManifest
from uwtranslate.data.pipeline import UnpairedDataset, build_unpaired_split, iterate_batches, load_paired
from uwtranslate.engine.checkpoint import load_checkpoint
from uwtranslate.engine.trainers import (
    AutoencoderTrainer,
    CUTTrainer,
    Dataset,
    GanTrainer,
    make_trainer,
    set_requires_grad,
    train_autoencoder,
    train_cut,
    train_cyclegan,
    train_pix2pix,
)
from uwtranslate.errors import ConfigError, DataError
from tests.conftest import build_varos, toy_config


@pytest.fixture
def unpaired(manifest: DatasetManifest) -> UnpairedDataset:
    """Four RGB sources (4-7) and four RGB targets (0-3)."""
    return build_unpaired_split(manifest, (4, 8), (0, 4), workers=1)


@pytest.fixture
def unpaired_rgbd(manifest: DatasetManifest) -> UnpairedDataset:
    """The same split with depth on both sides."""
    return build_unpaired_split(manifest, (4, 8), (0, 4), with_depth=True, target_depth=True, workers=1)


def _snapshot(nets: list[nn.Module]) -> list[torch.Tensor]:
    return [p.detach().clone() for net in nets for p in net.parameters()]


def _unchanged(before: list[torch.Tensor], nets: list[nn.Module]) -> bool:
    return all(torch.equal(a, b) for a, b in zip(before, _snapshot(nets), strict=True))


def _gan_setup(method: Method, manifest: DatasetManifest) -> tuple[GanTrainer, Dataset]:
    if method is Method.PIX2PIX:
        return make_trainer(toy_config(method, batch_size=4), device="cpu"), load_paired(manifest, workers=1)
    return make_trainer(toy_config(method), device="cpu"), build_unpaired_split(manifest, (4, 8), (0, 4), workers=1)


class TestTrainerSetup:
    """Tests for trainer construction and dataset checks."""

    def test_make_trainer_picks_class(self) -> None:
        """CUT and CUT + depth share a trainer class."""
        assert isinstance(make_trainer(toy_config(Method.CUT_DEPTH), device="cpu"), CUTTrainer)
        assert isinstance(make_trainer(toy_config(Method.AUTOENCODER), device="cpu"), AutoencoderTrainer)

    def test_wrong_trainer_for_method(self) -> None:
        """A trainer refuses configs of other methods."""
        with pytest.raises(ConfigError, match="cannot be trained by AutoencoderTrainer"):
            AutoencoderTrainer(toy_config(Method.CUT), device="cpu")

    def test_paired_method_rejects_unpaired_data(self, unpaired: UnpairedDataset) -> None:
        """The autoencoder needs pairs."""
        with pytest.raises(DataError, match="needs a paired dataset"):
            train_autoencoder(toy_config(Method.AUTOENCODER), unpaired, device="cpu")

    def test_cut_depth_needs_depth(self, unpaired: UnpairedDataset) -> None:
        """CUT + depth refuses RGB-only sources."""
        with pytest.raises(DataError, match="needs RGBD source images"):
            train_cut(toy_config(Method.CUT_DEPTH), unpaired, device="cpu")

    def test_cyclegan_rejects_depth(self, unpaired_rgbd: UnpairedDataset) -> None:
        """CycleGAN is RGB only."""
        with pytest.raises(DataError, match="3-channel sources"):
            train_cyclegan(toy_config(Method.CYCLEGAN), unpaired_rgbd, device="cpu")

    def test_entry_point_checks_method(self, manifest: DatasetManifest) -> None:
        """train_pix2pix refuses a config for another method."""
        with pytest.raises(ConfigError, match="expected pix2pix"):
            train_pix2pix(toy_config(Method.AUTOENCODER), load_paired(manifest, workers=1), device="cpu")


class TestTrainSteps:
    """One short run per method, checking the logged components."""

    def test_autoencoder_epoch_counters(self, manifest: DatasetManifest) -> None:
        """One epoch of drop-last batches advances the step and epoch counters."""
        state = train_autoencoder(
            toy_config(Method.AUTOENCODER, batch_size=4), load_paired(manifest, workers=1), device="cpu"
        )

        assert state.global_step == 2
        assert state.epoch == 1

    def test_pix2pix_step(self, manifest: DatasetManifest) -> None:
        """pix2pix logs gan, l1 and the discriminator terms."""
        trainer = make_trainer(toy_config(Method.PIX2PIX, batch_size=4), device="cpu")
        trainer.fit(load_paired(manifest, workers=1))

        step = trainer.history[0]
        assert {"gan", "l1", "total", "d_real", "d_fake", "d_total", "d_accuracy"} <= set(step)
        assert 0.0 <= step["d_accuracy"] <= 1.0

    def test_cyclegan_step(self, unpaired: UnpairedDataset) -> None:
        """CycleGAN logs the adversarial and cycle terms of both directions."""
        trainer = make_trainer(toy_config(Method.CYCLEGAN), device="cpu")
        trainer.fit(unpaired)

        assert len(trainer.history) == 2
        assert {"gan", "cycle", "d_x", "d_y"} <= set(trainer.history[0])

    def test_cut_depth_step(self, unpaired_rgbd: UnpairedDataset) -> None:
        """CUT + depth logs the three generator terms; all finite."""
        trainer = make_trainer(toy_config(Method.CUT_DEPTH), device="cpu")
        trainer.fit(unpaired_rgbd)

        for step in trainer.history:
            assert {"gan", "patchnce_x", "patchnce_y"} <= set(step)
            assert all(math.isfinite(v) for v in step.values())
        assert trainer.warnings == []

    def test_cut_depth_without_target_depth_warns(self, manifest: DatasetManifest) -> None:
        """RGB targets get a constant depth plane for the identity term, with one warning."""
        dataset = build_unpaired_split(manifest, (4, 8), (0, 4), with_depth=True, workers=1)
        trainer = make_trainer(toy_config(Method.CUT_DEPTH), device="cpu")

        trainer.fit(dataset)

        assert len(trainer.warnings) == 1
        assert "constant minimum-depth plane" in trainer.warnings[0]

    def test_train_cut_use_depth_overrides_method(self, unpaired: UnpairedDataset) -> None:
        """use_depth=False trains plain CUT from a cut_depth config."""
        state = train_cut(toy_config(Method.CUT_DEPTH), unpaired, use_depth=False, device="cpu")
        assert state.config.method is Method.CUT

    def test_max_steps_stops_mid_epoch(self, unpaired: UnpairedDataset, tmp_path: Path) -> None:
        """A step budget ends the run and writes a step checkpoint."""
        config = toy_config(Method.CUT, epochs=5, max_steps=3, checkpoint_every=1)
        trainer = make_trainer(config, out_dir=tmp_path, device="cpu")

        state = trainer.fit(unpaired)

        assert state.global_step == 3
        assert state.epoch == 1
        assert (tmp_path / "checkpoints" / "step_0000003" / "descriptor.yaml").is_file()
        assert (tmp_path / "checkpoints" / "epoch_0001").is_dir()
        assert (tmp_path / "best").is_dir()


GAN_METHODS = (Method.PIX2PIX, Method.CYCLEGAN, Method.CUT)


class TestGanAlternation:
    """The discriminator and generator updates touch only their own networks."""

    @pytest.mark.parametrize("method", GAN_METHODS)
    def test_each_step_updates_only_its_side(self, method: Method, manifest: DatasetManifest) -> None:
        """The discriminator step leaves the generators alone and vice versa."""
        trainer, dataset = _gan_setup(method, manifest)
        batch = next(iterate_batches(dataset, trainer.config.batch_size, 0, trainer.paired))
        generators = [trainer.nets[name] for name in trainer.generator_names]
        discriminators = trainer.discriminators
        inputs = trainer.prepare(trainer._to_device(batch))
        fakes = trainer.generate(inputs)

        g_before, d_before = _snapshot(generators), _snapshot(discriminators)
        set_requires_grad(discriminators, True)
        trainer.discriminator_step(inputs, fakes)
        assert _unchanged(g_before, generators)
        assert not _unchanged(d_before, discriminators)

        g_before, d_before = _snapshot(generators), _snapshot(discriminators)
        set_requires_grad(discriminators, False)
        trainer.generator_step(inputs, fakes)
        assert _unchanged(d_before, discriminators)
        assert not _unchanged(g_before, generators)

    @pytest.mark.parametrize("method", GAN_METHODS)
    def test_components_sum_to_logged_totals(self, method: Method, manifest: DatasetManifest) -> None:
        """Weighted generator and discriminator components add up to their logged totals."""
        trainer, dataset = _gan_setup(method, manifest)
        trainer.fit(dataset)

        assert trainer.history
        for step in trainer.history:
            generator = [v for k, v in step.items() if not k.startswith("d_") and k != "total"]
            discriminator = [v for k, v in step.items() if k.startswith("d_") and k not in ("d_total", "d_accuracy")]
            assert sum(generator) == pytest.approx(step["total"], rel=1e-6, abs=1e-6)
            assert sum(discriminator) == pytest.approx(step["d_total"], rel=1e-6, abs=1e-6)


@pytest.mark.slow
class TestToyDescent:
    """Small runs that must reduce their training loss."""

    def test_autoencoder_overfits_five_pairs(self, tmp_path: Path) -> None:
        """5 paired 64x64 images, 300 steps: final MSE below 10% of the initial MSE."""
        root = build_varos(tmp_path / "five", range(5), size=64)
        examples = load_paired(DatasetManifest(root=root, image_size=64), workers=1)
        config = toy_config(
            Method.AUTOENCODER,
            image_size=64,
            base_filters=16,
            batch_size=5,
            epochs=300,
            learning_rate=1e-3,
            betas=(0.9, 0.999),
        )
        trainer = make_trainer(config, device="cpu")

        trainer.fit(examples)

        assert len(trainer.history) == 300
        assert trainer.history[-1]["mse"] < 0.1 * trainer.history[0]["mse"]

    def test_cut_loss_decreases(self, tmp_path: Path) -> None:
        """16 images per domain at 32x32, 200 steps: the loss falls and the discriminator stays undecided."""
        root = build_varos(tmp_path / "toy", range(32))
        dataset = build_unpaired_split(DatasetManifest(root=root, image_size=32), (16, 32), (0, 16), workers=1)
        trainer = make_trainer(toy_config(Method.CUT, epochs=100, max_steps=200), device="cpu")

        trainer.fit(dataset)

        totals = [step["total"] for step in trainer.history]
        assert len(totals) == 200
        assert all(math.isfinite(v) for step in trainer.history for v in step.values())
        assert sum(totals[-10:]) / 10 < sum(totals[:10]) / 10
        accuracy = [step["d_accuracy"] for step in trainer.history[-50:]]
        assert 0.5 < sum(accuracy) / len(accuracy) < 1.0


@pytest.mark.usefixtures("deterministic_torch")
class TestReproducibility:
    """Determinism and resume."""

    @pytest.mark.slow
    def test_same_seed_same_losses(self, unpaired: UnpairedDataset) -> None:
        """Two deterministic runs with one seed log identical losses for 100 steps."""
        config = toy_config(Method.CUT, epochs=50, max_steps=100, deterministic=True)

        first = make_trainer(config, device="cpu")
        first.fit(unpaired)
        second = make_trainer(config, device="cpu")
        second.fit(unpaired)

        assert len(first.history) == 100
        assert first.history == second.history

    def test_resume_continues_the_same_run(self, unpaired: UnpairedDataset, tmp_path: Path) -> None:
        """Resuming from epoch 1 reproduces epoch 2 of an uninterrupted run."""
        short = make_trainer(
            toy_config(Method.CUT, epochs=1, checkpoint_every=1, deterministic=True),
            out_dir=tmp_path / "short",
            device="cpu",
        )
        short.fit(unpaired)
        checkpoint = tmp_path / "short" / "checkpoints" / "epoch_0001"

        full = make_trainer(toy_config(Method.CUT, epochs=2, deterministic=True), device="cpu")
        full.fit(unpaired)

        resumed = make_trainer(toy_config(Method.CUT, epochs=2, deterministic=True), device="cpu")
        resumed.restore(load_checkpoint(checkpoint, expected=resumed.config))
        resumed.fit(unpaired)

        assert resumed.global_step == full.global_step == 4
        per_epoch = len(short.history)
        for got, want in zip(resumed.history, full.history[per_epoch:], strict=True):
            assert got == pytest.approx(want, abs=1e-6)

    def test_resume_mid_epoch(self, unpaired: UnpairedDataset, tmp_path: Path) -> None:
        """Resuming from a step checkpoint skips the batches already trained in that epoch."""
        short = make_trainer(
            toy_config(Method.CUT, epochs=2, max_steps=1, deterministic=True),
            out_dir=tmp_path / "short",
            device="cpu",
        )
        short.fit(unpaired)
        checkpoint = tmp_path / "short" / "checkpoints" / "step_0000001"

        full = make_trainer(toy_config(Method.CUT, epochs=2, deterministic=True), device="cpu")
        full.fit(unpaired)

        resumed = make_trainer(toy_config(Method.CUT, epochs=2, deterministic=True), device="cpu")
        resumed.restore(load_checkpoint(checkpoint, expected=resumed.config))
        resumed.fit(unpaired)

        assert (resumed.epoch, resumed.global_step) == (full.epoch, full.global_step) == (2, 4)
        for got, want in zip(resumed.history, full.history[1:], strict=True):
            assert got == pytest.approx(want, abs=1e-6)
