"""Trainers for the autoencoder, pix2pix, CycleGAN, CUT, and CUT + depth recipes.

Every trainer owns its networks and optimizers exclusively. GAN trainers alternate one
discriminator update with one generator update per batch; the discriminator is frozen
while the generator steps and the generator output is detached while the discriminator
steps.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import os
import random
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from uwtranslate.core.types import GanMode, Method, TrainConfig
from uwtranslate.data.pipeline import Batch, PairedExample, UnpairedDataset, batches_per_epoch, iterate_batches
from uwtranslate.engine.checkpoint import (
    TrainerState,
    capture_rng_state,
    check_compatible,
    load_checkpoint,
    restore_rng_state,
    save_checkpoint,
)
from uwtranslate.engine.metrics_logger import MetricsLogger
from uwtranslate.errors import ConfigError, DataError, UwtError
from uwtranslate.networks.factory import build_networks
from uwtranslate.objectives.losses import LossValue, combined_cut_loss, cycle_consistency_loss, gan_loss, mse_loss

logger = logging.getLogger(__name__)

Dataset = Sequence[PairedExample] | UnpairedDataset


def seed_everything(seed: int, deterministic: bool = False) -> None:
    """Seed Python, NumPy, and torch; optionally force deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
        torch.use_deterministic_algorithms(True)
        torch.backends.cudnn.benchmark = False


def set_requires_grad(nets: Iterable[nn.Module], requires_grad: bool) -> None:
    for net in nets:
        for param in net.parameters():
            param.requires_grad = requires_grad


def discriminator_accuracy(real_logits: torch.Tensor, fake_logits: torch.Tensor, mode: GanMode) -> float:
    """Share of patches classified correctly (real above, fake below the decision threshold)."""
    threshold = 0.5 if mode is GanMode.LEAST_SQUARES else 0.0
    real_ok = (real_logits.detach() > threshold).float().mean()
    fake_ok = (fake_logits.detach() < threshold).float().mean()
    return float(0.5 * (real_ok + fake_ok))


class Trainer:
    """Shared epoch loop, checkpointing, and resume logic.

    Subclasses set ``methods`` / ``paired`` / network name groups and implement
    ``train_step``, which returns the metrics to log for one batch.
    """

    methods: ClassVar[tuple[Method, ...]] = ()
    paired: ClassVar[bool] = True
    generator_names: ClassVar[tuple[str, ...]] = ()
    discriminator_names: ClassVar[tuple[str, ...]] = ()
    monitor: ClassVar[str] = "total"

    def __init__(
        self,
        config: TrainConfig,
        out_dir: Path | None = None,
        metrics: MetricsLogger | None = None,
        depth_range: tuple[float, float] | None = None,
        device: str | torch.device | None = None,
    ) -> None:
        if config.method not in self.methods:
            raise ConfigError(
                f"train.method {config.method.value} cannot be trained by {type(self).__name__} "
                f"(expects {[m.value for m in self.methods]})"
            )
        self.config = config
        seed_everything(config.seed, config.deterministic)
        self.device = torch.device(device or ("cuda" if torch.cuda.is_available() else "cpu"))
        self.nets = {name: net.to(self.device) for name, net in build_networks(config).items()}
        self.optimizers = self._build_optimizers()
        self.out_dir = out_dir
        self.metrics = metrics if metrics is not None else MetricsLogger(flush_interval=config.log_flush_interval)
        self.depth_range = depth_range
        self.epoch = 0
        self.global_step = 0
        self.best_metric: float | None = None
        self.history: list[dict[str, float]] = []
        self.warnings: list[str] = []
        self.last_checkpoint: Path | None = None
        self._saved_step = -1

    def _adam(self, names: Sequence[str]) -> torch.optim.Adam:
        params = [p for name in names for p in self.nets[name].parameters()]
        return torch.optim.Adam(
            params,
            lr=self.config.learning_rate,
            betas=self.config.betas,
            weight_decay=self.config.weight_decay,
        )

    def _build_optimizers(self) -> dict[str, torch.optim.Optimizer]:
        optimizers = {"generator": self._adam(self.generator_names)}
        if self.discriminator_names:
            optimizers["discriminator"] = self._adam(self.discriminator_names)
        return optimizers

    def check_dataset(self, dataset: Dataset) -> None:
        if self.paired and isinstance(dataset, UnpairedDataset):
            raise DataError(f"{self.config.method.value} training needs a paired dataset, got an unpaired one")
        if not self.paired and not isinstance(dataset, UnpairedDataset):
            raise DataError(f"{self.config.method.value} training needs an unpaired dataset")

    def train_step(self, batch: Batch) -> dict[str, float]:
        raise NotImplementedError

    def step_seed(self) -> int:
        """Patch-sampling seed for the current step; a pure function of (seed, step)."""
        return self.config.seed * 1_000_003 + self.global_step

    def _to_device(self, batch: Batch) -> Batch:
        return dataclasses.replace(batch, x=batch.x.to(self.device), y=batch.y.to(self.device))

    def fit(self, dataset: Dataset) -> TrainerState:
        """Train from the current epoch to ``config.epochs`` (or ``config.max_steps``)."""
        self.check_dataset(dataset)
        cfg = self.config
        n_batches = batches_per_epoch(dataset, cfg.batch_size)
        for net in self.nets.values():
            net.train()
        logger.info(
            "Training %s from epoch %d: %d batches/epoch, %d epochs",
            cfg.method.value,
            self.epoch,
            n_batches,
            cfg.epochs,
        )

        # batches of the current epoch already trained before a mid-epoch checkpoint
        done = self.global_step - self.epoch * n_batches
        if not 0 <= done < n_batches:
            done = 0
        stopped = False
        for epoch in range(self.epoch, cfg.epochs):
            totals = []
            batches = iterate_batches(dataset, cfg.batch_size, cfg.seed, self.paired, epoch)
            if done:
                logger.info("Skipping %d batches of epoch %d trained before the checkpoint", done, epoch)
                batches = itertools.islice(batches, done, None)
            for batch in batches:
                if cfg.max_steps is not None and self.global_step >= cfg.max_steps:
                    stopped = True
                    break
                values = self.train_step(self._to_device(batch))
                bad = [name for name, v in values.items() if not math.isfinite(v)]
                if bad:
                    raise UwtError(f"non-finite loss component(s) {bad} at step {self.global_step + 1}")
                self.global_step += 1
                self.metrics.log_many(self.global_step, epoch, values)
                self.history.append(values)
                totals.append(values[self.monitor])
            if done + len(totals) == n_batches:
                self.epoch = epoch + 1
                self._end_of_epoch(totals)
            done = 0
            if stopped:
                break

        self.metrics.flush()
        if self.out_dir is not None and self._saved_step != self.global_step:
            self.save(self.out_dir / "checkpoints" / f"step_{self.global_step:07d}")
        return self.state()

    def _end_of_epoch(self, totals: list[float]) -> None:
        mean_total = float(np.mean(totals))
        logger.info("Epoch %d done: mean %s %.6f", self.epoch, self.monitor, mean_total)
        improved = self.best_metric is None or mean_total < self.best_metric
        if improved:
            self.best_metric = mean_total
        if self.out_dir is None:
            return
        if improved:
            save_checkpoint(self.state(), self.out_dir / "best")
        if self.epoch % self.config.checkpoint_every == 0 or self.epoch == self.config.epochs:
            self.save(self.out_dir / "checkpoints" / f"epoch_{self.epoch:04d}")

    def save(self, path: Path) -> Path:
        self.last_checkpoint = save_checkpoint(self.state(), path)
        self._saved_step = self.global_step
        return path

    def state(self) -> TrainerState:
        return TrainerState(
            config=self.config,
            networks=self.nets,
            optimizer_states={name: opt.state_dict() for name, opt in self.optimizers.items()},
            epoch=self.epoch,
            global_step=self.global_step,
            rng_state=capture_rng_state(),
            best_metric=self.best_metric,
            depth_range=self.depth_range,
        )

    def restore(self, state: TrainerState) -> None:
        """Load parameters, optimizer moments, RNG, and counters from ``state``.

        Raises:
            CheckpointError: If the state was produced by an incompatible config.
        """
        check_compatible(state.config, self.config, Path("<trainer state>"))
        for name, net in self.nets.items():
            net.load_state_dict(state.networks[name].state_dict())
        for name, opt in self.optimizers.items():
            if name in state.optimizer_states:
                opt.load_state_dict(state.optimizer_states[name])
        if state.rng_state is not None:
            restore_rng_state(state.rng_state)
        self.epoch = state.epoch
        self.global_step = state.global_step
        self._saved_step = state.global_step
        self.best_metric = state.best_metric
        if self.depth_range is None:
            self.depth_range = state.depth_range
        logger.info("Resumed %s at epoch %d, step %d", self.config.method.value, self.epoch, self.global_step)


class AutoencoderTrainer(Trainer):
    """MSE regression from the uniform-lighting render to its underwater counterpart."""

    methods = (Method.AUTOENCODER,)
    paired = True
    generator_names = ("autoencoder",)

    def train_step(self, batch: Batch) -> dict[str, float]:
        x, y = batch.x[:, :3], batch.y[:, :3]
        opt = self.optimizers["generator"]
        opt.zero_grad()
        loss = LossValue.combine({"mse": mse_loss(self.nets["autoencoder"](x), y)})
        loss.value.backward()
        opt.step()
        return loss.as_floats()


class GanTrainer(Trainer):
    """Generate once, update the discriminators, then update the generators."""

    def prepare(self, batch: Batch) -> dict[str, torch.Tensor]:
        return {"x": batch.x[:, :3], "y": batch.y[:, :3]}

    def generate(self, inputs: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
        raise NotImplementedError

    def discriminator_step(
        self, inputs: dict[str, torch.Tensor], fakes: dict[str, torch.Tensor]
    ) -> tuple[LossValue, float]:
        raise NotImplementedError

    def generator_step(self, inputs: dict[str, torch.Tensor], fakes: dict[str, torch.Tensor]) -> LossValue:
        raise NotImplementedError

    @property
    def discriminators(self) -> list[nn.Module]:
        return [self.nets[name] for name in self.discriminator_names]

    def _apply(self, optimizer_name: str, loss: LossValue) -> None:
        opt = self.optimizers[optimizer_name]
        opt.zero_grad()
        loss.value.backward()
        opt.step()

    def train_step(self, batch: Batch) -> dict[str, float]:
        inputs = self.prepare(batch)
        fakes = self.generate(inputs)

        set_requires_grad(self.discriminators, True)
        d_loss, accuracy = self.discriminator_step(inputs, fakes)

        set_requires_grad(self.discriminators, False)
        g_loss = self.generator_step(inputs, fakes)
        set_requires_grad(self.discriminators, True)

        return {**g_loss.as_floats(), **d_loss.as_floats("d_total"), "d_accuracy": accuracy}


class Pix2PixTrainer(GanTrainer):
    """Conditional GAN with a U-Net generator and an L1 reconstruction term."""

    methods = (Method.PIX2PIX,)
    paired = True
    generator_names = ("generator",)
    discriminator_names = ("discriminator",)

    def generate(self, inputs: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
        return {"fake": self.nets["generator"](inputs["x"])}

    def discriminator_step(self, inputs, fakes):
        d = self.nets["discriminator"]
        x = inputs["x"]
        real_logits = d(torch.cat([x, inputs["y"]], 1))
        fake_logits = d(torch.cat([x, fakes["fake"].detach()], 1))
        loss = gan_loss(real_logits, fake_logits, "discriminator", self.config.gan_mode)
        self._apply("discriminator", loss)
        return loss, discriminator_accuracy(real_logits, fake_logits, self.config.gan_mode)

    def generator_step(self, inputs, fakes):
        fake = fakes["fake"]
        logits = self.nets["discriminator"](torch.cat([inputs["x"], fake], 1))
        loss = LossValue.combine(
            {
                "gan": gan_loss(None, logits, "generator", self.config.gan_mode).value,
                "l1": F.l1_loss(fake, inputs["y"]),
            },
            {"gan": self.config.loss_weights["gan"], "l1": self.config.lambda_l1},
        )
        self._apply("generator", loss)
        return loss


class CycleGANTrainer(GanTrainer):
    """Two generators (X->Y, Y->X) and two discriminators tied by cycle consistency."""

    methods = (Method.CYCLEGAN,)
    paired = False
    generator_names = ("g_xy", "g_yx")
    discriminator_names = ("d_y", "d_x")

    def check_dataset(self, dataset: Dataset) -> None:
        super().check_dataset(dataset)
        if dataset.source_has_depth:
            raise DataError("CycleGAN takes 3-channel sources; depth conditioning is only available for cut_depth")

    def generate(self, inputs):
        return {"fake_y": self.nets["g_xy"](inputs["x"]), "fake_x": self.nets["g_yx"](inputs["y"])}

    def discriminator_step(self, inputs, fakes):
        mode = self.config.gan_mode
        d_y, d_x = self.nets["d_y"], self.nets["d_x"]
        real_y, fake_y = d_y(inputs["y"]), d_y(fakes["fake_y"].detach())
        real_x, fake_x = d_x(inputs["x"]), d_x(fakes["fake_x"].detach())
        loss = LossValue.combine(
            {
                "d_y": gan_loss(real_y, fake_y, "discriminator", mode).value,
                "d_x": gan_loss(real_x, fake_x, "discriminator", mode).value,
            }
        )
        self._apply("discriminator", loss)
        accuracy = 0.5 * (
            discriminator_accuracy(real_y, fake_y, mode) + discriminator_accuracy(real_x, fake_x, mode)
        )
        return loss, accuracy

    def generator_step(self, inputs, fakes):
        mode = self.config.gan_mode
        adversarial = gan_loss(None, self.nets["d_y"](fakes["fake_y"]), "generator", mode).value + gan_loss(
            None, self.nets["d_x"](fakes["fake_x"]), "generator", mode
        ).value
        cycle = cycle_consistency_loss(
            self.nets["g_xy"],
            self.nets["g_yx"],
            inputs["x"],
            inputs["y"],
            fake_y=fakes["fake_y"],
            fake_x=fakes["fake_x"],
        )
        loss = LossValue.combine(
            {"gan": adversarial, "cycle": cycle.value},
            {"gan": self.config.loss_weights["gan"], "cycle": self.config.lambda_cycle},
        )
        self._apply("generator", loss)
        return loss


class CUTTrainer(GanTrainer):
    """One refiner, one discriminator, and projection heads trained with PatchNCE."""

    methods = (Method.CUT, Method.CUT_DEPTH)
    paired = False
    generator_names = ("refiner", "heads")
    discriminator_names = ("discriminator",)

    @property
    def use_depth(self) -> bool:
        return self.config.method is Method.CUT_DEPTH

    def check_dataset(self, dataset: Dataset) -> None:
        super().check_dataset(dataset)
        if self.use_depth and not dataset.source_has_depth:
            raise DataError("cut_depth needs RGBD source images but the dataset has no depth planes")

    def _identity_input(self, y: torch.Tensor) -> torch.Tensor:
        if not self.use_depth:
            return y[:, :3]
        if y.shape[1] == 4 and self.config.target_depth:
            return y
        if not self.warnings:
            message = "target images have no depth; identity term uses a constant minimum-depth plane"
            logger.warning(message)
            self.warnings.append(message)
        plane = torch.full_like(y[:, :1], -1.0)
        return torch.cat([y[:, :3], plane], 1)

    def prepare(self, batch: Batch) -> dict[str, torch.Tensor]:
        x = batch.x if self.use_depth else batch.x[:, :3]
        return {"x": x, "y": batch.y[:, :3], "y_in": self._identity_input(batch.y)}

    def generate(self, inputs):
        return {"fake": self.nets["refiner"](inputs["x"])}

    def discriminator_step(self, inputs, fakes):
        d = self.nets["discriminator"]
        real_logits = d(inputs["y"])
        fake_logits = d(fakes["fake"].detach())
        loss = gan_loss(real_logits, fake_logits, "discriminator", self.config.gan_mode)
        self._apply("discriminator", loss)
        return loss, discriminator_accuracy(real_logits, fake_logits, self.config.gan_mode)

    def generator_step(self, inputs, fakes):
        loss = combined_cut_loss(
            self.nets["refiner"],
            self.nets["heads"],
            self.nets["discriminator"],
            inputs["x"],
            inputs["y_in"],
            self.config.contrastive,
            self.config.gan_mode,
            weights=self.config.loss_weights,
            seed=self.step_seed(),
            fake=fakes["fake"],
        )
        self._apply("generator", loss)
        return loss


TRAINERS: dict[Method, type[Trainer]] = {
    Method.AUTOENCODER: AutoencoderTrainer,
    Method.PIX2PIX: Pix2PixTrainer,
    Method.CYCLEGAN: CycleGANTrainer,
    Method.CUT: CUTTrainer,
    Method.CUT_DEPTH: CUTTrainer,
}


def make_trainer(config: TrainConfig, **kwargs: Any) -> Trainer:
    return TRAINERS[config.method](config, **kwargs)


def _run(
    config: TrainConfig,
    dataset: Dataset,
    method: Method,
    resume_from: Path | None = None,
    **kwargs: Any,
) -> TrainerState:
    if config.method is not method:
        raise ConfigError(f"train.method is {config.method.value}, expected {method.value}")
    trainer = make_trainer(config, **kwargs)
    if resume_from is not None:
        trainer.restore(load_checkpoint(resume_from, expected=config))
    return trainer.fit(dataset)


def train_autoencoder(config: TrainConfig, dataset: Sequence[PairedExample], **kwargs: Any) -> TrainerState:
    """Train the MSE autoencoder. Keyword arguments go to the trainer (out_dir, metrics, ...)."""
    return _run(config, dataset, Method.AUTOENCODER, **kwargs)


def train_pix2pix(config: TrainConfig, dataset: Sequence[PairedExample], **kwargs: Any) -> TrainerState:
    return _run(config, dataset, Method.PIX2PIX, **kwargs)


def train_cyclegan(config: TrainConfig, dataset: UnpairedDataset, **kwargs: Any) -> TrainerState:
    return _run(config, dataset, Method.CYCLEGAN, **kwargs)


def train_cut(
    config: TrainConfig,
    dataset: UnpairedDataset,
    use_depth: bool | None = None,
    **kwargs: Any,
) -> TrainerState:
    """Train CUT, or CUT + depth when ``use_depth`` (defaults to the config's method)."""
    if use_depth is not None:
        method = Method.CUT_DEPTH if use_depth else Method.CUT
        if config.method is not method:
            config = dataclasses.replace(config, method=method)
    return _run(config, dataset, config.method, **kwargs)
