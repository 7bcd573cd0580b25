"""Tests for checkpoint directories."""

from pathlib import Path

import numpy as np
import pytest
import torch
import yaml

from uwtranslate.core.types import Method
from uwtranslate.engine.checkpoint import (
    DESCRIPTOR_FILE,
    PARAMS_FILE,
    config_hash,
    load_checkpoint,
    load_translator,
    read_descriptor,
)
from uwtranslate.engine.trainers import make_trainer
from uwtranslate.errors import CheckpointError
from tests.conftest import toy_config


@pytest.fixture
def checkpoint(tmp_path: Path) -> Path:
    """An untrained CUT + depth checkpoint at epoch 3, step 12."""
    trainer = make_trainer(toy_config(Method.CUT_DEPTH), depth_range=(0.0, 65535.0), device="cpu")
    trainer.epoch, trainer.global_step = 3, 12
    return trainer.save(tmp_path / "ckpt")


class TestConfigHash:
    """Tests for config_hash."""

    def test_runtime_fields_do_not_count(self) -> None:
        """Run length and logging knobs leave the hash unchanged."""
        base = toy_config(Method.CUT)
        assert config_hash(base) == config_hash(toy_config(Method.CUT, epochs=50, max_steps=7, checkpoint_every=3))

    def test_model_fields_count(self) -> None:
        """Learning rate and architecture change the hash."""
        base = config_hash(toy_config(Method.CUT))
        assert config_hash(toy_config(Method.CUT, learning_rate=1e-4)) != base
        assert config_hash(toy_config(Method.CUT, n_res_blocks=3)) != base


class TestSaveLoad:
    """Tests for save_checkpoint / load_checkpoint."""

    def test_layout_and_descriptor(self, checkpoint: Path) -> None:
        """The directory holds a descriptor, a parameter archive and trainer state."""
        descriptor = read_descriptor(checkpoint)

        assert descriptor["method"] == "cut_depth"
        assert descriptor["in_channels"] == 4
        assert descriptor["out_channels"] == 3
        assert descriptor["translator"] == "refiner"
        assert descriptor["networks"] == ["discriminator", "heads", "refiner"]
        assert descriptor["depth_range"] == [0.0, 65535.0]
        assert (checkpoint / "trainer_state.pt").is_file()

    def test_round_trip(self, checkpoint: Path) -> None:
        """Parameters, counters and optimizer states survive a round trip."""
        original = make_trainer(toy_config(Method.CUT_DEPTH), device="cpu")

        state = load_checkpoint(checkpoint, expected=original.config)

        assert (state.epoch, state.global_step) == (3, 12)
        assert state.depth_range == (0.0, 65535.0)
        assert set(state.optimizer_states) == {"generator", "discriminator"}
        assert state.rng_state is not None
        for name, net in original.nets.items():
            for a, b in zip(net.state_dict().values(), state.networks[name].state_dict().values()):
                assert torch.equal(a, b)

    def test_missing_descriptor(self, tmp_path: Path) -> None:
        """A directory without a descriptor is not a checkpoint."""
        with pytest.raises(CheckpointError, match="not a checkpoint directory"):
            load_checkpoint(tmp_path)

    def test_tampered_config(self, checkpoint: Path) -> None:
        """Editing the stored config breaks the hash check."""
        path = checkpoint / DESCRIPTOR_FILE
        descriptor = yaml.safe_load(path.read_text(encoding="utf-8"))
        descriptor["config"]["learning_rate"] = 0.5
        path.write_text(yaml.safe_dump(descriptor), encoding="utf-8")

        with pytest.raises(CheckpointError, match="config hash mismatch"):
            load_checkpoint(checkpoint)

    def test_missing_parameter_entry(self, checkpoint: Path) -> None:
        """A truncated archive names the missing entry."""
        with np.load(checkpoint / PARAMS_FILE) as archive:
            arrays = {key: archive[key] for key in archive.files if not key.startswith("heads/")}
        np.savez(checkpoint / PARAMS_FILE, **arrays)

        with pytest.raises(CheckpointError, match="missing entry 'heads/"):
            load_checkpoint(checkpoint)

    def test_corrupt_archive(self, checkpoint: Path) -> None:
        """An archive that is not a zip file is reported as corrupt."""
        (checkpoint / PARAMS_FILE).write_bytes(b"not an archive")
        with pytest.raises(CheckpointError, match="corrupt parameter archive"):
            load_checkpoint(checkpoint)

    def test_channel_mismatch(self, checkpoint: Path) -> None:
        """An RGBD checkpoint cannot resume an RGB run."""
        with pytest.raises(CheckpointError, match="channel mismatch"):
            load_checkpoint(checkpoint, expected=toy_config(Method.CUT))

    def test_config_mismatch(self, checkpoint: Path) -> None:
        """A different model config cannot resume from the checkpoint."""
        with pytest.raises(CheckpointError, match="config hash mismatch"):
            load_checkpoint(checkpoint, expected=toy_config(Method.CUT_DEPTH, learning_rate=1e-4))


class TestLoadTranslator:
    """Tests for load_translator."""

    def test_translator_in_eval_mode(self, checkpoint: Path) -> None:
        """Only the refiner is served, in eval mode, with its channel contract."""
        translator = load_translator(checkpoint)

        assert translator.method is Method.CUT_DEPTH
        assert translator.in_channels == 4
        assert translator.depth_range == (0.0, 65535.0)
        assert not translator.network.training
        assert translator(torch.zeros(1, 4, 32, 32)).shape == (1, 3, 32, 32)

    def test_wrong_channel_count(self, checkpoint: Path) -> None:
        """Feeding RGB to an RGBD translator is a checkpoint error."""
        with pytest.raises(CheckpointError, match="consumes 4-channel input"):
            load_translator(checkpoint)(torch.zeros(1, 3, 32, 32))
