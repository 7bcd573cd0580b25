"""Adversarial, contrastive, cycle-consistency, and reconstruction losses.

Every composite loss is returned as a LossValue so trainers can log each term under a
stable name (gan, patchnce_x, patchnce_y, cycle, l1, mse, d_real, d_fake).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Literal

import torch
import torch.nn.functional as F

from uwtranslate.core.types import ContrastiveConfig, GanMode, ImageTensor
from uwtranslate.networks.discriminator import PatchDiscriminator
from uwtranslate.networks.refiner import ProjectionHeads, Refiner, encode_features

Role = Literal["generator", "discriminator"]


@dataclass
class LossValue:
    """A scalar loss together with its named, weighted components."""

    value: torch.Tensor
    components: dict[str, torch.Tensor] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)

    @classmethod
    def combine(cls, components: Mapping[str, torch.Tensor], weights: Mapping[str, float] | None = None) -> LossValue:
        """Weighted sum; components without an explicit weight count once."""
        weights = {name: float((weights or {}).get(name, 1.0)) for name in components}
        value = sum(weights[name] * comp for name, comp in components.items())
        if not isinstance(value, torch.Tensor):
            value = torch.tensor(float(value))
        return cls(value=value, components=dict(components), weights=weights)

    def weighted(self) -> dict[str, float]:
        """Each component's contribution to ``value``."""
        return {name: self.weights.get(name, 1.0) * float(comp.detach()) for name, comp in self.components.items()}

    def as_floats(self, total_name: str = "total") -> dict[str, float]:
        """Weighted components plus the total, ready for the metrics logger."""
        out = self.weighted()
        out[total_name] = float(self.value.detach())
        return out


def _as_batch(image: torch.Tensor | ImageTensor) -> torch.Tensor:
    if isinstance(image, ImageTensor):
        return image.to_batch()
    return image if image.ndim == 4 else image.unsqueeze(0)


def _check_logits(name: str, logits: torch.Tensor | None) -> torch.Tensor:
    if logits is None or logits.numel() == 0:
        raise ValueError(f"{name} logit grid is empty")
    if not bool(torch.isfinite(logits).all()):
        raise ValueError(f"{name} logit grid contains NaN or Inf")
    return logits


def _criterion(logits: torch.Tensor, target: float, mode: GanMode) -> torch.Tensor:
    labels = torch.full_like(logits, target)
    if mode is GanMode.LEAST_SQUARES:
        return F.mse_loss(logits, labels)
    return F.binary_cross_entropy_with_logits(logits, labels)


def gan_loss(
    d_real_logits: torch.Tensor | None,
    d_fake_logits: torch.Tensor,
    role: Role,
    mode: GanMode | str = GanMode.LEAST_SQUARES,
) -> LossValue:
    """Adversarial loss over PatchGAN logit grids, averaged over grid and batch.

    The discriminator loss is ``0.5 * (real + fake)`` with labels 1 for real and 0 for
    fake. The generator loss pushes fake logits toward the real label; for VANILLA this
    is the non-saturating ``-log D(G(x))`` form. ``d_real_logits`` is ignored for the
    generator and may be None.
    """
    mode = GanMode(mode)
    fake = _check_logits("fake", d_fake_logits)
    if role == "generator":
        return LossValue.combine({"gan": _criterion(fake, 1.0, mode)})
    if role != "discriminator":
        raise ValueError(f"unknown GAN role {role!r}")
    real = _check_logits("real", d_real_logits)
    return LossValue.combine(
        {"d_real": _criterion(real, 1.0, mode), "d_fake": _criterion(fake, 0.0, mode)},
        {"d_real": 0.5, "d_fake": 0.5},
    )


def info_nce(z: torch.Tensor, z_pos: torch.Tensor, z_negs: torch.Tensor, temperature: float) -> torch.Tensor:
    """Cross-entropy of picking the positive among positive + negatives.

    Args:
        z: Anchor, shape (..., K).
        z_pos: Positive, shape (..., K).
        z_negs: Negatives, shape (..., N, K).
        temperature: Softmax temperature, > 0.

    Returns:
        Per-anchor loss of shape ``z.shape[:-1]`` (a scalar for single vectors).
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    if z_negs.ndim < 2 or z_negs.shape[-2] == 0:
        raise ValueError("info_nce needs at least one negative")
    l_pos = (z * z_pos).sum(-1, keepdim=True)
    l_neg = torch.einsum("...k,...nk->...n", z, z_negs)
    logits = torch.cat([l_pos, l_neg], dim=-1) / temperature
    # logsumexp subtracts the max internally
    return torch.logsumexp(logits, dim=-1) - logits[..., 0]


def negative_index(num_patches: int, num_negatives: int) -> torch.Tensor:
    """(P, N) indices of the negatives for each anchor: the next N sampled locations, cyclically."""
    if num_negatives > num_patches - 1:
        raise ValueError(f"{num_negatives} negatives need at least {num_negatives + 1} patches, got {num_patches}")
    anchors = torch.arange(num_patches).unsqueeze(1)
    offsets = torch.arange(1, num_negatives + 1).unsqueeze(0)
    return (anchors + offsets) % num_patches


def _with_input_depth(refiner: Refiner, source: torch.Tensor, output: torch.Tensor) -> torch.Tensor:
    if refiner.in_channels == 4 and output.shape[1] == 3:
        return torch.cat([output, source[:, 3:4]], dim=1)
    return output


def patch_nce(
    refiner: Refiner,
    heads: ProjectionHeads,
    input_image: torch.Tensor | ImageTensor,
    output_image: torch.Tensor | ImageTensor,
    cfg: ContrastiveConfig,
    seed: int = 0,
) -> LossValue:
    """Patchwise contrastive loss between a translated image and its input.

    Both images are embedded at the same sampled locations. Each output patch is the
    anchor, the co-located input patch the positive, and ``negatives_per_anchor`` other
    sampled input patches the negatives. The result is the mean InfoNCE over every
    (layer, image, location). When the refiner consumes depth, the input's depth plane is
    appended to an RGB output before it is re-encoded.
    """
    source = _as_batch(input_image)
    output = _with_input_depth(refiner, source, _as_batch(output_image))
    if source.shape[0] != output.shape[0] or source.shape[2:] != output.shape[2:]:
        raise ValueError(f"input {tuple(source.shape)} and output {tuple(output.shape)} are not aligned")

    keys = encode_features(refiner, heads, source, cfg, seed=seed)
    queries = encode_features(refiner, heads, output, cfg, patch_ids=keys.patch_ids)
    neg_idx = negative_index(cfg.patches_per_image, cfg.negatives_per_anchor)

    per_layer = []
    for q, k in zip(queries.features, keys.features):
        k = k.detach()
        sim = torch.bmm(q, k.transpose(1, 2)) / cfg.temperature  # (B, P, P)
        pos = sim.diagonal(dim1=1, dim2=2).unsqueeze(-1)
        idx = neg_idx.to(sim.device).unsqueeze(0).expand(sim.shape[0], -1, -1)
        neg = sim.gather(2, idx)
        logits = torch.cat([pos, neg], dim=-1)
        per_layer.append((torch.logsumexp(logits, dim=-1) - logits[..., 0]).mean())
    return LossValue.combine({"patchnce": torch.stack(per_layer).mean()})


def combined_cut_loss(
    refiner: Refiner,
    heads: ProjectionHeads,
    discriminator: PatchDiscriminator,
    x_batch: torch.Tensor,
    y_batch: torch.Tensor,
    cfg: ContrastiveConfig,
    gan_mode: GanMode | str = GanMode.LEAST_SQUARES,
    weights: Mapping[str, float] | None = None,
    seed: int = 0,
    fake: torch.Tensor | None = None,
) -> LossValue:
    """Refiner objective: adversarial + PatchNCE on X + identity PatchNCE on Y.

    ``y_batch`` is fed to the refiner for the identity term, so under depth conditioning
    it must already carry a depth plane. ``fake`` reuses an already computed
    ``refiner(x_batch)``. A zero ``patchnce_y`` weight skips the identity pass.
    """
    weights = {"gan": 1.0, "patchnce_x": 1.0, "patchnce_y": 1.0, **dict(weights or {})}
    if fake is None:
        fake = refiner(x_batch)
    components = {
        "gan": gan_loss(None, discriminator(fake[:, :3]), "generator", gan_mode).value,
        "patchnce_x": patch_nce(refiner, heads, x_batch, fake, cfg, seed).value,
    }
    if weights["patchnce_y"] > 0:
        identity = refiner(y_batch)
        components["patchnce_y"] = patch_nce(refiner, heads, y_batch, identity, cfg, seed + 1).value
    else:
        components["patchnce_y"] = torch.zeros((), device=fake.device)
    return LossValue.combine(components, weights)


def cycle_consistency_loss(
    g_xy: torch.nn.Module,
    g_yx: torch.nn.Module,
    x_batch: torch.Tensor,
    y_batch: torch.Tensor,
    fake_y: torch.Tensor | None = None,
    fake_x: torch.Tensor | None = None,
) -> LossValue:
    """Mean absolute error of both round trips, ``|F(G(x)) - x| + |G(F(y)) - y|``."""
    fake_y = g_xy(x_batch) if fake_y is None else fake_y
    fake_x = g_yx(y_batch) if fake_x is None else fake_x
    rec_x = g_yx(fake_y)
    rec_y = g_xy(fake_x)
    if rec_x.shape != x_batch.shape or rec_y.shape != y_batch.shape:
        raise ValueError(
            f"cycle reconstruction shapes {tuple(rec_x.shape)}/{tuple(rec_y.shape)} do not match "
            f"inputs {tuple(x_batch.shape)}/{tuple(y_batch.shape)}"
        )
    return LossValue.combine({"cycle": F.l1_loss(rec_x, x_batch) + F.l1_loss(rec_y, y_batch)})


def mse_loss(pred: torch.Tensor | ImageTensor, target: torch.Tensor | ImageTensor) -> torch.Tensor:
    pred = pred.data if isinstance(pred, ImageTensor) else pred
    target = target.data if isinstance(target, ImageTensor) else target
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    return F.mse_loss(pred, target)
