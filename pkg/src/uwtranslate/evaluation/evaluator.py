"""Evaluation protocol: translate a test set, then score SSIM and FID per subset."""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from uwtranslate.core.types import ImageTensor
from uwtranslate.data.manifest import ROLE_DEPTH, ROLE_UNDERWATER, ROLE_UNIFORM_LIGHTING, DatasetManifest
from uwtranslate.data.pipeline import assemble_rgbd, load_depth, load_image
from uwtranslate.engine.checkpoint import LoadedTranslator, load_translator
from uwtranslate.errors import ConfigError, DataError, MetricError, UwtError
from uwtranslate.evaluation.extractors import FeatureExtractor
from uwtranslate.evaluation.metrics import fid_report, ssim

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_FAILED = "failed"
IDENTITY_NAME = "identity"

Translate = Callable[[torch.Tensor], torch.Tensor]


@dataclass
class ReportRow:
    """Scores of one method on one subset; None means the metric could not be computed."""

    method: str
    subset: str
    n: int
    ssim: float | None = None
    fid: float | None = None
    status: str = STATUS_OK
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.ssim is not None and not -1.0 - 1e-9 <= self.ssim <= 1.0 + 1e-9:
            raise ValueError(f"SSIM {self.ssim} outside [-1, 1] for {self.method}/{self.subset}")
        if self.fid is not None and self.fid < 0:
            raise ValueError(f"negative FID {self.fid} for {self.method}/{self.subset}")


@dataclass
class MetricsReport:
    """Rows of (method, subset) scores, in insertion order."""

    rows: list[ReportRow] = field(default_factory=list)
    extractor: str = ""

    @property
    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    @property
    def subsets(self) -> list[str]:
        return list(dict.fromkeys(r.subset for r in self.rows))

    def row(self, method: str, subset: str) -> ReportRow | None:
        return next((r for r in self.rows if r.method == method and r.subset == subset), None)

    def extend(self, other: MetricsReport) -> None:
        self.rows.extend(other.rows)
        self.extractor = self.extractor or other.extractor

    @property
    def failed(self) -> list[ReportRow]:
        return [r for r in self.rows if r.status == STATUS_FAILED]


@dataclass
class EvalSet:
    """Inputs keyed by id, with ground truth where a matching underwater image exists."""

    ids: list[str]
    inputs: dict[str, ImageTensor]
    targets: dict[str, ImageTensor]


def load_test_set(manifest: DatasetManifest, size: int, with_depth: bool = False) -> EvalSet:
    """Load every uniform-lighting image of the manifest plus its ground truth.

    Raises:
        DataError: If the input folder is missing or empty, or depth is required but missing.
    """
    manifest.ensure_roles(ROLE_UNIFORM_LIGHTING)
    gt_index = {}
    if manifest.has_role(ROLE_UNDERWATER):
        gt_index = {manifest.match_key(p): p for p in manifest.list_files(ROLE_UNDERWATER)}
    depth_index = {}
    if with_depth:
        manifest.ensure_roles(ROLE_DEPTH)
        depth_index = {manifest.match_key(p): p for p in manifest.list_files(ROLE_DEPTH)}

    ids, inputs, targets = [], {}, {}
    for path in manifest.list_files(ROLE_UNIFORM_LIGHTING):
        key = manifest.match_key(path)
        image = load_image(path, size)
        if with_depth:
            if key not in depth_index:
                raise DataError(f"no depth file for test input {path.name}")
            image = assemble_rgbd(image, load_depth(depth_index[key], size, manifest.depth_range))
        ids.append(key)
        inputs[key] = image
        if key in gt_index:
            targets[key] = load_image(gt_index[key], size)
    missing = len(ids) - len(targets)
    if missing:
        logger.warning("%d of %d test inputs have no ground truth", missing, len(ids))
    return EvalSet(ids=ids, inputs=inputs, targets=targets)


def resolve_subsets(specs: Sequence[str], available: Sequence[str], seed: int = 0) -> list[tuple[str, list[str]]]:
    """Parse subset specs into (name, ids) pairs.

    Each spec is ``NAME=all``, ``NAME=random:K`` (seeded draw without replacement),
    ``NAME=id1,id2,...`` or ``NAME=@file`` (one id per line). No specs means one ``all``
    subset.

    Raises:
        ConfigError: On malformed or empty subsets.
        DataError: On ids that are not in the test set.
    """
    available = list(available)
    if not specs:
        specs = ["all=all"]
    subsets = []
    for spec in specs:
        name, sep, rule = spec.partition("=")
        name, rule = name.strip(), rule.strip()
        if not sep or not name or not rule:
            raise ConfigError(f"subset spec {spec!r} must look like NAME=all|random:K|id1,id2|@file")
        if rule == "all":
            ids = list(available)
        elif rule.startswith("random:"):
            try:
                k = int(rule.split(":", 1)[1])
            except ValueError as e:
                raise ConfigError(f"subset {name}: random size must be an integer, got {rule!r}") from e
            if not 0 < k <= len(available):
                raise ConfigError(f"subset {name}: cannot draw {k} of {len(available)} test images")
            rng = np.random.default_rng(seed)
            picked = rng.choice(len(available), size=k, replace=False)
            ids = [available[i] for i in sorted(picked)]
        elif rule.startswith("@"):
            path = Path(rule[1:])
            if not path.is_file():
                raise ConfigError(f"subset {name}: id file not found: {path}")
            ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        else:
            ids = [i.strip() for i in rule.split(",") if i.strip()]
        if not ids:
            raise ConfigError(f"subset {name} is empty")
        unknown = sorted(set(ids) - set(available))
        if unknown:
            raise DataError(f"subset {name} names ids not in the test set: {unknown}")
        subsets.append((name, ids))
    return subsets


def translate_images(translate: Translate, images: Sequence[ImageTensor], batch_size: int = 8) -> list[ImageTensor]:
    outputs = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            batch = torch.stack([img.data for img in images[start : start + batch_size]])
            result = translate(batch).clamp(-1.0, 1.0).cpu()
            outputs.extend(ImageTensor(t) for t in result)
    return outputs


def _score_subset(
    method: str,
    subset: str,
    ids: list[str],
    outputs: dict[str, ImageTensor],
    test_set: EvalSet,
    extractor: FeatureExtractor,
) -> ReportRow:
    row = ReportRow(method=method, subset=subset, n=len(ids))
    generated = [outputs[i] for i in ids]
    paired = [i for i in ids if i in test_set.targets]
    if len(paired) == len(ids):
        row.ssim = float(np.mean([ssim(outputs[i], test_set.targets[i]) for i in ids]))
    else:
        row.warnings.append(f"ground truth missing for {len(ids) - len(paired)} images; SSIM omitted")
    truth = [test_set.targets[i] for i in paired]
    if len(generated) >= 2 and len(truth) >= 2:
        try:
            row.fid, fid_warnings = fid_report(generated, truth, extractor)
            row.warnings.extend(fid_warnings)
        except MetricError as e:
            logger.warning("%s/%s: FID omitted: %s", method, subset, e)
            row.warnings.append(f"FID omitted: {e}")
    else:
        row.warnings.append("FID needs at least 2 generated and 2 ground-truth images")
    return row


def evaluate_translator(
    translate: Translate,
    method: str,
    test_set: EvalSet,
    subsets: Sequence[tuple[str, list[str]]],
    extractor: FeatureExtractor,
    batch_size: int = 8,
) -> MetricsReport:
    """Score any batch translator on every subset of ``test_set``."""
    if not subsets:
        raise ConfigError("at least one evaluation subset is required")
    needed = sorted({i for _, ids in subsets for i in ids}, key=test_set.ids.index)
    translated = translate_images(translate, [test_set.inputs[i] for i in needed], batch_size)
    outputs = dict(zip(needed, translated))
    rows = [_score_subset(method, name, ids, outputs, test_set, extractor) for name, ids in subsets]
    for row in rows:
        logger.info("%s/%s: n=%d ssim=%s fid=%s", row.method, row.subset, row.n, row.ssim, row.fid)
    return MetricsReport(rows=rows, extractor=extractor.name)


def identity_translate(batch: torch.Tensor) -> torch.Tensor:
    """The input RGB itself, for the dataset's intrinsic-similarity baseline."""
    return batch[:, :3]


def evaluate_checkpoint(
    checkpoint: Path | LoadedTranslator,
    test_manifest: DatasetManifest,
    subsets: Sequence[tuple[str, list[str]]],
    extractor: FeatureExtractor,
    name: str | None = None,
    batch_size: int = 8,
) -> MetricsReport:
    """Translate the manifest's test inputs with a checkpoint and score every subset.

    Raises:
        CheckpointError: If the checkpoint cannot be loaded.
        DataError: If the test set cannot be loaded for the checkpoint's input layout.
    """
    translator = load_translator(checkpoint) if isinstance(checkpoint, Path) else checkpoint
    manifest = test_manifest
    if translator.depth_range is not None and translator.in_channels == 4:
        # depth must be scaled exactly as during training
        manifest = dataclasses.replace(test_manifest, depth_range=translator.depth_range)
    test_set = load_test_set(manifest, translator.image_size, with_depth=translator.in_channels == 4)
    return evaluate_translator(
        translator, name or translator.method.value, test_set, subsets, extractor, batch_size=batch_size
    )


def failed_rows(method: str, subsets: Sequence[tuple[str, list[str]]], error: UwtError) -> MetricsReport:
    """Rows marking every subset of a checkpoint that could not be evaluated."""
    return MetricsReport(
        rows=[
            ReportRow(method=method, subset=name, n=len(ids), status=STATUS_FAILED, warnings=[str(error)])
            for name, ids in subsets
        ]
    )
