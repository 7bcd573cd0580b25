"""Data pipeline: raster I/O, paired/unpaired datasets, and batching."""

from uwtranslate.data.manifest import DatasetManifest, sequence_id
from uwtranslate.data.pipeline import (
    Batch,
    PairedExample,
    UnpairedDataset,
    assemble_rgbd,
    batches_per_epoch,
    build_unpaired_split,
    concat_side_by_side,
    iterate_batches,
    load_folder,
    load_paired,
    load_side_by_side,
    split_side_by_side,
    write_side_by_side,
)

__all__ = [
    "Batch",
    "DatasetManifest",
    "PairedExample",
    "UnpairedDataset",
    "assemble_rgbd",
    "batches_per_epoch",
    "build_unpaired_split",
    "concat_side_by_side",
    "iterate_batches",
    "load_folder",
    "load_paired",
    "load_side_by_side",
    "sequence_id",
    "split_side_by_side",
    "write_side_by_side",
]
