"""Evaluation: SSIM, FID, feature extractors, and report rendering."""

from uwtranslate.evaluation.evaluator import (
    EvalSet,
    MetricsReport,
    ReportRow,
    evaluate_checkpoint,
    evaluate_translator,
    identity_translate,
    load_test_set,
    resolve_subsets,
)
from uwtranslate.evaluation.extractors import (
    FeatureExtractor,
    InceptionExtractor,
    RandomProjectionExtractor,
    build_extractor,
)
from uwtranslate.evaluation.metrics import GaussianStats, fid, fid_report, fit_gaussian, frechet_distance, ssim
from uwtranslate.evaluation.report_writer import ReportWriter, ReportWriterConfig

__all__ = [
    "EvalSet",
    "FeatureExtractor",
    "GaussianStats",
    "InceptionExtractor",
    "MetricsReport",
    "RandomProjectionExtractor",
    "ReportRow",
    "ReportWriter",
    "ReportWriterConfig",
    "build_extractor",
    "evaluate_checkpoint",
    "evaluate_translator",
    "fid",
    "fid_report",
    "fit_gaussian",
    "frechet_distance",
    "identity_translate",
    "load_test_set",
    "resolve_subsets",
    "ssim",
]
