"""Tests for the buffered metrics logger."""

import logging
from pathlib import Path

import pytest

from uwtranslate.engine.metrics_logger import MetricRecord, MetricsLogger


class TestMetricsLogger:
    """Tests for MetricsLogger sinks and buffering."""

    def test_csv_sink_appends(self, tmp_path: Path) -> None:
        """A second logger on the same file appends without a second header."""
        path = tmp_path / "metrics.csv"
        with MetricsLogger(sinks=("csv_file",), csv_path=path, flush_interval=2) as metrics:
            metrics.log_many(1, 0, {"total": 0.5, "gan": 0.25})
        with MetricsLogger(sinks=("csv_file",), csv_path=path) as metrics:
            metrics.log(2, 1, "total", 0.125)

        assert path.read_text(encoding="utf-8") == (
            "step,epoch,name,value\n1,0,total,0.5\n1,0,gan,0.25\n2,1,total,0.125\n"
        )

    def test_buffer_flushes_at_interval(self, tmp_path: Path) -> None:
        """Records stay buffered until the interval is reached."""
        received: list[MetricRecord] = []
        metrics = MetricsLogger(sinks=("callback",), callback=received.append, flush_interval=3)

        metrics.log(1, 0, "a", 1.0)
        metrics.log(1, 0, "b", 2.0)
        assert received == []
        metrics.log(1, 0, "c", 3.0)

        assert [r.name for r in received] == ["a", "b", "c"]

    def test_stdout_sink_uses_logging(self, caplog: pytest.LogCaptureFixture) -> None:
        """The stdout sink writes one INFO line per record."""
        with caplog.at_level(logging.INFO, logger="uwtranslate.engine.metrics_logger"):
            with MetricsLogger() as metrics:
                metrics.log(7, 2, "patchnce_x", 1.5)

        assert "step 7 epoch 2 patchnce_x=1.500000" in caplog.text

    def test_closed_logger_rejects_records(self) -> None:
        """Logging after close is an error."""
        metrics = MetricsLogger()
        metrics.close()
        with pytest.raises(RuntimeError, match="closed"):
            metrics.log(1, 0, "total", 1.0)

    @pytest.mark.parametrize(
        ("kwargs", "message"),
        [
            ({"sinks": ("tensorboard",)}, "Unknown metrics sink"),
            ({"sinks": ("csv_file",)}, "needs a csv_path"),
            ({"sinks": ("callback",)}, "needs a callback"),
            ({"flush_interval": 0}, "flush_interval"),
        ],
    )
    def test_invalid_setup(self, kwargs: dict, message: str) -> None:
        """Misconfigured sinks fail at construction."""
        with pytest.raises(ValueError, match=message):
            MetricsLogger(**kwargs)
