"""Buffered training-metrics logger with stdout, CSV, and callback sinks."""

import csv
import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

CSV_HEADER = ("step", "epoch", "name", "value")
SINKS = ("stdout", "csv_file", "callback")


@dataclass(frozen=True)
class MetricRecord:
    """One logged scalar."""

    step: int
    epoch: int
    name: str
    value: float


class MetricsLogger:
    """Collect (step, epoch, name, value) records and fan them out to sinks.

    Records are buffered and flushed every ``flush_interval`` records and on close.
    The CSV sink appends to an existing file so resumed runs extend the same log.
    """

    def __init__(
        self,
        sinks: Iterable[str] = ("stdout",),
        csv_path: Path | None = None,
        callback: Callable[[MetricRecord], None] | None = None,
        flush_interval: int = 50,
    ) -> None:
        self.sinks = tuple(sinks)
        unknown = [s for s in self.sinks if s not in SINKS]
        if unknown:
            raise ValueError(f"Unknown metrics sink(s) {unknown}. Must be one of {list(SINKS)}")
        if "csv_file" in self.sinks and csv_path is None:
            raise ValueError("csv_file sink needs a csv_path")
        if "callback" in self.sinks and callback is None:
            raise ValueError("callback sink needs a callback")
        if flush_interval < 1:
            raise ValueError(f"flush_interval must be >= 1, got {flush_interval}")
        self.csv_path = csv_path
        self.callback = callback
        self.flush_interval = flush_interval
        self._buffer: list[MetricRecord] = []
        self._closed = False

    def log(self, step: int, epoch: int, name: str, value: float) -> None:
        if self._closed:
            raise RuntimeError("MetricsLogger is closed")
        self._buffer.append(MetricRecord(int(step), int(epoch), name, float(value)))
        if len(self._buffer) >= self.flush_interval:
            self.flush()

    def log_many(self, step: int, epoch: int, values: Mapping[str, float]) -> None:
        for name, value in values.items():
            self.log(step, epoch, name, value)

    def flush(self) -> None:
        records, self._buffer = self._buffer, []
        if not records:
            return
        if "stdout" in self.sinks:
            for r in records:
                logger.info("step %d epoch %d %s=%.6f", r.step, r.epoch, r.name, r.value)
        if "csv_file" in self.sinks:
            self._write_csv(records)
        if "callback" in self.sinks:
            for r in records:
                self.callback(r)

    def _write_csv(self, records: list[MetricRecord]) -> None:
        new_file = not self.csv_path.exists() or self.csv_path.stat().st_size == 0
        self.csv_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.csv_path, "a", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if new_file:
                writer.writerow(CSV_HEADER)
            for r in records:
                writer.writerow([r.step, r.epoch, r.name, repr(r.value)])

    def close(self) -> None:
        if not self._closed:
            self.flush()
            self._closed = True

    def __enter__(self) -> "MetricsLogger":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()
