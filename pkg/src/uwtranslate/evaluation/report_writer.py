"""Report writer for evaluation results.

Renders a MetricsReport as CSV (one row per method and subset) and as an aligned text
table with one row per method and SSIM/FID column pairs per subset.
"""

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from uwtranslate.evaluation.evaluator import MetricsReport, ReportRow


@dataclass
class ReportWriterConfig:
    """Configuration for report rendering."""

    float_format: str = ".4f"
    fid_format: str = ".2f"
    include_warnings: bool = True
    missing: str = "-"
    csv_name: str = "report.csv"
    table_name: str = "report.txt"


class ReportWriter:
    """Writes evaluation reports as CSV and text tables."""

    CSV_HEADER = ("method", "subset", "n", "ssim", "fid", "status", "warnings")

    def __init__(self, config: ReportWriterConfig | None = None) -> None:
        """Initialize the report writer.

        Args:
            config: Optional writer configuration.
        """
        self.config = config if config is not None else ReportWriterConfig()

    def _fmt(self, value: float | None, spec: str, missing: str) -> str:
        return missing if value is None else format(value, spec)

    def _csv_row(self, row: ReportRow) -> list[str]:
        return [
            row.method,
            row.subset,
            str(row.n),
            self._fmt(row.ssim, self.config.float_format, ""),
            self._fmt(row.fid, self.config.fid_format, ""),
            row.status,
            "; ".join(row.warnings) if self.config.include_warnings else "",
        ]

    def generate_csv(self, report: MetricsReport) -> str:
        """Render the report as CSV text.

        Args:
            report: Evaluation report.

        Returns:
            CSV with a header line and one line per report row.
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        for row in report.rows:
            writer.writerow(self._csv_row(row))
        return buffer.getvalue()

    def generate_table(self, report: MetricsReport) -> str:
        """Render the report as an aligned method-by-subset table.

        Args:
            report: Evaluation report.

        Returns:
            Plain-text table; failed rows show "failed" in their cells.
        """
        subsets = report.subsets
        header = ["Method"]
        for subset in subsets:
            n = next(r.n for r in report.rows if r.subset == subset)
            header += [f"SSIM↑ {subset} (n={n})", f"FID↓ {subset} (n={n})"]

        lines = []
        for method in report.methods:
            cells = [method]
            for subset in subsets:
                row = report.row(method, subset)
                if row is None:
                    cells += [self.config.missing] * 2
                elif row.status != "ok":
                    cells += [row.status] * 2
                else:
                    cells += [
                        self._fmt(row.ssim, self.config.float_format, self.config.missing),
                        self._fmt(row.fid, self.config.fid_format, self.config.missing),
                    ]
            lines.append(cells)

        widths = [max(len(r[i]) for r in [header, *lines]) for i in range(len(header))]

        def render(cells: list[str]) -> str:
            first = cells[0].ljust(widths[0])
            rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
            return " | ".join([first, *rest]).rstrip()

        out = [render(header), "-+-".join("-" * w for w in widths)]
        out += [render(cells) for cells in lines]
        if report.extractor:
            out.append("")
            out.append(f"FID features: {report.extractor}")
        return "\n".join(out) + "\n"

    def write_files(self, report: MetricsReport, output_dir: Path) -> list[Path]:
        """Write report.csv and report.txt into output_dir.

        Args:
            report: Evaluation report.
            output_dir: Directory to write into (created if needed).

        Returns:
            Paths of the written files.
        """
        output_dir.mkdir(parents=True, exist_ok=True)
        csv_path = output_dir / self.config.csv_name
        table_path = output_dir / self.config.table_name
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            f.write(self.generate_csv(report))
        with open(table_path, "w", encoding="utf-8") as f:
            f.write(self.generate_table(report))
        return [csv_path, table_path]
