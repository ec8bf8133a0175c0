import io
import json
import math
import sys
from collections import Counter
from pathlib import Path
from typing import IO, Any, Dict, List, Optional, Sequence, Union

import pandas as pd
from reportlab.lib.colors import green, red
from reportlab.lib.pagesizes import A4, portrait
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from Objects.objects import PropertyId, PropertyVerdict

SIGNIFICANT_DIGITS = 12

Row = Dict[str, Any]


class Report:
    @staticmethod
    def round_value(value: Any) -> Any:
        """Round every float in a payload to 12 significant digits."""
        if isinstance(value, bool) or value is None:
            return value
        if isinstance(value, float):
            if math.isnan(value) or math.isinf(value):
                return str(value)
            return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
        if isinstance(value, dict):
            return {key: Report.round_value(item) for key, item in value.items()}
        if isinstance(value, (list, tuple)):
            return [Report.round_value(item) for item in value]
        return value

    @staticmethod
    def render(
        rows: Sequence[Row],
        output: str = "json",
        header: Optional[Dict[str, Any]] = None,
    ) -> str:
        """Render result rows as JSON or CSV.

        Args:
            rows (Sequence[Row]): One dict per output row; keys become columns.
            output (str): ``json`` or ``csv``.
            header (Dict[str, Any], optional): Run parameters echoed with the rows;
                a ``# key=value`` comment line each in CSV.

        Returns:
            str: The rendered document.
        """
        header = Report.round_value(dict(header or {}))
        rows = [Report.round_value(dict(row)) for row in rows]

        if output == "json":
            return json.dumps({"header": header, "rows": rows}, indent=2) + "\n"

        lines = [f"# {key}={value}" for key, value in header.items()]
        cells = [
            {
                key: json.dumps(value) if isinstance(value, (dict, list)) else value
                for key, value in row.items()
            }
            for row in rows
        ]
        frame = pd.DataFrame(cells)
        return "\n".join(lines + [frame.to_csv(index=False, lineterminator="\n")])

    @staticmethod
    def write(text: str, out: Optional[Union[str, Path]] = None) -> None:
        """Write to ``out`` or, without a path, to standard output."""
        if out is None:
            sys.stdout.write(text)
            return
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")

    @staticmethod
    def generate_summary(verdicts: Sequence[PropertyVerdict]) -> Dict[str, Any]:
        fail_count = sum(not v.passed for v in verdicts)
        warning_count = sum(len(v.warnings) for v in verdicts)
        instances = len({v.instance_digest for v in verdicts})
        result_state = "Pass" if fail_count == 0 else "Fail"

        per_property = [["Property", "Checked", "Failed", "Smallest Slack"]]
        checked = Counter(v.property_id for v in verdicts)
        for property_id in PropertyId:
            group = [v for v in verdicts if v.property_id is property_id]
            if not group:
                continue
            per_property.append(
                [
                    property_id.value,
                    checked[property_id],
                    sum(not v.passed for v in group),
                    f"{min(v.slack for v in group):.3e}",
                ]
            )

        return {
            "table": [
                ["Metric", "Value"],
                ["Instances", instances],
                ["Verdicts", len(verdicts)],
                ["Failures", fail_count],
                ["Warnings", warning_count],
                ["Assessment Result", result_state],
            ],
            "per_property": per_property,
            "values": {
                "result": result_state,
                "fail_count": fail_count,
                "warning_count": warning_count,
                "verdicts": len(verdicts),
                "instances": instances,
            },
        }

    @staticmethod
    def generate_pdf(summary: Dict[str, Any], failures: Sequence[Row]) -> IO[bytes]:
        """Render the verification summary and failing verdicts to a PDF.

        Args:
            summary (Dict[str, Any]): Output of :meth:`generate_summary`.
            failures (Sequence[Row]): Failing verdict rows listed after the summary.

        Returns:
            IO[bytes]: BytesIO object containing the PDF data.
        """
        pdf_buffer = io.BytesIO()
        doc = SimpleDocTemplate(
            pdf_buffer,
            pagesize=portrait(A4),
            rightMargin=72,
            leftMargin=72,
            topMargin=72,
            bottomMargin=72,
        )
        styles = getSampleStyleSheet()
        story = [Paragraph("Property Verification", styles["Title"])]
        story.append(Spacer(1, 0.25 * inch))

        result_color = green if summary["values"]["result"] == "Pass" else red
        summary_table = Table(summary["table"])
        last_row = len(summary["table"]) - 1
        summary_table.setStyle(
            TableStyle([("TEXTCOLOR", (1, last_row), (1, last_row), result_color)])
        )
        story.append(summary_table)
        story.append(Spacer(1, 0.25 * inch))

        story.append(Paragraph("Properties", styles["Heading2"]))
        table = Table(summary["per_property"])
        table.setStyle(
            TableStyle(
                [
                    ("BACKGROUND", (0, 0), (-1, 0), "#eeeeee"),
                    ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
                    ("ALIGN", (0, 0), (-1, -1), "CENTER"),
                    ("GRID", (0, 0), (-1, -1), 1, "#aaaaaa"),
                ]
            )
        )
        story.append(table)

        if failures:
            story.append(Spacer(1, 0.25 * inch))
            story.append(Paragraph("Failures", styles["Heading2"]))
            for row in failures:
                text = (
                    f"{row['property']} on {row['instance']}: "
                    f"{json.dumps(Report.round_value(row['witness']))}"
                )
                story.append(Paragraph(text, styles["Normal"]))

        doc.build(story)
        pdf_buffer.seek(0)
        return pdf_buffer

    @staticmethod
    def write_pdf(report: IO[bytes], path: Union[str, Path]) -> str:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        report.seek(0)
        target.write_bytes(report.read())
        return str(target)

    @staticmethod
    def rows_from_verdicts(verdicts: Sequence[PropertyVerdict]) -> List[Row]:
        return [v.to_row() for v in verdicts]
