"""Report assembly: correlation/accuracy tables serializable to JSON and Markdown."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

from .stats import CorrelationResult

# Literature values echoed (never recomputed) when annotation is requested.
LITERATURE_ANNOTATIONS = [
    "Inter-human sample-level correlation (Flickr8K, Kendall tau): 0.736",
    "Inter-human group correlation (coverage): 0.225, (correctness): 0.274",
]

Cell = Union[CorrelationResult, float, str, None]


@dataclass
class CorrelationReport:
    title: str
    columns: list[str]
    rows: dict[str, dict[str, Cell]] = field(default_factory=dict)
    annotations: list[str] = field(default_factory=list)

    def set(self, row: str, column: str, cell: Cell) -> None:
        self.rows.setdefault(row, {})[column] = cell

    def _cell_json(self, cell: Cell):
        if isinstance(cell, CorrelationResult):
            return {
                "statistic": cell.statistic_name,
                "value": cell.value,
                "p_value": cell.p_value,
                "n": cell.n,
            }
        return cell

    def to_json(self) -> str:
        payload = {
            "title": self.title,
            "columns": self.columns,
            "rows": {
                row: {col: self._cell_json(cell) for col, cell in cells.items()}
                for row, cells in self.rows.items()
            },
        }
        if self.annotations:
            payload["annotations"] = self.annotations
        return json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True)

    def _cell_markdown(self, cell: Cell) -> str:
        if cell is None:
            return "-"
        if isinstance(cell, CorrelationResult):
            if cell.p_value < 0.001:
                return f"{cell.value:.3f} (p<0.001)"
            return f"{cell.value:.3f} (p={cell.p_value:.3f})"
        if isinstance(cell, float):
            return f"{cell:.3f}"
        return str(cell)

    def to_markdown(self) -> str:
        lines = [f"# {self.title}", ""]
        header = ["Measure"] + self.columns
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join(["---"] * len(header)) + "|")
        for row_name, cells in self.rows.items():
            rendered = [row_name] + [
                self._cell_markdown(cells.get(col)) for col in self.columns
            ]
            lines.append("| " + " | ".join(rendered) + " |")
        if self.annotations:
            lines.append("")
            lines.append("Literature values (not recomputed):")
            for note in self.annotations:
                lines.append(f"- {note}")
        return "\n".join(lines) + "\n"
