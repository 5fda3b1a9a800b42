"""Per-stage retention statistics: the pipeline's funnel report."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field


@dataclass
class StageCount:
    input_docs: int = 0
    kept: int = 0
    dropped: int = 0
    input_words: int = 0
    kept_words: int = 0
    drop_reasons: Counter = field(default_factory=Counter)

    def record(self, kept: bool, rule: str, words: int, words_out: int | None = None) -> None:
        self.input_docs += 1
        self.input_words += words
        if kept:
            self.kept += 1
            self.kept_words += words if words_out is None else words_out
        else:
            self.dropped += 1
            self.drop_reasons[rule] += 1

    def retention_pct(self) -> float:
        if self.input_docs == 0:
            return 100.0
        return 100.0 * self.kept / self.input_docs

    def merge(self, other: "StageCount") -> None:
        self.input_docs += other.input_docs
        self.kept += other.kept
        self.dropped += other.dropped
        self.input_words += other.input_words
        self.kept_words += other.kept_words
        self.drop_reasons.update(other.drop_reasons)


class StageStats:
    """Ordered per-stage counters; merging partials is associative."""

    def __init__(self):
        self.stages: dict[str, StageCount] = {}

    def stage(self, name: str) -> StageCount:
        if name not in self.stages:
            self.stages[name] = StageCount()
        return self.stages[name]

    def record(
        self, stage: str, kept: bool, rule: str, words: int, words_out: int | None = None
    ) -> None:
        self.stage(stage).record(kept, rule, words, words_out)

    def merge(self, other: "StageStats") -> None:
        for name, count in other.stages.items():
            self.stage(name).merge(count)

    def cumulative_retention_pct(self) -> float:
        pct = 100.0
        for count in self.stages.values():
            pct *= count.retention_pct() / 100.0
        return pct

    def to_dict(self) -> dict:
        return {
            "stages": {
                name: {
                    "input_docs": c.input_docs,
                    "kept": c.kept,
                    "dropped": c.dropped,
                    "input_words": c.input_words,
                    "kept_words": c.kept_words,
                    "drop_reasons": dict(sorted(c.drop_reasons.items())),
                    "retention_pct": c.retention_pct(),
                }
                for name, c in self.stages.items()
            },
            "cumulative_retention_pct": self.cumulative_retention_pct(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)

    def funnel_table(self) -> str:
        """Human-readable funnel: documents left after each stage."""
        rows = [("stage", "in", "kept", "dropped", "stage %", "cumulative %")]
        cumulative = 100.0
        for name, c in self.stages.items():
            cumulative *= c.retention_pct() / 100.0
            rows.append(
                (
                    name,
                    str(c.input_docs),
                    str(c.kept),
                    str(c.dropped),
                    f"{c.retention_pct():.2f}",
                    f"{cumulative:.2f}",
                )
            )
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = []
        for j, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
            if j == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)
