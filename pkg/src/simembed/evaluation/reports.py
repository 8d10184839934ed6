"""Report records and their text/CSV renderings."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

CSV_HEADER = ("task", "metric", "value", "spec", "order", "seed")
MULTILABEL_NOTE = "multilabel scored one-vs-rest with a 0.5 threshold instead of label powerset"
CLASSIFIER_NOTE = "linear classifiers: SGD, epochs=100, lr=0.1, l2=1e-4"


@dataclass
class EvalReport:
    task: str
    metric: str
    value: float
    spec: str = ""
    order: int | str = ""
    seed: int | str = ""
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def row(self) -> tuple:
        return (self.task, self.metric, _fmt(self.value), self.spec, self.order, self.seed)


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def summarize(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    values = [float(v) for v in values]
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


def to_text(reports, extra: dict | None = None) -> str:
    """Line-oriented ``key=value`` rendering; one line per metric plus config echo."""
    lines = []
    for key, value in (extra or {}).items():
        lines.append(f"{key}={_fmt(value)}")
    seen_cfg = set()
    for r in reports:
        for key, value in r.config.items():
            if key not in seen_cfg:
                seen_cfg.add(key)
                lines.append(f"config.{key}={_fmt(value)}")
    for r in reports:
        lines.append(f"{r.task}.{r.metric}={_fmt(r.value)}")
    notes = []
    for r in reports:
        notes += [n for n in r.notes if n not in notes]
    lines += [f"note={n}" for n in notes]
    return "\n".join(lines) + "\n"


def to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def parse_text(text: str) -> dict:
    """Inverse of ``to_text`` for scalar keys; repeated keys keep the last value."""
    out = {}
    for line in text.splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            out[key] = value
    return out
