"""Result records and their CSV/JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields

FIELDS = ("quantity", "label", "value", "grid_step", "backend", "seconds")


@dataclass
class ResultRecord:
    quantity: str
    label: str
    value: float
    grid_step: float
    backend: str
    seconds: float = 0.0
    window: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        return f"{self.quantity}:{self.label}"


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


@contextmanager
def timed():
    box = {"seconds": 0.0}
    t0 = time.perf_counter()
    try:
        yield box
    finally:
        box["seconds"] = time.perf_counter() - t0


def to_csv(records, extra_columns: tuple[str, ...] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS + extra_columns)
    for r in records:
        row = [fmt(getattr(r, f)) for f in FIELDS]
        row += [fmt(r.extra.get(c, "")) for c in extra_columns]
        w.writerow(row)
    return buf.getvalue()


def from_csv(text: str) -> list[ResultRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        extra = {k: v for k, v in row.items() if k not in FIELDS}
        out.append(ResultRecord(row["quantity"], row["label"], float(row["value"]),
                                float(row["grid_step"]), row["backend"], float(row["seconds"]),
                                extra=extra))
    return out


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def to_json(records) -> str:
    obj = {}
    for r in records:
        d = {k: _json_safe(v) for k, v in asdict(r).items() if k not in ("extra",)}
        d.update({k: _json_safe(v) for k, v in r.extra.items()})
        obj[r.key] = d
    return json.dumps(obj, indent=2) + "\n"


def render(records, digits: int = 5) -> str:
    """Fixed-precision text rendering for eyeballing against reference tables."""
    width = max((len(r.key) for r in records), default=10)
    lines = [f"{r.key:<{width}}  {r.value:.{digits}f}  step={r.grid_step:g}  "
             f"{r.backend}  {r.seconds:.3f}s" for r in records]
    return "\n".join(lines) + "\n"
