"""Per-tick, per-VM metric rows and their CSV form."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import Dict, Iterator, List, Optional

CSV_COLUMNS = ("tick", "vm", "offered_pct", "alpha", "level", "clamp",
               "admitted_pct", "attacker_share_pct", "blocked")
_FLOATS = {"offered_pct", "alpha", "clamp", "admitted_pct", "attacker_share_pct"}


def _r(v: float) -> float:
    return round(float(v), 6)


@dataclass
class MetricsRow:
    """CSV columns first (rounded to 6 dp); the rest is in-memory detail."""

    tick: int
    vm: int
    offered_pct: float
    alpha: float
    level: int
    clamp: float
    admitted_pct: float
    attacker_share_pct: float
    blocked: int
    offered_bytes: int = field(default=0, compare=False)
    admitted_bytes: int = field(default=0, compare=False)
    policed_bytes: int = field(default=0, compare=False)
    blocked_bytes: int = field(default=0, compare=False)
    police_target: Optional[float] = field(default=None, compare=False)
    offered_by_class: Dict[str, int] = field(default_factory=dict, compare=False)
    passed_police_by_class: Dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        for name in _FLOATS:
            setattr(self, name, _r(getattr(self, name)))

    def csv_values(self) -> List[str]:
        return [f"{getattr(self, c):.6f}" if c in _FLOATS else str(getattr(self, c))
                for c in CSV_COLUMNS]

    @property
    def police_rate_pct(self) -> float:
        return 100.0 * self.policed_bytes / self.offered_bytes if self.offered_bytes else 0.0


@dataclass
class MetricsSeries:
    rows: List[MetricsRow] = field(default_factory=list)
    messages: Dict[int, Counter] = field(default_factory=dict)

    def __iter__(self) -> Iterator[MetricsRow]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def for_vm(self, vm: int) -> List[MetricsRow]:
        return [r for r in self.rows if r.vm == vm]

    def column(self, name: str, vm: int) -> List:
        return [getattr(r, name) for r in self.rows if r.vm == vm]


def export_csv(series: MetricsSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in series.rows:
            writer.writerow(row.csv_values())


def read_csv(path) -> MetricsSeries:
    names = [f.name for f in fields(MetricsRow)][:len(CSV_COLUMNS)]
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for rec in reader:
            rows.append(MetricsRow(**{
                n: float(rec[n]) if n in _FLOATS else int(rec[n]) for n in names
            }))
    return MetricsSeries(rows)
