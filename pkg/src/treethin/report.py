"""Tabular experiment records with CSV / JSON serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .prob import Prob, format_value


@dataclass
class ExperimentReport:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, **row) -> None:
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append(row)

    @property
    def all_pass(self) -> bool:
        """False if any row carries ``pass == False``; rows with no verdict are ignored."""
        return all(r.get("pass") is not False for r in self.rows)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def to_csv(self, header_comment: bool = True) -> str:
        buf = io.StringIO()
        if header_comment and self.config:
            buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(r[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"config": self.config,
               "rows": [{c: json_value(r[c]) for c in self.columns} for r in self.rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def json_value(x):
    if isinstance(x, Prob) and not x.is_exact:
        x = float(x)
    if isinstance(x, (Prob, Fraction)):
        return format_value(x)
    if isinstance(x, float):
        return float(format(x, ".15g"))
    return x
