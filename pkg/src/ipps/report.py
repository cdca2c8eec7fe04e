"""Check rows, CSV/JSON report emission."""

from __future__ import annotations

import datetime as _dt
import json
import math
import platform
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from .errors import InputError

__all__ = ["PROVENANCE", "CheckRow", "Report", "CSV_COLUMNS"]

PROVENANCE = ("exact-oracle", "closed-form", "monte-carlo", "paper-value")
CSV_COLUMNS = ("name", "operation", "computed", "reference", "tolerance", "compare", "pass",
               "provenance")


def _num(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{float(x):.17g}"


@dataclass(frozen=True)
class CheckRow:
    """One numerical check.

    ``compare="abs"`` passes when ``|computed - reference| <= tolerance``;
    ``"ge"``/``"le"`` pass when ``computed >= reference - tolerance`` /
    ``computed <= reference + tolerance``.  An explicit ``passed`` wins.
    ``operation`` names the library routine that produced ``computed``.
    """

    name: str
    operation: str
    computed: float
    reference: float
    tolerance: float
    provenance: str
    passed: bool | None = None
    compare: str = "abs"

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise InputError(f"provenance must be one of {PROVENANCE}, got {self.provenance!r}")
        if self.compare not in ("abs", "ge", "le"):
            raise InputError(f"unknown comparison {self.compare!r}")
        if not (self.tolerance > 0 or (self.compare != "abs" and self.tolerance == 0)):
            raise InputError(f"row {self.name}: tolerance must be positive")
        if self.passed is None:
            c, r, tol = float(self.computed), float(self.reference), float(self.tolerance)
            if self.compare == "abs":
                ok = abs(c - r) <= tol
            elif self.compare == "ge":
                ok = c >= r - tol
            else:
                ok = c <= r + tol
            object.__setattr__(self, "passed", bool(ok))

    def csv(self) -> str:
        return ",".join([self.name, self.operation, _num(self.computed), _num(self.reference),
                         _num(self.tolerance), self.compare, "pass" if self.passed else "fail",
                         self.provenance])


@dataclass
class Report:
    """Ordered rows plus run metadata; ``ok`` is the conjunction of all rows."""

    command: str
    rows: list = field(default_factory=list)
    config_text: str = ""
    seed: int | None = None
    notes: dict = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc)
                           .isoformat(timespec="seconds"))

    def add(self, *args, **kw) -> CheckRow:
        row = args[0] if args and isinstance(args[0], CheckRow) else CheckRow(*args, **kw)
        self.rows.append(row)
        return row

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def environment(self) -> dict:
        return {"python": platform.python_version(), "numpy": np.__version__,
                "scipy": scipy.__version__, "platform": platform.platform()}

    def csv_body(self) -> str:
        return "\n".join([",".join(CSV_COLUMNS)] + [r.csv() for r in self.rows]) + "\n"

    def to_csv(self) -> str:
        """Header comment line (timestamp, seed) followed by the deterministic body."""
        head = f"# ipps {self.command} generated {self.timestamp} seed={self.seed}\n"
        return head + self.csv_body()

    def to_json(self) -> str:
        rows = []
        for r in self.rows:
            d = asdict(r)
            for k in ("computed", "reference", "tolerance"):
                v = float(d[k])
                d[k] = v if math.isfinite(v) else str(v)
            rows.append(d)
        doc = {"command": self.command, "status": "pass" if self.ok else "fail",
               "timestamp": self.timestamp, "seed": self.seed,
               "environment": self.environment(), "config": self.config_text,
               "notes": self.notes, "rows": rows}
        return json.dumps(doc, indent=2) + "\n"

    def summary(self) -> str:
        n_fail = sum(not r.passed for r in self.rows)
        return (f"{self.command}: {len(self.rows)} checks, {n_fail} failed, "
                f"status {'PASS' if self.ok else 'FAIL'}")
