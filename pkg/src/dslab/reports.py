"""Structured experiment reports and their JSON-lines / CSV renderings.

Rationals render as ``num/den``, certified reals as ``[lo, hi]`` decimal
enclosures, sets as sorted lists.  Rendering is deterministic, so two runs
with the same inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from .certified import Enclosure, Real

ENCLOSURE_DIGITS = 15
OUTPUT_DIR_ENV = "DSLAB_OUTPUT_DIR"


def rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def plain(obj: Any) -> Any:
    """Convert a report value into JSON-compatible data."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, Fraction):
        return rational(obj)
    if isinstance(obj, float):
        return repr(obj)
    if isinstance(obj, Enclosure):
        return obj.format(ENCLOSURE_DIGITS)
    if isinstance(obj, Real):
        return obj.enclosure().format(ENCLOSURE_DIGITS)
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [plain(v) for v in sorted(obj)]
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if hasattr(obj, "as_record"):
        return plain(obj.as_record())
    raise TypeError(f"cannot render {type(obj).__name__}")


@dataclass
class ExperimentReport:
    """One experiment run: inputs, exact outputs, per-record rows and pass/fail checks."""

    name: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def check(self, name: str, ok: bool) -> bool:
        self.checks[name] = bool(ok)
        return bool(ok)

    def records(self) -> list[dict]:
        head = {"record": "summary", "experiment": self.name, "inputs": self.inputs, "outputs": self.outputs}
        head["checks"] = self.checks
        head["passed"] = self.passed
        return [plain(head)] + [plain({"record": "row", "experiment": self.name, **r}) for r in self.rows]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def to_csv(self) -> str:
        rows = [plain(r) for r in self.rows] or [plain({**self.inputs, **self.outputs})]
        cols: list[str] = []
        for r in rows:
            cols += [k for k in r if k not in cols]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
        return buf.getvalue()

    def render(self, fmt: str = "jsonl") -> str:
        if fmt == "jsonl":
            return self.to_jsonl()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")


def failure_record(kind: str, detail: str, **extra) -> str:
    return json.dumps(plain({"record": "failure", "kind": kind, "detail": detail, **extra}), sort_keys=True) + "\n"


def resolve_output(path: str | None) -> Path | None:
    """Relative paths land in ``$DSLAB_OUTPUT_DIR`` when it is set."""
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def write_all(texts: Iterable[str], path: Path) -> None:
    with open(path, "w") as fh:
        for t in texts:
            fh.write(t)
