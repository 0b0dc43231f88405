"""
Export utilities for reports and coefficient tables.
"""

import json
from typing import Iterable, List, Dict

import pandas as pd

from utils import approx, parse_scalar


def to_json(payload: dict) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _frame(rows: List[Dict]) -> pd.DataFrame:
    cleaned = [{k: "" if v is None else str(v) for k, v in row.items()} for row in rows]
    return pd.DataFrame(cleaned).fillna("")


def to_csv(rows: List[Dict]) -> str:
    """Export rows to CSV text."""
    if not rows:
        return ""
    return _frame(rows).to_csv(index=False)


def to_table(rows: List[Dict]) -> str:
    """Export rows as a plain-text table."""
    if not rows:
        return "(no rows)\n"
    return _frame(rows).to_string(index=False) + "\n"


def with_approx(rows: List[Dict], columns: Iterable[str]) -> List[Dict]:
    """Add '<column>~' decimal renderings next to exact scalar columns."""
    columns = list(columns)
    out = []
    for row in rows:
        extended = {}
        for key, value in row.items():
            extended[key] = value
            if key in columns and value not in (None, ""):
                extended[f"{key}~"] = approx(parse_scalar(value))
        out.append(extended)
    return out


def recurrence_rows(rec) -> List[Dict]:
    """One row per n with exact B_n and C_{n+1} strings."""
    return [
        {
            "n": row["n"],
            "B_n": None if row["B_n"] is None else str(row["B_n"]),
            "C_n+1": None if row["C_n+1"] is None else str(row["C_n+1"]),
        }
        for row in rec.rows()
    ]


def report_rows(payload: dict) -> List[Dict]:
    """Flatten a report payload into name / range / status / witness rows."""
    rows = []
    for check in payload.get("checks", []):
        witness = check.get("witness") or {}
        compared = check.get("compared")
        rows.append({
            "name": check["name"],
            "range": f"[{check['range'][0]}, {check['range'][1]}]",
            "status": check["status"],
            "n": witness.get("n"),
            "lhs": witness.get("lhs"),
            "rhs": witness.get("rhs"),
            "compared": None if compared is None else f"[{compared[0]}, {compared[1]}]",
        })
    return rows


def render(payload: dict, rows: List[Dict], fmt: str) -> str:
    """Render a command result in the requested format."""
    if fmt == "json":
        return to_json(payload)
    if fmt == "csv":
        return to_csv(rows)
    return to_table(rows)
