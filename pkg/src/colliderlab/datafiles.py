"""Judgment CSV files.

Columns, in order::

    agent_id,agent_type,model_name,domain,counterbalance,task_id,response,temperature

``agent_type`` is ``human`` or ``llm``; ``model_name`` is empty for humans;
``task_id`` is a Roman numeral I-XI; ``response`` lies in [0, 100];
``temperature`` may be empty.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .exceptions import InputError
from .stats import JudgmentRecord

JUDGMENT_COLUMNS = ("agent_id", "agent_type", "model_name", "domain", "counterbalance", "task_id",
                    "response", "temperature")


def _number(x: float) -> str:
    return repr(float(x))


def write_judgments(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(JUDGMENT_COLUMNS)
        for r in records:
            writer.writerow([r.agent_id, r.agent_type.value, r.model_name, r.domain, r.counterbalance,
                             r.task_id, _number(r.response),
                             "" if r.temperature is None else _number(r.temperature)])


def ingest_judgments(path) -> list[JudgmentRecord]:
    """Read and validate a judgment CSV; every bad row is reported with its line number."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    records, problems = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        missing = [c for c in JUDGMENT_COLUMNS if c not in header]
        if missing:
            raise InputError(f"{path}: missing columns {missing}", [(1, f"missing columns {missing}")])
        for row in reader:
            line = reader.line_num
            try:
                temperature = row["temperature"].strip()
                records.append(JudgmentRecord(
                    agent_id=row["agent_id"],
                    agent_type=row["agent_type"].strip(),
                    model_name=row["model_name"],
                    domain=row["domain"].strip(),
                    counterbalance=int(row["counterbalance"]),
                    task_id=row["task_id"],
                    response=float(row["response"]),
                    temperature=float(temperature) if temperature else None,
                ))
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                message = exc.args[0] if exc.args else repr(exc)
                problems.append((line, str(message)))
    if problems:
        detail = "; ".join(f"line {line}: {msg}" for line, msg in problems[:10])
        more = f" (and {len(problems) - 10} more)" if len(problems) > 10 else ""
        raise InputError(f"{path}: {len(problems)} invalid row(s): {detail}{more}", problems)
    return records
