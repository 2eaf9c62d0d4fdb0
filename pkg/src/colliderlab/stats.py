"""Judgment records, rank correlation and bootstrap summaries."""

from __future__ import annotations

import enum
import math
import zlib
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .exceptions import ConstantVector, EmptyInput, LengthMismatch
from .tasks import TASK_IDS, TaskGroup, get_task

DOMAINS = ("economy", "sociology", "weather")
HUMAN = "Human"


class AgentType(str, enum.Enum):
    HUMAN = "human"
    LLM = "llm"


@dataclass(frozen=True)
class JudgmentRecord:
    agent_id: str
    agent_type: AgentType
    model_name: str
    domain: str
    counterbalance: int
    task_id: str
    response: float
    temperature: float | None = None

    def __post_init__(self):
        agent_type = self.agent_type
        if not isinstance(agent_type, AgentType):
            agent_type = AgentType(str(agent_type).strip().lower())
        object.__setattr__(self, "agent_type", agent_type)
        object.__setattr__(self, "domain", str(self.domain).lower())
        object.__setattr__(self, "task_id", get_task(self.task_id).id)
        object.__setattr__(self, "response", float(self.response))
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        if int(self.counterbalance) != self.counterbalance or not 1 <= self.counterbalance <= 4:
            raise ValueError(f"counterbalance must be an integer 1-4, got {self.counterbalance!r}")
        object.__setattr__(self, "counterbalance", int(self.counterbalance))
        if not 0.0 <= self.response <= 100.0:
            raise ValueError(f"response {self.response} outside [0, 100]")
        if self.temperature is not None:
            object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def agent(self) -> str:
        """Reporting label: the model name for LLMs, ``Human`` for people."""
        return self.model_name if self.agent_type is AgentType.LLM else HUMAN


@dataclass(frozen=True)
class AggregateRow:
    key: tuple[tuple[str, object], ...]
    task_id: str
    group: TaskGroup
    mean: float
    ci_low: float
    ci_high: float
    n: int

    def get(self, name, default=None):
        return dict(self.key).get(name, default)


def _ranks_and_checks(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.size} vs {y.size} values")
    if x.size < 2:
        raise ValueError("spearman needs at least two pairs")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ConstantVector("spearman is undefined for a constant vector")
    return rankdata(x, method="average"), rankdata(y, method="average")


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of average ranks (ties share their mean rank).

    Average ranks are half-integers, so the co-moments are computed in exact
    integer arithmetic and only ``rho**2`` is rounded, once.
    """
    rx, ry = _ranks_and_checks(x, y)
    n = rx.size
    dx = [n * int(2 * r) - int(2 * rx.sum()) for r in rx]
    dy = [n * int(2 * r) - int(2 * ry.sum()) for r in ry]
    sxy = sum(a * b for a, b in zip(dx, dy))
    sxx = sum(a * a for a in dx)
    syy = sum(b * b for b in dy)
    rho = math.sqrt(Fraction(sxy * sxy, sxx * syy))
    return math.copysign(rho, sxy) if sxy else 0.0


def bootstrap_ci(values: Sequence[float], replicates: int = 2000, level: float = 0.95,
                 seed=0) -> tuple[float, float]:
    """Percentile interval of the bootstrap distribution of the mean."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("bootstrap_ci needs at least one value")
    if replicates < 100:
        raise ValueError("use at least 100 bootstrap replicates")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(replicates, values.size))
    means = values[idx].mean(axis=1)
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(means, [tail, 100.0 - tail])
    return float(low), float(high)


_KEY_GETTERS = {
    "agent": lambda r: r.agent,
    "agent_id": lambda r: r.agent_id,
    "agent_type": lambda r: r.agent_type.value,
    "model_name": lambda r: r.model_name,
    "domain": lambda r: r.domain,
    "counterbalance": lambda r: r.counterbalance,
    "task_id": lambda r: r.task_id,
}


def _cell_seed(seed, key) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), zlib.crc32(repr(key).encode("utf-8"))])


def aggregate(records: Iterable[JudgmentRecord], group_by: Sequence[str] = ("agent_type", "model_name"),
              replicates: int = 2000, level: float = 0.95, seed=0) -> list[AggregateRow]:
    """Mean response and bootstrap CI per (group_by key, task), ordered by task I..XI.

    Each cell's resampling stream is derived from ``seed`` and the cell key,
    and cell values are sorted first, so results do not depend on record order.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no judgment records to aggregate")
    fields = [name for name in group_by if name != "task_id"]
    unknown = set(fields) - set(_KEY_GETTERS)
    if unknown:
        raise ValueError(f"cannot group by {sorted(unknown)}")
    cells = defaultdict(list)
    for rec in records:
        key = tuple((name, _KEY_GETTERS[name](rec)) for name in fields)
        cells[(key, rec.task_id)].append(rec.response)
    rows = []
    for (key, task_id), values in cells.items():
        values = sorted(values)
        low, high = bootstrap_ci(values, replicates, level, _cell_seed(seed, (key, task_id)))
        rows.append(AggregateRow(key, task_id, get_task(task_id).group, float(np.mean(values)),
                                 low, high, len(values)))
    rows.sort(key=lambda row: (TASK_IDS.index(row.task_id), row.key))
    return rows


def _cell_means(records, cell_fields):
    sums = defaultdict(list)
    for rec in records:
        sums[tuple(_KEY_GETTERS[f](rec) for f in cell_fields)].append(rec.response)
    return {cell: float(np.mean(v)) for cell, v in sums.items()}


def _correlate_cells(reference, other):
    shared = sorted(set(reference) & set(other), key=repr)
    if len(shared) < 2:
        return None
    try:
        return spearman([reference[c] for c in shared], [other[c] for c in shared])
    except ConstantVector:
        return None


@dataclass(frozen=True)
class CorrelationRow:
    model: str
    by_domain: dict
    pooled: float | None


def correlation_table(records: Iterable[JudgmentRecord], reference: str = HUMAN,
                      domains: Sequence[str] = DOMAINS) -> list[CorrelationRow]:
    """Spearman correlation between the reference agent's cell means and every other agent's.

    Per-domain columns use (counterbalance, task) cells within the domain; the
    pooled column uses all (domain, counterbalance, task) cells. ``None`` marks
    correlations that are undefined (constant responses or < 2 shared cells).
    """
    records = list(records)
    if not records:
        raise EmptyInput("no judgment records to correlate")
    by_agent = defaultdict(list)
    for rec in records:
        by_agent[rec.agent].append(rec)
    if reference not in by_agent:
        raise ValueError(f"reference agent {reference!r} not found; have {sorted(by_agent)}")
    ref = by_agent[reference]
    rows = []
    for agent in sorted(a for a in by_agent if a != reference):
        recs = by_agent[agent]
        per_domain = {}
        for domain in domains:
            ref_cells = _cell_means([r for r in ref if r.domain == domain], ("counterbalance", "task_id"))
            cells = _cell_means([r for r in recs if r.domain == domain], ("counterbalance", "task_id"))
            per_domain[domain] = _correlate_cells(ref_cells, cells)
        cell_fields = ("domain", "counterbalance", "task_id")
        pooled = _correlate_cells(_cell_means(ref, cell_fields), _cell_means(recs, cell_fields))
        rows.append(CorrelationRow(agent, per_domain, pooled))
    return rows
