"""The eleven collider inference tasks I-XI."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

from .exceptions import UnknownTask
from .model import EvidenceQuery

TASK_IDS = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI")


class TaskGroup(str, enum.Enum):
    PREDICTIVE = "predictive"
    INDEPENDENCE = "independence"
    DIAGNOSTIC_EFFECT_PRESENT = "diagnostic_effect_present"
    DIAGNOSTIC_EFFECT_ABSENT = "diagnostic_effect_absent"


@dataclass(frozen=True)
class TaskSpec:
    id: str
    group: TaskGroup
    query: EvidenceQuery
    symmetric_variant: bool
    mirrored: bool = False

    @property
    def label(self) -> str:
        return self.id + ("'" if self.mirrored else "")


def _task(task_id, group, query_var, evidence):
    query = EvidenceQuery(query_var, 1, tuple(evidence.items()))
    symmetric = query.swapped() != query
    return TaskSpec(task_id, group, query, symmetric)


_G = TaskGroup
_CATALOG = (
    _task("I", _G.PREDICTIVE, "E", {"C1": 0, "C2": 0}),
    _task("II", _G.PREDICTIVE, "E", {"C1": 1, "C2": 0}),
    _task("III", _G.PREDICTIVE, "E", {"C1": 1, "C2": 1}),
    _task("IV", _G.INDEPENDENCE, "C1", {"C2": 0}),
    _task("V", _G.INDEPENDENCE, "C1", {"C2": 1}),
    _task("VI", _G.DIAGNOSTIC_EFFECT_PRESENT, "C1", {"E": 1, "C2": 1}),
    _task("VII", _G.DIAGNOSTIC_EFFECT_PRESENT, "C1", {"E": 1}),
    _task("VIII", _G.DIAGNOSTIC_EFFECT_PRESENT, "C1", {"E": 1, "C2": 0}),
    _task("IX", _G.DIAGNOSTIC_EFFECT_ABSENT, "C1", {"E": 0, "C2": 1}),
    _task("X", _G.DIAGNOSTIC_EFFECT_ABSENT, "C1", {"E": 0}),
    _task("XI", _G.DIAGNOSTIC_EFFECT_ABSENT, "C1", {"E": 0, "C2": 0}),
)
_BY_ID = {task.id: task for task in _CATALOG}


def catalog() -> list[TaskSpec]:
    """The canonical tasks in order I..XI."""
    return list(_CATALOG)


def get_task(task_id) -> TaskSpec:
    if isinstance(task_id, TaskSpec):
        return task_id
    key = str(task_id).strip().upper()
    try:
        return _BY_ID[key]
    except KeyError:
        raise UnknownTask(f"unknown task id {task_id!r}; expected one of {', '.join(TASK_IDS)}") from None


def tasks_in_group(group) -> list[TaskSpec]:
    group = TaskGroup(group)
    return [task for task in _CATALOG if task.group is group]


def symmetric_counterpart(task: TaskSpec) -> TaskSpec | None:
    """The task with C1 and C2 exchanged, or None when the task is its own mirror."""
    canonical = _BY_ID.get(task.id)
    if canonical is None or canonical.query not in (task.query, task.query.swapped()):
        raise UnknownTask(f"{task!r} is not a catalog task")
    if not task.symmetric_variant:
        return None
    return dataclasses.replace(task, query=task.query.swapped(), mirrored=not task.mirrored)
