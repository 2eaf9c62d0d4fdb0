"""Natural-language prompts for the collider inference tasks.

A prompt has five sections (introduction, variables, causal mechanism,
observation, question), filled from a domain vocabulary, a counterbalancing
code and a task. Sections are joined with single newlines.

The variables section lists each variable's ``listed`` level as given in the
vocabulary; counterbalancing only changes which adjective denotes a cause's
active state in the mechanism, observation and question sections.
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .exceptions import TemplateSlotUnresolved
from .tasks import TaskSpec

SECTIONS = ("introduction", "variables", "mechanism", "observation", "question")

VARIABLES_INTRO = "Here are some variables:"
VARIABLE_LEVELS = "Some {unit_plural} have {listed}. Others have {normal}."
MECHANISM_INTRO = "Assume you live in a world that works like this:"
FIRST_MECHANISM = "{Cause} causes {effect}."
SECOND_MECHANISM = "Also, {cause} causes {effect}."
OBSERVATION = "Suppose that the {unit_singular} you live in currently exhibits the following: {observations}."
QUESTION = ("Given the observations and the causal mechanism, how likely on a scale from 0 to 100 "
            "is {query}? 0 means definitely not likely and 100 means definitely likely. "
            "Please provide only a numeric response and no additional information.")

_OPPOSITE = {"high": "low", "low": "high"}
BUILTIN_DOMAINS = ("economy", "sociology", "weather")


@dataclass(frozen=True)
class VariableEntry:
    definition: str
    high: str
    low: str
    normal: str
    active: str
    listed: str

    def __post_init__(self):
        if self.active not in _OPPOSITE:
            raise ValueError(f"active level must be 'high' or 'low', got {self.active!r}")
        if self.listed not in ("high", "low", "normal"):
            raise ValueError(f"bad listed level {self.listed!r}")

    def level(self, name: str) -> str:
        return getattr(self, name)


@dataclass(frozen=True)
class DomainVocabulary:
    domain: str
    introduction: str
    unit_singular: str
    unit_plural: str
    variables: dict
    reconstructed: bool = False
    note: str = ""

    def __post_init__(self):
        if set(self.variables) != {"C1", "C2", "E"}:
            raise ValueError("a collider vocabulary needs exactly the variables C1, C2 and E")
        entries = {k: v if isinstance(v, VariableEntry) else VariableEntry(**v)
                   for k, v in self.variables.items()}
        object.__setattr__(self, "variables", entries)

    @classmethod
    def from_dict(cls, data: dict) -> "DomainVocabulary":
        return cls(**data)

    def to_dict(self) -> dict:
        out = {"domain": self.domain, "reconstructed": self.reconstructed}
        if self.note:
            out["note"] = self.note
        out.update(introduction=self.introduction, unit_singular=self.unit_singular,
                   unit_plural=self.unit_plural)
        out["variables"] = {k: {f: getattr(v, f) for f in ("definition", "high", "low", "normal", "active",
                                                           "listed")}
                            for k, v in self.variables.items()}
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def load_vocabulary(name_or_path) -> DomainVocabulary:
    """Load a built-in vocabulary by domain name, or a vocabulary JSON file."""
    if str(name_or_path) in BUILTIN_DOMAINS:
        text = resources.files("colliderlab.vocabularies").joinpath(f"{name_or_path}.json") \
            .read_text(encoding="utf-8")
    else:
        text = Path(name_or_path).read_text(encoding="utf-8")
    return DomainVocabulary.from_dict(json.loads(text))


def builtin_vocabularies() -> list[DomainVocabulary]:
    return [load_vocabulary(name) for name in BUILTIN_DOMAINS]


@dataclass(frozen=True)
class CounterbalanceCode:
    """Which cause adjectives are flipped relative to the vocabulary's defaults.

    Code 1 keeps both defaults; 2 flips C2; 3 flips C1; 4 flips both.
    """

    code: int
    flip_c1: bool = field(init=False)
    flip_c2: bool = field(init=False)

    def __post_init__(self):
        if self.code not in (1, 2, 3, 4):
            raise ValueError(f"counterbalance code must be 1-4, got {self.code!r}")
        object.__setattr__(self, "flip_c1", self.code in (3, 4))
        object.__setattr__(self, "flip_c2", self.code in (2, 4))

    def flipped(self, var: str) -> bool:
        return {"C1": self.flip_c1, "C2": self.flip_c2}.get(var, False)


CANONICAL = CounterbalanceCode(1)
ALL_CODES = tuple(CounterbalanceCode(c) for c in (1, 2, 3, 4))


@dataclass(frozen=True)
class PromptBundle:
    domain: str
    counterbalance: int
    task_id: str
    mirrored: bool
    query: str
    sections: tuple[tuple[str, str], ...]
    full_text: str
    vocabulary: str = ""
    reconstructed: bool = False

    @property
    def section_map(self) -> dict[str, str]:
        return dict(self.sections)

    def to_record(self) -> dict:
        return {"domain": self.domain, "counterbalance": self.counterbalance, "task_id": self.task_id,
                "mirrored": self.mirrored, "query": self.query, "vocabulary": self.vocabulary,
                "reconstructed": self.reconstructed, "sections": dict(self.sections),
                "full_text": self.full_text}

    @classmethod
    def from_record(cls, record: dict) -> "PromptBundle":
        sections = tuple((name, record["sections"][name]) for name in SECTIONS)
        return cls(record["domain"], int(record["counterbalance"]), record["task_id"],
                   bool(record.get("mirrored", False)), record["query"], sections, record["full_text"],
                   record.get("vocabulary", ""), bool(record.get("reconstructed", False)))


class _Strict(string.Formatter):
    def get_value(self, key, args, kwargs):
        try:
            value = kwargs[key]
        except KeyError:
            raise TemplateSlotUnresolved(f"template slot {{{key}}} has no value") from None
        if value is None:
            raise TemplateSlotUnresolved(f"template slot {{{key}}} resolved to nothing")
        return value


_fmt = _Strict().format


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def active_level(vocab: DomainVocabulary, cb: CounterbalanceCode, var: str) -> str:
    level = vocab.variables[var].active
    return _OPPOSITE[level] if cb.flipped(var) else level


def phrase(vocab: DomainVocabulary, cb: CounterbalanceCode, var: str, value: int) -> str:
    """Adjective phrase for a variable state: value 1 is the causally active level."""
    entry = vocab.variables[var]
    return entry.level(active_level(vocab, cb, var)) if value else entry.normal


def render_prompt(vocab: DomainVocabulary, cb: CounterbalanceCode, task: TaskSpec) -> PromptBundle:
    if isinstance(cb, int):
        cb = CounterbalanceCode(cb)
    variables = vocab.variables
    listing = []
    for var in ("C1", "C2", "E"):
        entry = variables[var]
        listing.append(entry.definition)
        listing.append(_fmt(VARIABLE_LEVELS, unit_plural=vocab.unit_plural,
                            listed=entry.level(entry.listed), normal=entry.normal))
    effect = phrase(vocab, cb, "E", 1)
    mechanism = " ".join([
        MECHANISM_INTRO,
        _fmt(FIRST_MECHANISM, Cause=_capitalize(phrase(vocab, cb, "C1", 1)), effect=effect),
        _fmt(SECOND_MECHANISM, cause=phrase(vocab, cb, "C2", 1), effect=effect),
    ])
    query = task.query
    observed = ", ".join(phrase(vocab, cb, var, value) for var, value in query.evidence)
    sections = (
        ("introduction", _fmt("{text}", text=vocab.introduction)),
        ("variables", " ".join([VARIABLES_INTRO] + listing)),
        ("mechanism", mechanism),
        ("observation", _fmt(OBSERVATION, unit_singular=vocab.unit_singular, observations=observed or None)),
        ("question", _fmt(QUESTION, query=phrase(vocab, cb, query.query_var, query.query_value))),
    )
    return PromptBundle(
        domain=vocab.domain,
        counterbalance=cb.code,
        task_id=task.id,
        mirrored=task.mirrored,
        query=query.notation(),
        sections=sections,
        full_text="\n".join(text for _, text in sections),
        vocabulary=vocab.fingerprint(),
        reconstructed=vocab.reconstructed,
    )


def prompt_matrix(vocabs, tasks, codes=ALL_CODES) -> list[PromptBundle]:
    """Every (domain, counterbalance, task) prompt, in that nesting order."""
    vocabs, tasks = list(vocabs), list(tasks)
    if not vocabs or not tasks:
        raise ValueError("prompt_matrix needs at least one vocabulary and one task")
    codes = [c if isinstance(c, CounterbalanceCode) else CounterbalanceCode(c) for c in codes]
    return [render_prompt(v, cb, t) for v in vocabs for cb in codes for t in tasks]


def write_bundles(bundles, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for bundle in bundles:
            fh.write(json.dumps(bundle.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_bundles(path) -> list[PromptBundle]:
    with open(path, encoding="utf-8") as fh:
        return [PromptBundle.from_record(json.loads(line)) for line in fh if line.strip()]
