"""Question template packs: one plain-text file per task, one template per line."""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

TASKS: tuple[str, ...] = (
    "existence",
    "localization",
    "counting",
    "ordering",
    "state_query",
    "antecedent",
    "comparison",
    "multi_hop",
    "anomaly_detection",
    "anomaly_localization",
)

TEMPLATES_PER_TASK = 20

# Slots each task's generator can fill.
TASK_SLOTS: dict[str, frozenset[str]] = {
    "existence": frozenset({"activity"}),
    "localization": frozenset({"activity"}),
    "counting": frozenset({"activity"}),
    "ordering": frozenset({"activity_a", "activity_b"}),
    "state_query": frozenset({"event"}),
    "antecedent": frozenset({"target"}),
    "comparison": frozenset({"extremum", "polarity", "activity"}),
    "multi_hop": frozenset({"K", "target", "direction", "anchor"}),
    "anomaly_detection": frozenset(),
    "anomaly_localization": frozenset(),
}


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class QuestionTemplate:
    task: str
    template_id: int
    text: str

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(name for _, name, _, _ in string.Formatter().parse(self.text) if name)


def instantiate_template(tpl: QuestionTemplate, slots: dict[str, object]) -> str:
    missing = tpl.slots - slots.keys()
    if missing:
        raise TemplateError(f"{tpl.task} template {tpl.template_id} is missing slots {sorted(missing)}")
    return tpl.text.format_map({k: slots[k] for k in tpl.slots})


def load_pack(path: str | Path, task: str) -> list[QuestionTemplate]:
    lines = [ln.rstrip("\n") for ln in Path(path).read_text().splitlines() if ln.strip()]
    return _validate(task, lines)


def _validate(task: str, lines: list[str]) -> list[QuestionTemplate]:
    if len(lines) != TEMPLATES_PER_TASK:
        raise TemplateError(f"{task}: expected {TEMPLATES_PER_TASK} templates, found {len(lines)}")
    pack = [QuestionTemplate(task, i, text) for i, text in enumerate(lines)]
    for tpl in pack:
        extra = tpl.slots - TASK_SLOTS[task]
        if extra:
            raise TemplateError(f"{task} template {tpl.template_id} uses unfillable slots {sorted(extra)}")
    return pack


@lru_cache(maxsize=None)
def builtin_pack(task: str) -> tuple[QuestionTemplate, ...]:
    if task not in TASK_SLOTS:
        raise TemplateError(f"unknown task {task!r}")
    text = resources.files("tshaystack.qa").joinpath("templates", f"{task}.txt").read_text()
    return tuple(_validate(task, [ln for ln in text.splitlines() if ln.strip()]))


ORDINALS = {1: "first", 2: "second", 3: "third", 4: "fourth", 5: "fifth"}
