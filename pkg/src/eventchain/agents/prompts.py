"""Prompt templates with ``{{slot}}`` substitution."""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

_SLOT_RE = re.compile(r"\{\{([a-z_]+)\}\}")

PROMPT_FILES = {
    "event_chain": "event_chain.txt",
    "function_code": "function_code.txt",
    "instance_model": "instance_model.txt",
    "constraints": "constraints.txt",
}


class MissingSlotError(KeyError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    text: str

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(_SLOT_RE.findall(self.text)))

    def render(self, slots: dict[str, str]) -> str:
        missing = [s for s in self.slots if s not in slots]
        if missing:
            raise MissingSlotError(f"{self.role} prompt is missing slot(s): {', '.join(missing)}")
        unknown = sorted(set(slots) - set(self.slots))
        if unknown:
            raise MissingSlotError(f"{self.role} prompt has no slot(s): {', '.join(unknown)}")
        # single pass so slot values containing '{{...}}' are left alone
        return _SLOT_RE.sub(lambda m: slots[m.group(1)].rstrip("\n"), self.text)


def load_prompt(which: str) -> PromptTemplate:
    if which not in PROMPT_FILES:
        raise ValueError(f"unknown prompt {which!r}; choose from {sorted(PROMPT_FILES)}")
    text = resources.files("eventchain").joinpath(f"data/prompts/{PROMPT_FILES[which]}").read_text("utf-8")
    return PromptTemplate(which, text.rstrip("\n"))


def build_prompt(which: str, slots: dict[str, str]) -> str:
    return load_prompt(which).render(slots)


def one_shot_example() -> str:
    """Hand-made two-node example used to steer instance-model generation."""
    base = resources.files("eventchain").joinpath("data/one_shot")
    desc = base.joinpath("description.json").read_text("utf-8").rstrip("\n")
    inst = base.joinpath("instance.json").read_text("utf-8").rstrip("\n")
    return ("Event chain description:\n```json\n" + desc + "\n```\n\n"
            "Instance model:\n```json\n" + inst + "\n```")
