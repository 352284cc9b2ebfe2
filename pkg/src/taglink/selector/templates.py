"""Prompt parts, the ten template layouts, and prompt rendering."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from ..candgen import CandidateSet
from ..ingest import AttributionTag
from ..kg import ActorRegistry

PROMPT_VERSION = "1"


class TemplatePart(str, enum.Enum):
    SYS = "SYS"
    SYS_PLUS = "SYS+"
    FEW_SHOT = "FEW-SHOT"
    TASK = "TASK"
    DOMAIN = "DOMAIN"
    INPUT = "INPUT"
    QUEST = "QUEST"
    OUT = "OUT"
    OUT_PLUS = "OUT+"


P = TemplatePart

# Render order of all parts; a template is a subset of this sequence.
PART_ORDER = (P.SYS, P.SYS_PLUS, P.FEW_SHOT, P.TASK, P.DOMAIN, P.INPUT, P.QUEST, P.OUT, P.OUT_PLUS)
SYSTEM_PARTS = frozenset({P.SYS, P.SYS_PLUS})

# Base layouts without INPUT or FEW-SHOT; both are added at render time.
TEMPLATES: dict[int, tuple[TemplatePart, ...]] = {
    0: (P.SYS, P.SYS_PLUS, P.TASK, P.DOMAIN, P.QUEST, P.OUT, P.OUT_PLUS),
    1: (P.SYS, P.TASK, P.DOMAIN, P.QUEST, P.OUT, P.OUT_PLUS),
    2: (P.SYS, P.SYS_PLUS, P.TASK, P.DOMAIN, P.QUEST, P.OUT),
    3: (P.SYS, P.SYS_PLUS, P.TASK, P.QUEST, P.OUT, P.OUT_PLUS),
    4: (P.SYS, P.SYS_PLUS, P.TASK, P.DOMAIN, P.QUEST),
    5: (P.TASK, P.DOMAIN, P.QUEST, P.OUT, P.OUT_PLUS),
    6: (P.SYS, P.TASK, P.QUEST, P.OUT),
    7: (P.TASK, P.QUEST, P.OUT, P.OUT_PLUS),
    8: (P.SYS, P.TASK, P.QUEST),
    9: (P.TASK, P.QUEST),
}

PART_TEXT: dict[TemplatePart, str] = {
    P.SYS: (
        "You are an expert analyst in cryptoasset forensics. You link attribution tags "
        "of blockchain addresses to the real-world actors they describe."
    ),
    P.SYS_PLUS: (
        "Follow the instructions exactly. Use only the information given in the prompt "
        "and never invent candidates."
    ),
    P.TASK: (
        "Task: An attribution tag labels a blockchain address. Decide which of the "
        "candidate entities from a knowledge graph refers to the same real-world actor "
        "as the attribution tag, or whether none of them does."
    ),
    P.DOMAIN: (
        "Domain: Tags and entities come from the cryptoasset ecosystem, for example "
        "exchanges, DeFi protocols, mixers and wallet services. Names of the same actor "
        "often differ in casing, punctuation, abbreviations or web-domain suffixes."
    ),
    P.QUEST: (
        "Question: Which candidate matches the attribution tag? Answer with the number "
        "of the matching candidate, or 0 if no candidate matches."
    ),
    P.OUT: "Answer with a single number.",
    P.OUT_PLUS: (
        "Do not write any explanation or other text besides the number. "
        "If no candidate refers to the same actor, answer 0."
    ),
}

FEW_SHOT_HEADER = "Here are some examples of the task with their correct answers."


@dataclass(frozen=True)
class TemplateConfig:
    id: int
    shots: int = 0

    def __post_init__(self):
        if self.id not in TEMPLATES:
            raise ValueError(f"template id must be in 0-9, got {self.id}")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")

    @property
    def parts(self) -> tuple[TemplatePart, ...]:
        present = set(TEMPLATES[self.id]) | {P.INPUT, P.QUEST}
        if self.shots > 0:
            present.add(P.FEW_SHOT)
        return tuple(p for p in PART_ORDER if p in present)

    @property
    def label(self) -> str:
        return f"{self.id}/{self.shots}"


@dataclass(frozen=True)
class FewShotExample:
    tag_label: str
    candidate_labels: tuple[str, ...]
    answer: int  # 1-based candidate number, 0 for no match
    tag_category: str | None = None

    def __post_init__(self):
        if not 0 <= self.answer <= len(self.candidate_labels):
            raise ValueError(f"answer {self.answer} outside 0..{len(self.candidate_labels)}")

    def to_record(self) -> dict:
        return {
            "tag_label": self.tag_label,
            "tag_category": self.tag_category,
            "candidate_labels": list(self.candidate_labels),
            "answer": self.answer,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FewShotExample":
        return cls(rec["tag_label"], tuple(rec["candidate_labels"]), int(rec["answer"]),
                   rec.get("tag_category"))


@dataclass(frozen=True)
class Prompt:
    tag_id: str
    system: str
    user: str
    candidate_ids: tuple[str, ...] = field(default=())

    def messages(self) -> list[dict]:
        msgs = []
        if self.system:
            msgs.append({"role": "system", "content": self.system})
        msgs.append({"role": "user", "content": self.user})
        return msgs

    @property
    def text(self) -> str:
        return f"{self.system}\n\n{self.user}" if self.system else self.user


def render_input(tag_label: str, candidate_labels: Sequence[str], category: str | None = None) -> str:
    lines = [f"Attribution tag: {tag_label}"]
    if category:
        lines.append(f"Tag category: {category}")
    lines.append("Candidates:")
    lines.extend(f"{i}. {label}" for i, label in enumerate(candidate_labels, start=1))
    return "\n".join(lines)


def render_examples(examples: Sequence[FewShotExample]) -> str:
    blocks = [FEW_SHOT_HEADER]
    for n, ex in enumerate(examples, start=1):
        blocks.append(
            f"Example {n}:\n"
            + render_input(ex.tag_label, ex.candidate_labels, ex.tag_category)
            + f"\nAnswer: {ex.answer}"
        )
    return "\n\n".join(blocks)


def render_prompt(config: TemplateConfig, tag: AttributionTag, candidates: CandidateSet,
                  registry: ActorRegistry, examples: Sequence[FewShotExample] = ()) -> Prompt:
    if not candidates.candidates:
        raise ValueError(f"tag {tag.tag_id!r} has an empty candidate set")
    if len(examples) != config.shots:
        raise ValueError(f"template expects {config.shots} example(s), got {len(examples)}")
    labels = [registry[a].label for a in candidates.actor_ids]
    system, user = [], []
    for part in config.parts:
        if part is P.INPUT:
            text = render_input(tag.label, labels, tag.category)
        elif part is P.FEW_SHOT:
            text = render_examples(examples)
        else:
            text = PART_TEXT[part]
        (system if part in SYSTEM_PARTS else user).append(text)
    return Prompt(tag.tag_id, "\n".join(system), "\n\n".join(user), tuple(candidates.actor_ids))
