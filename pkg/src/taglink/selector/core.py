from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..blocker import Scorer, top_k
from ..candgen import CandidateSet
from ..ingest import AttributionTag
from ..kg import ActorRegistry
from ..records import iter_jsonl, write_jsonl
from .backends import Backend, BackendError
from .parsing import parse_response
from .templates import FewShotExample, TemplateConfig, render_prompt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkDecision:
    tag_id: str
    predicted: str | None
    raw_response: str = ""
    valid_response: bool = True
    failed: bool = False
    input_tokens: int | None = None
    output_tokens: int | None = None
    tokens_estimated: bool = False
    duration_s: float | None = None
    error: str | None = None

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "LinkDecision":
        return cls(**{k: rec.get(k) for k in cls.__dataclass_fields__ if k in rec})


def _decide(tag: AttributionTag, cands: CandidateSet, config: TemplateConfig, backend: Backend,
            registry: ActorRegistry, examples: Sequence[FewShotExample]) -> LinkDecision:
    if not cands.candidates:
        return LinkDecision(tag.tag_id, None)
    prompt = render_prompt(config, tag, cands, registry, examples)
    try:
        out = backend.complete(prompt)
    except BackendError as exc:
        log.warning("tag %s: backend failure, counted as no-match (%s)", tag.tag_id, exc)
        return LinkDecision(tag.tag_id, None, "", False, True, error=str(exc))
    answer = parse_response(out.text, len(cands.candidates))
    predicted = cands.candidates[answer.index - 1].actor_id if answer.index else None
    return LinkDecision(
        tag.tag_id, predicted, out.text, answer.valid, False,
        out.input_tokens, out.output_tokens, out.tokens_estimated, out.duration_s,
    )


def select(batch: Sequence[tuple[AttributionTag, CandidateSet]], config: TemplateConfig,
           backend: Backend, registry: ActorRegistry,
           examples: Sequence[FewShotExample] = ()) -> list[LinkDecision]:
    """Ask the backend to pick a candidate for every tag.

    Results come back in input order whatever the request concurrency.
    Tags with an empty candidate set get a no-match without a backend call.
    """
    for tag, cands in batch:
        if tag.tag_id != cands.tag_id:
            raise ValueError(f"tag {tag.tag_id!r} paired with candidates for {cands.tag_id!r}")
    workers = max(1, int(getattr(backend, "max_parallel", 1)))
    if workers == 1 or len(batch) < 2:
        return [_decide(t, c, config, backend, registry, examples) for t, c in batch]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_decide, t, c, config, backend, registry, examples) for t, c in batch]
        return [f.result() for f in futures]


def build_few_shot_pool(train: Sequence[AttributionTag], registry: ActorRegistry, scorer: Scorer,
                        k: int, seed: int, shots: int = 5) -> list[FewShotExample]:
    """Pick ``shots`` training tags and turn them into worked examples.

    Roughly two in five examples are non-matching: the true actor is removed
    from the ranking so the correct answer is 0. Matching examples keep the
    blocker's ranking and force the true actor into the last slot if the
    blocker missed it.
    """
    usable = [t for t in train if t.actor_link and t.actor_link in registry]
    if shots < 1:
        return []
    if len(usable) < shots:
        raise ValueError(f"need at least {shots} linked training tags, have {len(usable)}")
    rng = random.Random(seed)
    chosen = rng.sample(usable, shots)
    n_non = max(1, (2 * shots) // 5) if shots >= 2 else 0
    roles = [True] * (shots - n_non) + [False] * n_non
    rng.shuffle(roles)

    everyone = set(registry.actors)
    examples = []
    for tag, matching in zip(chosen, roles):
        if matching:
            ids = [c.actor_id for c in top_k(scorer, tag.label, k)]
            if tag.actor_link not in ids:
                ids[-1] = tag.actor_link
            answer = ids.index(tag.actor_link) + 1
        else:
            ids = [c.actor_id for c in top_k(scorer, tag.label, k, allowed=everyone - {tag.actor_link})]
            answer = 0
        examples.append(FewShotExample(tag.label, tuple(registry[a].label for a in ids), answer,
                                       tag.category))
    return examples


def write_decisions(path: str | Path, decisions: Iterable[LinkDecision]) -> int:
    return write_jsonl(path, (d.to_record() for d in decisions))


def read_decisions(path: str | Path) -> list[LinkDecision]:
    return [LinkDecision.from_record(rec) for _, rec in iter_jsonl(path)]


def write_examples(path: str | Path, examples: Iterable[FewShotExample]) -> int:
    return write_jsonl(path, (e.to_record() for e in examples))


def read_examples(path: str | Path) -> list[FewShotExample]:
    return [FewShotExample.from_record(rec) for _, rec in iter_jsonl(path)]
