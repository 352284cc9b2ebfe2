"""Prompted candidate selection."""

from .backends import (
    BACKEND_KINDS,
    BackendConfig,
    BackendError,
    ChatCompletionBackend,
    Completion,
    ScriptedMockBackend,
    estimate_tokens,
    make_backend,
)
from .core import (
    LinkDecision,
    build_few_shot_pool,
    read_decisions,
    read_examples,
    select,
    write_decisions,
    write_examples,
)
from .parsing import ParsedAnswer, parse_response
from .templates import (
    TEMPLATES,
    FewShotExample,
    Prompt,
    TemplateConfig,
    TemplatePart,
    render_prompt,
)

__all__ = [
    "BACKEND_KINDS",
    "BackendConfig",
    "BackendError",
    "ChatCompletionBackend",
    "Completion",
    "FewShotExample",
    "LinkDecision",
    "ParsedAnswer",
    "Prompt",
    "ScriptedMockBackend",
    "TEMPLATES",
    "TemplateConfig",
    "TemplatePart",
    "build_few_shot_pool",
    "estimate_tokens",
    "make_backend",
    "parse_response",
    "read_decisions",
    "read_examples",
    "render_prompt",
    "select",
    "write_decisions",
    "write_examples",
]
