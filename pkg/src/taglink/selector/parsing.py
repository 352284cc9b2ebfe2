from __future__ import annotations

import re
from typing import NamedTuple

_INT = re.compile(r"[-+]?\d+")


class ParsedAnswer(NamedTuple):
    index: int | None  # 1-based candidate number; None means no match
    valid: bool


def parse_response(text: str | None, k: int) -> ParsedAnswer:
    """Map a model reply to a candidate number.

    The first integer literal decides: 1..k selects that candidate, 0 is a
    valid no-match, and anything else (or no integer at all) is an invalid
    reply treated as no-match.
    """
    m = _INT.search(text or "")
    if m is None:
        return ParsedAnswer(None, False)
    try:
        value = int(m.group())
    except ValueError:
        return ParsedAnswer(None, False)
    if value == 0:
        return ParsedAnswer(None, True)
    if 1 <= value <= k:
        return ParsedAnswer(value, True)
    return ParsedAnswer(None, False)
