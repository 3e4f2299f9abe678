"""Deterministic, idempotent cleaning pipeline for raw law text.

Rules run in a fixed order; the whole pass repeats until the text stops
changing, so cleaning twice can never differ from cleaning once. Each rule
can be disabled individually (surfaced as CLI toggles).
"""

from __future__ import annotations

import re
import unicodedata
from collections.abc import Collection
from dataclasses import dataclass, field

from .arabic import is_arabic_letter

RULE_NAMES = (
    "strip_invisible",
    "join_lines",
    "collapse_punct_runs",
    "remove_dash_runs",
    "collapse_blank_lines",
    "collapse_spaces",
    "trim",
)

# Characters that legitimately end a sentence/clause; a line ending in one
# of these is never joined with its successor.
_SENTENCE_FINAL = frozenset(".\u060C\u061B:\u061F!()\u201d")

# Decorative filler: ASCII hyphen runs and tatweel (U+0640) runs.
_DASH_RUN_RE = re.compile(r"[-\u0640]{2,}")
_PUNCT_RUN_RE = re.compile(r"(.)\1{2,}")
_SPACE_RUN_RE = re.compile(r"[ \t]+")


@dataclass
class CleanReport:
    """Counts of what cleaning did; rule_hits is per-rule application count."""

    chars_removed: int = 0
    lines_joined: int = 0
    runs_collapsed: int = 0
    rule_hits: dict[str, int] = field(default_factory=dict)

    def _bump(self, rule: str, hits: int) -> None:
        if hits:
            self.rule_hits[rule] = self.rule_hits.get(rule, 0) + hits


def _is_invisible(ch: str) -> bool:
    if ch in ("\n", "\t"):
        return False
    return unicodedata.category(ch) in ("Cc", "Cf")


def _strip_invisible(text: str) -> tuple[str, int]:
    kept = [ch for ch in text if not _is_invisible(ch)]
    return "".join(kept), len(text) - len(kept)


def _starts_joinable(line: str) -> bool:
    first = line[0]
    return unicodedata.category(first) == "Ll" or is_arabic_letter(first)


def _join_lines(text: str) -> tuple[str, int]:
    lines = text.split("\n")
    out: list[str] = []
    joins = 0
    for line in lines:
        prev = out[-1].rstrip() if out else ""
        cur = line.lstrip()
        if (
            out
            and prev
            and cur
            and prev[-1] not in _SENTENCE_FINAL
            and _starts_joinable(cur)
        ):
            out[-1] = prev + " " + cur
            joins += 1
        else:
            out.append(line)
    return "\n".join(out), joins


def _collapse_punct_runs(text: str) -> tuple[str, int]:
    hits = 0

    def repl(m: re.Match) -> str:
        nonlocal hits
        ch = m.group(1)
        if ch in "-\u0640" or not unicodedata.category(ch).startswith("P"):
            return m.group(0)
        hits += 1
        return ch

    return _PUNCT_RUN_RE.sub(repl, text), hits


def _remove_dash_runs(text: str) -> tuple[str, int]:
    new, hits = _DASH_RUN_RE.subn("", text)
    return new, hits


def _collapse_blank_lines(text: str) -> tuple[str, int]:
    lines = text.split("\n")
    out: list[str] = []
    hits = 0
    blanks = 0
    for line in lines:
        if line.strip() == "":
            blanks += 1
            continue
        if blanks:
            if blanks >= 2:
                hits += 1
            out.append("")
            blanks = 0
        out.append(line)
    if blanks:
        if blanks >= 2:
            hits += 1
        out.append("")
    return "\n".join(out), hits


def _collapse_spaces(text: str) -> tuple[str, int]:
    hits = 0

    def repl(m: re.Match) -> str:
        nonlocal hits
        if m.group(0) == " ":
            return " "
        hits += 1
        return " "

    return _SPACE_RUN_RE.sub(repl, text), hits


def _trim(text: str) -> tuple[str, int]:
    new = "\n".join(line.strip() for line in text.split("\n")).strip()
    return new, int(new != text)


_RULES = {
    "strip_invisible": _strip_invisible,
    "join_lines": _join_lines,
    "collapse_punct_runs": _collapse_punct_runs,
    "remove_dash_runs": _remove_dash_runs,
    "collapse_blank_lines": _collapse_blank_lines,
    "collapse_spaces": _collapse_spaces,
    "trim": _trim,
}


def clean_text(raw: str, *, disabled: Collection[str] = ()) -> tuple[str, CleanReport]:
    """Clean *raw* and report what changed.

    Never removes printable letters or digits; the output introduces no
    character that was absent from the input except U+0020 and U+000A.
    """
    unknown = set(disabled) - set(RULE_NAMES)
    if unknown:
        raise ValueError(f"unknown cleaning rules: {sorted(unknown)}")

    report = CleanReport()
    text = raw
    while True:
        before = text
        for name in RULE_NAMES:
            if name in disabled:
                continue
            text, hits = _RULES[name](text)
            report._bump(name, hits)
            if name == "join_lines":
                report.lines_joined += hits
            elif name in ("collapse_punct_runs", "collapse_blank_lines", "collapse_spaces"):
                report.runs_collapsed += hits
        if text == before:
            break

    report.chars_removed = len(raw) - len(text)
    return text, report
