"""Split cleaned law text into numbered articles and (de)serialize law JSON."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .arabic import DIGIT_CLASS, parse_int
from .corpus import LawDocument
from .errors import SchemaError

logger = logging.getLogger(__name__)

# Line-anchored so in-body citations ("وفقاً للمادة 5") never match: only a
# line that *starts* with the article keyword and a number is a header.
HEADER_RE = re.compile(
    rf"^[ \t]*(?:ال)?مادة[ \t]*\(?\s*({DIGIT_CLASS}+)\s*\)?"
)


@dataclass(frozen=True)
class Article:
    """A numbered article; number 0 is reserved for preamble text."""

    law_id: str
    article_number: int
    heading_text: str
    body: str

    def __post_init__(self):
        if self.article_number < 0:
            raise ValueError("article_number must be >= 0")


@dataclass
class LawJson:
    """Structured form of one law: title, id, and its articles in source order."""

    law_title: str
    law_id: str
    articles: list[Article] = field(default_factory=list)


def segment_articles(doc: LawDocument) -> LawJson:
    """Segment a cleaned document into preamble + numbered articles.

    Every non-whitespace character of the input survives in the union of
    headings and bodies. A text without any header yields a single
    preamble article (number 0) and a warning.
    """
    text = doc.cleaned_text or doc.raw_text
    articles: list[Article] = []
    preamble: list[str] = []
    current_number: int | None = None
    current_heading = ""
    current_body: list[str] = []

    def flush() -> None:
        if current_number is None:
            return
        body = "\n".join(current_body).strip()
        if not body:
            logger.warning(
                "article %s of %s has an empty body", current_number, doc.id
            )
        articles.append(
            Article(
                law_id=doc.id,
                article_number=current_number,
                heading_text=current_heading,
                body=body,
            )
        )

    for line in text.split("\n"):
        m = HEADER_RE.match(line)
        if m:
            flush()
            current_number = parse_int(m.group(1))
            current_heading = line.strip()
            current_body = []
        elif current_number is not None:
            current_body.append(line)
        else:
            preamble.append(line)

    flush()

    preamble_text = "\n".join(preamble).strip()
    if preamble_text:
        articles.insert(
            0, Article(law_id=doc.id, article_number=0, heading_text="", body=preamble_text)
        )
    if not any(a.article_number > 0 for a in articles):
        logger.warning("no article headers found in %s", doc.id)
        if not articles:
            articles.append(Article(law_id=doc.id, article_number=0, heading_text="", body=""))

    return LawJson(law_title=doc.title, law_id=doc.id, articles=articles)


def _require(condition: bool, fld: str, message: str) -> None:
    if not condition:
        raise SchemaError(fld, message)


def write_law_json(law: LawJson, path: str | Path) -> None:
    """Serialize to the law JSON schema (UTF-8, no BOM)."""
    payload = {
        "law_title": law.law_title,
        "law_id": law.law_id,
        "articles": [
            {"number": a.article_number, "heading": a.heading_text, "text": a.body}
            for a in law.articles
        ],
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def read_law_json(path: str | Path) -> LawJson:
    """Read and validate a law JSON file; schema errors name the bad field."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SchemaError("<root>", f"not valid JSON: {exc}") from exc

    _require(isinstance(data, dict), "<root>", "expected a JSON object")
    for key in ("law_title", "law_id", "articles"):
        _require(key in data, key, "missing required field")
    _require(isinstance(data["law_title"], str), "law_title", "must be a string")
    _require(isinstance(data["law_id"], str), "law_id", "must be a string")
    _require(isinstance(data["articles"], list), "articles", "must be an array")

    articles: list[Article] = []
    for i, item in enumerate(data["articles"]):
        where = f"articles[{i}]"
        _require(isinstance(item, dict), where, "expected an object")
        for key, kind in (("number", int), ("heading", str), ("text", str)):
            _require(key in item, f"{where}.{key}", "missing required field")
            value = item[key]
            _require(
                isinstance(value, kind) and not isinstance(value, bool),
                f"{where}.{key}",
                f"must be {kind.__name__}",
            )
        _require(item["number"] >= 0, f"{where}.number", "must be >= 0")
        articles.append(
            Article(
                law_id=data["law_id"],
                article_number=item["number"],
                heading_text=item["heading"],
                body=item["text"],
            )
        )
    return LawJson(law_title=data["law_title"], law_id=data["law_id"], articles=articles)
