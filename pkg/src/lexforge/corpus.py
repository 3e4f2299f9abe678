"""Load a directory tree of raw law text files into LawDocument values."""

from __future__ import annotations

import dataclasses
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .arabic import DIGIT_CLASS, parse_int
from .errors import CorpusError, SchemaError

logger = logging.getLogger(__name__)

STATUSES = ("applicable", "repealed", "amendment", "unknown")

TEXT_EXTENSIONS = {".txt"}

# "رقم (4)" / "رقم 4": the law-number phrase that marks a title line.
_LAW_NUMBER_RE = re.compile(rf"رقم\s*\(?\s*({DIGIT_CLASS}+)\s*\)?")
# "لسنة 2005": the year phrase.
_LAW_YEAR_RE = re.compile(rf"لسنة\s*({DIGIT_CLASS}{{4}})")


@dataclass(frozen=True)
class LawDocument:
    """One source law file: metadata plus its raw (and, once cleaned) text."""

    id: str
    title: str = ""
    law_number: int | None = None
    year: int | None = None
    status: str = "unknown"
    raw_text: str = ""
    source_path: str = ""
    cleaned_text: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")


def _read_manifest(path: Path) -> dict[str, dict]:
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise SchemaError("manifest", "expected a JSON array of objects")
    by_id: dict[str, dict] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry:
            raise SchemaError("manifest.id", "every manifest entry needs an 'id'")
        status = entry.get("status")
        if status is not None and status not in STATUSES:
            raise SchemaError("manifest.status", f"invalid status {status!r}")
        by_id[entry["id"]] = entry
    return by_id


def document_id(relative: Path) -> str:
    """Stable id: relative path with '/' separators and the extension dropped."""
    return relative.with_suffix("").as_posix()


def load_corpus(root_dir: str | Path, manifest: str | Path | None = None) -> list[LawDocument]:
    """Load every .txt file under *root_dir* (recursive), ordered by relative path.

    When *manifest* is given, title/law_number/year/status are joined by id.
    Raises CorpusError for a missing root, an unreadable file, or invalid
    UTF-8 (the message names the path, and the byte offset for UTF-8 errors).
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} does not exist or is not a directory")

    meta = _read_manifest(Path(manifest)) if manifest is not None else {}

    files = sorted(
        (p for p in root.rglob("*") if p.is_file()),
        key=lambda p: p.relative_to(root).as_posix(),
    )

    docs: list[LawDocument] = []
    seen: set[str] = set()
    for path in files:
        relative = path.relative_to(root)
        if path.suffix.lower() not in TEXT_EXTENSIONS:
            logger.warning("skipping non-text file %s", path)
            continue
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise CorpusError(f"cannot read {path}: {exc}") from exc
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(
                f"invalid UTF-8 in {path} at byte offset {exc.start}"
            ) from exc
        if not text:
            logger.warning("skipping empty file %s", path)
            continue

        doc_id = document_id(relative)
        if doc_id in seen:
            raise CorpusError(f"duplicate document id {doc_id!r} from {path}")
        seen.add(doc_id)

        entry = meta.get(doc_id, {})
        docs.append(
            LawDocument(
                id=doc_id,
                title=entry.get("title", ""),
                law_number=entry.get("law_number"),
                year=entry.get("year"),
                status=entry.get("status", "unknown"),
                raw_text=text,
                source_path=str(path),
            )
        )

    if not docs:
        logger.warning("no text files found under %s", root)
    return docs


def infer_metadata(doc: LawDocument) -> LawDocument:
    """Best-effort fill of title / law_number / year from the first text line.

    The first non-empty line becomes the title when it carries a law-number
    phrase; number and year come from the same line. Fields that do not
    match are left as they were; raw_text and status are never touched.
    """
    first_line = next((ln.strip() for ln in doc.raw_text.splitlines() if ln.strip()), "")
    if not first_line:
        return doc

    updates: dict[str, object] = {}
    number_match = _LAW_NUMBER_RE.search(first_line)
    if number_match:
        if not doc.title:
            updates["title"] = first_line
        if doc.law_number is None:
            updates["law_number"] = parse_int(number_match.group(1))
    year_match = _LAW_YEAR_RE.search(first_line)
    if year_match and doc.year is None:
        updates["year"] = parse_int(year_match.group(1))

    if not updates:
        return doc
    return dataclasses.replace(doc, **updates)
