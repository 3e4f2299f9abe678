"""Chat-record assembly, dedup, splitting, JSONL export, and statistics."""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError
from .segment import Article
from .synth import QAPair

TokenCounter = Callable[[str], int]


@dataclass(frozen=True)
class ChatRecord:
    """One training example: system (instructions + article), user, assistant."""

    system: str
    user: str
    assistant: str
    law_id: str
    article_number: int


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0
    group_by_law: bool = False

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0 < f < 1 for f in fracs):
            raise ValueError("split fractions must lie in (0, 1)")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(fracs)}, expected 1")


@dataclass
class DatasetStats:
    record_count: int
    total_words: int
    vocab_size: int
    token_min: int
    token_p25: int
    token_median: int
    token_p75: int
    token_p90: int
    token_max: int
    token_mean: float
    histogram: list[tuple[int, int]] = field(default_factory=list)


def assemble_record(article: Article, pair: QAPair, preamble: str = "") -> ChatRecord:
    """Fold an article and a validated pair into a three-message record."""
    if not article.body.strip():
        raise ValueError(f"article {article.article_number} of {article.law_id} has no body")
    system = f"{preamble}\n\n{article.body}" if preamble else article.body
    return ChatRecord(
        system=system,
        user=pair.question,
        assistant=pair.answer,
        law_id=article.law_id,
        article_number=article.article_number,
    )


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def dedup_records(records: list[ChatRecord]) -> list[ChatRecord]:
    """Drop records with the same whitespace-normalized (user, assistant);
    first occurrence wins, order preserved."""
    seen: set[tuple[str, str]] = set()
    out: list[ChatRecord] = []
    for record in records:
        key = (_normalize_ws(record.user), _normalize_ws(record.assistant))
        if key in seen:
            continue
        seen.add(key)
        out.append(record)
    return out


def split_sizes(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Floor each share, then hand out the remainder train-first."""
    floors = [math.floor(n * f) for f in fractions]
    remainder = n - sum(floors)
    for i in range(remainder):
        floors[i % 3] += 1
    return tuple(floors)  # type: ignore[return-value]


def _split_grouped(
    shuffled: list[ChatRecord], spec: SplitSpec
) -> tuple[list[ChatRecord], list[ChatRecord], list[ChatRecord]]:
    groups: dict[str, list[ChatRecord]] = {}
    for record in shuffled:
        groups.setdefault(record.law_id, []).append(record)
    # Largest group first; the seeded shuffle already randomized tie order.
    ordered = sorted(groups.values(), key=len, reverse=True)
    n = len(shuffled)
    targets = [n * f for f in (spec.train_frac, spec.val_frac, spec.test_frac)]
    buckets: list[list[ChatRecord]] = [[], [], []]
    for group in ordered:
        deficits = [targets[i] - len(buckets[i]) for i in range(3)]
        buckets[deficits.index(max(deficits))].extend(group)
    return buckets[0], buckets[1], buckets[2]


def split_dataset(
    records: list[ChatRecord], spec: SplitSpec
) -> tuple[list[ChatRecord], list[ChatRecord], list[ChatRecord]]:
    """Deterministic seeded partition into (train, val, test).

    With group_by_law, whole laws go to a single split via greedy
    largest-first packing toward the target fractions; otherwise sizes
    follow the floor-then-remainder rule exactly.
    """
    if not records:
        raise ValueError("cannot split an empty record list")
    shuffled = list(records)
    random.Random(spec.seed).shuffle(shuffled)
    if spec.group_by_law:
        return _split_grouped(shuffled, spec)
    n_train, n_val, _ = split_sizes(
        len(shuffled), (spec.train_frac, spec.val_frac, spec.test_frac)
    )
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )


def export_jsonl(records: list[ChatRecord], path: str | Path) -> None:
    """Write records as chat-format JSONL (one object per line, LF, UTF-8)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            obj = {
                "messages": [
                    {"role": "system", "content": record.system},
                    {"role": "user", "content": record.user},
                    {"role": "assistant", "content": record.assistant},
                ],
                "meta": {"law_id": record.law_id, "article": record.article_number},
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def import_jsonl(path: str | Path) -> list[ChatRecord]:
    """Read chat-format JSONL back into records; inverse of export_jsonl."""
    records: list[ChatRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"line {lineno}"
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise SchemaError(where, f"not valid JSON: {exc}") from exc
            messages = obj.get("messages")
            if not isinstance(messages, list) or len(messages) != 3:
                raise SchemaError(f"{where}.messages", "expected exactly 3 messages")
            contents = {}
            for i, role in enumerate(("system", "user", "assistant")):
                msg = messages[i]
                if not isinstance(msg, dict) or msg.get("role") != role:
                    raise SchemaError(f"{where}.messages[{i}].role", f"expected {role!r}")
                if not isinstance(msg.get("content"), str):
                    raise SchemaError(f"{where}.messages[{i}].content", "must be a string")
                contents[role] = msg["content"]
            meta = obj.get("meta", {})
            if not isinstance(meta, dict):
                raise SchemaError(f"{where}.meta", "must be an object")
            records.append(
                ChatRecord(
                    system=contents["system"],
                    user=contents["user"],
                    assistant=contents["assistant"],
                    law_id=meta.get("law_id", ""),
                    article_number=meta.get("article", 0),
                )
            )
    return records


def whitespace_token_count(text: str) -> int:
    """Default token counter: whitespace-delimited pieces."""
    return len(text.split())


def tokenizer_file_counter(path: str | Path) -> TokenCounter:
    """Token counter backed by a tokenizers JSON file (model-faithful counts)."""
    from tokenizers import Tokenizer  # heavy import, deferred

    tok = Tokenizer.from_file(str(path))

    def count(text: str) -> int:
        return len(tok.encode(text).ids)

    return count


def nearest_rank(sorted_values: list[int], p: float) -> int:
    """Smallest value with at least ceil(p*n) observations at or below it."""
    n = len(sorted_values)
    rank = max(1, math.ceil(p * n))
    return sorted_values[rank - 1]


def compute_stats(
    records: list[ChatRecord],
    token_counter: TokenCounter = whitespace_token_count,
    *,
    bucket_width: int = 50,
) -> DatasetStats:
    """Word/vocabulary counts plus the token-length distribution.

    Record length = counter(system) + counter(user) + counter(assistant).
    Quantiles use the nearest-rank convention; the histogram uses contiguous
    buckets of *bucket_width* tokens and its counts sum to the record count.
    """
    if not records:
        raise ValueError("cannot compute stats for an empty record list")
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")

    total_words = 0
    vocab: set[str] = set()
    lengths: list[int] = []
    for record in records:
        for part in (record.system, record.user, record.assistant):
            tokens = part.split()
            total_words += len(tokens)
            vocab.update(tokens)
        lengths.append(
            token_counter(record.system)
            + token_counter(record.user)
            + token_counter(record.assistant)
        )

    lengths.sort()
    bucket_counts = Counter((length // bucket_width) * bucket_width for length in lengths)
    lo = min(bucket_counts)
    hi = max(bucket_counts)
    histogram = [
        (start, bucket_counts.get(start, 0)) for start in range(lo, hi + 1, bucket_width)
    ]

    return DatasetStats(
        record_count=len(records),
        total_words=total_words,
        vocab_size=len(vocab),
        token_min=lengths[0],
        token_p25=nearest_rank(lengths, 0.25),
        token_median=nearest_rank(lengths, 0.50),
        token_p75=nearest_rank(lengths, 0.75),
        token_p90=nearest_rank(lengths, 0.90),
        token_max=lengths[-1],
        token_mean=sum(lengths) / len(lengths),
        histogram=histogram,
    )


def emit_plot_data(stats: DatasetStats, out_dir: str | Path) -> None:
    """Write histogram.csv and boxplot.json for external plotting."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "histogram.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("bucket_start,count\n")
        for start, count in stats.histogram:
            fh.write(f"{start},{count}\n")
    boxplot = {
        "min": stats.token_min,
        "p25": stats.token_p25,
        "median": stats.token_median,
        "p75": stats.token_p75,
        "p90": stats.token_p90,
        "max": stats.token_max,
    }
    (out / "boxplot.json").write_text(
        json.dumps(boxplot, indent=2) + "\n", encoding="utf-8"
    )
