"""Category-based evaluation of a chat endpoint, with deterministic checks."""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .arabic import DIGIT_CLASS, extract_first_number
from .errors import LexforgeError, SchemaError
from .synth import ChatClient, ProviderConfig

logger = logging.getLogger(__name__)

CATEGORIES = (
    "yes_no",
    "narrative",
    "list_based",
    "conditional",
    "calculation",
    "comparative",
)

# Checks applied per category; every listed name appears in the outcome map.
CATEGORY_CHECKS: dict[str, tuple[str, ...]] = {
    "yes_no": ("polarity", "repetition"),
    "narrative": ("citation", "keyword_coverage"),
    "comparative": ("citation", "keyword_coverage"),
    "conditional": ("citation", "keyword_coverage"),
    "list_based": ("list_format",),
    "calculation": ("numeric_match",),
}

_CITATION_RE = re.compile(rf"مادة\s*\(?\s*{DIGIT_CLASS}+")
_LIST_LINE_RE = re.compile(rf"^\s*(?:{DIGIT_CLASS}|-|•)")
_SENTENCE_SPLIT_RE = re.compile(r"[.؟!؛\n]+")


@dataclass(frozen=True)
class GoldAnswer:
    """Expected answer facets; only the ones a category needs are set."""

    polarity: str | None = None
    number: float | None = None
    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        if self.polarity is not None and self.polarity not in ("yes", "no"):
            raise ValueError("polarity must be 'yes' or 'no'")


@dataclass(frozen=True)
class EvalCase:
    id: str
    category: str
    question: str
    context_article: str | None = None
    gold: GoldAnswer | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.category == "calculation" and (self.gold is None or self.gold.number is None):
            raise ValueError("calculation cases need gold.number")
        if self.category == "yes_no" and (self.gold is None or self.gold.polarity is None):
            raise ValueError("yes_no cases need gold.polarity")


@dataclass
class EvalOutcome:
    case_id: str
    category: str
    response: str
    checks: dict[str, str] = field(default_factory=dict)
    latency_ms: int = 0


def _check_polarity(response: str, gold: GoldAnswer | None) -> str:
    if gold is None or gold.polarity is None:
        return "n-a"
    token = "نعم" if gold.polarity == "yes" else "لا"
    return "pass" if token in response[:10] else "fail"


def _check_repetition(response: str) -> str:
    seen: set[str] = set()
    for sentence in _SENTENCE_SPLIT_RE.split(response):
        normalized = " ".join(sentence.split())
        if len(normalized.split()) < 5:
            continue
        if normalized in seen:
            return "fail"
        seen.add(normalized)
    return "pass"


def _check_citation(response: str) -> str:
    return "pass" if _CITATION_RE.search(response) else "fail"


def _check_keywords(response: str, gold: GoldAnswer | None) -> str:
    if gold is None or not gold.keywords:
        return "n-a"
    normalized = " ".join(response.split())
    return "pass" if all(kw in normalized for kw in gold.keywords) else "fail"


def _check_list_format(response: str) -> str:
    marked = sum(1 for line in response.split("\n") if _LIST_LINE_RE.match(line))
    return "pass" if marked >= 2 else "fail"


def _check_numeric_match(response: str, gold: GoldAnswer | None) -> str:
    if gold is None or gold.number is None:
        return "n-a"
    value = extract_first_number(response)
    if value is None:
        return "fail"
    if gold.number == 0:
        return "pass" if value == 0 else "fail"
    return "pass" if abs(value - gold.number) <= 0.005 * abs(gold.number) else "fail"


def apply_category_checks(
    category: str, response: str, gold: GoldAnswer | None = None
) -> dict[str, str]:
    """Run the category's checks; pure and deterministic."""
    if category not in CATEGORY_CHECKS:
        raise ValueError(f"unknown category {category!r}")
    results: dict[str, str] = {}
    for name in CATEGORY_CHECKS[category]:
        if name == "polarity":
            results[name] = _check_polarity(response, gold)
        elif name == "repetition":
            results[name] = _check_repetition(response)
        elif name == "citation":
            results[name] = _check_citation(response)
        elif name == "keyword_coverage":
            results[name] = _check_keywords(response, gold)
        elif name == "list_format":
            results[name] = _check_list_format(response)
        elif name == "numeric_match":
            results[name] = _check_numeric_match(response, gold)
    return results


def resignation_entitlement(monthly_salary: float, years_worked: float) -> float:
    """Entitlement on resignation: a third of the annual salary per year worked.

    Only defined for tenure under five years; anything else is out of the
    rule's domain and raises.
    """
    if monthly_salary < 0:
        raise ValueError("monthly_salary must be >= 0")
    if years_worked < 0:
        raise ValueError("years_worked must be >= 0")
    if years_worked >= 5:
        raise ValueError("out of domain: rule only covers tenure under five years")
    return monthly_salary * 12 / 3 * years_worked


def run_eval(
    cases: list[EvalCase],
    endpoint: ProviderConfig,
    system_preamble: str = "",
    *,
    client: ChatClient | None = None,
    cache_dir: str | Path | None = None,
) -> list[EvalOutcome]:
    """Ask the endpoint every case and grade the responses.

    Transport failures are isolated per case: the outcome records all of
    the category's checks as "n-a" and the run continues.
    """
    if client is None:
        client = ChatClient(endpoint, cache_dir)
    outcomes: list[EvalOutcome] = []
    for case in cases:
        system = system_preamble
        if case.context_article:
            system = f"{system}\n\n{case.context_article}" if system else case.context_article
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": case.question})

        start = time.perf_counter()
        try:
            response = client.chat(messages)
        except LexforgeError as exc:
            logger.warning("case %s failed: %s", case.id, exc)
            outcomes.append(
                EvalOutcome(
                    case_id=case.id,
                    category=case.category,
                    response="",
                    checks={name: "n-a" for name in CATEGORY_CHECKS[case.category]},
                    latency_ms=int((time.perf_counter() - start) * 1000),
                )
            )
            continue
        outcomes.append(
            EvalOutcome(
                case_id=case.id,
                category=case.category,
                response=response,
                checks=apply_category_checks(case.category, response, case.gold),
                latency_ms=int((time.perf_counter() - start) * 1000),
            )
        )
    return outcomes


def read_eval_cases(path: str | Path) -> list[EvalCase]:
    """Load eval cases from a JSON array; schema errors name the bad field."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SchemaError("<root>", f"not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaError("<root>", "expected a JSON array of cases")

    cases: list[EvalCase] = []
    for i, item in enumerate(data):
        where = f"cases[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(where, "expected an object")
        for key in ("id", "category", "question"):
            if not isinstance(item.get(key), str) or not item[key]:
                raise SchemaError(f"{where}.{key}", "must be a non-empty string")
        gold = None
        if "gold" in item:
            raw_gold = item["gold"]
            if not isinstance(raw_gold, dict):
                raise SchemaError(f"{where}.gold", "must be an object")
            keywords = raw_gold.get("keywords", [])
            if not isinstance(keywords, list) or any(not isinstance(k, str) for k in keywords):
                raise SchemaError(f"{where}.gold.keywords", "must be an array of strings")
            number = raw_gold.get("number")
            if number is not None and not isinstance(number, (int, float)):
                raise SchemaError(f"{where}.gold.number", "must be a number")
            try:
                gold = GoldAnswer(
                    polarity=raw_gold.get("polarity"),
                    number=float(number) if number is not None else None,
                    keywords=tuple(keywords),
                )
            except ValueError as exc:
                raise SchemaError(f"{where}.gold.polarity", str(exc)) from exc
        try:
            cases.append(
                EvalCase(
                    id=item["id"],
                    category=item["category"],
                    question=item["question"],
                    context_article=item.get("context_article"),
                    gold=gold,
                )
            )
        except ValueError as exc:
            raise SchemaError(where, str(exc)) from exc
    return cases


def write_eval_report(outcomes: list[EvalOutcome], path: str | Path) -> None:
    """JSON report: per-category pass rates per check plus raw outcomes."""
    categories: dict[str, dict[str, dict]] = {}
    for outcome in outcomes:
        per_check = categories.setdefault(outcome.category, {})
        for check, result in outcome.checks.items():
            cell = per_check.setdefault(check, {"passes": 0, "total": 0})
            if result == "n-a":
                continue
            cell["total"] += 1
            if result == "pass":
                cell["passes"] += 1
    for per_check in categories.values():
        for cell in per_check.values():
            cell["rate"] = round(cell["passes"] / cell["total"], 4) if cell["total"] else None

    report = {
        "categories": categories,
        "outcomes": [
            {
                "case_id": o.case_id,
                "category": o.category,
                "response": o.response,
                "checks": o.checks,
                "latency_ms": o.latency_ms,
            }
            for o in outcomes
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
