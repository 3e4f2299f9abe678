import json
import logging
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexforge.errors import ParseError
from lexforge.segment import Article
from lexforge.synth import PromptSpec, QAPair, build_prompt, parse_llm_output, validate_qa

AMENDMENT_TEXT = (
    "Amendment to Article (11): Employees in the second category may be promoted to "
    "the first category, and employees in the first category may be promoted to the "
    "upper category upon meeting the conditions outlined in the law"
)

TABLE_SPEC = PromptSpec(
    law_title="Law No. (4) of 2005 amending Civil Service Law No. (4) of 1998",
    article_number=11,
    legal_text=AMENDMENT_TEXT,
    num_questions=1,
)


# -- prompt -------------------------------------------------------------------


def test_first_line_carries_question_count():
    spec = PromptSpec("قانون العمل", 42, "نص المادة", 2)
    prompt = build_prompt(spec)
    first = prompt.splitlines()[0]
    assert "2" in first
    assert first.endswith("from the following legal text.")


def test_instruction_block_has_exactly_four_numbered_items():
    prompt = build_prompt(TABLE_SPEC)
    numbered = [ln for ln in prompt.splitlines() if re.match(r"^\d+\. ", ln)]
    assert len(numbered) == 4
    assert numbered[0].startswith("1. Both the questions and answers must be in Arabic")
    assert "must begin with the article number and law" in numbered[3]


def test_prompt_contains_one_shot_example():
    prompt = build_prompt(TABLE_SPEC)
    assert "Generated question and answer:" in prompt
    assert '"question": "If I have an employee in the second category' in prompt


def test_prompt_deterministic():
    assert build_prompt(TABLE_SPEC) == build_prompt(TABLE_SPEC)


def test_zero_questions_rejected():
    with pytest.raises(ValueError):
        PromptSpec("قانون", 1, "نص", 0)


def test_empty_legal_text_rejected():
    with pytest.raises(ValueError):
        PromptSpec("قانون", 1, "   ", 1)


simple_field = st.text(alphabet=st.sampled_from(list("abcdefنصوص123")), min_size=1, max_size=12)


@settings(max_examples=150, deadline=None)
@given(
    st.tuples(simple_field, st.integers(1, 99), simple_field, st.integers(1, 5)),
    st.tuples(simple_field, st.integers(1, 99), simple_field, st.integers(1, 5)),
)
def test_property_prompt_injective(a, b):
    spec_a = PromptSpec(a[0], a[1], a[2], a[3])
    spec_b = PromptSpec(b[0], b[1], b[2], b[3])
    if a != b:
        assert build_prompt(spec_a) != build_prompt(spec_b)


# -- parsing ------------------------------------------------------------------


def test_parse_table_style_single_object():
    raw = (
        '{ "question": "If I have an employee in the second category, can they be '
        'promoted to the first category?", "answer": "Yes, according to Article 2 of '
        'Law No. (4) of 2005, employees may be promoted." }'
    )
    (pair,) = parse_llm_output(raw, 1)
    assert pair["question"].startswith("If I have an employee")


def test_parse_fenced_object():
    raw = '```json\n{"question":"س","answer":"ج"}\n```'
    assert parse_llm_output(raw, 1) == [{"question": "س", "answer": "ج"}]


def test_parse_array_of_objects():
    raw = json.dumps(
        [{"question": "س1", "answer": "ج1"}, {"question": "س2", "answer": "ج2"}],
        ensure_ascii=False,
    )
    pairs = parse_llm_output(raw, 2)
    assert [p["question"] for p in pairs] == ["س1", "س2"]


def test_parse_concatenated_objects_with_prose():
    raw = (
        "إليك الناتج المطلوب:\n"
        '{"question":"س1","answer":"ج1"}\n{"question":"س2","answer":"ج2"}\n'
        "أتمنى أن يفيدك هذا."
    )
    pairs = parse_llm_output(raw, 5)
    assert len(pairs) == 2


def test_parse_caps_at_expected_n():
    raw = json.dumps([{"question": f"س{i}", "answer": f"ج{i}"} for i in range(5)])
    assert len(parse_llm_output(raw, 3)) == 3


def test_parse_rejects_bad_pair_but_returns_others(caplog):
    raw = json.dumps(
        [
            {"question": "س1", "answer": "ج1"},
            {"question": "س2"},
            {"question": "س3", "answer": "ج3"},
        ],
        ensure_ascii=False,
    )
    with caplog.at_level(logging.WARNING):
        pairs = parse_llm_output(raw, 5)
    assert [p["question"] for p in pairs] == ["س1", "س3"]
    assert "pair 1 rejected" in caplog.text


def test_parse_error_carries_snippet():
    with pytest.raises(ParseError) as excinfo:
        parse_llm_output("لا يوجد ناتج", 1)
    assert "لا يوجد ناتج" in str(excinfo.value)


def test_parse_error_snippet_truncated():
    raw = "x" * 500
    with pytest.raises(ParseError) as excinfo:
        parse_llm_output(raw, 1)
    assert len(str(excinfo.value)) < 200


def test_parse_empty_strings_rejected():
    with pytest.raises(ParseError):
        parse_llm_output('{"question": "", "answer": ""}', 1)


pair_text = st.text(
    alphabet=st.sampled_from(list('ابجد نص؟ abc"\\{}[]\n:،')), min_size=1, max_size=40
).filter(lambda s: s.strip())


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(pair_text, pair_text), min_size=1, max_size=6))
def test_property_parse_round_trip(pairs):
    rendered = json.dumps(
        [{"question": q, "answer": a} for q, a in pairs], ensure_ascii=False
    )
    parsed = parse_llm_output(rendered, len(pairs))
    assert [(p["question"], p["answer"]) for p in parsed] == pairs


# -- validation ---------------------------------------------------------------


def _pair(question, answer, article_number=2):
    return QAPair(
        question=question,
        answer=answer,
        law_id="law4",
        article_number=article_number,
        provider="test",
        model_name="m",
        created_at="2026-01-01T00:00:00+00:00",
    )


def _article(number=2):
    return Article(law_id="law4", article_number=number, heading_text="", body="نص")


def test_validate_table_style_answer_passes():
    # Arabic rendering of the worked example: answer opens with the Article-2
    # citation of the amending law.
    pair = _pair(
        "هل يمكن ترقية موظف من الفئة الثانية إلى الفئة الأولى؟",
        "نعم، وفقاً للمادة 2 من قانون رقم (4) لسنة 2005 المعدل لقانون الخدمة "
        "المدنية رقم (4) لسنة 1998، يجوز ترقية موظفي الفئة الثانية إلى الفئة الأولى.",
    )
    report = validate_qa(pair, _article(2))
    assert report.checks["article_citation"] is True
    assert report.checks["arabic_content"] is True
    assert report.passed is True


def test_validate_missing_citation_fails():
    report = validate_qa(_pair("سؤال قانوني؟", "نعم."), _article(11))
    assert report.checks["article_citation"] is False
    assert report.passed is False


def test_validate_wrong_article_number_fails():
    report = validate_qa(_pair("سؤال؟", "وفقاً للمادة 3 من القانون، نعم."), _article(2))
    assert report.checks["article_citation"] is False


def test_validate_citation_beyond_120_chars_ignored():
    filler = "كلام " * 30
    report = validate_qa(_pair("سؤال؟", filler + "المادة 2"), _article(2))
    assert report.checks["article_citation"] is False


def test_validate_english_answer_fails_arabic_check():
    report = validate_qa(
        _pair("سؤال قانوني مفصل؟", "Yes, according to Article 2 you may do that."),
        _article(2),
    )
    assert report.checks["arabic_content"] is False
    assert report.passed is False


def test_validate_arabic_indic_citation_digits():
    report = validate_qa(_pair("سؤال؟", "وفقاً للمادة ٢ من القانون، نعم يجوز."), _article(2))
    assert report.checks["article_citation"] is True
