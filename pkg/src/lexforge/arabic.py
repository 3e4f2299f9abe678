"""Arabic text helpers: digit normalization, letter tests, number extraction."""

from __future__ import annotations

import re
import unicodedata

# Arabic-Indic (U+0660..U+0669) and Extended Arabic-Indic (U+06F0..U+06F9)
# digits map onto ASCII 0-9 positionally.
_DIGIT_MAP = {}
for i in range(10):
    _DIGIT_MAP[chr(0x0660 + i)] = str(i)
    _DIGIT_MAP[chr(0x06F0 + i)] = str(i)
_DIGIT_TRANSLATION = str.maketrans(_DIGIT_MAP)

# Character class matching one digit in any of the supported scripts.
DIGIT_CLASS = r"[0-9٠-٩۰-۹]"

_ARABIC_BLOCKS = (
    (0x0600, 0x06FF),  # Arabic
    (0x0750, 0x077F),  # Arabic Supplement
    (0x08A0, 0x08FF),  # Arabic Extended-A
    (0xFB50, 0xFDFF),  # Presentation Forms-A
    (0xFE70, 0xFEFF),  # Presentation Forms-B
)

_NUMBER_RE = re.compile(
    rf"{DIGIT_CLASS}+(?:[,٬]{DIGIT_CLASS}{{3}})*(?:\.{DIGIT_CLASS}+)?"
)


def normalize_digits(text: str) -> str:
    """Rewrite Arabic-Indic digits as ASCII digits; everything else untouched."""
    return text.translate(_DIGIT_TRANSLATION)


def is_arabic_letter(ch: str) -> bool:
    """True for letters (category L*) inside the Arabic Unicode blocks."""
    if not unicodedata.category(ch).startswith("L"):
        return False
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _ARABIC_BLOCKS)


def arabic_letter_ratio(text: str) -> float:
    """Fraction of the letters in *text* that are Arabic; 0.0 if no letters."""
    letters = [ch for ch in text if unicodedata.category(ch).startswith("L")]
    if not letters:
        return 0.0
    return sum(1 for ch in letters if is_arabic_letter(ch)) / len(letters)


def parse_int(digits: str) -> int:
    """Parse an integer written in ASCII or Arabic-Indic digits."""
    return int(normalize_digits(digits))


def extract_first_number(text: str) -> float | None:
    """First numeral group in *text* as a float, or None.

    Accepts Western and Arabic-Indic digits; thousands separators
    ("," or U+066C) between 3-digit groups are dropped before parsing.
    """
    m = _NUMBER_RE.search(text)
    if m is None:
        return None
    raw = normalize_digits(m.group(0)).replace(",", "").replace("٬", "")
    return float(raw)
