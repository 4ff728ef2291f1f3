"""Reference tokenizer used once to write golden.jsonl.

Lowercase, delete every code point in the Unicode P* and S* categories,
split on whitespace, and emit CJK, kana and hangul code points as tokens of
their own. Inputs stay within characters whose properties have been stable
across recent Unicode versions.
"""

import json
import unicodedata

CJK = [
    (0x3040, 0x309F), (0x30A0, 0x30FF), (0x31F0, 0x31FF), (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF), (0xF900, 0xFAFF), (0xFF66, 0xFF9F), (0x1100, 0x11FF),
    (0x3130, 0x318F), (0xAC00, 0xD7AF), (0x20000, 0x2A6DF),
]


def is_cjk(ch):
    c = ord(ch)
    return any(lo <= c <= hi for lo, hi in CJK)


def tokenize(text):
    tokens, cur = [], ""
    for ch in text:
        if ch.isspace():
            if cur:
                tokens.append(cur)
            cur = ""
        elif unicodedata.category(ch)[0] in "PS":
            continue
        elif is_cjk(ch):
            if cur:
                tokens.append(cur)
            cur = ""
            tokens.append(ch.lower())
        else:
            cur += ch.lower()
    if cur:
        tokens.append(cur)
    return tokens


INPUTS = [
    "",
    "   ",
    "Hello, World!",
    "A--B  c",
    "don't stop",
    "state-of-the-art IR",
    "e-mail: someone@example.org",
    "C++ and C# (2019)",
    "50% off: $20 → €18",
    "«Guillemets» and “quotes”",
    "tab\tseparated\nlines\r\nhere",
    "non breaking space",
    "em space and　ideographic space",
    "Größe Straße ÄÖÜ",
    "ΑΘΗΝΑ Αθήνα",
    "Москва, Россия.",
    "naïve café résumé",
    "東京タワーは高い。",
    "日本語abc、です。",
    "한국어 텍스트입니다",
    "ｶﾀｶﾅ halfwidth",
    "mixed漢字and english",
    "math: x² + y² = z²",
    "a_b snake_case",
    "¿Qué? ¡Sí!",
    "1,000.50 units",
    "under_score-dash/slash\\back",
    "emoji 😀 here",
    "İstanbul",
    "ﬁne ligature",
]

with open("golden.jsonl", "w", encoding="utf-8", newline="\n") as f:
    for text in INPUTS:
        f.write(json.dumps({"text": text, "tokens": tokenize(text)}, ensure_ascii=False) + "\n")
