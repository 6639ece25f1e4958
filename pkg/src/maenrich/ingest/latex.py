"""Just enough LaTeX decoding for names and titles in BibTeX exports."""

import re
import unicodedata

_ACCENTS = {
    '"': "̈",
    "'": "́",
    "`": "̀",
    "^": "̂",
    "~": "̃",
    "=": "̄",
    ".": "̇",
    "c": "̧",
    "v": "̌",
    "u": "̆",
    "H": "̋",
    "r": "̊",
}

_SYMBOL_ACCENT = re.compile(r"\\([\"'`^~=.])\s*(?:\{\s*(?:\\i|([A-Za-z]))\s*\}|(?:\\i|([A-Za-z])))")
_LETTER_ACCENT = re.compile(r"\\([cvuHr])(?:\s*\{\s*([A-Za-z])\s*\}|\s+([A-Za-z]))")
_NAMED = {
    r"\ss": "ß",
    r"\o": "ø",
    r"\O": "Ø",
    r"\ae": "æ",
    r"\AE": "Æ",
    r"\aa": "å",
    r"\AA": "Å",
    r"\l": "ł",
    r"\L": "Ł",
    r"\i": "ı",
}
_NAMED_RE = re.compile(r"\\(ss|o|O|ae|AE|aa|AA|l|L|i)(?![A-Za-z])\s*")
_ESCAPED = re.compile(r"\\([&%$#_{}])")
_FONT = re.compile(r"\\(?:it|bf|em|sl|sc|rm|tt|textit|textbf|textsc|textrm|emph|mathrm|mathit)(?![A-Za-z])\s*")


def _combine(accent: str, letter: str | None) -> str:
    letter = letter or "i"
    return unicodedata.normalize("NFC", letter + _ACCENTS[accent])


def decode_latex(text: str) -> str:
    text = _SYMBOL_ACCENT.sub(lambda m: _combine(m.group(1), m.group(2) or m.group(3)), text)
    text = _LETTER_ACCENT.sub(lambda m: _combine(m.group(1), m.group(2) or m.group(3)), text)
    text = _NAMED_RE.sub(lambda m: _NAMED["\\" + m.group(1)], text)
    text = _FONT.sub("", text)
    text = _ESCAPED.sub(lambda m: "\x00" + m.group(1) + "\x00", text)
    text = text.replace("{", "").replace("}", "")
    text = text.replace("\x00", "")
    text = text.replace("~", " ")
    return " ".join(text.split())
