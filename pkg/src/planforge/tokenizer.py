"""Total lexer for Python-style source code.

Produces a flat token stream with byte spans. The lexer never raises on
arbitrary input: anything it cannot classify becomes a single-byte delimiter
token, and unterminated strings run to end of input. Comment markers live in
one place so callers (line classification, segmentation) agree on what a
comment is; markers inside string literals are never comments because strings
are lexed as single tokens.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass
from enum import Enum


class TokenKind(str, Enum):
    IDENTIFIER = "identifier"
    NUMBER = "number_literal"
    STRING = "string_literal"
    OPERATOR = "operator"
    DELIMITER = "delimiter"
    KEYWORD = "keyword"
    COMMENT = "comment"
    NEWLINE = "newline"
    INDENT = "indent_marker"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    start: int  # byte offset, inclusive
    end: int  # byte offset, exclusive


DEFAULT_COMMENT_MARKERS = ("#",)

KEYWORDS = frozenset(keyword.kwlist)

# Longest first so lexing is longest-match.
_OPERATORS = sorted(
    [
        "**=", "//=", ">>=", "<<=", "...",
        "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=",
        "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=",
        "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "=",
    ],
    key=len,
    reverse=True,
)

_DELIMITERS = frozenset("()[]{},:;.")

_NUMBER_RE = re.compile(
    r"""
    0[xX][0-9a-fA-F](?:_?[0-9a-fA-F])*[jJ]?
    | 0[bB][01](?:_?[01])*
    | 0[oO][0-7](?:_?[0-7])*
    | (?:\d(?:_?\d)*)?\.\d(?:_?\d)*(?:[eE][+-]?\d(?:_?\d)*)?[jJ]?
    | \d(?:_?\d)*\.(?:[eE][+-]?\d(?:_?\d)*)?[jJ]?
    | \d(?:_?\d)*(?:[eE][+-]?\d(?:_?\d)*)?[jJ]?
    """,
    re.VERBOSE,
)

_STRING_START_RE = re.compile(
    r"(?:[rR][bBfF]?|[bBfF][rR]?|[uU])?('''|\"\"\"|'|\")"
)


def _ident_start(ch: str) -> bool:
    return ch == "_" or ch.isalpha() or ord(ch) > 127


def _ident_continue(ch: str) -> bool:
    return ch == "_" or ch.isalnum() or ord(ch) > 127


def _scan_string(source: str, pos: int, quote: str) -> int:
    """Return the char offset just past the string starting at ``pos``.

    ``pos`` points at the first character after the opening quote. Backslash
    always escapes the next character for scanning purposes (this mirrors how
    the reference grammar decides where a raw string ends). Unterminated
    strings consume the rest of the input.
    """
    n = len(source)
    i = pos
    triple = len(quote) == 3
    while i < n:
        ch = source[i]
        if ch == "\\":
            i += 2
            continue
        if source.startswith(quote, i):
            return i + len(quote)
        if not triple and ch == "\n":
            # Single-quoted strings do not span lines; treat as unterminated.
            return i
        i += 1
    return n


def tokenize(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> list[Token]:
    """Lex ``source`` into tokens with byte spans. Total: never raises."""
    markers = sorted(comment_markers, key=len, reverse=True)
    raw: list[tuple[TokenKind, int, int]] = []  # (kind, char_start, char_end)
    n = len(source)
    i = 0
    at_line_start = True

    while i < n:
        ch = source[i]

        if at_line_start and ch in " \t":
            j = i
            while j < n and source[j] in " \t":
                j += 1
            # Whitespace-only lines carry no indent token.
            if j < n and source[j] != "\n":
                raw.append((TokenKind.INDENT, i, j))
            i = j
            at_line_start = False
            continue
        at_line_start = False

        if ch == "\n":
            raw.append((TokenKind.NEWLINE, i, i + 1))
            i += 1
            at_line_start = True
            continue

        if ch in " \t\r\f\v":
            i += 1
            continue

        marker = next((m for m in markers if source.startswith(m, i)), None)
        if marker is not None:
            j = source.find("\n", i)
            j = n if j == -1 else j
            raw.append((TokenKind.COMMENT, i, j))
            i = j
            continue

        m = _STRING_START_RE.match(source, i)
        if m is not None:
            end = _scan_string(source, m.end(), m.group(1))
            raw.append((TokenKind.STRING, i, end))
            i = end
            continue

        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER_RE.match(source, i)
            if m is not None and m.end() > i:
                raw.append((TokenKind.NUMBER, i, m.end()))
                i = m.end()
                continue

        if _ident_start(ch):
            j = i + 1
            while j < n and _ident_continue(source[j]):
                j += 1
            word = source[i:j]
            kind = TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENTIFIER
            raw.append((kind, i, j))
            i = j
            continue

        op = next((o for o in _OPERATORS if source.startswith(o, i)), None)
        if op is not None:
            raw.append((TokenKind.OPERATOR, i, i + len(op)))
            i += len(op)
            continue

        # Known delimiters and any unclassifiable byte both land here.
        raw.append((TokenKind.DELIMITER, i, i + 1))
        i += 1

    return _to_byte_tokens(source, raw)


def _to_byte_tokens(source: str, raw: list[tuple[TokenKind, int, int]]) -> list[Token]:
    if source.isascii():
        return [Token(k, source[s:e], s, e) for k, s, e in raw]
    offsets = [0] * (len(source) + 1)
    total = 0
    for idx, ch in enumerate(source):
        offsets[idx] = total
        total += len(ch.encode("utf-8"))
    offsets[len(source)] = total
    return [Token(k, source[s:e], offsets[s], offsets[e]) for k, s, e in raw]


def iter_lines(source: str):
    """Yield (start, end) char offsets per line, end including the newline."""
    start = 0
    n = len(source)
    while start < n:
        nl = source.find("\n", start)
        if nl == -1:
            yield start, n
            return
        yield start, nl + 1
        start = nl + 1


def classify_lines(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> list[str]:
    """Classify each line of ``source`` as 'blank', 'comment', or 'code'.

    A line is a comment line iff its first non-whitespace character starts a
    comment token; a leading marker inside a multi-line string therefore
    classifies as code.
    """
    tokens = tokenize(source, comment_markers)
    comment_starts = _comment_char_starts(source, tokens)
    kinds = []
    for start, end in iter_lines(source):
        line = source[start:end]
        stripped = line.strip()
        if not stripped:
            kinds.append("blank")
            continue
        first = start + (len(line) - len(line.lstrip()))
        kinds.append("comment" if first in comment_starts else "code")
    return kinds


def _comment_char_starts(source: str, tokens: list[Token]) -> set[int]:
    """Char offsets where comment tokens begin (token spans are bytes)."""
    if source.isascii():
        return {t.start for t in tokens if t.kind is TokenKind.COMMENT}
    starts = set()
    byte_to_char = {}
    total = 0
    for idx, ch in enumerate(source):
        byte_to_char[total] = idx
        total += len(ch.encode("utf-8"))
    byte_to_char[total] = len(source)
    for t in tokens:
        if t.kind is TokenKind.COMMENT:
            starts.add(byte_to_char[t.start])
    return starts
