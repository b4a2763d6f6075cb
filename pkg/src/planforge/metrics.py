"""Static complexity metrics over the token stream.

All metrics are token-level rather than AST-level: decision counting and the
operator/operand split are defined directly on token kinds, which keeps every
metric total (they work on any byte sequence) and cheap to oracle-check by
hand. String and comment contents never leak into counts because the lexer
emits them as single tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tokenizer import (
    DEFAULT_COMMENT_MARKERS,
    Token,
    TokenKind,
    classify_lines,
    tokenize,
)

DECISION_KEYWORDS = frozenset({"if", "elif", "while", "for", "except", "and", "or"})
CONTROL_KEYWORDS = frozenset({"if", "for", "while", "except"})
BRANCH_CONTINUATIONS = frozenset({"elif", "else"})
BOOLEAN_OPERATORS = frozenset({"and", "or"})

OPERATOR_KINDS = frozenset({TokenKind.OPERATOR, TokenKind.DELIMITER, TokenKind.KEYWORD})
OPERAND_KINDS = frozenset({TokenKind.IDENTIFIER, TokenKind.NUMBER, TokenKind.STRING})


@dataclass(frozen=True)
class ComplexityRecord:
    loc: int
    cyclomatic: int
    halstead_volume: float
    cognitive: int


def loc(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> int:
    """Non-blank, non-comment-only line count."""
    return sum(1 for kind in classify_lines(source, comment_markers) if kind == "code")


def cyclomatic(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> int:
    tokens = tokenize(source, comment_markers)
    decisions = sum(
        1
        for t in tokens
        if t.kind is TokenKind.KEYWORD and t.text in DECISION_KEYWORDS
    )
    return 1 + decisions


def halstead_volume(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> float:
    tokens = tokenize(source, comment_markers)
    operators: list[str] = []
    operands: list[str] = []
    for t in tokens:
        if t.kind in OPERATOR_KINDS:
            operators.append(t.text)
        elif t.kind in OPERAND_KINDS:
            operands.append(t.text)
    vocabulary = len(set(operators)) + len(set(operands))
    if vocabulary == 0:
        return 0.0
    length = len(operators) + len(operands)
    return length * math.log2(vocabulary)


def cognitive(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> int:
    """Nesting-weighted control-structure count.

    Statement-initial ``if``/``for``/``while``/``except`` score 1 plus the
    number of enclosing control blocks (tracked through indentation);
    ``elif``/``else`` score a flat 1; every boolean operator scores 1. This is
    deliberately an indentation-structural simplification: continuation lines
    that dedent inside brackets close blocks early.
    """
    tokens = tokenize(source, comment_markers)
    score = 0
    open_blocks: list[int] = []  # indent column of each open control statement

    for indent, first in _statement_heads(tokens):
        while open_blocks and open_blocks[-1] >= indent:
            open_blocks.pop()
        if first.kind is not TokenKind.KEYWORD:
            continue
        if first.text in CONTROL_KEYWORDS:
            score += 1 + len(open_blocks)
            open_blocks.append(indent)
        elif first.text in BRANCH_CONTINUATIONS:
            score += 1
            open_blocks.append(indent)

    score += sum(
        1
        for t in tokens
        if t.kind is TokenKind.KEYWORD and t.text in BOOLEAN_OPERATORS
    )
    return score


def _statement_heads(tokens: list[Token]):
    """Yield (indent_width, first_token) for every line that has content."""
    indent = 0
    expect_first = True
    for t in tokens:
        if t.kind is TokenKind.NEWLINE:
            indent = 0
            expect_first = True
            continue
        if t.kind is TokenKind.INDENT:
            indent = len(t.text)
            continue
        if expect_first:
            if t.kind is not TokenKind.COMMENT:
                yield indent, t
                expect_first = False


def distinct_methods(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> set[str]:
    """Names of attribute calls: identifier between a '.' and a '('."""
    tokens = tokenize(source, comment_markers)
    names: set[str] = set()
    for k in range(1, len(tokens) - 1):
        t = tokens[k]
        if t.kind is not TokenKind.IDENTIFIER:
            continue
        prev, nxt = tokens[k - 1], tokens[k + 1]
        if (
            prev.kind is TokenKind.DELIMITER
            and prev.text == "."
            and nxt.kind is TokenKind.DELIMITER
            and nxt.text == "("
        ):
            names.add(t.text)
    return names


def complexity_record(source: str, comment_markers: tuple[str, ...] = DEFAULT_COMMENT_MARKERS) -> ComplexityRecord:
    return ComplexityRecord(
        loc=loc(source, comment_markers),
        cyclomatic=cyclomatic(source, comment_markers),
        halstead_volume=halstead_volume(source, comment_markers),
        cognitive=cognitive(source, comment_markers),
    )
