"""Minimal s-expression reader shared by the formula syntax and SMT model parsing."""

from __future__ import annotations

from dataclasses import dataclass


class SExprSyntaxError(ValueError):
    """Malformed s-expression text. ``pos`` is a 0-based character offset."""

    def __init__(self, message: str, pos: int, text: str | None = None):
        self.pos = pos
        self.text = text
        if text is not None:
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    value: str
    pos: int


@dataclass(frozen=True)
class SList:
    items: tuple
    pos: int

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]


def _skip(text: str, i: int) -> int:
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        else:
            break
    return i


def _read_atom(text: str, i: int) -> tuple[Token, int]:
    start = i
    if text[i] == "|":
        end = text.find("|", i + 1)
        if end < 0:
            raise SExprSyntaxError("unterminated quoted symbol", start, text)
        return Token(text[i:end + 1], start), end + 1
    n = len(text)
    while i < n and not text[i].isspace() and text[i] not in "();":
        i += 1
    return Token(text[start:i], start), i


def _read(text: str, i: int):
    i = _skip(text, i)
    if i >= len(text):
        raise SExprSyntaxError("unexpected end of input", i, text)
    ch = text[i]
    if ch == ")":
        raise SExprSyntaxError("unbalanced ')'", i, text)
    if ch != "(":
        return _read_atom(text, i)
    start = i
    i += 1
    items = []
    while True:
        i = _skip(text, i)
        if i >= len(text):
            raise SExprSyntaxError("unclosed '('", start, text)
        if text[i] == ")":
            return SList(tuple(items), start), i + 1
        item, i = _read(text, i)
        items.append(item)


def read_one(text: str):
    """Read exactly one s-expression from ``text``."""
    node, i = _read(text, 0)
    i = _skip(text, i)
    if i != len(text):
        raise SExprSyntaxError("trailing input after expression", i, text)
    return node


def read_all(text: str) -> list:
    """Read every top-level s-expression in ``text``."""
    nodes = []
    i = _skip(text, 0)
    while i < len(text):
        node, i = _read(text, i)
        nodes.append(node)
        i = _skip(text, i)
    return nodes
