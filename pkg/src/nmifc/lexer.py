"""Tokenizer shared by the principal, type and program parsers."""
from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(Exception):
    def __init__(self, message, line, col, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        detail = f"{line}:{col}: {message}"
        if self.expected:
            detail += " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "sym" or "eof"
    text: str
    line: int
    col: int


# longest symbols first so that "^->" wins over "^"
SYMBOLS = [
    "/\\_", "^->", "^<-", "]->", "/\\", "\\/", "-[",
    "(", ")", "<", ">", ",", "[", "]", ":", ".", "=", "+", "*", "&", "|", ";",
]

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<int>[0-9]+)"
    r"|(?P<sym>" + "|".join(re.escape(s) for s in SYMBOLS) + ")"
)


def tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with save/restore for bounded backtracking."""

    def __init__(self, text):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def peek(self):
        return self.tokens[self.pos]

    def peek_at(self, offset):
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, *texts):
        tok = self.peek
        return tok.kind in ("sym", "ident") and tok.text in texts

    def accept(self, text):
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text):
        if not self.at(text):
            self.fail({repr(text)})
        return self.advance()

    def expect_ident(self, what="identifier"):
        tok = self.peek
        if tok.kind != "ident":
            self.fail({what})
        return self.advance()

    def fail(self, expected, message=None):
        tok = self.peek
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(message or f"unexpected {found}", tok.line, tok.col, expected)

    def expect_eof(self):
        if self.peek.kind != "eof":
            self.fail({"end of input"})
