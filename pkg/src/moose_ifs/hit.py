"""Parser for the subset of the MOOSE HIT input format used by verification.

Supported constructs: top-level ``[Name] ... []`` blocks, nested
``[./sub] ... [../]`` (or modern ``[sub] ... []``) blocks, ``key = value``
assignments, ``#`` comments and single- or double-quoted values. Include
directives and ``${...}`` brace expressions are rejected instead of being
silently misparsed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

Scalar = Union[int, float, bool, str]
ParamValue = Union[Scalar, tuple]

_INT_RE = re.compile(r"[+-]?\d+\Z")
_FLOAT_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_KEY_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_:/.\-]*\Z")
_NAME_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.:\-]*\Z")
_BARE_SAFE_RE = re.compile(r"[^\s'\"#\[\]=]+\Z")


class ParseError(ValueError):
    """Raised on malformed HIT input.

    Attributes:
        line: 1-based line of the offending token.
        column: 1-based column of the offending token.
    """

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Block:
    name: str
    params: dict = field(default_factory=dict)
    children: tuple = ()
    # (first line, last line), 1-based inclusive; ignored by equality
    source_span: tuple = field(default=(0, 0), compare=False)

    @property
    def block_type(self) -> str | None:
        value = self.params.get("type")
        return value if isinstance(value, str) else None

    def child(self, name: str) -> Block | None:
        for c in self.children:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class InputTree:
    root_blocks: tuple = ()
    diagnostics: tuple = field(default=(), compare=False)
    n_lines: int = field(default=0, compare=False)

    def block(self, name: str) -> Block | None:
        for b in self.root_blocks:
            if b.name == name:
                return b
        return None


def coerce_scalar(token: str) -> Scalar:
    """Type a bare token as int, float, bool or identifier."""
    if _INT_RE.match(token):
        return int(token)
    if _FLOAT_RE.match(token):
        return float(token)
    low = token.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    return token


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def skip_inline_space(self) -> None:
        while self.peek() in (" ", "\t", "\r") and self.peek():
            self.advance()

    def skip_comment(self) -> None:
        if self.peek() == "#":
            while self.peek() and self.peek() != "\n":
                self.advance()

    def skip_blank(self) -> None:
        while not self.at_end():
            ch = self.peek()
            if ch in " \t\r\n":
                self.advance()
            elif ch == "#":
                self.skip_comment()
            else:
                return

    def expect_line_end(self) -> None:
        self.skip_inline_space()
        self.skip_comment()
        if self.peek() not in ("", "\n"):
            raise ParseError(f"unexpected text {self.peek()!r} after value", self.line, self.col)

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.col)


class _Frame:
    __slots__ = ("name", "params", "children", "start", "line", "col")

    def __init__(self, name: str, start: int, line: int, col: int) -> None:
        self.name = name
        self.params: dict = {}
        self.children: list = []
        self.start = start
        self.line = line
        self.col = col


def parse_input(text: str | bytes) -> InputTree:
    """Parse HIT text into an :class:`InputTree`.

    Raises:
        ParseError: on invalid UTF-8, unbalanced blocks, malformed
            assignments or unsupported HIT features.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8 byte at offset {exc.start}", 1, 1) from None
    if text.startswith("﻿"):
        text = text[1:]

    sc = _Scanner(text)
    stack: list[_Frame] = []
    roots: list[Block] = []
    diagnostics: list[str] = []

    while True:
        sc.skip_blank()
        if sc.at_end():
            break
        line, col = sc.line, sc.col
        ch = sc.peek()
        if ch == "[":
            header = _read_header(sc)
            sc.expect_line_end()
            if header in ("", "../"):
                if not stack:
                    raise ParseError("block close without matching open", line, col)
                frame = stack.pop()
                block = Block(frame.name, frame.params, tuple(frame.children), (frame.start, line))
                if stack:
                    stack[-1].children.append(block)
                else:
                    roots.append(block)
                continue
            name = header[2:] if header.startswith("./") else header
            if "/" in name:
                raise ParseError(f"path-style block name {header!r} is not supported", line, col)
            if not _NAME_RE.match(name):
                raise ParseError(f"invalid block name {header!r}", line, col)
            stack.append(_Frame(name, line, line, col))
            continue
        if ch == "!":
            raise ParseError("include directives are not supported", line, col)
        key = _read_key(sc)
        if not stack:
            raise ParseError(f"parameter {key!r} outside of any block", line, col)
        sc.skip_inline_space()
        if sc.peek() != "=":
            raise sc.error(f"expected '=' after {key!r}")
        sc.advance()
        sc.skip_inline_space()
        value = _read_value(sc)
        sc.expect_line_end()
        frame = stack[-1]
        if key in frame.params:
            diagnostics.append(f"line {line}: duplicate parameter {key!r} in [{frame.name}]; last value wins")
        frame.params[key] = value

    if stack:
        frame = stack[-1]
        raise ParseError(f"block [{frame.name}] is never closed", frame.line, frame.col)
    return InputTree(tuple(roots), tuple(diagnostics), sc.line)


def _read_header(sc: _Scanner) -> str:
    line, col = sc.line, sc.col
    sc.advance()
    chars = []
    while sc.peek() != "]":
        if sc.peek() in ("", "\n"):
            raise ParseError("unterminated block header", line, col)
        chars.append(sc.advance())
    sc.advance()
    header = "".join(chars).strip()
    if "${" in header:
        raise ParseError("brace expressions are not supported", line, col)
    return header


def _read_key(sc: _Scanner) -> str:
    line, col = sc.line, sc.col
    chars = []
    while sc.peek() and sc.peek() not in " \t\r\n=#[":
        chars.append(sc.advance())
    key = "".join(chars)
    if not key or not _KEY_RE.match(key):
        raise ParseError(f"malformed parameter name {key!r}", line, col)
    return key


def _read_value(sc: _Scanner) -> ParamValue:
    line, col = sc.line, sc.col
    quote = sc.peek()
    if quote in ("'", '"'):
        sc.advance()
        chars = []
        while sc.peek() != quote:
            if sc.at_end():
                raise ParseError("unterminated quoted value", line, col)
            chars.append(sc.advance())
        sc.advance()
        body = "".join(chars)
        if "${" in body:
            raise ParseError("brace expressions are not supported", line, col)
        if quote == '"':
            return body
        tokens = body.split()
        if len(tokens) == 1:
            return coerce_scalar(tokens[0])
        return tuple(coerce_scalar(t) for t in tokens)
    chars = []
    while sc.peek() and sc.peek() not in " \t\r\n#":
        chars.append(sc.advance())
    token = "".join(chars)
    if not token:
        raise ParseError("missing value after '='", line, col)
    if "${" in token:
        raise ParseError("brace expressions are not supported", line, col)
    if token[0] in "[]=":
        raise ParseError(f"malformed value {token!r}", line, col)
    return coerce_scalar(token)


def find_blocks(tree: InputTree, path: Sequence[str]) -> list[Block]:
    """Return the sub-blocks found under ``path``, in document order.

    Repeated blocks with the same name (HIT allows re-opening a section)
    contribute their children in order. Absent paths give ``[]``.
    """
    if not path:
        raise ValueError("path must be non-empty")
    level: Iterable[Block] = tree.root_blocks
    matches: list[Block] = []
    for name in path:
        matches = [b for b in level if b.name == name]
        level = [c for b in matches for c in b.children]
    return [c for b in matches for c in b.children]


def as_tokens(value: ParamValue | None) -> tuple:
    """Normalize a scalar-or-vector parameter to a tuple of string tokens."""
    if value is None:
        return ()
    if isinstance(value, tuple):
        return tuple(_token_text(v) for v in value)
    if isinstance(value, str):
        return tuple(value.split())
    return (_token_text(value),)


def _token_text(v: Scalar) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _format_scalar(v: Scalar) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if _BARE_SAFE_RE.match(v) and coerce_scalar(v) == v and isinstance(coerce_scalar(v), str) and "${" not in v:
        return v
    if '"' in v:
        raise ValueError(f"cannot serialize string containing a double quote: {v!r}")
    return f'"{v}"'


def format_value(value: ParamValue) -> str:
    if isinstance(value, tuple):
        parts = []
        for v in value:
            text = _format_scalar(v)
            if text.startswith('"'):
                raise ValueError(f"vector element {v!r} is not a bare token")
            parts.append(text)
        return "'" + " ".join(parts) + "'"
    return _format_scalar(value)


def serialize(tree: InputTree) -> str:
    """Render a tree back to HIT text that reparses to an equal tree."""
    out: list[str] = []
    for block in tree.root_blocks:
        _emit(block, 0, out)
        out.append("")
    return "\n".join(out)


def _emit(block: Block, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    out.append(f"{pad}[{block.name}]" if depth == 0 else f"{pad}[./{block.name}]")
    for key, value in block.params.items():
        out.append(f"{pad}  {key} = {format_value(value)}")
    for child in block.children:
        _emit(child, depth + 1, out)
    out.append(f"{pad}[]" if depth == 0 else f"{pad}[../]")
