"""Tokenizer and recursive-descent parser for the TIR text format.

Whitespace (newlines included) only separates tokens, so a whole function may
sit on one line::

    func @main(){ bb0: %r = const 7  ret %r }
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ir import (
    BINARY, INT_MAX, INT_MIN, Block, Function, Global, Instr, Module, TirSyntaxError,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<reg>%[A-Za-z0-9_.]+)
  | (?P<glob>@[A-Za-z0-9_.]+)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>[(){}\[\],=:])
    """,
    re.VERBOSE,
)


@dataclass(slots=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise TirSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok_text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, tok_text, line, pos - line_start + 1))
        newlines = tok_text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + tok_text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_VALUE_KINDS = {"const": 1, "copy": 1}
_VALUE_KINDS.update({k: 2 for k in BINARY})


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, msg: str, tok: Token | None = None) -> TirSyntaxError:
        tok = tok or self.peek()
        shown = tok.text or "end of input"
        return TirSyntaxError(f"{msg} (got {shown!r})", tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise self.error(f"expected {text or kind}")
        return self.next()

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind == "punct" and tok.text == text:
            self.next()
            return True
        return False

    # grammar
    def module(self) -> Module:
        functions: list[Function] = []
        globals_: list[tuple[str, int]] = []
        while self.peek().kind != "eof":
            tok = self.expect("ident")
            if tok.text == "global":
                name = self.expect("glob").text[1:]
                self.expect("punct", "[")
                length_tok = self.expect("int")
                length = int(length_tok.text)
                if length <= 0:
                    raise self.error("global length must be positive", length_tok)
                self.expect("punct", "]")
                globals_.append((name, length))
            elif tok.text == "func":
                functions.append(self.function())
            else:
                raise self.error("expected 'func' or 'global'", tok)
        return Module(tuple(functions), tuple(globals_))

    def function(self) -> Function:
        name = self.expect("glob").text[1:]
        self.expect("punct", "(")
        params: list[str] = []
        if not self.accept(")"):
            while True:
                params.append(self.expect("reg").text[1:])
                if self.accept(")"):
                    break
                self.expect("punct", ",")
        self.expect("punct", "{")
        blocks: list[Block] = []
        while not self.accept("}"):
            tok = self.peek()
            if not (tok.kind == "ident" and self.peek(1).text == ":"):
                raise self.error("expected block label")
            label = self.next().text
            self.next()
            instrs: list[Instr] = []
            while True:
                tok = self.peek()
                if tok.kind == "punct" and tok.text == "}":
                    break
                if tok.kind == "ident" and self.peek(1).text == ":":
                    break
                if tok.kind == "eof":
                    raise self.error("unterminated function")
                instrs.append(self.instr())
            blocks.append(Block(label, tuple(instrs)))
        if not blocks:
            raise self.error(f"function @{name} has no blocks")
        return Function(name, tuple(params), tuple(blocks))

    def operand(self):
        tok = self.next()
        if tok.kind == "reg":
            return tok.text[1:]
        if tok.kind == "int":
            value = int(tok.text)
            if not INT_MIN <= value <= INT_MAX:
                raise self.error("integer literal out of 64-bit range", tok)
            return value
        if tok.kind == "glob":
            return Global(tok.text[1:])
        raise self.error("expected operand", tok)

    def value_operand(self):
        tok = self.peek()
        op = self.operand()
        if isinstance(op, Global):
            raise self.error("global not allowed here", tok)
        return op

    def label(self) -> str:
        return self.expect("ident").text

    def instr(self) -> Instr:
        tok = self.next()
        if tok.kind == "reg":
            dest = tok.text[1:]
            self.expect("punct", "=")
            kind_tok = self.expect("ident")
            kind = kind_tok.text
            if kind in _VALUE_KINDS:
                args = [self.value_operand()]
                for _ in range(_VALUE_KINDS[kind] - 1):
                    self.expect("punct", ",")
                    args.append(self.value_operand())
                return Instr(kind, dest, tuple(args))
            if kind == "load":
                g = self.expect("glob").text[1:]
                self.expect("punct", ",")
                return Instr("load", dest, (Global(g), self.value_operand()))
            if kind == "call":
                callee = self.expect("glob").text[1:]
                self.expect("punct", "(")
                args = []
                if not self.accept(")"):
                    while True:
                        args.append(self.value_operand())
                        if self.accept(")"):
                            break
                        self.expect("punct", ",")
                return Instr("call", dest, tuple(args), callee=callee)
            raise self.error("unknown or non-value instruction kind", kind_tok)
        if tok.kind == "ident":
            kind = tok.text
            if kind == "store":
                value = self.value_operand()
                self.expect("punct", ",")
                g = self.expect("glob").text[1:]
                self.expect("punct", ",")
                return Instr("store", None, (value, Global(g), self.value_operand()))
            if kind == "br":
                cond = self.value_operand()
                self.expect("punct", ",")
                t1 = self.label()
                self.expect("punct", ",")
                t2 = self.label()
                return Instr("br", None, (cond,), (t1, t2))
            if kind == "jmp":
                return Instr("jmp", None, (), (self.label(),))
            if kind == "ret":
                return Instr("ret", None, (self.value_operand(),))
            if kind == "print":
                return Instr("print", None, (self.value_operand(),))
            if kind in _VALUE_KINDS or kind in ("load", "call"):
                raise self.error(f"'{kind}' needs a destination register", tok)
        raise self.error("expected instruction", tok)


def parse_module(text: str, verify: bool = True) -> Module:
    """Parse TIR text into a module, verifying it unless ``verify`` is false."""
    module = _Parser(text).module()
    if verify:
        from .verify import verify_module

        verify_module(module)
    return module
