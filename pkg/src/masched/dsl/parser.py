"""Lexer and recursive-descent parser for the `.man` network format.

`parse_declarations` produces the raw declaration tree (used by the pretty
printer and round-trip tests); `parse` additionally links it into an
executable `NetworkModel`, reporting semantic problems (undeclared names,
bad bounds, out-of-range initial values) as a batched diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import ParseError
from . import expr as E

KEYWORDS = {
    "const",
    "int",
    "real",
    "bool",
    "reward",
    "process",
    "observable",
    "rate",
    "when",
    "true",
    "false",
}

_PUNCT = [
    "..",
    "->",
    "&&",
    "||",
    "==",
    "!=",
    "<=",
    ">=",
    "(",
    ")",
    "{",
    "}",
    "[",
    "]",
    ":",
    ";",
    ",",
    "+",
    "-",
    "*",
    "/",
    "%",
    "!",
    "<",
    ">",
    "=",
]


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'int', 'real', 'punct', 'eof'
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise ParseError("unterminated comment", line, col)
            skipped = text[i : j + 2]
            line += skipped.count("\n")
            col = (
                col + len(skipped)
                if "\n" not in skipped
                else len(skipped) - skipped.rfind("\n")
            )
            i = j + 2
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            is_real = False
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and not text.startswith("..", j):
                is_real = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    is_real = True
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(Token("real" if is_real else "int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


# Raw declaration tree ------------------------------------------------------


@dataclass(frozen=True)
class VarDecl:
    name: str
    is_bool: bool
    low: Optional[E.Expr]  # None for bool
    high: Optional[E.Expr]
    init: E.Expr
    observable: bool


@dataclass(frozen=True)
class Assignment:
    target: str
    value: E.Expr


@dataclass(frozen=True)
class Update:
    assignments: tuple[Assignment, ...]


@dataclass(frozen=True)
class ProbCommand:
    action: str
    guard: E.Expr
    branches: tuple[tuple[E.Expr, Update], ...]  # (weight, update)


@dataclass(frozen=True)
class MarkovCommand:
    rate: E.Expr
    guard: E.Expr
    update: Update


@dataclass(frozen=True)
class ProcessDecl:
    name: str
    variables: tuple[VarDecl, ...]
    commands: tuple[object, ...]  # ProbCommand | MarkovCommand


@dataclass(frozen=True)
class ConstDecl:
    name: str
    kind: str  # 'int', 'real', 'bool'
    value: E.Expr


@dataclass(frozen=True)
class ModelDecl:
    constants: tuple[ConstDecl, ...]
    rewards: tuple[str, ...]
    processes: tuple[ProcessDecl, ...]


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            got = tok.text if tok.text else tok.kind
            self.error(f"expected {want!r}, found {got!r}")
        return self.advance()

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        return None

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            self.error(f"expected identifier, found {tok.text!r}")
        return self.advance().text

    # -- model structure

    def model(self) -> ModelDecl:
        consts: list[ConstDecl] = []
        rewards: list[str] = []
        processes: list[ProcessDecl] = []
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "ident" and tok.text == "const":
                consts.append(self.const_decl())
            elif tok.kind == "ident" and tok.text == "reward":
                self.advance()
                rewards.append(self.ident())
                self.expect("punct", ";")
            elif tok.kind == "ident" and tok.text == "process":
                processes.append(self.process())
            else:
                self.error(
                    f"expected 'const', 'reward', or 'process', found {tok.text!r}"
                )
        return ModelDecl(tuple(consts), tuple(rewards), tuple(processes))

    def const_decl(self) -> ConstDecl:
        self.expect("ident", "const")
        kind_tok = self.peek()
        if kind_tok.text not in ("int", "real", "bool"):
            self.error("expected 'int', 'real', or 'bool' after 'const'")
        self.advance()
        name = self.ident()
        self.expect("punct", "=")
        value = self.expression()
        self.expect("punct", ";")
        return ConstDecl(name, kind_tok.text, value)

    def process(self) -> ProcessDecl:
        self.expect("ident", "process")
        name = self.ident()
        self.expect("punct", "{")
        variables: list[VarDecl] = []
        while True:
            tok = self.peek()
            if tok.kind == "ident" and tok.text in ("observable", "int", "bool"):
                variables.append(self.var_decl())
            else:
                break
        commands: list[object] = []
        while not self.accept("punct", "}"):
            commands.append(self.command())
        return ProcessDecl(name, tuple(variables), tuple(commands))

    def var_decl(self) -> VarDecl:
        observable = self.accept("ident", "observable") is not None
        tok = self.peek()
        if tok.text == "bool":
            self.advance()
            name = self.ident()
            self.expect("punct", "=")
            init = self.expression()
            self.expect("punct", ";")
            return VarDecl(name, True, None, None, init, observable)
        if tok.text == "int":
            self.advance()
            self.expect("punct", "(")
            low = self.expression()
            self.expect("punct", "..")
            high = self.expression()
            self.expect("punct", ")")
            name = self.ident()
            self.expect("punct", "=")
            init = self.expression()
            self.expect("punct", ";")
            return VarDecl(name, False, low, high, init, observable)
        self.error("expected variable declaration ('bool' or 'int(lo..hi)')")

    def command(self):
        if self.accept("punct", "["):
            action = self.ident()
            self.expect("punct", "]")
            if self.accept("ident", "when"):
                guard = self.expression()
            else:
                guard = E.Lit(True)
            self.expect("punct", "->")
            branches = [self.branch()]
            while self.accept("punct", "+"):
                branches.append(self.branch())
            self.expect("punct", ";")
            return ProbCommand(action, guard, tuple(branches))
        if self.peek().text == "rate":
            self.advance()
            self.expect("punct", "(")
            rate = self.expression()
            self.expect("punct", ")")
            if self.accept("ident", "when"):
                guard = self.expression()
            else:
                guard = E.Lit(True)
            self.expect("punct", "->")
            update = self.update()
            self.expect("punct", ";")
            return MarkovCommand(rate, guard, update)
        self.error("expected a command ('[action] ...' or 'rate(...) ...')")

    def branch(self) -> tuple[E.Expr, Update]:
        weight = self.expression()
        self.expect("punct", ":")
        return weight, self.update()

    def update(self) -> Update:
        self.expect("punct", "{")
        assignments: list[Assignment] = []
        if not self.accept("punct", "}"):
            while True:
                target = self.ident()
                self.expect("punct", "=")
                assignments.append(Assignment(target, self.expression()))
                if self.accept("punct", "}"):
                    break
                self.expect("punct", ",")
        return Update(tuple(assignments))

    # -- expressions, precedence climbing

    def expression(self) -> E.Expr:
        return self.binary(1)

    _LEVELS = {
        1: ("||",),
        2: ("&&",),
        3: ("==", "!="),
        4: ("<", "<=", ">", ">="),
        5: ("+", "-"),
        6: ("*", "/", "%"),
    }

    def binary(self, level: int) -> E.Expr:
        if level > 6:
            return self.unary()
        node = self.binary(level + 1)
        ops = self._LEVELS[level]
        while self.peek().kind == "punct" and self.peek().text in ops:
            op = self.advance().text
            right = self.binary(level + 1)
            node = E.Binary(op, node, right)
        return node

    def unary(self) -> E.Expr:
        tok = self.peek()
        if tok.kind == "punct" and tok.text in ("-", "!"):
            self.advance()
            return E.Unary(tok.text, self.unary())
        return self.atom()

    def atom(self) -> E.Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return E.Lit(int(tok.text))
        if tok.kind == "real":
            self.advance()
            return E.Lit(float(tok.text))
        if tok.kind == "ident":
            if tok.text == "true":
                self.advance()
                return E.Lit(True)
            if tok.text == "false":
                self.advance()
                return E.Lit(False)
            if tok.text in E._FUNC_ARITY:
                self.advance()
                self.expect("punct", "(")
                args = [self.expression()]
                while self.accept("punct", ","):
                    args.append(self.expression())
                self.expect("punct", ")")
                return E.Call(tok.text, tuple(args))
            if tok.text in KEYWORDS:
                self.error(f"unexpected keyword {tok.text!r} in expression")
            self.advance()
            return E.Ref(tok.text)
        if tok.kind == "punct" and tok.text == "(":
            self.advance()
            node = self.expression()
            self.expect("punct", ")")
            return node
        self.error(f"expected expression, found {tok.text or tok.kind!r}")


def parse_declarations(text: str) -> ModelDecl:
    """Parse `text` into the raw declaration tree without linking."""
    return _Parser(tokenize(text)).model()


def parse(text: str):
    """Parse and link a network description into a `NetworkModel`.

    Raises `ParseError` on the first syntax error, or `ModelError` carrying
    a `diagnostics` list when linking finds semantic problems.
    """
    from .network import link

    return link(parse_declarations(text))
