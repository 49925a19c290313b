"""
Expression language
Parses and evaluates real-valued expressions over named coordinates.

Evaluation is generic over the scalar type: plain floats, or any number-like
object (the dual numbers of diffcore) that implements the arithmetic
operators, a ``primal()`` method and one method per built-in function name.

Grammar (highest binding first):
    primary := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'
    power   := primary ('^' unary)?        right associative
    unary   := '-' unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

Error offsets are 1-based byte offsets into the UTF-8 encoded text.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from errors import (ArityError, DomainError, ExprSyntaxError,
                    UnboundVariableError, UnknownFunctionError)

logger = logging.getLogger(__name__)

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# name -> arity
FUNCTIONS: Dict[str, int] = {
    "sin": 1, "cos": 1, "tan": 1, "sinh": 1, "cosh": 1,
    "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "atan2": 2, "pow": 2,
}

# Integer exponents up to this magnitude use repeated multiplication
MAX_INT_POWER = 8

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class Const:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple["Expr", ...]
    offset: int = field(default=0, compare=False)


Expr = Union[Const, Var, Neg, BinOp, Call]
Bindings = Mapping[str, Any]


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int  # 1-based byte offset


def _tokenize(text: str) -> List[_Token]:
    """Split text into tokens, ending with an 'end' token"""
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        byte_offset = len(text[:pos].encode("utf-8")) + 1
        if m is None:
            raise ExprSyntaxError(f"Unexpected character {text[pos]!r}", byte_offset)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte_offset))
        pos = m.end()
    tokens.append(_Token("end", "", len(text.encode("utf-8")) + 1))
    return tokens


class _Parser:
    """Recursive descent parser over a token list"""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def token(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.token.kind == "op" and self.token.text == text:
            self.advance()
            return True
        return False

    def expect(self, text: str) -> _Token:
        if self.token.kind == "op" and self.token.text == text:
            return self.advance()
        found = self.token.text or "end of input"
        raise ExprSyntaxError(f"Unexpected {found!r}", self.token.offset, f'"{text}"')

    def parse(self) -> Expr:
        node = self.expr()
        if self.token.kind != "end":
            raise ExprSyntaxError(f"Unexpected {self.token.text!r}", self.token.offset, "operator or end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.token.kind == "op" and self.token.text in "+-":
            tok = self.advance()
            node = BinOp(tok.text, node, self.term(), tok.offset)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.token.kind == "op" and self.token.text in "*/":
            tok = self.advance()
            node = BinOp(tok.text, node, self.unary(), tok.offset)
        return node

    def unary(self) -> Expr:
        if self.token.kind == "op" and self.token.text == "-":
            tok = self.advance()
            return Neg(self.unary(), tok.offset)
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.token.kind == "op" and self.token.text == "^":
            tok = self.advance()
            return BinOp("^", base, self.unary(), tok.offset)
        return base

    def primary(self) -> Expr:
        tok = self.token
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text), tok.offset)
        if tok.kind == "name":
            self.advance()
            if self.token.kind == "op" and self.token.text == "(":
                return self.call(tok)
            return Var(tok.text, tok.offset)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"Unexpected {found!r}", tok.offset, "number, name or \"(\"")

    def call(self, name_tok: _Token) -> Expr:
        if name_tok.text not in FUNCTIONS:
            raise UnknownFunctionError(f"Unknown function {name_tok.text!r} at offset {name_tok.offset}")
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name_tok.text]
        if len(args) != arity:
            raise ArityError(
                f"Function {name_tok.text} takes {arity} argument(s), got {len(args)} at offset {name_tok.offset}")
        return Call(name_tok.text, tuple(args), name_tok.offset)


def parse_expression(text: Union[str, bytes]) -> Expr:
    """Parse expression source into an AST"""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    node = _Parser(text).parse()
    logger.debug("Parsed %r -> %s", text, to_text(node))
    return node


def free_variables(e: Expr) -> FrozenSet[str]:
    """Exact set of variable names appearing in e"""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    names: FrozenSet[str] = frozenset()
    for arg in e.args:
        names |= free_variables(arg)
    return names


def to_text(e: Expr) -> str:
    """Fully parenthesized source that parses back to the same tree"""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    return f"{e.name}({', '.join(to_text(a) for a in e.args)})"


# ---------------------------------------------------------------------------
# scalar helpers shared with diffcore

def primal(x: Any) -> float:
    """Real value of a plain or dual scalar"""
    while not isinstance(x, (int, float)):
        x = x.primal()
    return float(x)


def is_plain(x: Any) -> bool:
    return isinstance(x, (int, float))


def _dual_type(*args: Any):
    for a in args:
        if not is_plain(a):
            return type(a)
    return None


def apply_function(name: str, args: List[Any]) -> Any:
    """Apply a built-in function to plain or dual arguments"""
    if name == "pow":
        return power(args[0], args[1])
    if name == "atan2":
        y, x = args
        kind = _dual_type(y, x)
        if kind is None:
            return math.atan2(y, x)
        return kind.atan2(y, x)

    (x,) = args
    if not is_plain(x):
        if name == "abs":
            return abs(x)
        return getattr(x, name)()

    if name == "log":
        if x <= 0:
            raise DomainError(f"log of non-positive value {x!r}")
        return math.log(x)
    if name == "sqrt":
        if x < 0:
            raise DomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    if name == "abs":
        return abs(x)
    try:
        return getattr(math, name)(x)
    except (OverflowError, ValueError) as e:
        raise DomainError(f"{name}({x!r}) failed: {e}")


def power(x: Any, y: Any) -> Any:
    """Real power: repeated multiplication for small integer exponents, exp(y log x) otherwise"""
    if is_plain(y) and float(y).is_integer() and abs(y) <= MAX_INT_POWER:
        n = int(y)
        if n < 0 and primal(x) == 0.0:
            raise DomainError("0 raised to a negative power")
        result: Any = 1.0
        for _ in range(abs(n)):
            result = result * x
        return 1.0 / result if n < 0 else result
    base = primal(x)
    if base == 0.0 and is_plain(x) and is_plain(y):
        if y < 0:
            raise DomainError("0 raised to a negative power")
        return 0.0
    if base <= 0.0:
        raise DomainError(f"non-integer power of non-positive base {base!r}")
    return apply_function("exp", [y * apply_function("log", [x])])


def eval_expression(e: Expr, b: Bindings) -> Any:
    """Value of e under the bindings b; domain errors name the innermost failing node"""
    return _eval(e, b)


def _eval(e: Expr, b: Bindings) -> Any:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return b[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    try:
        if isinstance(e, Neg):
            return -_eval(e.operand, b)
        if isinstance(e, BinOp):
            left = _eval(e.left, b)
            right = _eval(e.right, b)
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            if e.op == "*":
                return left * right
            if e.op == "/":
                if primal(right) == 0.0:
                    raise DomainError("division by zero")
                return left / right
            return power(left, right)
        return apply_function(e.name, [_eval(a, b) for a in e.args])
    except DomainError as err:
        if err.node is None:
            raise DomainError(str(err), node=to_text(e)) from None
        raise
