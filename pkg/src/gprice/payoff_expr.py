"""Parser and compiler for payoff expressions such as ``pos(B2 - B1 - 0.1)``.

Grammar (all binary operators left-associative)::

    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' unary)*
    unary   := '-' unary | '+' unary | atom
    atom    := NUMBER | VAR | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``VAR`` is ``B1``..``B3``, the Brownian value at the k-th declared time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .core import MAX_ARITY, CylinderPayoff, validate_times
from .errors import ConfigError, DomainError

MAX_DEPTH = 64


class ExpressionError(ConfigError):
    """Syntax or semantic error; ``column`` is 1-based."""

    def __init__(self, message: str, column: int | None = None):
        self.column = column
        where = f" at column {column}" if column is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Unary, Binary, Call]

# name -> (min args, max args)
FUNCTIONS = {
    "max": (2, None),
    "min": (2, None),
    "abs": (1, 1),
    "exp": (1, 1),
    "log": (1, 1),
    "pow": (2, 2),
    "pos": (1, 1),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    """``(kind, text, column)`` triples; kind is num, name, op or end."""
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.toks = tokenize(text)
        self.i = 0
        self.n_vars = n_vars
        self.depth = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok[1] != text:
            got = tok[1] or "end of input"
            raise ExpressionError(f"expected {text!r}, got {got!r}", tok[2])
        return tok

    def enter(self, col):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExpressionError(f"expression nested deeper than {MAX_DEPTH}", col)

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def _chain(self, ops, sub):
        node = sub()
        while self.peek()[0] == "op" and self.peek()[1] in ops:
            op = self.take()[1]
            node = Binary(op, node, sub())
        return node

    def expr(self):
        self.enter(self.peek()[2])
        node = self._chain("+-", self.term)
        self.depth -= 1
        return node

    def term(self):
        return self._chain("*/", self.power)

    def power(self):
        return self._chain("^", self.unary)

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            self.enter(tok[2])
            node = Unary(tok[1], self.unary())
            self.depth -= 1
            return node
        return self.atom()

    def atom(self):
        kind, text, col = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            m = re.fullmatch(r"B(\d+)", text)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n_vars:
                    raise ExpressionError(
                        f"undefined variable {text} ({self.n_vars} time(s) declared)", col)
                return Var(k)
            if text not in FUNCTIONS:
                raise ExpressionError(f"unknown name {text!r}", col)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.expect(")")
            lo, hi = FUNCTIONS[text]
            if len(args) < lo or (hi is not None and len(args) > hi):
                want = f"{lo}" if lo == hi else f"at least {lo}"
                raise ExpressionError(f"{text} takes {want} argument(s), got {len(args)}", col)
            return Call(text, tuple(args))
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {text or 'end of input'!r}", col)


def _children(node: Node) -> tuple:
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    return ()


def tree_depth(node: Node) -> int:
    """Number of nodes on the longest root-to-leaf path (iterative)."""
    best = 0
    stack = [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        stack.extend((c, d + 1) for c in _children(n))
    return best


def parse_expression(text: str, n_vars: int = MAX_ARITY) -> Node:
    if not text or not text.strip():
        raise ExpressionError("empty payoff expression", 1)
    tree = _Parser(text, n_vars).parse()
    if tree_depth(tree) > MAX_DEPTH:
        raise ExpressionError(f"expression tree deeper than {MAX_DEPTH}")
    return tree


def to_source(node: Node) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"B{node.index}"
    if isinstance(node, Unary):
        return f"({node.op}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.name}({', '.join(to_source(a) for a in node.args)})"


def _log(x):
    if np.any(x <= 0):
        raise DomainError(f"log of nonpositive value {np.min(x)!r}")
    return np.log(x)


def _div(a, b):
    if np.any(b == 0):
        raise DomainError("division by zero in payoff expression")
    return np.divide(a, b)


def _pow(a, b):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.power(a, b)
    if not np.all(np.isfinite(out)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b)):
        raise DomainError("power undefined for these arguments (negative base or 0**negative)")
    return out


def _reduce(f):
    def g(*xs):
        out = xs[0]
        for x in xs[1:]:
            out = f(out, x)
        return out
    return g


_CALLS = {
    "max": _reduce(np.maximum),
    "min": _reduce(np.minimum),
    "abs": np.abs,
    "exp": np.exp,
    "log": _log,
    "pow": _pow,
    "pos": lambda x: np.maximum(x, 0.0),
}
_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": _div, "^": _pow}


def compile_node(node: Node) -> Callable[..., np.ndarray]:
    """Numpy callable taking ``B1, B2, ...`` positionally."""
    if isinstance(node, Num):
        v = float(node.value)
        return lambda *xs: np.float64(v)
    if isinstance(node, Var):
        k = node.index - 1
        return lambda *xs: np.asarray(xs[k], dtype=float)
    if isinstance(node, Unary):
        f = compile_node(node.operand)
        if node.op == "-":
            return lambda *xs: np.negative(f(*xs))
        return f
    if isinstance(node, Binary):
        a, b, op = compile_node(node.left), compile_node(node.right), _BINARY[node.op]
        return lambda *xs: op(a(*xs), b(*xs))
    fs = [compile_node(a) for a in node.args]
    fn = _CALLS[node.name]
    return lambda *xs: fn(*(f(*xs) for f in fs))


@dataclass(frozen=True, eq=False)
class PayoffExpression:
    """Parsed expression bound to its declared monitoring times."""

    source: str
    tree: Node
    times: tuple[float, ...]

    def __call__(self, *xs):
        if len(xs) != len(self.times):
            raise ConfigError(f"expected {len(self.times)} argument(s), got {len(xs)}")
        return compile_node(self.tree)(*xs)

    def to_payoff(self, name: str | None = None) -> CylinderPayoff:
        f = compile_node(self.tree)
        arity = len(self.times)

        def phi(*xs):
            out = f(*xs)
            return np.broadcast_to(out, np.broadcast(*xs).shape) if arity else out

        return CylinderPayoff(self.times, phi, name=name or self.source)

    def pretty(self) -> str:
        return to_source(self.tree)


def parse_payoff(text: str, declared_times: Sequence[float]) -> PayoffExpression:
    """Parse ``text`` with variables ``B1..Bm`` for the ``m`` declared times."""
    times = validate_times(declared_times)
    if len(times) > MAX_ARITY:
        raise ConfigError(f"at most {MAX_ARITY} monitoring times are supported")
    return PayoffExpression(text, parse_expression(text, len(times)), times)
