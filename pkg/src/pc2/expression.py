"""A small arithmetic expression language for coefficients, sources and references.

Grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative, binds tighter than unary minus
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Evaluation is vectorized: variables may be bound to numpy arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

U_PREV = "u_prev"
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "abs": np.abs,
}
RESERVED = frozenset(CONSTANTS) | frozenset(FUNCTIONS) | {U_PREV}


class ExpressionError(ValueError):
    def __init__(self, message: str, offset: int | None = None, text: str | None = None):
        self.offset = offset
        self.text = text
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class Node:
    def evaluate(self, env):
        raise NotImplementedError

    def names(self) -> set[str]:
        return set()

    def diff(self, var: str) -> "Node":
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Node):
    value: float

    def evaluate(self, env):
        return self.value

    def diff(self, var):
        return Num(0.0)

    def __str__(self):
        return _fmt(self.value)


@dataclass(frozen=True)
class Name(Node):
    name: str
    offset: int = -1

    def evaluate(self, env):
        if self.name in env:
            return env[self.name]
        if self.name in CONSTANTS:
            return CONSTANTS[self.name]
        if self.name == U_PREV:
            raise ExpressionError("u_prev is not bound (no previous iterate available)", self.offset)
        raise ExpressionError(f"unknown identifier {self.name!r}", self.offset)

    def names(self):
        return set() if self.name in CONSTANTS else {self.name}

    def diff(self, var):
        return Num(1.0 if self.name == var else 0.0)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def names(self):
        return self.arg.names()

    def diff(self, var):
        return Neg(self.arg.diff(var))

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        return np.power(a, b)

    def names(self):
        return self.left.names() | self.right.names()

    def diff(self, var):
        a, b = self.left, self.right
        da, db = a.diff(var), b.diff(var)
        if self.op in "+-":
            return BinOp(self.op, da, db)
        if self.op == "*":
            return BinOp("+", BinOp("*", da, b), BinOp("*", a, db))
        if self.op == "/":
            return BinOp("/", BinOp("-", BinOp("*", da, b), BinOp("*", a, db)), BinOp("^", b, Num(2.0)))
        if var not in b.names():
            # d(a^c) = c a^(c-1) da
            return BinOp("*", BinOp("*", b, BinOp("^", a, BinOp("-", b, Num(1.0)))), da)
        # general case: a^b = exp(b log a)
        return BinOp("*", self, BinOp("+", BinOp("*", db, Call("log", a)), BinOp("/", BinOp("*", b, da), a)))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def evaluate(self, env):
        func = FUNCTIONS.get(self.func) or _INTERNAL[self.func]
        return func(self.arg.evaluate(env))

    def names(self):
        return self.arg.names()

    def diff(self, var):
        a, da = self.arg, self.arg.diff(var)
        outer = {
            "sin": lambda: Call("cos", a),
            "cos": lambda: Neg(Call("sin", a)),
            "exp": lambda: self,
            "log": lambda: BinOp("/", Num(1.0), a),
            "sqrt": lambda: BinOp("/", Num(0.5), self),
            "tanh": lambda: BinOp("-", Num(1.0), BinOp("^", self, Num(2.0))),
            "abs": lambda: Call("sign", a),
        }[self.func]()
        return BinOp("*", outer, da)

    def __str__(self):
        return f"{self.func}({self.arg})"


# only produced by differentiation, not accepted by the parser
_INTERNAL = {"sign": np.sign}


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ExpressionError(f"expected {value!r}, found {val or 'end of input'!r}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+" and self.peek()[0] == "op":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in FUNCTIONS:
                raise ExpressionError(f"function {val!r} needs an argument", pos, self.text)
            return Name(val, pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", pos, self.text)


class Expression:
    """Parsed expression with its source text."""

    def __init__(self, text: str | float | int, root: Node | None = None):
        if root is None:
            text = str(text)
            if not text.strip():
                raise ExpressionError("empty expression", 0, text)
            root = _Parser(text).parse()
        self.text = str(text)
        self.root = root

    @classmethod
    def constant(cls, value: float) -> "Expression":
        return cls(_fmt(value))

    def __call__(self, **env):
        return self.evaluate(env)

    def evaluate(self, env, shape=None):
        """Evaluate on ``env``; scalar results are broadcast to ``shape`` if given."""
        out = self.root.evaluate(env)
        if shape is not None:
            out = np.broadcast_to(np.asarray(out, dtype=float), shape).astype(float)
        return out

    @property
    def names(self) -> set[str]:
        return self.root.names()

    @property
    def uses_u_prev(self) -> bool:
        return U_PREV in self.names

    @property
    def is_constant(self) -> bool:
        return not self.names

    def offset_of(self, name: str) -> int | None:
        """Source offset of the first occurrence of identifier ``name``."""
        found = []

        def walk(node):
            if isinstance(node, Name) and node.name == name and node.offset >= 0:
                found.append(node.offset)
            for child in ("arg", "left", "right"):
                if hasattr(node, child):
                    walk(getattr(node, child))

        walk(self.root)
        return min(found) if found else None

    def diff(self, var: str) -> "Expression":
        d = self.root.diff(var)
        return Expression(str(d), d)

    def canonical(self) -> str:
        return str(self.root)

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())


def parse_expression(text) -> Expression:
    return Expression(text)
