"""
Expressions - parse objective/dynamics strings, differentiate them symbolically,
and compile vectorized column evaluators for each graph node's partials

Grammar (whitespace-insensitive):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?            right-associative
    atom  := number | ident | ident '(' expr ')' | '(' expr ')'

Variables are x1..x<n_x>, u1..u<n_u> and t. Functions are sin, cos, tan,
exp, log and sqrt.
"""
from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, FrozenSet, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DimensionMismatchError,
    DomainError,
    ExpressionSyntaxError,
    UnknownFunctionError,
    UnknownVariableError,
)

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("add", "sub", "mul", "div", "pow")

_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_OPERATORS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
    "pow": operator.pow,
}
_MATH_UNARY = {
    "neg": operator.neg,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}
_MATH_BINARY = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
    "pow": math.pow,
}


# ---------------------------------------------------------------------------
# Ast
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Ast"

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Ast"
    right: "Ast"

    def __str__(self):
        return to_text(self)


Ast = Union[Const, Var, Unary, Binary]

ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(ast: Ast, value: Optional[float] = None) -> bool:
    if not isinstance(ast, Const):
        return False
    return value is None or ast.value == value


def variables(ast: Ast) -> FrozenSet[str]:
    """Names of all variables appearing in the tree."""
    if isinstance(ast, Var):
        return frozenset((ast.name,))
    if isinstance(ast, Unary):
        return variables(ast.arg)
    if isinstance(ast, Binary):
        return variables(ast.left) | variables(ast.right)
    return frozenset()


def to_text(ast: Ast) -> str:
    """Render the tree as a fully parenthesized expression string."""
    if isinstance(ast, Const):
        text = repr(float(ast.value))
        return f"({text})" if ast.value < 0 else text
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Unary):
        if ast.op == "neg":
            return f"(-{to_text(ast.arg)})"
        return f"{ast.op}({to_text(ast.arg)})"
    return f"({to_text(ast.left)} {_SYMBOLS[ast.op]} {to_text(ast.right)})"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class _Token(NamedTuple):
    kind: str  # number | ident | op | eof
    text: str
    position: int


_TOKEN_RE = re.compile(
    r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
    |(?P<ident>[A-Za-z_][A-Za-z_0-9]*)
    |(?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_STATE_RE = re.compile(r"x([1-9]\d*)")
_CONTROL_RE = re.compile(r"u([1-9]\d*)")


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    position = 0
    while position < len(text):
        if text[position].isspace():
            position += 1
            continue
        match = _TOKEN_RE.match(text, position)
        if match is None:
            raise ExpressionSyntaxError(
                text, position, text[position], ("number", "identifier", "operator")
            )
        tokens.append(_Token(match.lastgroup, match.group(), position))
        position = match.end()
    tokens.append(_Token("eof", "end of input", len(text)))
    return tokens


class _Parser:
    """Recursive-descent parser over a token list"""

    def __init__(self, text: str, n_x: int, n_u: int):
        self.text = text
        self.n_x = n_x
        self.n_u = n_u
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def fail(self, expected: Sequence[str]):
        token = self.peek()
        raise ExpressionSyntaxError(self.text, token.position, token.text, expected)

    def parse(self) -> Ast:
        node = self.expr()
        if self.peek().kind != "eof":
            self.fail(("operator", "end of input"))
        return node

    def expr(self) -> Ast:
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = "add" if self.advance().text == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Ast:
        node = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = "mul" if self.advance().text == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Ast:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Ast:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> Ast:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            return Const(float(token.text))
        if token.kind == "ident":
            self.advance()
            if self.peek().kind == "op" and self.peek().text == "(":
                if token.text not in FUNCTIONS:
                    raise UnknownFunctionError(
                        f"unknown function {token.text!r} at position {token.position}; "
                        f"supported: {', '.join(FUNCTIONS)}"
                    )
                self.advance()
                arg = self.expr()
                self.close_paren()
                return Unary(token.text, arg)
            return self.variable(token)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.expr()
            self.close_paren()
            return node
        self.fail(("number", "identifier", "'('", "'-'"))

    def close_paren(self):
        if not (self.peek().kind == "op" and self.peek().text == ")"):
            self.fail(("')'",))
        self.advance()

    def variable(self, token: _Token) -> Var:
        name = token.text
        if name == "t":
            return Var(name)
        for pattern, count in ((_STATE_RE, self.n_x), (_CONTROL_RE, self.n_u)):
            match = pattern.fullmatch(name)
            if match and int(match.group(1)) <= count:
                return Var(name)
        raise UnknownVariableError(
            f"unknown variable {name!r} at position {token.position} "
            f"(n_x = {self.n_x}, n_u = {self.n_u})"
        )


def parse(text: str, n_x: int, n_u: int) -> Ast:
    """
    Parse an expression string into an Ast

    Args:
        text: Expression, e.g. "u1^2/2"
        n_x: Number of state variables (x1..x<n_x> are valid)
        n_u: Number of control variables (u1..u<n_u> are valid)

    Returns:
        The parsed tree (not simplified)
    """
    return _Parser(text, n_x, n_u).parse()


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------

def _fold(fn: Callable, *values: float) -> Optional[Const]:
    try:
        result = fn(*values)
    except (ValueError, ZeroDivisionError, OverflowError):
        return None
    if isinstance(result, complex) or not math.isfinite(result):
        return None
    return Const(float(result))


def _split(ast: Ast) -> Tuple[float, Optional[Ast]]:
    """Write ast as coefficient * rest; rest is None for constants."""
    if isinstance(ast, Const):
        return ast.value, None
    if isinstance(ast, Binary) and ast.op == "mul" and isinstance(ast.left, Const):
        return ast.left.value, ast.right
    if isinstance(ast, Unary) and ast.op == "neg":
        coefficient, rest = _split(ast.arg)
        return -coefficient, rest
    return 1.0, ast


def _scaled(coefficient: float, rest: Optional[Ast]) -> Ast:
    if rest is None:
        return Const(coefficient)
    if coefficient == 0:
        return ZERO
    if coefficient == 1:
        return rest
    if coefficient == -1:
        return Unary("neg", rest)
    return Binary("mul", Const(coefficient), rest)


def _simplify_unary(op: str, arg: Ast) -> Ast:
    if isinstance(arg, Const):
        folded = _fold(_MATH_UNARY[op], arg.value)
        if folded is not None:
            return folded
    if op == "neg":
        if isinstance(arg, Unary) and arg.op == "neg":
            return arg.arg
        coefficient, rest = _split(arg)
        if rest is not None and coefficient != 1:
            return _scaled(-coefficient, rest)
    return Unary(op, arg)


def _simplify_mul(left: Ast, right: Ast) -> Ast:
    cl, rl = _split(left)
    cr, rr = _split(right)
    coefficient = cl * cr
    if coefficient == 0:
        return ZERO
    if not math.isfinite(coefficient):
        return Binary("mul", left, right)
    if rl is None:
        rest = rr
    elif rr is None:
        rest = rl
    else:
        rest = Binary("mul", rl, rr)
    return _scaled(coefficient, rest)


def _simplify_binary(op: str, left: Ast, right: Ast) -> Ast:
    if isinstance(left, Const) and isinstance(right, Const):
        folded = _fold(_MATH_BINARY[op], left.value, right.value)
        if folded is not None:
            return folded
    if op == "add":
        if _is_const(left, 0):
            return right
        if _is_const(right, 0):
            return left
    elif op == "sub":
        if _is_const(right, 0):
            return left
        if _is_const(left, 0):
            return _simplify_unary("neg", right)
        if left == right:
            return ZERO
    elif op == "mul":
        return _simplify_mul(left, right)
    elif op == "div":
        if _is_const(left, 0):
            return ZERO
        if _is_const(right, 1):
            return left
        if isinstance(right, Const) and right.value != 0:
            coefficient, rest = _split(left)
            if coefficient != 1:
                folded = _fold(operator.truediv, coefficient, right.value)
                if folded is not None:
                    return _scaled(folded.value, rest)
    elif op == "pow":
        if _is_const(right, 1):
            return left
        if _is_const(right, 0):
            return ONE
        if _is_const(left, 1):
            return ONE
    return Binary(op, left, right)


def simplify(ast: Ast) -> Ast:
    """
    Fold constant subtrees and apply algebraic identities, bottom-up

    Division by a constant zero (and any other fold that would not be
    finite) is left in place; it surfaces as a DomainError at evaluation.
    """
    if isinstance(ast, Unary):
        return _simplify_unary(ast.op, simplify(ast.arg))
    if isinstance(ast, Binary):
        return _simplify_binary(ast.op, simplify(ast.left), simplify(ast.right))
    return ast


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

@singledispatch
def _derive(ast, var: str) -> Ast:
    raise TypeError(f"cannot differentiate {type(ast).__name__}")


@_derive.register(Const)
def _(ast: Const, var: str) -> Ast:
    return ZERO


@_derive.register(Var)
def _(ast: Var, var: str) -> Ast:
    return ONE if ast.name == var else ZERO


@_derive.register(Unary)
def _(ast: Unary, var: str) -> Ast:
    a = ast.arg
    da = _derive(a, var)
    if ast.op == "neg":
        return Unary("neg", da)
    if ast.op == "sin":
        outer = Unary("cos", a)
    elif ast.op == "cos":
        outer = Unary("neg", Unary("sin", a))
    elif ast.op == "tan":
        outer = Binary("div", ONE, Binary("pow", Unary("cos", a), Const(2.0)))
    elif ast.op == "exp":
        outer = ast
    elif ast.op == "log":
        outer = Binary("div", ONE, a)
    else:  # sqrt
        outer = Binary("div", ONE, Binary("mul", Const(2.0), ast))
    return Binary("mul", da, outer)


@_derive.register(Binary)
def _(ast: Binary, var: str) -> Ast:
    a, b = ast.left, ast.right
    da, db = _derive(a, var), _derive(b, var)
    if ast.op in ("add", "sub"):
        return Binary(ast.op, da, db)
    if ast.op == "mul":
        return Binary("add", Binary("mul", da, b), Binary("mul", a, db))
    if ast.op == "div":
        if var not in variables(b):
            return Binary("div", da, b)
        numerator = Binary("sub", Binary("mul", da, b), Binary("mul", a, db))
        return Binary("div", numerator, Binary("pow", b, Const(2.0)))
    # pow
    if var not in variables(b):
        return Binary("mul", Binary("mul", b, Binary("pow", a, Binary("sub", b, ONE))), da)
    if var not in variables(a):
        return Binary("mul", Binary("mul", ast, Unary("log", a)), db)
    return Binary(
        "mul",
        ast,
        Binary("add", Binary("mul", db, Unary("log", a)), Binary("div", Binary("mul", b, da), a)),
    )


def differentiate(ast: Ast, var: str) -> Ast:
    """
    Exact partial derivative of ast with respect to var, simplified

    Args:
        ast: Expression tree
        var: Variable name, e.g. "x1"

    Returns:
        Simplified derivative tree; Const(0) when ast does not depend on var
    """
    return simplify(_derive(ast, var))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _compile(ast: Ast, lib, constant: Callable[[float], object]) -> Callable[[Mapping], object]:
    if isinstance(ast, Const):
        value = constant(ast.value)
        return lambda env: value
    if isinstance(ast, Var):
        name = ast.name
        return lambda env: env[name]
    if isinstance(ast, Unary):
        arg = _compile(ast.arg, lib, constant)
        if ast.op == "neg":
            return lambda env: -arg(env)
        fn = getattr(lib, ast.op)
        return lambda env: fn(arg(env))
    left = _compile(ast.left, lib, constant)
    right = _compile(ast.right, lib, constant)
    fn = _OPERATORS[ast.op]
    return lambda env: fn(left(env), right(env))


def evaluate(ast: Ast, bindings: Mapping[str, object], lib=np):
    """
    Evaluate ast over any number type

    The bound values only need +, -, *, /, ** and negation; lib supplies
    sin, cos, tan, exp, log and sqrt for them.
    """
    missing = variables(ast) - set(bindings)
    if missing:
        raise UnknownVariableError(f"unbound variables: {', '.join(sorted(missing))}")
    return _compile(ast, lib, float)(bindings)


class CompiledColumn:
    """An Ast turned once into a closure tree evaluating whole columns"""

    def __init__(self, ast: Ast):
        self.ast = ast
        self.variables = variables(ast)
        self._fn = _compile(ast, np, np.float64)

    def __call__(
        self,
        bindings: Mapping[str, np.ndarray],
        n_rows: Optional[int] = None,
        out: Optional[np.ndarray] = None,
        label: Optional[str] = None,
    ) -> np.ndarray:
        missing = self.variables - set(bindings)
        if missing:
            raise UnknownVariableError(f"unbound variables: {', '.join(sorted(missing))}")
        bindings = {name: np.asarray(column, dtype=float) for name, column in bindings.items()}
        lengths = {column.size for column in bindings.values()}
        if n_rows is not None:
            lengths.add(n_rows)
        if len(lengths) != 1:
            raise DimensionMismatchError(f"binding columns have different lengths: {sorted(lengths)}")
        (n_rows,) = lengths
        with np.errstate(all="ignore"):
            result = np.broadcast_to(np.asarray(self._fn(bindings), dtype=float), (n_rows,))
        bad = ~np.isfinite(result)
        if bad.any():
            raise DomainError(int(np.argmax(bad)), label)
        if out is None:
            return np.array(result)
        out[...] = result
        return out


def compile_columns(ast: Ast) -> CompiledColumn:
    return CompiledColumn(ast)


def eval_columns(
    ast: Ast,
    bindings: Mapping[str, np.ndarray],
    n_rows: Optional[int] = None,
    out: Optional[np.ndarray] = None,
    label: Optional[str] = None,
) -> np.ndarray:
    """
    Element-wise evaluation at every mesh row

    Args:
        ast: Expression tree
        bindings: Variable name -> column of length N
        n_rows: N, required when ast has no variables and bindings is empty
        out: Optional caller-owned buffer of length N
        label: Function name reported in a DomainError

    Returns:
        Column of length N

    Raises:
        DomainError: at the first row whose value is not finite
    """
    return compile_columns(ast)(bindings, n_rows=n_rows, out=out, label=label)


# ---------------------------------------------------------------------------
# Partial-derivative specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialSpecSource:
    """Structurally nonzero first partials and half-Hessian of one expression.

    Positions are 0-based into `args`. Off-diagonal Hessian entries (i < j)
    are stored once; diagonal entries hold half the second partial.
    """

    args: Tuple[str, ...]
    expression: Ast
    gradient: Tuple[Tuple[int, Ast], ...]
    hessian: Tuple[Tuple[int, int, Ast], ...]

    def compile(self) -> "ColumnPartials":
        return ColumnPartials(self)


def partial_spec(ast: Ast, args: Sequence[str]) -> PartialSpecSource:
    """
    Build first partials and the half-Hessian of ast over ordered args

    Args:
        ast: Expression tree
        args: Ordered argument names covering every variable of ast

    Returns:
        PartialSpecSource with symbolic zeros dropped
    """
    args = tuple(args)
    missing = variables(ast) - set(args)
    if missing:
        raise UnknownVariableError(f"variables not among arguments: {', '.join(sorted(missing))}")

    gradient = []
    for position, name in enumerate(args):
        derivative = differentiate(ast, name)
        if not _is_const(derivative, 0):
            gradient.append((position, derivative))

    hessian = []
    for i, first in gradient:
        for j, _ in gradient:
            if j < i:
                continue
            second = differentiate(first, args[j])
            if i == j:
                second = simplify(Binary("mul", Const(0.5), second))
            if not _is_const(second, 0):
                hessian.append((i, j, second))

    return PartialSpecSource(
        args=args,
        expression=simplify(ast),
        gradient=tuple(gradient),
        hessian=tuple(hessian),
    )


class ColumnPartials:
    """Compiled value, gradient and half-Hessian evaluators of a PartialSpecSource"""

    def __init__(self, source: PartialSpecSource):
        self.source = source
        self.args = source.args
        self.g_i = np.array([position for position, _ in source.gradient], dtype=np.int64)
        self.h_r = np.array([row for row, _, _ in source.hessian], dtype=np.int64)
        self.h_c = np.array([col for _, col, _ in source.hessian], dtype=np.int64)
        self._value = compile_columns(source.expression)
        self._gradient = [compile_columns(ast) for _, ast in source.gradient]
        self._hessian = [compile_columns(ast) for _, _, ast in source.hessian]

    def evaluate(
        self, bindings: Mapping[str, np.ndarray], n_rows: int, label: Optional[str] = None
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Evaluate the value column and the partial matrices at every row

        Returns:
            (value of length N, gradient N x n_g, half-Hessian N x n_h),
            matrices column-major
        """
        value = self._value(bindings, n_rows, label=label)
        g = np.empty((n_rows, len(self._gradient)), order="F")
        for k, column in enumerate(self._gradient):
            column(bindings, n_rows, out=g[:, k], label=label)
        h = np.empty((n_rows, len(self._hessian)), order="F")
        for k, column in enumerate(self._hessian):
            column(bindings, n_rows, out=h[:, k], label=label)
        return value, g, h


