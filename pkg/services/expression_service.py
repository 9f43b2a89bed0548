"""Expression language for chart coefficient functions.

Coefficients of forms, vector fields and maps are immutable expression
trees over chart coordinate names. This module parses them from text,
differentiates them exactly and evaluates them in double precision.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' factor)?
    base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
"""
import math
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, ClassVar, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}
CONSTANTS: Dict[str, float] = {"pi": math.pi, "e": math.e}

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ExpressionError(ValueError):
    """Base class for expression parsing and evaluation failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class UnboundVariableError(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"variable {name!r} is not bound")
        self.name = name


class EvaluationDomainError(ExpressionError):
    def __init__(self, subterm: "Expr", reason: str):
        self.subterm = to_text(subterm)
        super().__init__(f"{reason} in {self.subterm}")


class Expr:
    """Base of the immutable expression tree.

    Arithmetic operators build simplified trees (constant folding, 0/1
    identities, double negation), so coefficient algebra elsewhere can be
    written with ``+``, ``*`` and friends.
    """

    kind: ClassVar[str] = "expr"

    @property
    def children(self) -> Tuple["Expr", ...]:
        return ()

    def __str__(self):
        return to_text(self)

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, eq=True)
class Constant(Expr):
    value: float
    kind: ClassVar[str] = "constant"


@dataclass(frozen=True, eq=True)
class Variable(Expr):
    name: str
    kind: ClassVar[str] = "variable"


@dataclass(frozen=True, eq=True)
class _Binary(Expr):
    left: Expr
    right: Expr

    @property
    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    kind = "add"


class Sub(_Binary):
    kind = "sub"


class Mul(_Binary):
    kind = "mul"


class Div(_Binary):
    kind = "div"


class Pow(_Binary):
    kind = "pow"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr
    kind: ClassVar[str] = "neg"

    @property
    def children(self):
        return (self.operand,)


@dataclass(frozen=True, eq=True)
class Call(Expr):
    function: str
    argument: Expr
    kind: ClassVar[str] = "call"

    @property
    def children(self):
        return (self.argument,)


ZERO = Constant(0.0)
ONE = Constant(1.0)
TWO = Constant(2.0)

ExprLike = Union[Expr, int, float]


def as_expr(value: ExprLike) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Constant(float(value))
    raise TypeError(f"cannot use {type(value).__name__} as an expression")


def is_constant(expr: Expr, value: Optional[float] = None) -> bool:
    if not isinstance(expr, Constant):
        return False
    return value is None or expr.value == value


# Simplifying constructors


def _folded(value: float, fallback: Expr) -> Expr:
    return Constant(value) if math.isfinite(value) else fallback


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return _folded(a.value + b.value, Add(a, b))
    if is_constant(a, 0.0):
        return b
    if is_constant(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.operand)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return _folded(a.value - b.value, Sub(a, b))
    if is_constant(b, 0.0):
        return a
    if is_constant(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.operand)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return _folded(a.value * b.value, Mul(a, b))
    if is_constant(a, 0.0) or is_constant(b, 0.0):
        return ZERO
    if is_constant(a, 1.0):
        return b
    if is_constant(b, 1.0):
        return a
    if is_constant(a, -1.0):
        return neg(b)
    if is_constant(b, -1.0):
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.operand, b.operand)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_constant(b, 0.0):
        raise ExpressionError(f"division of {to_text(a)} by the constant 0")
    if isinstance(a, Constant) and isinstance(b, Constant):
        return _folded(a.value / b.value, Div(a, b))
    if is_constant(a, 0.0):
        return ZERO
    if is_constant(b, 1.0):
        return a
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    if is_constant(b, 0.0):
        return ONE
    if is_constant(b, 1.0):
        return a
    if is_constant(a, 1.0):
        return ONE
    if isinstance(a, Constant) and isinstance(b, Constant):
        try:
            return _folded(math.pow(a.value, b.value), Pow(a, b))
        except (ValueError, OverflowError, ZeroDivisionError):
            return Pow(a, b)
    return Pow(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Constant):
        return Constant(-a.value) if a.value != 0.0 else ZERO
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def call(function: str, argument: Expr) -> Expr:
    if function not in FUNCTIONS:
        raise ExpressionError(f"unknown function {function!r}")
    if isinstance(argument, Constant):
        try:
            return _folded(FUNCTIONS[function](argument.value), Call(function, argument))
        except (ValueError, OverflowError):
            pass
    return Call(function, argument)


def var(name: str) -> Variable:
    return Variable(name)


# Parsing


def _literal_zero(expr: Expr) -> bool:
    while isinstance(expr, Neg):
        expr = expr.operand
    return is_constant(expr, 0.0)


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = set(variables)
        self.tokens = self._tokenize()
        self.index = 0

    def _offset(self, position: int) -> int:
        return len(self.text[:position].encode("utf-8"))

    def _tokenize(self) -> List[Tuple[str, str, int]]:
        tokens = []
        position = 0
        while True:
            while position < len(self.text) and self.text[position].isspace():
                position += 1
            if position >= len(self.text):
                break
            match = _TOKEN.match(self.text, position)
            if match is None or match.end() == position:
                raise ExpressionSyntaxError(
                    f"unexpected character {self.text[position]!r}", self._offset(position)
                )
            kind = match.lastgroup
            tokens.append((kind, match.group(kind), match.start(kind)))
            position = match.end()
        tokens.append(("end", "", len(self.text)))
        return tokens

    def _peek(self) -> Tuple[str, str, int]:
        return self.tokens[self.index]

    def _advance(self) -> Tuple[str, str, int]:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _expect(self, text: str) -> None:
        kind, value, position = self._advance()
        if value != text or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise ExpressionSyntaxError(f"expected {text!r}, found {found}", self._offset(position))

    def parse(self) -> Expr:
        expr = self._expr()
        kind, value, position = self._peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {value!r}", self._offset(position))
        return expr

    def _expr(self) -> Expr:
        node = self._term()
        while self._peek()[1] in ("+", "-") and self._peek()[0] == "op":
            op = self._advance()[1]
            right = self._term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def _term(self) -> Expr:
        node = self._factor()
        while self._peek()[1] in ("*", "/") and self._peek()[0] == "op":
            op, position = self._advance()[1:]
            right = self._factor()
            if op == "/":
                if _literal_zero(right):
                    raise ExpressionSyntaxError("division by the literal 0", self._offset(position))
                node = Div(node, right)
            else:
                node = Mul(node, right)
        return node

    def _factor(self) -> Expr:
        base = self._base()
        if self._peek()[:2] == ("op", "^"):
            self._advance()
            return Pow(base, self._factor())
        return base

    def _base(self) -> Expr:
        kind, value, position = self._advance()
        if kind == "number":
            return Constant(float(value))
        if kind == "ident":
            if self._peek()[:2] == ("op", "("):
                if value not in FUNCTIONS:
                    raise UnknownIdentifierError(value, self._offset(position))
                self._advance()
                argument = self._expr()
                self._expect(")")
                return Call(value, argument)
            if value in self.variables:
                return Variable(value)
            if value in CONSTANTS:
                return Constant(CONSTANTS[value])
            if value in FUNCTIONS:
                raise ExpressionSyntaxError(f"function {value!r} needs an argument", self._offset(position))
            raise UnknownIdentifierError(value, self._offset(position))
        if kind == "op" and value == "(":
            inner = self._expr()
            self._expect(")")
            return inner
        if kind == "op" and value == "-":
            return Neg(self._base())
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionSyntaxError(f"unexpected {found}", self._offset(position))


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` over the declared ``variables``.

    Declared variables shadow the constants ``pi`` and ``e``.
    """
    names = list(variables)
    if len(set(names)) != len(names):
        raise ExpressionError(f"variables are not distinct: {names}")
    for name in names:
        if not _IDENTIFIER.match(name):
            raise ExpressionError(f"{name!r} is not an identifier")
    return _Parser(text, names).parse()


# Printing

_PRECEDENCE = {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 4}


def _precedence(expr: Expr) -> int:
    return _PRECEDENCE.get(expr.kind, 5)


def _wrap(expr: Expr, parenthesize: bool) -> str:
    text = to_text(expr)
    return f"({text})" if parenthesize else text


def to_text(expr: Expr) -> str:
    """Render ``expr`` in the input grammar; ``parse(to_text(e))`` evaluates like ``e``."""
    if isinstance(expr, Constant):
        if expr.value < 0:
            return f"-{abs(expr.value)!r}"
        return repr(expr.value)
    if isinstance(expr, Variable):
        return expr.name
    if isinstance(expr, Neg):
        return "-" + _wrap(expr.operand, _precedence(expr.operand) < 5)
    if isinstance(expr, Call):
        return f"{expr.function}({to_text(expr.argument)})"
    if isinstance(expr, Pow):
        left = _wrap(expr.left, _precedence(expr.left) < 5)
        right = _wrap(expr.right, _precedence(expr.right) < 4)
        return f"{left}^{right}"
    symbol = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[expr.kind]
    own = _precedence(expr)
    left = _wrap(expr.left, _precedence(expr.left) < own)
    right = _wrap(expr.right, _precedence(expr.right) <= own)
    return f"{left} {symbol} {right}"


# Structure


def free_variables(expr: Expr) -> FrozenSet[str]:
    cached = expr.__dict__.get("_free")
    if cached is not None:
        return cached
    if isinstance(expr, Variable):
        result = frozenset((expr.name,))
    else:
        result = frozenset().union(*(free_variables(child) for child in expr.children))
    object.__setattr__(expr, "_free", result)
    return result


def substitute(expr: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneously replace variables by expressions."""
    if not free_variables(expr) & set(mapping):
        return expr
    if isinstance(expr, Variable):
        return mapping[expr.name]
    if isinstance(expr, Neg):
        return neg(substitute(expr.operand, mapping))
    if isinstance(expr, Call):
        return call(expr.function, substitute(expr.argument, mapping))
    builder = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": power}[expr.kind]
    return builder(substitute(expr.left, mapping), substitute(expr.right, mapping))


# Differentiation


@singledispatch
def _derivative(expr: Expr, name: str) -> Expr:
    raise ExpressionError(f"cannot differentiate a {type(expr).__name__}")


@_derivative.register
def _(expr: Constant, name: str) -> Expr:
    return ZERO


@_derivative.register
def _(expr: Variable, name: str) -> Expr:
    return ONE if expr.name == name else ZERO


@_derivative.register
def _(expr: Add, name: str) -> Expr:
    return add(diff(expr.left, name), diff(expr.right, name))


@_derivative.register
def _(expr: Sub, name: str) -> Expr:
    return sub(diff(expr.left, name), diff(expr.right, name))


@_derivative.register
def _(expr: Mul, name: str) -> Expr:
    return add(mul(diff(expr.left, name), expr.right), mul(expr.left, diff(expr.right, name)))


@_derivative.register
def _(expr: Div, name: str) -> Expr:
    numerator = sub(mul(diff(expr.left, name), expr.right), mul(expr.left, diff(expr.right, name)))
    return div(numerator, power(expr.right, TWO))


@_derivative.register
def _(expr: Pow, name: str) -> Expr:
    base, exponent = expr.left, expr.right
    if name not in free_variables(exponent):
        return mul(mul(exponent, power(base, sub(exponent, ONE))), diff(base, name))
    # u^v (v' log u + v u'/u)
    return mul(
        expr,
        add(
            mul(diff(exponent, name), call("log", base)),
            div(mul(exponent, diff(base, name)), base),
        ),
    )


@_derivative.register
def _(expr: Neg, name: str) -> Expr:
    return neg(diff(expr.operand, name))


@_derivative.register
def _(expr: Call, name: str) -> Expr:
    u = expr.argument
    du = diff(u, name)
    if is_constant(du, 0.0):
        return ZERO
    outer = {
        "sin": lambda: call("cos", u),
        "cos": lambda: neg(call("sin", u)),
        "tan": lambda: div(ONE, power(call("cos", u), TWO)),
        "exp": lambda: expr,
        "log": lambda: div(ONE, u),
        "sqrt": lambda: div(ONE, mul(TWO, expr)),
    }[expr.function]()
    return mul(outer, du)


def diff(expr: Expr, name: str) -> Expr:
    """Exact partial derivative of ``expr`` with respect to ``name``."""
    if name not in free_variables(expr):
        return ZERO
    return _derivative(expr, name)


# Evaluation

Evaluator = Callable[[object], float]


def _domain_checked(expr: Expr, function: Callable[[float], float]) -> Callable[[float], float]:
    def apply(x: float) -> float:
        try:
            return function(x)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise EvaluationDomainError(expr, f"domain error ({exc}) at argument {x!r}") from None

    return apply


def _compile(expr: Expr, index: Optional[Mapping[str, int]]) -> Evaluator:
    if isinstance(expr, Constant):
        value = expr.value
        return lambda binding: value
    if isinstance(expr, Variable):
        name = expr.name
        if index is None:

            def lookup(binding):
                try:
                    return binding[name]
                except KeyError:
                    raise UnboundVariableError(name) from None

            return lookup
        if name not in index:

            def unbound(binding):
                raise UnboundVariableError(name)

            return unbound
        position = index[name]
        return lambda binding: binding[position]
    if isinstance(expr, Neg):
        operand = _compile(expr.operand, index)
        return lambda binding: -operand(binding)
    if isinstance(expr, Call):
        argument = _compile(expr.argument, index)
        function = FUNCTIONS[expr.function]
        if expr.function == "log":

            def log(binding):
                x = argument(binding)
                if x <= 0.0:
                    raise EvaluationDomainError(expr, f"log of non-positive value {x!r}")
                return math.log(x)

            return log
        if expr.function == "sqrt":

            def sqrt(binding):
                x = argument(binding)
                if x < 0.0:
                    raise EvaluationDomainError(expr, f"sqrt of negative value {x!r}")
                return math.sqrt(x)

            return sqrt
        checked = _domain_checked(expr, function)
        return lambda binding: checked(argument(binding))
    left = _compile(expr.left, index)
    right = _compile(expr.right, index)
    if isinstance(expr, Add):
        return lambda binding: left(binding) + right(binding)
    if isinstance(expr, Sub):
        return lambda binding: left(binding) - right(binding)
    if isinstance(expr, Mul):
        return lambda binding: left(binding) * right(binding)
    if isinstance(expr, Div):

        def quotient(binding):
            denominator = right(binding)
            if denominator == 0.0:
                raise EvaluationDomainError(expr, "division by zero")
            return left(binding) / denominator

        return quotient

    def pow_(binding):
        base, exponent = left(binding), right(binding)
        try:
            return math.pow(base, exponent)
        except (ValueError, OverflowError, ZeroDivisionError):
            raise EvaluationDomainError(expr, f"power {base!r}^{exponent!r} is undefined") from None

    return pow_


def compiled(expr: Expr, coordinates: Optional[Sequence[str]] = None) -> Evaluator:
    """Cached evaluator: by name over a mapping, or by position over ``coordinates``."""
    cache = expr.__dict__.get("_compiled")
    if cache is None:
        cache = {}
        object.__setattr__(expr, "_compiled", cache)
    key = None if coordinates is None else tuple(coordinates)
    function = cache.get(key)
    if function is None:
        index = None if key is None else {name: i for i, name in enumerate(key)}
        function = _compile(expr, index)
        cache[key] = function
    return function


def evaluate(expr: Expr, binding: Mapping[str, float]) -> float:
    """Evaluate ``expr`` against a name -> value binding."""
    return float(compiled(expr)(binding))


def evaluate_at(expr: Expr, coordinates: Sequence[str], point: Sequence[float]) -> float:
    """Evaluate ``expr`` at a point given in chart-coordinate order."""
    return float(compiled(expr, coordinates)(point))
