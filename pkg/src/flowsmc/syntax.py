"""AST for the source language: expressions, commands, declarations, programs.

Values of all basic types (bool, int, double) are embedded in the reals:
booleans are stored as 1.0 / 0.0, with a static type tag kept on constants
for diagnostics only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union


class ProbError(Exception):
    """Base class for all language-level errors."""


class StaticError(ProbError):
    """Undeclared variable, type mismatch, or other static violation."""


# --------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: float
    type: str = "double"  # "bool" | "int" | "double"


@dataclass(frozen=True)
class UnaryOp:
    op: str  # "-" | "!"
    operand: "Expr"


@dataclass(frozen=True)
class BinaryOp:
    op: str  # + - * / < <= = != >= > && ||
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Indicator:
    """The indicator predicate of a sharp boolean formula: 1 if it holds, else 0.

    Keeping the formula intact (instead of erasing it into an opaque function)
    lets the symbolic propagation pass recover the sharp condition later.
    """

    formula: "Expr"


Expr = Union[Var, Const, UnaryOp, BinaryOp, Indicator]

TRUE = Const(1.0, "bool")
FALSE = Const(0.0, "bool")

COMPARISONS = ("<", "<=", "=", "!=", ">=", ">")
ARITH = ("+", "-", "*", "/")
LOGICAL = ("&&", "||")


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, UnaryOp):
        return free_vars(e.operand)
    if isinstance(e, BinaryOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Indicator):
        return free_vars(e.formula)
    raise TypeError(f"not an expression: {e!r}")


def substitute_expr(e: Expr, var: str, repl: Expr) -> Expr:
    """Capture-free textual substitution of `repl` for every occurrence of `var`."""
    if isinstance(e, Var):
        return repl if e.name == var else e
    if isinstance(e, Const):
        return e
    if isinstance(e, UnaryOp):
        return UnaryOp(e.op, substitute_expr(e.operand, var, repl))
    if isinstance(e, BinaryOp):
        return BinaryOp(e.op, substitute_expr(e.left, var, repl),
                        substitute_expr(e.right, var, repl))
    if isinstance(e, Indicator):
        return Indicator(substitute_expr(e.formula, var, repl))
    raise TypeError(f"not an expression: {e!r}")


def fold_expr(e: Expr, env: Mapping[str, float]) -> Expr:
    """Partially evaluate `e` under known constant variable values.

    Division by zero is left unfolded so the runtime error behaviour of the
    original program is preserved.
    """
    if isinstance(e, Var):
        if e.name in env:
            return Const(float(env[e.name]))
        return e
    if isinstance(e, Const):
        return e
    if isinstance(e, UnaryOp):
        sub = fold_expr(e.operand, env)
        if isinstance(sub, Const):
            if e.op == "-":
                return Const(-sub.value, sub.type if sub.type != "bool" else "double")
            if e.op == "!":
                return Const(0.0 if sub.value != 0.0 else 1.0, "bool")
        return UnaryOp(e.op, sub)
    if isinstance(e, BinaryOp):
        lhs = fold_expr(e.left, env)
        rhs = fold_expr(e.right, env)
        if isinstance(lhs, Const) and isinstance(rhs, Const):
            a, b = lhs.value, rhs.value
            if e.op == "+":
                return Const(a + b)
            if e.op == "-":
                return Const(a - b)
            if e.op == "*":
                return Const(a * b)
            if e.op == "/" and b != 0.0:
                return Const(a / b)
            if e.op in COMPARISONS:
                table = {
                    "<": a < b, "<=": a <= b, "=": a == b,
                    "!=": a != b, ">=": a >= b, ">": a > b,
                }
                return Const(1.0 if table[e.op] else 0.0, "bool")
            if e.op == "&&":
                return Const(1.0 if (a != 0.0 and b != 0.0) else 0.0, "bool")
            if e.op == "||":
                return Const(1.0 if (a != 0.0 or b != 0.0) else 0.0, "bool")
        return BinaryOp(e.op, lhs, rhs)
    if isinstance(e, Indicator):
        sub = fold_expr(e.formula, env)
        if isinstance(sub, Const):
            return Const(1.0 if sub.value != 0.0 else 0.0, "double")
        return Indicator(sub)
    raise TypeError(f"not an expression: {e!r}")


def expr_type(e: Expr, types: Mapping[str, str]) -> str:
    """Static type of `e` given declared variable types; raises StaticError."""
    if isinstance(e, Var):
        if e.name not in types:
            raise StaticError(f"undeclared variable '{e.name}'")
        return types[e.name]
    if isinstance(e, Const):
        return e.type
    if isinstance(e, Indicator):
        expr_type(e.formula, types)
        return "double"
    if isinstance(e, UnaryOp):
        t = expr_type(e.operand, types)
        if e.op == "-":
            if t == "bool":
                raise StaticError("unary '-' applied to a boolean")
            return t
        if e.op == "!":
            if t != "bool":
                raise StaticError("'!' applied to a non-boolean")
            return "bool"
        raise StaticError(f"unknown unary operator '{e.op}'")
    if isinstance(e, BinaryOp):
        lt = expr_type(e.left, types)
        rt = expr_type(e.right, types)
        if e.op in ARITH:
            if "bool" in (lt, rt):
                raise StaticError(f"arithmetic '{e.op}' applied to a boolean")
            if e.op == "/":
                return "double"
            return "int" if lt == rt == "int" else "double"
        if e.op in ("=", "!="):
            if (lt == "bool") != (rt == "bool"):
                raise StaticError(f"'{e.op}' compares a boolean with a number")
            return "bool"
        if e.op in COMPARISONS:
            if "bool" in (lt, rt):
                raise StaticError(f"ordering '{e.op}' applied to a boolean")
            return "bool"
        if e.op in LOGICAL:
            if lt != "bool" or rt != "bool":
                raise StaticError(f"'{e.op}' applied to a non-boolean")
            return "bool"
        raise StaticError(f"unknown binary operator '{e.op}'")
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# commands


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class Draw:
    """Probabilistic assignment: var is sampled from family(params)."""

    var: str
    family: str
    params: tuple


@dataclass(frozen=True)
class Weight:
    pred: Expr  # fuzzy predicate (nonnegative-valued expression)


@dataclass(frozen=True)
class Observe:
    """Sharp conditioning; sugar for Weight(Indicator(formula))."""

    formula: Expr


@dataclass(frozen=True)
class Seq:
    commands: tuple


@dataclass(frozen=True)
class If:
    guard: Expr
    then_branch: "Command"
    else_branch: "Command"


@dataclass(frozen=True)
class IfP:
    """Probabilistic branching; sugar for a fresh Bernoulli draw plus If."""

    prob: float
    then_branch: "Command"
    else_branch: "Command"


@dataclass(frozen=True)
class While:
    guard: Expr
    body: "Command"


Command = Union[Skip, Assign, Draw, Weight, Observe, Seq, If, IfP, While]


@dataclass(frozen=True)
class Decl:
    name: str
    type: str
    init: Const


@dataclass(frozen=True)
class Program:
    decls: tuple
    body: Command
    result: Expr

    @property
    def var_types(self) -> dict:
        return {d.name: d.type for d in self.decls}

    @property
    def initial_state(self) -> dict:
        return {d.name: float(d.init.value) for d in self.decls}


def command_list(c: Command) -> list:
    """Flatten nested Seq nodes into a statement list."""
    if isinstance(c, Seq):
        out = []
        for sub in c.commands:
            out.extend(command_list(sub))
        return out
    if isinstance(c, Skip):
        return []
    return [c]


def seq_of(commands) -> Command:
    flat = []
    for c in commands:
        flat.extend(command_list(c))
    if not flat:
        return Skip()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))
