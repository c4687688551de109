"""Expression trees for guards, weights, rates, bounds, and updates.

Expressions are immutable and structurally comparable, which gives the
parse/print/parse fixpoint for free. `bind` compiles an expression against
a constant environment and a variable slot map into a plain closure over
the state tuple, so repeated evaluation during composition carries no
interpretation overhead beyond the closure calls themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

from ..errors import ModelError


@dataclass(frozen=True)
class Lit:
    value: Union[int, float, bool]


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # '||' '&&' '==' '!=' '<' '<=' '>' '>=' '+' '-' '*' '/' '%'
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str  # 'min' 'max' 'floor' 'ceil'
    args: tuple["Expr", ...]


Expr = Union[Lit, Ref, Unary, Binary, Call]

_FUNC_ARITY = {"min": 2, "max": 2, "floor": 1, "ceil": 1}


def free_names(expr: Expr) -> set[str]:
    if isinstance(expr, Lit):
        return set()
    if isinstance(expr, Ref):
        return {expr.name}
    if isinstance(expr, Unary):
        return free_names(expr.operand)
    if isinstance(expr, Binary):
        return free_names(expr.left) | free_names(expr.right)
    if isinstance(expr, Call):
        out: set[str] = set()
        for a in expr.args:
            out |= free_names(a)
        return out
    raise TypeError(f"not an expression: {expr!r}")


def infer_kind(expr: Expr, kinds: dict[str, str]) -> str:
    """Return 'bool', 'int', or 'real'. `kinds` maps names to their kind."""
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return "bool"
        return "int" if isinstance(expr.value, int) else "real"
    if isinstance(expr, Ref):
        try:
            return kinds[expr.name]
        except KeyError:
            raise ModelError(f"undeclared name {expr.name!r}") from None
    if isinstance(expr, Unary):
        k = infer_kind(expr.operand, kinds)
        if expr.op == "!":
            if k != "bool":
                raise ModelError("operator '!' needs a boolean operand")
            return "bool"
        if k == "bool":
            raise ModelError("unary '-' needs a numeric operand")
        return k
    if isinstance(expr, Binary):
        kl = infer_kind(expr.left, kinds)
        kr = infer_kind(expr.right, kinds)
        op = expr.op
        if op in ("&&", "||"):
            if kl != "bool" or kr != "bool":
                raise ModelError(f"operator {op!r} needs boolean operands")
            return "bool"
        if op in ("==", "!="):
            if (kl == "bool") != (kr == "bool"):
                raise ModelError("cannot compare boolean with number")
            return "bool"
        if op in ("<", "<=", ">", ">="):
            if kl == "bool" or kr == "bool":
                raise ModelError(f"operator {op!r} needs numeric operands")
            return "bool"
        if kl == "bool" or kr == "bool":
            raise ModelError(f"operator {op!r} needs numeric operands")
        if op == "/":
            return "real"
        if op == "%":
            if kl != "int" or kr != "int":
                raise ModelError("operator '%' needs integer operands")
            return "int"
        return "real" if "real" in (kl, kr) else "int"
    if isinstance(expr, Call):
        arity = _FUNC_ARITY.get(expr.func)
        if arity is None:
            raise ModelError(f"unknown function {expr.func!r}")
        if len(expr.args) != arity:
            raise ModelError(f"{expr.func} takes {arity} argument(s)")
        arg_kinds = [infer_kind(a, kinds) for a in expr.args]
        if "bool" in arg_kinds:
            raise ModelError(f"{expr.func} needs numeric arguments")
        if expr.func in ("floor", "ceil"):
            return "int"
        return "real" if "real" in arg_kinds else "int"
    raise TypeError(f"not an expression: {expr!r}")


def bind(expr: Expr, consts: dict, slots: dict[str, int]) -> Callable:
    """Compile `expr` into a closure over the state tuple.

    Names resolve to constants first, then to state slots; unresolved names
    are a link error. Boolean values flow as ints 0/1.
    """
    if isinstance(expr, Lit):
        v = int(expr.value) if isinstance(expr.value, bool) else expr.value
        return lambda state, _v=v: _v
    if isinstance(expr, Ref):
        if expr.name in consts:
            v = consts[expr.name]
            v = int(v) if isinstance(v, bool) else v
            return lambda state, _v=v: _v
        if expr.name in slots:
            i = slots[expr.name]
            return lambda state, _i=i: state[_i]
        raise ModelError(f"undeclared name {expr.name!r}")
    if isinstance(expr, Unary):
        f = bind(expr.operand, consts, slots)
        if expr.op == "-":
            return lambda state: -f(state)
        if expr.op == "!":
            return lambda state: 0 if f(state) else 1
        raise ModelError(f"unknown unary operator {expr.op!r}")
    if isinstance(expr, Binary):
        fl = bind(expr.left, consts, slots)
        fr = bind(expr.right, consts, slots)
        op = expr.op
        if op == "+":
            return lambda state: fl(state) + fr(state)
        if op == "-":
            return lambda state: fl(state) - fr(state)
        if op == "*":
            return lambda state: fl(state) * fr(state)
        if op == "/":
            return lambda state: fl(state) / fr(state)
        if op == "%":
            return lambda state: fl(state) % fr(state)
        if op == "==":
            return lambda state: 1 if fl(state) == fr(state) else 0
        if op == "!=":
            return lambda state: 1 if fl(state) != fr(state) else 0
        if op == "<":
            return lambda state: 1 if fl(state) < fr(state) else 0
        if op == "<=":
            return lambda state: 1 if fl(state) <= fr(state) else 0
        if op == ">":
            return lambda state: 1 if fl(state) > fr(state) else 0
        if op == ">=":
            return lambda state: 1 if fl(state) >= fr(state) else 0
        if op == "&&":
            return lambda state: 1 if (fl(state) and fr(state)) else 0
        if op == "||":
            return lambda state: 1 if (fl(state) or fr(state)) else 0
        raise ModelError(f"unknown operator {op!r}")
    if isinstance(expr, Call):
        fns = [bind(a, consts, slots) for a in expr.args]
        if expr.func == "min":
            fa, fb = fns
            return lambda state: min(fa(state), fb(state))
        if expr.func == "max":
            fa, fb = fns
            return lambda state: max(fa(state), fb(state))
        if expr.func == "floor":
            (fa,) = fns
            return lambda state: math.floor(fa(state))
        if expr.func == "ceil":
            (fa,) = fns
            return lambda state: math.ceil(fa(state))
        raise ModelError(f"unknown function {expr.func!r}")
    raise TypeError(f"not an expression: {expr!r}")


def eval_const(expr: Expr, consts: dict):
    """Evaluate a variable-free expression against the constant environment."""
    extra = free_names(expr) - consts.keys()
    if extra:
        raise ModelError(
            "expression must be constant, uses " + ", ".join(sorted(extra))
        )
    return bind(expr, consts, {})(())


# Printing: parenthesize only where precedence demands, so the output stays
# readable and reparses to the identical tree.

_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
    "%": 6,
}


def to_text(expr: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        return repr(expr.value)
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, Unary):
        inner = to_text(expr.operand, parent_prec=7)
        return f"{expr.op}{inner}"
    if isinstance(expr, Binary):
        prec = _PRECEDENCE[expr.op]
        left = to_text(expr.left, prec, right_side=False)
        right = to_text(expr.right, prec, right_side=True)
        text = f"{left} {expr.op} {right}"
        # Same-precedence operators associate left; a right child at equal
        # precedence (or any child at lower precedence) needs parentheses.
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({text})"
        return text
    if isinstance(expr, Call):
        args = ", ".join(to_text(a) for a in expr.args)
        return f"{expr.func}({args})"
    raise TypeError(f"not an expression: {expr!r}")
