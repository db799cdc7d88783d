"""Tiny arithmetic expression trees for user-supplied dynamics.

Scenario files describe nonlinear maps as JSON trees: {"const": c},
{"x": i}, {"u": j}, or {"op": name, "args": [...]} with ops add, sub, mul,
div, pow, neg.  add and mul take two or more arguments, sub/div/pow exactly
two, neg one.  Evaluation is vectorized over batches of states and
controls, and parse errors carry the JSON path of the offending node so a
scenario author can find it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Expr", "ExprError", "parse_expr", "parse_vector", "linear_exprs"]

_ARITY = {"add": (2, None), "mul": (2, None), "sub": (2, 2), "div": (2, 2),
          "pow": (2, 2), "neg": (1, 1)}


class ExprError(ValueError):
    """Malformed expression tree; the message names the JSON path."""


@dataclass(frozen=True)
class Expr:
    kind: str
    value: float = 0.0
    index: int = 0
    args: tuple = ()

    def eval(self, x, u=None):
        """Evaluate over a batch: x is (N, n), u is (N, m); returns (N,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "const":
            return np.full(x.shape[0], self.value)
        if self.kind == "x":
            return x[:, self.index].copy()
        if self.kind == "u":
            if u is None:
                raise ExprError("expression references u but no controls given")
            return np.atleast_2d(np.asarray(u, dtype=float))[:, self.index]
        vals = [a.eval(x, u) for a in self.args]
        if self.kind == "add":
            out = vals[0]
            for v in vals[1:]:
                out = out + v
            return out
        if self.kind == "mul":
            out = vals[0]
            for v in vals[1:]:
                out = out * v
            return out
        if self.kind == "sub":
            return vals[0] - vals[1]
        if self.kind == "div":
            return vals[0] / vals[1]
        if self.kind == "pow":
            return np.power(vals[0], vals[1])
        return -vals[0]  # neg

    def max_indices(self):
        """(largest x index, largest u index) referenced, -1 when absent."""
        if self.kind == "x":
            return self.index, -1
        if self.kind == "u":
            return -1, self.index
        xi, ui = -1, -1
        for a in self.args:
            ax, au = a.max_indices()
            xi, ui = max(xi, ax), max(ui, au)
        return xi, ui


def parse_expr(obj, path="expr") -> Expr:
    if not isinstance(obj, dict):
        raise ExprError(f"{path}: expression nodes must be JSON objects")
    keys = set(obj)
    if keys == {"const"}:
        try:
            return Expr("const", value=float(obj["const"]))
        except (TypeError, ValueError):
            raise ExprError(f"{path}.const: not a number") from None
    if keys == {"x"} or keys == {"u"}:
        kind = "x" if "x" in keys else "u"
        idx = obj[kind]
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            raise ExprError(f"{path}.{kind}: index must be an integer >= 0")
        return Expr(kind, index=idx)
    if keys == {"op", "args"}:
        op = obj["op"]
        if op not in _ARITY:
            raise ExprError(f"{path}.op: unknown operation {op!r}")
        args = obj["args"]
        if not isinstance(args, list):
            raise ExprError(f"{path}.args: must be a list")
        lo, hi = _ARITY[op]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = f"exactly {lo}" if hi == lo else f"at least {lo}"
            raise ExprError(f"{path}.args: {op} takes {want} arguments")
        return Expr(op, args=tuple(parse_expr(a, f"{path}.args[{i}]")
                                   for i, a in enumerate(args)))
    raise ExprError(
        f"{path}: expected one of const / x / u / op+args, got keys {sorted(keys)}")


def parse_vector(objs, path="exprs"):
    """A list of trees, one per output coordinate."""
    if not isinstance(objs, list) or not objs:
        raise ExprError(f"{path}: must be a nonempty list of expressions")
    return tuple(parse_expr(o, f"{path}[{i}]") for i, o in enumerate(objs))


def linear_exprs(a, b=None):
    """Trees computing A x (+ B u): handy for linear cross-checks."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = None if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    rows = []
    for i in range(a.shape[0]):
        terms = [Expr("mul", args=(Expr("const", value=a[i, j]), Expr("x", index=j)))
                 for j in range(a.shape[1]) if a[i, j] != 0.0]
        if b is not None:
            terms += [Expr("mul", args=(Expr("const", value=b[i, j]),
                                        Expr("u", index=j)))
                      for j in range(b.shape[1]) if b[i, j] != 0.0]
        if not terms:
            rows.append(Expr("const", value=0.0))
        elif len(terms) == 1:
            rows.append(terms[0])
        else:
            rows.append(Expr("add", args=tuple(terms)))
    return tuple(rows)
