"""Textual rendering of forelem programs.

Source-level programs print in the DSL accepted by :mod:`forelem.ir.parser`;
transformed programs additionally use index-set notation (``nstar``,
``PA_len``, ``ptr`` ...) that is display-only.
"""
from __future__ import annotations

from .nodes import (
    Assign, BinOp, Condition, Const, DataRef, Extent, FieldRef, FieldValues, For,
    Forelem, Index, Interval, Join, KeyRef, Lens, NStar, Perm, Program, Ptr, Range,
    ReservoirDomain, SeqRef, Var, shift,
)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _split_storages(storages) -> set:
    return {s.name for s in storages if getattr(s, "split", False)}


class Printer:
    def __init__(self, program: Program | None = None, indent: str = "  "):
        self.split = _split_storages(program.storages) if program else set()
        self.indent = indent

    # expressions
    def expr(self, e, prec: int = 0) -> str:
        if isinstance(e, Const):
            return repr(e.value) if isinstance(e.value, float) else str(e.value)
        if isinstance(e, Var):
            return e.name
        if isinstance(e, FieldRef):
            return f"{e.var}.{e.field}"
        if isinstance(e, DataRef):
            return f"{e.binding}({e.var})"
        if isinstance(e, Index):
            if not e.indices:
                return e.array
            return f"{e.array}[{', '.join(self.expr(i) for i in e.indices)}]"
        if isinstance(e, Extent):
            return f"extent({e.reservoir}.{e.field})"
        if isinstance(e, BinOp):
            if e.op in ("min", "cdiv"):
                return f"{e.op}({self.expr(e.lhs)}, {self.expr(e.rhs)})"
            p = _PREC[e.op]
            s = f"{self.expr(e.lhs, p)} {e.op} {self.expr(e.rhs, p + 1)}"
            return f"({s})" if p < prec else s
        if isinstance(e, SeqRef):
            idx = "".join(f"[{self.expr(i)}]" for i in e.indices)
            if e.storage in self.split:
                return f"{e.storage}.{e.field}{idx}"
            return f"{e.storage}{idx}.{e.field}"
        if isinstance(e, KeyRef):
            return f"keyof({e.storage}{''.join(f'[{self.expr(i)}]' for i in e.indices)})"
        if isinstance(e, Interval):
            hi = "inf" if e.hi is None else self.expr(e.hi)
            return f"({self.expr(e.lo)}, {hi})"
        raise TypeError(f"cannot print {e!r}")

    def cond(self, reservoir: str, c: Condition | None) -> str:
        if c is None:
            return reservoir
        if len(c.fields) == 1:
            return f"{reservoir}.{c.fields[0]}[{self.expr(c.values[0])}]"
        fs = ",".join(c.fields)
        vs = ", ".join(self.expr(v) for v in c.values)
        return f"{reservoir}.({fs})[({vs})]"

    def domain(self, d) -> str:
        if isinstance(d, ReservoirDomain):
            return self.cond(d.reservoir, d.cond)
        if isinstance(d, FieldValues):
            return f"{d.reservoir}.{d.field}"
        if isinstance(d, Range):
            return f"range({self.expr(d.lo)}, {self.expr(d.hi)})"
        if isinstance(d, NStar):
            return f"nstar({d.storage}{self._sub(d.prefix)})"
        if isinstance(d, Lens):
            return f"{d.storage}_len{self._sub(d.prefix)}"
        if isinstance(d, Ptr):
            return f"ptr({d.storage}{self._sub(d.prefix)})"
        if isinstance(d, Perm):
            return f"perm({d.storage}, {self.domain(d.inner)})"
        if isinstance(d, Join):
            left = self.cond(d.left, d.left_cond)
            return f"{left}x{d.right}.{d.right_field}[{d.left_field}]"
        raise TypeError(f"cannot print domain {d!r}")

    def _sub(self, idx) -> str:
        return "".join(f"[{self.expr(i)}]" for i in idx)

    # statements
    def stmt(self, s, depth: int) -> list:
        pad = self.indent * depth
        if isinstance(s, Assign):
            return [f"{pad}{self.expr(s.target)} {s.op} {self.expr(s.value)};"]
        if isinstance(s, For):
            if s.descending:
                head = f"for ({s.var} = {self.expr(s.hi)} downto {self.expr(shift(s.lo, 1))})"
            else:
                head = (f"for ({s.var} = {self.expr(s.lo)}; {s.var} < {self.expr(s.hi)}; "
                        f"{s.var}++)")
        elif isinstance(s, Forelem):
            head = f"forelem ({s.var}; {s.var} in {self.domain(s.domain)})"
        else:
            raise TypeError(type(s))
        lines = [f"{pad}{head} {{"]
        for b in s.body:
            lines.extend(self.stmt(b, depth + 1))
        lines.append(f"{pad}}}")
        return lines

    def program(self, p: Program) -> str:
        lines = []
        for r in p.reservoirs:
            src = f" from {r.source}" if r.source else ""
            lines.append(f"reservoir {r.name}({', '.join(r.schema)}){src};")
        for d in p.data:
            lines.append(f"data {d.name}({d.reservoir});")
        for d in p.dense:
            lines.append(f"dense {d.name}[{', '.join(self.expr(x) for x in d.dims)}];")
        for st in p.storages:
            lines.append(f"# storage {st.describe()}")
        for s in p.body:
            lines.extend(self.stmt(s, 0))
        return "\n".join(lines) + "\n"


def pretty_print(program: Program) -> str:
    return Printer(program).program(program)


def format_expr(e, program: Program | None = None) -> str:
    return Printer(program).expr(e)
