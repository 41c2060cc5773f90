"""Compile lowered loop nests to Python functions.

Lowered programs use only counted loops, assignments, array reads and
arithmetic, so they can be translated into a single Python function with
local variables.  The generated code keeps the interpreter's checks: dense
accesses are bounds checked, component reads reject negative indices and
unbound names are reported when first read.
"""
from __future__ import annotations

from ..ir.nodes import Assign, BinOp, Const, For, Index, Program, Var


class Unsupported(Exception):
    pass


class _Gen:
    def __init__(self, components, dense):
        self.components = components  # names read as components
        self.dense = dense  # name -> dims
        self.lines = []
        self.tmp = 0
        self.names = set()
        self.used_comps = set()
        self.used_dense = set()

    def fresh(self):
        self.tmp += 1
        return f"_t{self.tmp}"

    def emit(self, depth, text):
        self.lines.append("    " * depth + text)

    # expressions
    def expr(self, e) -> str:
        if isinstance(e, Const):
            return repr(e.value)
        if isinstance(e, Var):
            self.names.add(e.name)
            return f"v_{e.name}"
        if isinstance(e, BinOp):
            a, b = self.expr(e.lhs), self.expr(e.rhs)
            if e.op in ("+", "-", "*", "/"):
                return f"({a} {e.op} {b})"
            if e.op == "min":
                return f"_min({a}, {b})"
            if e.op == "cdiv":
                return f"(-(-{a} // {b}))"
            raise Unsupported(e.op)
        if isinstance(e, Index):
            if e.array in self.components:
                return self.component(e)
            return f"d_{e.array}[{self.flat(e)}]"
        raise Unsupported(type(e).__name__)

    def component(self, e) -> str:
        self.used_comps.add(e.array)
        ref = f"c_{e.array}"
        for i in e.indices:
            t = self.fresh()
            ref = f"{ref}[{t} if ({t} := {self.expr(i)}) >= 0 else _neg({e.array!r}, {t})]"
        return ref

    def flat(self, e) -> str:
        dims = self.dense.get(e.array)
        if dims is None:
            raise Unsupported(e.array)
        if len(e.indices) != len(dims) or len(dims) not in (1, 2):
            raise Unsupported(e.array)
        self.used_dense.add(e.array)
        name = e.array
        if len(dims) == 1:
            t = self.fresh()
            return (f"{t} if 0 <= ({t} := {self.expr(e.indices[0])}) < n_{name}_0 "
                    f"else _oob({name!r}, ({t},), n_{name})")
        a, b = self.fresh(), self.fresh()
        i, j = self.expr(e.indices[0]), self.expr(e.indices[1])
        return (f"({a} * n_{name}_1 + {b}) if (0 <= ({a} := {i}) < n_{name}_0 "
                f"and 0 <= ({b} := {j}) < n_{name}_1) else _oob({name!r}, ({a}, {b}), n_{name})")

    # statements
    def block(self, body, depth):
        if not body:
            self.emit(depth, "pass")
        for s in body:
            self.stmt(s, depth)

    def stmt(self, s, depth):
        if isinstance(s, For):
            self.names.add(s.var)
            rng = f"range({self.expr(s.lo)}, {self.expr(s.hi)})"
            if s.descending:
                rng = f"reversed({rng})"
            self.emit(depth, f"for v_{s.var} in {rng}:")
            self.block(s.body, depth + 1)
        elif isinstance(s, Assign):
            op = s.op
            if isinstance(s.target, Var):
                self.names.add(s.target.name)
                target = f"v_{s.target.name}"
            elif isinstance(s.target, Index) and s.target.array not in self.components:
                target = f"d_{s.target.array}[{self.flat(s.target)}]"
            else:
                raise Unsupported("assignment target")
            self.emit(depth, f"{target} {op} {self.expr(s.value)}")
        else:
            raise Unsupported(type(s).__name__)


def _neg(name, i):
    raise IndexError(f"{name}[{i}] out of bounds")


def _oob(name, idx, dims):
    from .interpreter import ExecutionError
    shown = ", ".join(str(i) for i in idx)
    bound = dims[0] if len(dims) == 1 else dims
    raise ExecutionError(f"{name}[{shown}] out of bounds {bound}")


def compile_lowered(program: Program, components, dense: dict):
    """A function ``f(env, comps, data, dims)`` running ``program``, or None.

    ``components`` is the set of component names and ``dense`` maps dense
    operand names to their dims (only the rank is used).  At run time
    ``env`` holds sizes and scalar components, ``comps`` the component
    sequences, ``data`` the flat dense lists and ``dims`` their extents.
    """
    g = _Gen(set(components), dense)
    try:
        g.block(program.body, 1)
    except Unsupported:
        return None
    head = ["def _run(env, comps, data, dims):"]
    for name in sorted(g.names):
        head.append(f"    if {name!r} in env: v_{name} = env[{name!r}]")
    for name in sorted(g.used_comps):
        head.append(f"    c_{name} = comps[{name!r}]")
    for name in sorted(g.used_dense):
        head.append(f"    d_{name} = data[{name!r}]")
        head.append(f"    n_{name} = dims[{name!r}]")
        for k in range(len(dense[name])):
            head.append(f"    n_{name}_{k} = n_{name}[{k}]")
    src = "\n".join(head + g.lines) + "\n"
    scope = {"_min": min, "_neg": _neg, "_oob": _oob}
    exec(compile(src, "<lowered>", "exec"), scope)
    fn = scope["_run"]
    fn.source = src
    return fn
