"""Reference interpreter for forelem programs.

Programs are compiled once into nested closures over an environment dict.
The same interpreter runs source programs (over reservoirs), transformed
programs (over symbolic storage instances) and lowered programs (over
physical components).  Unordered loops are executed in ascending order.
"""
from __future__ import annotations

import re
from collections import Counter
from typing import Mapping, Optional

import numpy as np

from ..ir.nodes import (
    Assign, BinOp, Const, DataRef, Extent, FieldRef, FieldValues, For, Forelem, Index,
    Interval, Join, KeyRef, Lens, NStar, Perm, Program, Ptr, Range, ReservoirDomain, SeqRef,
    Var,
)
from ..ir.reservoir import ReservoirError, TupleReservoir
from ..transform.storage import StorageInstance, static_value
from .compiled import compile_lowered

_COMPILED = {}
_UNBOUND = re.compile(r"'v_(\w+)'")


def _compiled(program, components, dense):
    """Cached compiled form of a lowered program (None when not lowered)."""
    key = (id(program), tuple(sorted(components)))
    hit = _COMPILED.get(key)
    if hit is None or hit[0] is not program:
        if len(_COMPILED) > 4096:
            _COMPILED.clear()
        hit = (program, compile_lowered(program, components, dense))
        _COMPILED[key] = hit
    return hit[1]


class ExecutionError(RuntimeError):
    pass


class Trace:
    """Leaf visits and empty loop executions observed during a run."""

    def __init__(self):
        self.visits = Counter()
        self.empty_loops = 0

    def visit(self, binding, src, value):
        self.visits[(binding, src, value)] += 1


class _Dense:
    __slots__ = ("data", "dims", "name")

    def __init__(self, name, data, dims):
        self.name, self.data, self.dims = name, data, dims


def bind_reservoirs(program: Program, reservoirs: Mapping[str, TupleReservoir]) -> dict:
    """Add projections declared by ``program`` to the bound reservoirs."""
    out = dict(reservoirs)
    pending = [r for r in program.reservoirs if r.name not in out]
    while pending:
        progress = False
        for decl in list(pending):
            if decl.source is None:
                raise ExecutionError(f"reservoir {decl.name} is not bound")
            if decl.source in out:
                out[decl.name] = out[decl.source].project(decl.schema)
                pending.remove(decl)
                progress = True
        if not progress:
            raise ExecutionError("cyclic reservoir projections")
    return out


class Interpreter:
    """Executes one program against bound operands.

    ``arrays`` maps dense operand names to numpy arrays, which are updated in
    place.  ``components`` maps physical component names to sequences or
    scalars (lowered programs only).
    """

    def __init__(self, program: Program, reservoirs: Optional[Mapping] = None,
                 arrays: Optional[Mapping] = None, sizes: Optional[Mapping] = None,
                 components: Optional[Mapping] = None, trace: Optional[Trace] = None):
        self.program = program
        self.reservoirs = bind_reservoirs(program, reservoirs or {})
        self.sizes = dict(sizes or {})
        self.components = dict(components or {})
        self.trace = trace
        self.arrays = arrays if arrays is not None else {}
        self.instances = {}
        self._dense = {}
        for decl in program.dense:
            if decl.name in self.components:
                continue
            if decl.name not in self.arrays:
                raise ExecutionError(f"dense operand {decl.name} is not bound")
            dims = tuple(int(static_value(d, self.sizes, self.reservoirs)) for d in decl.dims)
            arr = self.arrays[decl.name]
            if arr.size != int(np.prod(dims)) or arr.ndim != len(dims) and arr.ndim != 1:
                raise ExecutionError(
                    f"operand {decl.name} has shape {arr.shape}, expected {dims}")
            self._dense[decl.name] = _Dense(decl.name, arr.ravel().tolist(), dims)

    # --------------------------------------------------------------------
    def run(self) -> dict:
        env = dict(self.sizes)
        for name, v in self.components.items():
            if not isinstance(v, (list, tuple, np.ndarray)):
                env[name] = v
        fast = None
        if self.trace is None:
            dense = {n: d.dims for n, d in self._dense.items()}
            fast = _compiled(self.program, self.components, dense)
        if fast is not None:
            self._run_compiled(fast, env)
        else:
            try:
                self._block(self.program.body, {})(env)
            except KeyError as exc:
                raise ExecutionError(f"{exc.args[0]} is not bound") from None
        for name, d in self._dense.items():
            arr = self.arrays[name]
            arr.reshape(-1)[:] = d.data
        return self.arrays

    def _run_compiled(self, fn, env):
        data = {n: d.data for n, d in self._dense.items()}
        dims = {n: d.dims for n, d in self._dense.items()}
        try:
            fn(env, self.components, data, dims)
        except UnboundLocalError as exc:
            m = _UNBOUND.search(str(exc))
            raise ExecutionError(f"{m.group(1) if m else exc} is not bound") from None
        except IndexError as exc:
            raise ExecutionError(f"component read out of bounds: {exc}") from None

    def instance(self, name: str) -> StorageInstance:
        inst = self.instances.get(name)
        if inst is None:
            st = self.program.storage(name)
            inst = StorageInstance(st, self.reservoirs, self.sizes)
            self.instances[name] = inst
        return inst

    # statements -------------------------------------------------------------
    def _block(self, body, scope):
        fns = [self._stmt(s, scope) for s in body]
        if len(fns) == 1:
            return fns[0]

        def run(env):
            for f in fns:
                f(env)
        return run

    def _stmt(self, s, scope):
        if isinstance(s, Assign):
            return self._assign(s, scope)
        if isinstance(s, For):
            return self._for(s, scope)
        if isinstance(s, Forelem):
            return self._forelem(s, scope)
        raise ExecutionError(f"unknown statement {s!r}")

    def _assign(self, s, scope):
        val = self._expr(s.value, scope)
        op = s.op
        if isinstance(s.target, Var):
            name = s.target.name
            if op == "=":
                def run(env):
                    env[name] = val(env)
            elif op == "+=":
                def run(env):
                    env[name] += val(env)
            else:
                def run(env):
                    env[name] -= val(env)
            return run
        data, flat = self._address(s.target, scope)
        if op == "=":
            def run(env):
                data[flat(env)] = val(env)
        elif op == "+=":
            def run(env):
                n = flat(env)
                data[n] += val(env)
        else:
            def run(env):
                n = flat(env)
                data[n] -= val(env)
        return run

    def _for(self, s, scope):
        lo, hi = self._expr(s.lo, scope), self._expr(s.hi, scope)
        body = self._block(s.body, scope)
        var, desc = s.var, s.descending

        def run(env):
            r = range(lo(env), hi(env))
            for v in (reversed(r) if desc else r):
                env[var] = v
                body(env)
        return run

    def _forelem(self, s, scope):
        d = s.domain
        inner = dict(scope)
        if isinstance(d, ReservoirDomain):
            inner[s.var] = d.reservoir
        elif isinstance(d, Join):
            inner[s.var] = d.left
            inner[d.right_var] = d.right
        body = self._block(s.body, inner)
        trace = self.trace
        var = s.var
        if isinstance(d, Join):
            gen = self._join_domain(d, scope)
            rvar = d.right_var

            def run(env):
                empty = True
                for n, m in gen(env):
                    empty = False
                    env[var] = n
                    env[rvar] = m
                    body(env)
                if empty and trace is not None:
                    trace.empty_loops += 1
            return run
        gen = self._domain(d, scope)

        def run(env):
            empty = True
            for v in gen(env):
                empty = False
                env[var] = v
                body(env)
            if empty and trace is not None:
                trace.empty_loops += 1
        return run

    # domains ----------------------------------------------------------------
    def _res(self, name) -> TupleReservoir:
        try:
            return self.reservoirs[name]
        except KeyError:
            raise ExecutionError(f"reservoir {name} is not bound") from None

    def _cond_filter(self, reservoir, cond, scope):
        """Generator factory over tuple positions satisfying ``cond``."""
        if cond is None:
            return lambda env: range(len(self._res(reservoir)))
        eq_f, eq_v, iv_f, iv_v = [], [], [], []
        for f, v in zip(cond.fields, cond.values):
            if isinstance(v, Interval):
                iv_f.append(f)
                lo = self._expr(v.lo, scope)
                hi = None if v.hi is None else self._expr(v.hi, scope)
                iv_v.append((lo, hi))
            else:
                eq_f.append(f)
                eq_v.append(self._expr(v, scope))
        eq_f = tuple(eq_f)

        def gen(env):
            res = self._res(reservoir)
            if eq_f:
                key = tuple(v(env) for v in eq_v)
                cand = res.index(eq_f).get(key, ())
            else:
                cand = range(len(res))
            if not iv_f:
                return cand
            cols = [res.column(f) for f in iv_f]
            bounds = [(lo(env), hi(env) if hi else None) for lo, hi in iv_v]
            return [n for n in cand
                    if all(c[n] > lo and (hi is None or c[n] < hi)
                           for c, (lo, hi) in zip(cols, bounds))]
        return gen

    def _join_domain(self, d: Join, scope):
        left = self._cond_filter(d.left, d.left_cond, scope)

        def gen(env):
            lres, rres = self._res(d.left), self._res(d.right)
            lcol = lres.column(d.left_field)
            ridx = rres.index((d.right_field,))
            for n in left(env):
                for m in ridx.get((lcol[n],), ()):
                    yield n, m
        return gen

    def _domain(self, d, scope):
        if isinstance(d, ReservoirDomain):
            return self._cond_filter(d.reservoir, d.cond, scope)
        if isinstance(d, FieldValues):
            return lambda env: self._res(d.reservoir).values(d.field)
        if isinstance(d, Range):
            lo, hi = self._expr(d.lo, scope), self._expr(d.hi, scope)
            return lambda env: range(lo(env), hi(env))
        if isinstance(d, (NStar, Lens, Ptr, Perm)):
            return self._storage_domain(d, scope)
        raise ExecutionError(f"cannot iterate {d!r}")

    def _storage_domain(self, d, scope):
        name = d.storage
        st = self.program.storage(name)
        pm = st.position_major is not None
        if isinstance(d, Perm):
            lo, hi = self._expr(d.inner.lo, scope), self._expr(d.inner.hi, scope)

            def gen(env):
                a, b = lo(env), hi(env)
                return [g for g in self.instance(name).perm if a <= g < b]
            return gen
        prefix = [self._expr(p, scope) for p in d.prefix]
        if isinstance(d, Ptr):
            if pm:
                k = prefix[0]

                def gen(env):
                    ptr = self.instance(name).ptr
                    n = k(env)
                    return range(ptr[n], ptr[n + 1])
                return gen

            def gen(env):
                return self.instance(name).ptr_range(tuple(p(env) for p in prefix))
            return gen
        if pm:
            if d.level == 0:
                return lambda env: range(self.instance(name).width)
            if not prefix:
                # padded position-major: every position holds every group
                return lambda env: range(self.instance(name).extents[0])
            k = prefix[0]
            return lambda env: range(len(self.instance(name).diagonals[k(env)]))
        if isinstance(d, Lens) and st.len_mode == "padded":
            if st.blocked:
                def gen(env):
                    inst = self.instance(name)
                    return range(inst.block_width[tuple(p(env) for p in prefix)])
                return gen
            return lambda env: range(self.instance(name).width)

        def gen(env):
            return range(self.instance(name).length(tuple(p(env) for p in prefix)))
        return gen

    # expressions --------------------------------------------------------------
    def _address(self, e: Index, scope):
        """(backing list, flat index fn) for a writable dense element."""
        if e.array in self.components:
            raise ExecutionError(f"storage component {e.array} is read-only")
        d = self._dense.get(e.array)
        if d is None:
            raise ExecutionError(f"unknown dense operand {e.array}")
        if len(e.indices) != len(d.dims):
            raise ExecutionError(f"{e.array} has {len(d.dims)} dimensions")
        idx = [self._expr(i, scope) for i in e.indices]
        dims = d.dims
        name = e.array
        if len(idx) == 1:
            f0, n0 = idx[0], dims[0]

            def flat(env):
                i = f0(env)
                if not 0 <= i < n0:
                    raise ExecutionError(f"{name}[{i}] out of bounds {n0}")
                return i
            return d.data, flat
        f0, f1 = idx
        n0, n1 = dims

        def flat(env):
            i, j = f0(env), f1(env)
            if not (0 <= i < n0 and 0 <= j < n1):
                raise ExecutionError(f"{name}[{i}, {j}] out of bounds {dims}")
            return i * n1 + j
        return d.data, flat

    def _expr(self, e, scope):
        if isinstance(e, Const):
            v = e.value
            return lambda env: v
        if isinstance(e, Var):
            # unbound names surface as KeyError and are reported by run()
            name = e.name
            return lambda env: env[name]
        if isinstance(e, BinOp):
            a, b = self._expr(e.lhs, scope), self._expr(e.rhs, scope)
            op = e.op
            if isinstance(e.rhs, Const) and op in ("+", "-", "*"):
                c = e.rhs.value
                if op == "+":
                    return lambda env: a(env) + c
                if op == "-":
                    return lambda env: a(env) - c
                return lambda env: a(env) * c
            if op == "+":
                return lambda env: a(env) + b(env)
            if op == "-":
                return lambda env: a(env) - b(env)
            if op == "*":
                return lambda env: a(env) * b(env)
            if op == "/":
                return lambda env: a(env) / b(env)
            if op == "min":
                return lambda env: min(a(env), b(env))
            if op == "cdiv":
                return lambda env: -(-a(env) // b(env))
            raise ExecutionError(f"unknown operator {op}")
        if isinstance(e, FieldRef):
            res_name = scope.get(e.var)
            if res_name is None:
                raise ExecutionError(f"{e.var} is not a tuple variable")
            var, fld = e.var, e.field

            def get(env):
                return self._res(res_name).column(fld)[env[var]]
            return get
        if isinstance(e, DataRef):
            res_name = scope.get(e.var)
            if res_name is None:
                raise ExecutionError(f"{e.var} is not a tuple variable")
            var, b = e.var, e.binding
            trace = self.trace

            def get(env):
                res = self._res(res_name)
                n = env[var]
                v = res.data[b][n]
                if trace is not None:
                    trace.visit(b, res.provenance[n], v)
                return v
            return get
        if isinstance(e, Extent):
            return lambda env: self._res(e.reservoir).extent(e.field)
        if isinstance(e, Index):
            return self._index(e, scope)
        if isinstance(e, SeqRef):
            return self._seqref(e, scope)
        if isinstance(e, KeyRef):
            return self._keyref(e, scope)
        raise ExecutionError(f"cannot evaluate {e!r}")

    def _index(self, e, scope):
        idx = [self._expr(i, scope) for i in e.indices]
        name = e.array
        if name in self.components:
            comp = self.components[name]
            if not idx:
                return lambda env: comp
            if len(idx) == 1:
                f0 = idx[0]

                def get(env):
                    i = f0(env)
                    if i < 0:
                        raise ExecutionError(f"{name}[{i}] out of bounds")
                    try:
                        return comp[i]
                    except IndexError:
                        raise ExecutionError(f"{name}[{i}] out of bounds") from None
                return get
            f0, f1 = idx

            def get(env):
                i, j = f0(env), f1(env)
                if i < 0 or j < 0:
                    raise ExecutionError(f"{name}[{i}, {j}] out of bounds")
                try:
                    return comp[i][j]
                except IndexError:
                    raise ExecutionError(f"{name}[{i}, {j}] out of bounds") from None
            return get
        data, flat = self._address(e, scope)
        return lambda env: data[flat(env)]

    def _leaf_fn(self, e, scope):
        name = e.storage
        st = self.program.storage(name)
        idx = [self._expr(i, scope) for i in e.indices]
        if st.dim_reduced:
            q = idx[-1]
            return lambda env: self.instance(name).flat[q(env)]
        if st.position_major is not None:
            k, p = idx
            return lambda env: self.instance(name).diagonals[k(env)][p(env)][1]
        key, pos = idx[:-1], idx[-1]

        def get(env):
            return self.instance(name).group(tuple(f(env) for f in key))[pos(env)]
        return get

    def _seqref(self, e, scope):
        st = self.program.storage(e.storage)
        rec = st.record(e.field)
        leaf_of = self._leaf_fn(e, scope)
        fld = e.field
        trace = self.trace
        if trace is None or rec.kind != "data":
            return lambda env: leaf_of(env)[fld]
        side = None
        if rec.side is not None:
            side = 0 if rec.side == st.join.left_var else 1
        src_name = rec.source

        def get(env):
            leaf = leaf_of(env)
            v = leaf[fld]
            if not leaf["_pad"]:
                src = leaf["_src"] if side is None else leaf["_src"][side]
                trace.visit(src_name, src, v)
            return v
        return get

    def _keyref(self, e, scope):
        name = e.storage
        st = self.program.storage(name)
        k, p = [self._expr(i, scope) for i in e.indices]
        if st.dim_reduced:
            return lambda env: self.instance(name).flat_keys[p(env)]
        return lambda env: self.instance(name).diagonals[k(env)][p(env)][0]


def execute(program: Program, reservoirs=None, arrays=None, sizes=None, components=None,
            trace: Optional[Trace] = None) -> dict:
    try:
        return Interpreter(program, reservoirs, arrays, sizes, components, trace).run()
    except ReservoirError as exc:
        raise ExecutionError(str(exc)) from exc
