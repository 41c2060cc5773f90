"""Rewrite passes over forelem programs.

Each pass takes a program and a target (a loop path or a storage name) and
returns a new program, or raises :class:`PassError` without touching its
input.  Storage plans travel inside ``Program.storages``.
"""
from __future__ import annotations

from dataclasses import replace

from ..ir.analysis import free_fields
from ..ir.nodes import (
    BinOp, Condition, Const, DataDecl, DataRef, Extent, FieldRef, FieldValues, For,
    Forelem, Index, Interval, Join, KeyRef, Lens, NStar, Perm, Program, Ptr, Range,
    ReservoirDecl, ReservoirDomain, SeqRef, Var, all_names, domain_uses_var, enclosing,
    fresh, get_at, iter_assigns, iter_expr, iter_loops,
    map_stmt_exprs, replace_at, stmt_exprs, uses_var,
)
from .storage import JoinSpec, Level, MaterializedStorage, RecordField


class PassError(ValueError):
    pass


def _loop(prog: Program, path: tuple):
    node = get_at(prog.body, path)
    if not isinstance(node, (For, Forelem)):
        raise PassError("target is not a loop")
    return node


def _splice(prog: Program, path: tuple, new, storage=None) -> Program:
    out = replace(prog, body=replace_at(prog.body, path, new))
    return out.with_storage(storage) if storage is not None else out


def _taken(prog: Program) -> set:
    names = all_names(prog)
    # a position-major storage remembers the loop variable it will restore
    names |= {st.position_major[0] for st in prog.storages if st.position_major}
    return names


# --------------------------------------------------------------------------
# orthogonalization and encapsulation

def orthogonalize(prog: Program, path: tuple, fields) -> Program:
    fields = tuple(fields)
    loop = _loop(prog, path)
    if not (isinstance(loop, Forelem) and isinstance(loop.domain, ReservoirDomain)):
        raise PassError("orthogonalization needs a forelem loop over a reservoir")
    if not fields:
        raise PassError("no fields given")
    if len(set(fields)) != len(fields):
        raise PassError(f"repeated field in {fields}")
    dom = loop.domain
    schema = prog.reservoir(dom.reservoir).schema
    for f in fields:
        if f not in schema:
            raise PassError(f"field {f!r} not in schema of {dom.reservoir} {schema}")
        if dom.cond is not None and f in dom.cond.fields:
            raise PassError(f"loop is already conditioned on {f!r}")
    taken = _taken(prog)
    names = []
    for n, _ in enumerate(fields):
        v = fresh(taken, "ij"[n] if n < 2 else "i")
        taken.add(v)
        names.append(v)
    values = tuple(Var(v) for v in names)
    cond = dom.cond.extend(fields, values) if dom.cond else Condition(fields, values)
    node = Forelem(loop.var, ReservoirDomain(dom.reservoir, cond), loop.body)
    for f, v in reversed(list(zip(fields, names))):
        node = Forelem(v, FieldValues(dom.reservoir, f), (node,))
    return _splice(prog, path, node)


def undo_orthogonalize(prog: Program, path: tuple, fld: str) -> Program:
    loop = _loop(prog, path)
    if not (isinstance(loop, Forelem) and isinstance(loop.domain, FieldValues)
            and loop.domain.field == fld):
        raise PassError(f"target does not iterate the value set of {fld!r}")
    v, res = loop.var, loop.domain.reservoir
    # walk the perfect nest down to the loop that carries the condition
    node, chain = loop, []
    while True:
        if len(node.body) != 1 or not isinstance(node.body[0], Forelem):
            raise PassError("orthogonalized nest is not perfectly nested")
        node = node.body[0]
        chain.append(node)
        d = node.domain
        if isinstance(d, ReservoirDomain) and d.reservoir == res and d.cond \
                and fld in d.cond.fields:
            break
        if domain_uses_var(d, v):
            raise PassError(f"{v} is used by an intermediate loop domain")
    inner = chain[-1]
    pos = inner.domain.cond.fields.index(fld)
    if inner.domain.cond.values[pos] != Var(v):
        raise PassError(f"condition on {fld!r} is not bound to {v}")
    others = inner.domain.cond.without(fld)
    if others is not None and any(uses_var(val, v) for val in others.values):
        raise PassError(f"{v} is used by another condition value")
    if uses_var(inner.body, v):
        raise PassError(f"{v} is used in the loop body")
    rebuilt = Forelem(inner.var, ReservoirDomain(res, others), inner.body)
    for outer in reversed(chain[:-1]):
        rebuilt = Forelem(outer.var, outer.domain, (rebuilt,))
    return _splice(prog, path, rebuilt)


def encapsulate(prog: Program, path: tuple) -> Program:
    loop = _loop(prog, path)
    if not (isinstance(loop, Forelem) and isinstance(loop.domain, FieldValues)):
        raise PassError("encapsulation needs a loop over a field value set")
    d = loop.domain
    node = Forelem(loop.var, Range(Const(0), Extent(d.reservoir, d.field)), loop.body)
    return _splice(prog, path, node)


# --------------------------------------------------------------------------
# materialization

def _next_storage_name(prog: Program) -> str:
    taken = _taken(prog)
    for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
        if f"P{c}" not in taken:
            return f"P{c}"
    return fresh(taken, "PA")


def _level_for(var: str, loops: list):
    """Return (extent, block) for an enclosing loop over an integer range."""
    for loop in reversed(loops):
        if loop.var != var:
            continue
        if isinstance(loop, For):
            if loop.lo != Const(0):
                raise PassError(f"ordered loop {var} does not start at 0")
            return loop.hi, None
        d = loop.domain
        if isinstance(d, Range):
            if d.tag and d.tag[0] == "inblock":
                return d.tag[3], (d.tag[1], d.tag[2])
            if d.tag is None and d.lo == Const(0):
                return d.hi, None
            raise PassError(f"loop {var} is not a plain range from 0")
        if isinstance(d, FieldValues):
            raise PassError(f"iterator {var} is not encapsulated; apply encap first")
        raise PassError(f"iterator {var} does not range over natural numbers")
    raise PassError(f"{var} is not bound by an enclosing loop")


def _is_static(e) -> bool:
    return all(not isinstance(x, (Var, FieldRef, DataRef, SeqRef, KeyRef, Index))
               for x in iter_expr(e))


def _materialize(prog: Program, path: tuple, dependent: bool) -> Program:
    loop = _loop(prog, path)
    if not isinstance(loop, Forelem) or not isinstance(loop.domain, (ReservoirDomain, Join)):
        raise PassError("materialization needs a forelem loop over a reservoir")
    loops = enclosing(prog.body, path)
    dom = loop.domain
    cond = dom.cond if isinstance(dom, ReservoirDomain) else dom.left_cond
    by_var, filt_f, filt_v = {}, [], []
    for f, v in zip(cond.fields, cond.values) if cond else ():
        if _is_static(v):
            filt_f.append(f)
            filt_v.append(v)
        elif isinstance(v, Var):
            by_var.setdefault(v.name, []).append(f)
        else:
            raise PassError(f"condition value for {f!r} is neither constant nor an iterator")
    if by_var and not dependent:
        raise PassError("loop-dependent condition present; use matdep")
    if dependent and not by_var:
        raise PassError("no loop-dependent condition")
    if isinstance(dom, Join) and by_var:
        raise PassError("a collapsed loop can only be materialized independently")

    order = [l.var for l in loops]
    levels = []
    for var in sorted(by_var, key=lambda v: order.index(v) if v in order else -1):
        extent, block = _level_for(var, loops)
        levels.append(Level(var, tuple(by_var[var]), extent, block))
    filters = Condition(tuple(filt_f), tuple(filt_v)) if filt_f else None
    const_of = {f: v for f, v in zip(filt_f, filt_v) if not isinstance(v, Interval)}
    level_of = {f: Var(l.var) for l in levels for f in l.fields}

    taken = _taken(prog)
    name = _next_storage_name(prog)
    k = fresh(taken, "k")
    idx = tuple(Var(l.var) for l in levels) + (Var(k),)

    if isinstance(dom, Join):
        sides = {loop.var: dom.left, dom.right_var: dom.right}
    else:
        sides = {loop.var: dom.reservoir}
    used = {}
    for s in loop.body:
        for e in stmt_exprs(s):
            if isinstance(e, FieldRef) and e.var in sides:
                used[(e.var, "field", e.field)] = None
            elif isinstance(e, DataRef) and e.var in sides:
                used[(e.var, "data", e.binding)] = None
    records = []
    for var, res in sides.items():
        schema = prog.reservoir(res).schema
        bindings = [d.name for d in prog.data if d.reservoir == res]
        for f in schema:
            if (var, "field", f) in used and (len(sides) > 1 or
                                              (f not in level_of and f not in const_of)):
                records.append(RecordField(_rec_name(sides, var, f), "field", f,
                                           var if len(sides) > 1 else None))
        for b in bindings:
            if (var, "data", b) in used:
                records.append(RecordField(_rec_name(sides, var, b), "data", b,
                                           var if len(sides) > 1 else None))

    def rewrite(e):
        if isinstance(e, FieldRef) and e.var in sides:
            if len(sides) == 1:
                if e.field in level_of:
                    return level_of[e.field]
                if e.field in const_of:
                    return const_of[e.field]
            return SeqRef(name, idx, _rec_name(sides, e.var, e.field))
        if isinstance(e, DataRef) and e.var in sides:
            return SeqRef(name, idx, _rec_name(sides, e.var, e.binding))
        return e

    body = tuple(map_stmt_exprs(s, rewrite) for s in loop.body)
    for s in body:
        for e in stmt_exprs(s):
            if isinstance(e, (FieldRef, DataRef)) and e.var in sides:
                raise PassError(f"tuple variable {e.var} escapes materialization")
    join = None
    if isinstance(dom, Join):
        join = JoinSpec(dom.left, loop.var, dom.right, dom.right_var,
                        dom.left_field, dom.right_field)
    res_name = dom.reservoir if isinstance(dom, ReservoirDomain) else dom.left
    st = MaterializedStorage(name, res_name, tuple(records), tuple(levels), filters, join)
    node = Forelem(k, NStar(name, idx[:-1], len(levels)), body)
    return _splice(prog, path, node, st)


def _rec_name(sides: dict, var: str, name: str) -> str:
    return name if len(sides) == 1 else f"{var}_{name}"


def materialize_independent(prog: Program, path: tuple) -> Program:
    return _materialize(prog, path, dependent=False)


def materialize_dependent(prog: Program, path: tuple) -> Program:
    return _materialize(prog, path, dependent=True)


# --------------------------------------------------------------------------
# horizontal iteration space reduction

def horizontal_reduce(prog: Program, reservoir: str) -> Program:
    if not prog.has_reservoir(reservoir):
        raise PassError(f"unknown reservoir {reservoir!r}")
    iterated = any(isinstance(l, Forelem) and (
        (isinstance(l.domain, (ReservoirDomain, FieldValues)) and l.domain.reservoir == reservoir)
        or (isinstance(l.domain, Join) and reservoir in (l.domain.left, l.domain.right)))
        for _, l in iter_loops(prog.body))
    if not iterated:
        raise PassError(f"no loop iterates {reservoir}")
    decl = prog.reservoir(reservoir)
    used = free_fields(prog, reservoir)
    if used >= set(decl.schema):
        raise PassError(f"every field of {reservoir} is used")
    if not used:
        raise PassError(f"no field of {reservoir} is used")
    new = fresh(_taken(prog), f"{reservoir}p")
    schema = tuple(f for f in decl.schema if f in used)

    def dom_fn(d):
        if isinstance(d, ReservoirDomain) and d.reservoir == reservoir:
            return ReservoirDomain(new, d.cond)
        if isinstance(d, FieldValues) and d.reservoir == reservoir:
            return FieldValues(new, d.field)
        if isinstance(d, Join):
            return replace(d, left=new if d.left == reservoir else d.left,
                           right=new if d.right == reservoir else d.right)
        return d

    def ext_fn(e):
        if isinstance(e, Extent) and e.reservoir == reservoir:
            return Extent(new, e.field)
        return e

    def walk(body):
        out = []
        for s in body:
            s = map_stmt_exprs(s, ext_fn)
            if isinstance(s, Forelem):
                s = Forelem(s.var, dom_fn(s.domain), walk(s.body))
            elif isinstance(s, For):
                s = replace(s, body=walk(s.body))
            out.append(s)
        return tuple(out)

    data = tuple(DataDecl(d.name, new) if d.reservoir == reservoir else d for d in prog.data)
    decls = prog.reservoirs + (ReservoirDecl(new, schema, reservoir),)
    return replace(prog, reservoirs=decls, data=data, body=walk(prog.body))


# --------------------------------------------------------------------------
# storage-level passes

def _storage_loops(prog: Program, name: str):
    for path, loop in iter_loops(prog.body):
        if isinstance(loop, Forelem):
            d = loop.domain
            if isinstance(d, (NStar, Lens, Ptr, Perm)) and d.storage == name:
                yield path, loop


def _rewrite_loops(prog: Program, fn) -> tuple:
    """Rebuild the body, letting ``fn`` replace any Forelem (post-order)."""
    def walk(body):
        out = []
        for s in body:
            if isinstance(s, (For, Forelem)):
                s = replace(s, body=walk(s.body))
                if isinstance(s, Forelem):
                    s = fn(s)
            out.append(s)
        return tuple(out)
    return walk(prog.body)


def _map_body(body, fn) -> tuple:
    return tuple(map_stmt_exprs(s, fn) for s in body)


def structure_split(prog: Program, name: str) -> Program:
    st = prog.storage(name)
    if st.split:
        raise PassError(f"{name} is already split")
    return prog.with_storage(st.evolve(split=True))


def nstar_materialize(prog: Program, name: str, mode: str) -> Program:
    if mode not in ("padded", "compact"):
        raise PassError(f"unknown N* mode {mode!r}")
    st = prog.storage(name)
    if st.len_mode is not None:
        raise PassError(f"{name} is already N*-materialized")
    if not any(isinstance(l.domain, NStar) for _, l in _storage_loops(prog, name)):
        raise PassError(f"no symbolic N* loop over {name}")
    if st.depth == 0:
        mode = "compact"  # one group: padding is a no-op
    block_idx = tuple(Var(l.block[0]) for l in st.levels if l.block)
    pm = st.position_major is not None

    def fn(loop):
        d = loop.domain
        if not (isinstance(d, NStar) and d.storage == name):
            return loop
        if mode == "compact":
            dom = Lens(name, d.prefix, d.level)
        elif pm:
            dom = Lens(name, (), d.level)
        else:
            dom = Lens(name, block_idx, d.level)
        return Forelem(loop.var, dom, loop.body)

    out = replace(prog, body=_rewrite_loops(prog, fn))
    return out.with_storage(st.evolve(len_mode=mode))


def nstar_sort(prog: Program, name: str) -> Program:
    st = prog.storage(name)
    if st.perm:
        raise PassError(f"{name} is already sorted")
    if st.depth != 1 or st.blocked:
        raise PassError("N* sorting needs a single unblocked nesting level")
    if st.position_major is not None:
        raise PassError(f"{name} is position-major")
    var = st.levels[0].var
    hits = [(p, l) for p, l in iter_loops(prog.body) if l.var == var]
    if not hits:
        raise PassError(f"no loop binds {var}")
    path, loop = hits[0]
    if not (isinstance(loop, Forelem) and isinstance(loop.domain, Range)
            and loop.domain.tag is None and loop.domain.lo == Const(0)):
        raise PassError(f"loop {var} is not an unordered range from 0")
    node = Forelem(var, Perm(name, loop.domain), loop.body)
    return _splice(prog, path, node, st.evolve(perm=True))


def dim_reduce(prog: Program, name: str) -> Program:
    st = prog.storage(name)
    if st.dim_reduced:
        raise PassError(f"{name} is already dimensionality-reduced")
    if st.len_mode == "padded":
        raise PassError("padded storage cannot be stored back to back")
    if st.len_mode != "compact":
        raise PassError(f"{name} is not N*-materialized in compact mode")
    if st.depth == 0:
        raise PassError(f"{name} has no nesting level to reduce")
    pm = st.position_major is not None

    def fix_refs(e):
        if isinstance(e, SeqRef) and e.storage == name:
            return SeqRef(name, e.indices[-1:], e.field)
        return e

    def fn(loop):
        d = loop.domain
        if not (isinstance(d, Lens) and d.storage == name):
            return loop
        leaf_level = 1 if pm else st.depth
        if d.level != leaf_level:
            return loop
        return Forelem(loop.var, Ptr(name, d.prefix), _map_body(loop.body, fix_refs))

    out = replace(prog, body=_rewrite_loops(prog, fn))
    return out.with_storage(st.evolve(dim_reduced=True))


# --------------------------------------------------------------------------
# loop collapse, interchange, blocking

def loop_collapse(prog: Program, path: tuple) -> Program:
    outer = _loop(prog, path)
    if not (isinstance(outer, Forelem) and isinstance(outer.domain, ReservoirDomain)):
        raise PassError("outer loop must iterate a reservoir")
    if len(outer.body) != 1 or not isinstance(outer.body[0], Forelem):
        raise PassError("loops are not perfectly nested")
    inner = outer.body[0]
    d = inner.domain
    if not (isinstance(d, ReservoirDomain) and d.cond is not None and len(d.cond.fields) == 1):
        raise PassError("inner condition is not an equi-join on one field")
    v = d.cond.values[0]
    if not (isinstance(v, FieldRef) and v.var == outer.var):
        raise PassError("inner condition does not reference a field of the outer tuple")
    node = Forelem(outer.var, Join(outer.domain.reservoir, outer.domain.cond, d.reservoir,
                                   v.field, d.cond.fields[0], inner.var), inner.body)
    return _splice(prog, path, node)


def _dependence_ok(loop, body) -> bool:
    """Conservative test for moving an ordered loop across another loop."""
    var = loop.var
    writes, reads = [], []
    for a in iter_assigns(body):
        if isinstance(a.target, Index):
            writes.append(a.target)
        for e in iter_expr(a.value):
            if isinstance(e, Index):
                reads.append(e)
    for w in writes:
        if not any(uses_var(i, var) for i in w.indices):
            continue
        for r in reads:
            if r.array == w.array and r.indices != w.indices:
                return False
    return True


def loop_interchange(prog: Program, path: tuple, inner_var=None) -> Program:
    outer = _loop(prog, path)
    if len(outer.body) != 1 or not isinstance(outer.body[0], (For, Forelem)):
        raise PassError("loops are not perfectly nested")
    inner = outer.body[0]
    if inner_var is not None and inner.var != inner_var:
        raise PassError(f"loop {inner_var} is not directly nested in {outer.var}")
    if any(isinstance(a.target, Var) for a in iter_assigns(inner.body)):
        raise PassError("scalar assignments in the nest block interchange")

    # position-major grouping of a materialized storage, and its inverse
    if isinstance(outer, Forelem) and isinstance(inner, Forelem):
        od, idom = outer.domain, inner.domain
        if isinstance(idom, NStar) and isinstance(od, NStar) and od.storage == idom.storage:
            return _from_position_major(prog, path, outer, inner)
        if isinstance(idom, NStar) and idom.prefix == (Var(outer.var),):
            return _to_position_major(prog, path, outer, inner)

    outer_vars = [outer.var]
    if isinstance(outer, Forelem) and isinstance(outer.domain, Join):
        outer_vars.append(outer.domain.right_var)
    if isinstance(inner, Forelem):
        inner_dep = any(domain_uses_var(inner.domain, v) for v in outer_vars)
    else:
        inner_dep = any(uses_var(inner.lo, v) or uses_var(inner.hi, v) for v in outer_vars)
    if inner_dep:
        raise PassError(f"domain of {inner.var} depends on {outer.var}")
    for l in (outer, inner):
        if isinstance(l, For) and not _dependence_ok(l, inner.body):
            raise PassError(f"ordered loop {l.var} carries a dependence")
    swapped = replace(inner, body=(replace(outer, body=inner.body),))
    return _splice(prog, path, swapped)


def _to_position_major(prog, path, outer, inner):
    st = prog.storage(inner.domain.storage)
    if st.depth != 1 or st.blocked or st.levels[0].var != outer.var:
        raise PassError("position-major grouping needs a single unblocked level")
    if st.len_mode is not None or st.dim_reduced:
        raise PassError(f"{st.name} is already N*-materialized")
    od = outer.domain
    plain = isinstance(od, Range) and od.tag is None and od.lo == Const(0)
    if not (plain or (isinstance(od, Perm) and od.storage == st.name)):
        raise PassError(f"loop {outer.var} is not an unordered range from 0")
    name, i, k = st.name, outer.var, inner.var
    p = fresh(_taken(prog), "p")

    def fn(e):
        if isinstance(e, SeqRef) and e.storage == name and e.indices == (Var(i), Var(k)):
            return SeqRef(name, (Var(k), Var(p)), e.field)
        return e

    body = _map_body(inner.body, fn)
    key = KeyRef(name, (Var(k), Var(p)))
    body = _map_body(body, lambda e: key if e == Var(i) else e)
    node = Forelem(k, NStar(name, (), 0), (Forelem(p, NStar(name, (Var(k),), 1), body),))
    return _splice(prog, path, node, st.evolve(position_major=(i, od, p)))


def _from_position_major(prog, path, outer, inner):
    st = prog.storage(outer.domain.storage)
    if st.position_major is None:
        raise PassError(f"{st.name} is not position-major")
    if st.len_mode is not None or st.dim_reduced:
        raise PassError(f"{st.name} is already N*-materialized")
    name = st.name
    i, od, _ = st.position_major
    k, p = outer.var, inner.var
    key = KeyRef(name, (Var(k), Var(p)))

    def fn(e):
        if e == key:
            return Var(i)
        if isinstance(e, SeqRef) and e.storage == name and e.indices == (Var(k), Var(p)):
            return SeqRef(name, (Var(i), Var(k)), e.field)
        return e

    body = _map_body(inner.body, fn)
    node = Forelem(i, od, (Forelem(k, NStar(name, (Var(i),), 1), body),))
    return _splice(prog, path, node, st.evolve(position_major=None))


def loop_block(prog: Program, path: tuple, size: int) -> Program:
    if not isinstance(size, int) or size < 1:
        raise PassError(f"block size must be a positive integer, got {size!r}")
    loop = _loop(prog, path)
    if not (isinstance(loop, Forelem) and isinstance(loop.domain, Range)):
        raise PassError("blocking needs an encapsulated range loop")
    d = loop.domain
    if d.tag is not None:
        raise PassError(f"loop {loop.var} is already blocked")
    if d.lo != Const(0):
        raise PassError(f"loop {loop.var} does not start at 0")
    m, x = d.hi, Const(size)
    bv = fresh(_taken(prog), loop.var * 2)
    lo = BinOp("*", Var(bv), x)
    hi = BinOp("min", BinOp("*", BinOp("+", Var(bv), Const(1)), x), m)
    inner = Forelem(loop.var, Range(lo, hi, ("inblock", bv, size, m)), loop.body)
    node = Forelem(bv, Range(Const(0), BinOp("cdiv", m, x), ("block", size)), (inner,))
    return _splice(prog, path, node)
