"""AST for forelem programs.

All nodes are frozen dataclasses holding tuples, so programs are hashable
values that passes rebuild rather than mutate.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Optional, Union


# --------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Const:
    value: Union[int, float]


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class FieldRef:
    """``t.field`` for a tuple variable ``t``."""
    var: str
    field: str


@dataclass(frozen=True)
class DataRef:
    """Address-function application ``A(t)``."""
    binding: str
    var: str


@dataclass(frozen=True)
class Index:
    array: str
    indices: tuple


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / min cdiv
    lhs: Any
    rhs: Any


@dataclass(frozen=True)
class Extent:
    """``max(T.field) + 1``, or 0 for an empty reservoir."""
    reservoir: str
    field: str


@dataclass(frozen=True)
class SeqRef:
    """Leaf-record field of a materialized sequence: ``PA[i][k].f``."""
    storage: str
    indices: tuple
    field: str


@dataclass(frozen=True)
class KeyRef:
    """Group key of a leaf in a position-major sequence."""
    storage: str
    indices: tuple


Expr = Union[Const, Var, FieldRef, DataRef, Index, BinOp, Extent, SeqRef, KeyRef]


@dataclass(frozen=True)
class Interval:
    """Open interval ``(lo, hi)``; ``hi=None`` means infinity."""
    lo: Any
    hi: Any = None


@dataclass(frozen=True)
class Condition:
    fields: tuple
    values: tuple

    def __post_init__(self):
        if len(self.fields) != len(self.values):
            raise ValueError(
                f"condition arity mismatch: {len(self.fields)} fields, "
                f"{len(self.values)} values")

    def extend(self, fields, values) -> "Condition":
        return Condition(self.fields + tuple(fields), self.values + tuple(values))

    def without(self, fld: str) -> Optional["Condition"]:
        pairs = [(f, v) for f, v in zip(self.fields, self.values) if f != fld]
        if not pairs:
            return None
        return Condition(tuple(f for f, _ in pairs), tuple(v for _, v in pairs))


# --------------------------------------------------------------------------
# loop domains

@dataclass(frozen=True)
class ReservoirDomain:
    reservoir: str
    cond: Optional[Condition] = None


@dataclass(frozen=True)
class FieldValues:
    """Value set of one tuple field, ``T.field``."""
    reservoir: str
    field: str


@dataclass(frozen=True)
class Range:
    """Half-open integer range. ``tag`` marks loops produced by blocking:
    ``("block", size)`` or ``("inblock", block_var, size, extent)``."""
    lo: Any
    hi: Any
    tag: Optional[tuple] = None


@dataclass(frozen=True)
class NStar:
    """Symbolic index set of ``storage[prefix]``."""
    storage: str
    prefix: tuple
    level: int


@dataclass(frozen=True)
class Lens:
    """``[0, PA_len[prefix])`` after N* materialization."""
    storage: str
    prefix: tuple
    level: int


@dataclass(frozen=True)
class Ptr:
    """``[PA_ptr[g], PA_ptr[g+1])`` after dimensionality reduction."""
    storage: str
    prefix: tuple


@dataclass(frozen=True)
class Perm:
    """``perm(range)`` after N* sorting."""
    storage: str
    inner: Range


@dataclass(frozen=True)
class Join:
    """``LxR.right_field[left_field]`` produced by loop collapse."""
    left: str
    left_cond: Optional[Condition]
    right: str
    left_field: str
    right_field: str
    right_var: str


Domain = Union[ReservoirDomain, FieldValues, Range, NStar, Lens, Ptr, Perm, Join]


# --------------------------------------------------------------------------
# statements

@dataclass(frozen=True)
class Assign:
    target: Any  # Var | Index
    op: str  # = += -=
    value: Any


@dataclass(frozen=True)
class For:
    """Ordered loop over ``[lo, hi)``; descending visits hi-1 first."""
    var: str
    lo: Any
    hi: Any
    descending: bool
    body: tuple


@dataclass(frozen=True)
class Forelem:
    var: str
    domain: Any
    body: tuple


Stmt = Union[Assign, For, Forelem]
Loop = Union[For, Forelem]


# --------------------------------------------------------------------------
# declarations and program

@dataclass(frozen=True)
class ReservoirDecl:
    name: str
    schema: tuple
    source: Optional[str] = None  # projection of another reservoir


@dataclass(frozen=True)
class DataDecl:
    name: str
    reservoir: str


@dataclass(frozen=True)
class DenseDecl:
    name: str
    dims: tuple
    ragged: bool = False  # physical component stored per block


@dataclass(frozen=True)
class Program:
    reservoirs: tuple = ()
    data: tuple = ()
    dense: tuple = ()
    body: tuple = ()
    storages: tuple = ()  # MaterializedStorage plans, creation order

    def reservoir(self, name: str) -> ReservoirDecl:
        for r in self.reservoirs:
            if r.name == name:
                return r
        raise KeyError(f"unknown reservoir {name!r}")

    def has_reservoir(self, name: str) -> bool:
        return any(r.name == name for r in self.reservoirs)

    def binding(self, name: str) -> Optional[DataDecl]:
        for d in self.data:
            if d.name == name:
                return d
        return None

    def dense_decl(self, name: str) -> Optional[DenseDecl]:
        for d in self.dense:
            if d.name == name:
                return d
        return None

    def storage(self, name: str):
        for s in self.storages:
            if s.name == name:
                return s
        raise KeyError(f"unknown storage {name!r}")

    def with_storage(self, st) -> "Program":
        kept = tuple(s for s in self.storages if s.name != st.name)
        if len(kept) == len(self.storages):
            return replace(self, storages=self.storages + (st,))
        return replace(self, storages=tuple(st if s.name == st.name else s
                                            for s in self.storages))


# --------------------------------------------------------------------------
# generic traversal helpers

def map_expr(e, fn: Callable):
    """Bottom-up rebuild of an expression; ``fn`` sees rebuilt children."""
    if isinstance(e, Index):
        e = Index(e.array, tuple(map_expr(i, fn) for i in e.indices))
    elif isinstance(e, BinOp):
        e = BinOp(e.op, map_expr(e.lhs, fn), map_expr(e.rhs, fn))
    elif isinstance(e, SeqRef):
        e = SeqRef(e.storage, tuple(map_expr(i, fn) for i in e.indices), e.field)
    elif isinstance(e, KeyRef):
        e = KeyRef(e.storage, tuple(map_expr(i, fn) for i in e.indices))
    elif isinstance(e, Interval):
        return Interval(map_expr(e.lo, fn),
                        None if e.hi is None else map_expr(e.hi, fn))
    return fn(e)


def iter_expr(e) -> Iterator:
    yield e
    if isinstance(e, Index):
        for i in e.indices:
            yield from iter_expr(i)
    elif isinstance(e, BinOp):
        yield from iter_expr(e.lhs)
        yield from iter_expr(e.rhs)
    elif isinstance(e, (SeqRef, KeyRef)):
        for i in e.indices:
            yield from iter_expr(i)
    elif isinstance(e, Interval):
        yield from iter_expr(e.lo)
        if e.hi is not None:
            yield from iter_expr(e.hi)


def map_cond(c: Optional[Condition], fn) -> Optional[Condition]:
    if c is None:
        return None
    return Condition(c.fields, tuple(map_expr(v, fn) for v in c.values))


def map_domain_exprs(d, fn):
    if isinstance(d, ReservoirDomain):
        return ReservoirDomain(d.reservoir, map_cond(d.cond, fn))
    if isinstance(d, Range):
        return Range(map_expr(d.lo, fn), map_expr(d.hi, fn), d.tag)
    if isinstance(d, NStar):
        return NStar(d.storage, tuple(map_expr(p, fn) for p in d.prefix), d.level)
    if isinstance(d, Lens):
        return Lens(d.storage, tuple(map_expr(p, fn) for p in d.prefix), d.level)
    if isinstance(d, Ptr):
        return Ptr(d.storage, tuple(map_expr(p, fn) for p in d.prefix))
    if isinstance(d, Perm):
        return Perm(d.storage, map_domain_exprs(d.inner, fn))
    if isinstance(d, Join):
        return replace(d, left_cond=map_cond(d.left_cond, fn))
    return d


def domain_exprs(d) -> Iterator:
    if isinstance(d, ReservoirDomain) and d.cond is not None:
        for v in d.cond.values:
            yield from iter_expr(v)
    elif isinstance(d, Range):
        yield from iter_expr(d.lo)
        yield from iter_expr(d.hi)
    elif isinstance(d, (NStar, Lens, Ptr)):
        for p in d.prefix:
            yield from iter_expr(p)
    elif isinstance(d, Perm):
        yield from domain_exprs(d.inner)
    elif isinstance(d, Join) and d.left_cond is not None:
        for v in d.left_cond.values:
            yield from iter_expr(v)


def map_stmt_exprs(s, fn):
    """Rebuild every expression (including loop domains) in a statement."""
    if isinstance(s, Assign):
        return Assign(map_expr(s.target, fn), s.op, map_expr(s.value, fn))
    if isinstance(s, For):
        return For(s.var, map_expr(s.lo, fn), map_expr(s.hi, fn), s.descending,
                   tuple(map_stmt_exprs(b, fn) for b in s.body))
    if isinstance(s, Forelem):
        return Forelem(s.var, map_domain_exprs(s.domain, fn),
                       tuple(map_stmt_exprs(b, fn) for b in s.body))
    raise TypeError(type(s))


def stmt_exprs(s) -> Iterator:
    if isinstance(s, Assign):
        yield from iter_expr(s.target)
        yield from iter_expr(s.value)
    elif isinstance(s, For):
        yield from iter_expr(s.lo)
        yield from iter_expr(s.hi)
        for b in s.body:
            yield from stmt_exprs(b)
    elif isinstance(s, Forelem):
        yield from domain_exprs(s.domain)
        for b in s.body:
            yield from stmt_exprs(b)


def body_exprs(body) -> Iterator:
    for s in body:
        yield from stmt_exprs(s)


def iter_loops(body, path=()) -> Iterator[tuple]:
    """Pre-order ``(path, loop)`` pairs; a path is a tuple of body indices."""
    for n, s in enumerate(body):
        if isinstance(s, (For, Forelem)):
            yield path + (n,), s
            yield from iter_loops(s.body, path + (n,))


def get_at(body, path):
    node = body[path[0]]
    for p in path[1:]:
        node = node.body[p]
    return node


def replace_at(body: tuple, path: tuple, new) -> tuple:
    """Replace the statement at ``path``; ``new`` may be a tuple to splice."""
    n = path[0]
    if len(path) == 1:
        repl = new if isinstance(new, tuple) else (new,)
        return body[:n] + repl + body[n + 1:]
    node = body[n]
    return body[:n] + (replace(node, body=replace_at(node.body, path[1:], new)),) + body[n + 1:]


def enclosing(body, path) -> list:
    """Loops strictly enclosing the statement at ``path``, outermost first."""
    out, node_body = [], body
    for p in path[:-1]:
        node = node_body[p]
        out.append(node)
        node_body = node.body
    return out


def find_loop(body, var: str):
    for path, loop in iter_loops(body):
        if loop.var == var:
            return path, loop
    raise KeyError(f"no loop binds {var!r}")


def bound_vars(body) -> set:
    out = set()
    for _, loop in iter_loops(body):
        out.add(loop.var)
        if isinstance(loop, Forelem) and isinstance(loop.domain, Join):
            out.add(loop.domain.right_var)
    return out


def assigned_scalars(body) -> set:
    return {s.target.name for s in _iter_assigns(body) if isinstance(s.target, Var)}


def _iter_assigns(body):
    for s in body:
        if isinstance(s, Assign):
            yield s
        elif isinstance(s, (For, Forelem)):
            yield from _iter_assigns(s.body)


def iter_assigns(body):
    return _iter_assigns(body)


def fresh(taken: set, preferred: str) -> str:
    if preferred not in taken:
        return preferred
    for cand in ("i", "j", "l", "m", "p", "q", "r", "s", "u", "v", "w"):
        if cand not in taken:
            return cand
    n = 0
    while f"{preferred}{n}" in taken:
        n += 1
    return f"{preferred}{n}"


def all_names(prog: Program) -> set:
    names = bound_vars(prog.body) | assigned_scalars(prog.body)
    names |= {r.name for r in prog.reservoirs} | {d.name for d in prog.data}
    names |= {d.name for d in prog.dense} | {s.name for s in prog.storages}
    for e in body_exprs(prog.body):
        if isinstance(e, Var):
            names.add(e.name)
    return names


def uses_var(node, name: str) -> bool:
    if isinstance(node, tuple):
        return any(uses_var(n, name) for n in node)
    it = stmt_exprs(node) if isinstance(node, (Assign, For, Forelem)) else iter_expr(node)
    for e in it:
        if isinstance(e, Var) and e.name == name:
            return True
        if isinstance(e, (FieldRef, DataRef)) and e.var == name:
            return True
    return False


def domain_uses_var(d, name: str) -> bool:
    for e in domain_exprs(d):
        if isinstance(e, Var) and e.name == name:
            return True
        if isinstance(e, (FieldRef, DataRef)) and e.var == name:
            return True
    return False


def subst_var(node, name: str, expr):
    fn = (lambda e: expr if isinstance(e, Var) and e.name == name else e)
    if isinstance(node, tuple):
        return tuple(map_stmt_exprs(s, fn) for s in node)
    if isinstance(node, (Assign, For, Forelem)):
        return map_stmt_exprs(node, fn)
    return map_expr(node, fn)


def shift(e, delta: int):
    """``e + delta`` with constant folding and ``(x + c) - c`` cancellation."""
    if delta == 0:
        return e
    if isinstance(e, Const) and isinstance(e.value, int):
        return Const(e.value + delta)
    if isinstance(e, BinOp) and e.op in "+-" and isinstance(e.rhs, Const) \
            and isinstance(e.rhs.value, int):
        c = e.rhs.value if e.op == "+" else -e.rhs.value
        c += delta
        if c == 0:
            return e.lhs
        return BinOp("+", e.lhs, Const(c)) if c > 0 else BinOp("-", e.lhs, Const(-c))
    return BinOp("+", e, Const(delta)) if delta > 0 else BinOp("-", e, Const(-delta))
