"""Static queries over forelem programs."""
from __future__ import annotations

from .nodes import (
    Assign, DataRef, Extent, FieldRef, FieldValues, For, Forelem, Index, Join, KeyRef,
    Lens, NStar, Perm, Program, Ptr, ReservoirDomain, SeqRef, Var, domain_exprs,
    iter_expr, iter_loops,
)


class ScopeError(ValueError):
    pass


def tuple_vars(program: Program) -> dict:
    """Map each tuple variable to the reservoir it iterates."""
    out = {}
    for _, loop in iter_loops(program.body):
        if isinstance(loop, Forelem):
            d = loop.domain
            if isinstance(d, ReservoirDomain):
                out[loop.var] = d.reservoir
            elif isinstance(d, Join):
                out[loop.var] = d.left
                out[d.right_var] = d.right
    return out


def free_fields(program: Program, reservoir: str) -> set:
    """Fields of ``reservoir`` read anywhere in conditions or bodies."""
    if not program.has_reservoir(reservoir):
        raise KeyError(f"unknown reservoir {reservoir!r}")
    tv = tuple_vars(program)
    used = set()
    for _, loop in iter_loops(program.body):
        if isinstance(loop, Forelem):
            d = loop.domain
            if isinstance(d, ReservoirDomain) and d.reservoir == reservoir and d.cond:
                used.update(d.cond.fields)
            elif isinstance(d, FieldValues) and d.reservoir == reservoir:
                used.add(d.field)
            elif isinstance(d, Join):
                if d.left == reservoir:
                    used.add(d.left_field)
                    if d.left_cond:
                        used.update(d.left_cond.fields)
                if d.right == reservoir:
                    used.add(d.right_field)
    for e in _all_exprs(program):
        if isinstance(e, FieldRef) and tv.get(e.var) == reservoir:
            used.add(e.field)
        elif isinstance(e, Extent) and e.reservoir == reservoir:
            used.add(e.field)
    return used


def _all_exprs(program: Program):
    from .nodes import body_exprs
    yield from body_exprs(program.body)


def size_names(program: Program) -> set:
    return {d.name for decl in program.dense for d in decl.dims if isinstance(d, Var)}


def validate(program: Program, extra_names=()) -> None:
    """Raise :class:`ScopeError` if any variable is used outside its scope."""
    sizes = size_names(program) | set(extra_names)
    storages = {s.name for s in program.storages}
    _check_body(program, program.body, {}, set(), sizes, storages)


def _check_body(prog, body, scope, scalars, sizes, storages):
    for s in body:
        if isinstance(s, Assign):
            _check_expr(prog, s.value, scope, scalars, sizes, storages)
            if isinstance(s.target, Var):
                if s.op != "=" and s.target.name not in scalars:
                    raise ScopeError(f"scalar {s.target.name!r} updated before assignment")
                if s.target.name in scope:
                    raise ScopeError(f"assignment to loop variable {s.target.name!r}")
                scalars.add(s.target.name)
            else:
                _check_expr(prog, s.target, scope, scalars, sizes, storages)
        elif isinstance(s, For):
            for e in (s.lo, s.hi):
                _check_expr(prog, e, scope, scalars, sizes, storages)
            inner = dict(scope)
            inner[s.var] = "int"
            _check_body(prog, s.body, inner, scalars, sizes, storages)
        elif isinstance(s, Forelem):
            d = s.domain
            for e in domain_exprs(d):
                _check_expr(prog, e, scope, scalars, sizes, storages)
            inner = dict(scope)
            if isinstance(d, ReservoirDomain):
                if not prog.has_reservoir(d.reservoir):
                    raise ScopeError(f"unknown reservoir {d.reservoir!r}")
                inner[s.var] = ("tuple", d.reservoir)
            elif isinstance(d, Join):
                inner[s.var] = ("tuple", d.left)
                inner[d.right_var] = ("tuple", d.right)
            else:
                if isinstance(d, (NStar, Lens, Ptr, Perm)) and d.storage not in storages:
                    raise ScopeError(f"unknown storage {d.storage!r}")
                inner[s.var] = "int"
            _check_body(prog, s.body, inner, scalars, sizes, storages)
        else:
            raise ScopeError(f"unexpected statement {s!r}")


def _check_expr(prog, expr, scope, scalars, sizes, storages):
    for e in iter_expr(expr):
        if isinstance(e, Var):
            kind = scope.get(e.name)
            if kind is None and e.name not in scalars and e.name not in sizes:
                raise ScopeError(f"unbound identifier {e.name!r}")
            if isinstance(kind, tuple):
                raise ScopeError(f"tuple variable {e.name!r} used as a value")
        elif isinstance(e, (FieldRef, DataRef)):
            kind = scope.get(e.var)
            if not (isinstance(kind, tuple) and kind[0] == "tuple"):
                raise ScopeError(f"{e.var!r} is not a bound tuple variable")
            if isinstance(e, DataRef) and prog.binding(e.binding) is None:
                raise ScopeError(f"unknown address function {e.binding!r}")
        elif isinstance(e, Index):
            if prog.dense_decl(e.array) is None:
                raise ScopeError(f"unknown dense operand {e.array!r}")
        elif isinstance(e, (SeqRef, KeyRef)):
            if e.storage not in storages:
                raise ScopeError(f"unknown storage {e.storage!r}")
