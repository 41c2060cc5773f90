"""Recursive-descent parser for the forelem DSL.

Grammar (whitespace-insensitive, ``#`` starts a comment)::

    program   := decl* stmt*
    decl      := "reservoir" NAME "(" NAME ("," NAME)* ")" ["from" NAME] ";"
               | "data" NAME "(" NAME ")" ";"
               | "dense" NAME "[" dim ("," dim)* "]" ";"
    stmt      := "for" "(" NAME "=" expr (".."|"downto") expr ")" block
               | "for" "(" NAME "=" expr ";" NAME relop expr ";" NAME ("++"|"--") ")" block
               | "forelem" "(" NAME ";" NAME ("in"|"∈") subset ")" block
               | ["int"|"double"|"float"] lvalue ("="|"+="|"-=") expr ";"
    block     := "{" stmt* "}" | stmt
    subset    := NAME | NAME "." NAME | "range" "(" expr "," expr ")"
               | NAME "." fieldtuple "[" valtuple "]"
    fieldtuple:= NAME | "(" NAME ("," NAME)* ")"
    valtuple  := val | "(" val ("," val)* ")"
    val       := expr | "(" expr "," ("inf"|expr) ")"

Loop bounds written with ``..``, ``downto``, ``<=`` or ``>=`` are 1-based and
inclusive, as in the classic formulations; they are normalized to 0-based
half-open ranges.  ``for (i = a; i < b; i++)`` is taken literally.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

from .nodes import (
    Assign, BinOp, Condition, Const, DataDecl, DataRef, DenseDecl, Extent, FieldRef,
    FieldValues, For, Forelem, Index, Interval, Program, Range, ReservoirDecl,
    ReservoirDomain, Var, shift,
)


class DSLSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int, filename: str = "<input>"):
        self.message, self.line, self.col, self.filename = message, line, col, filename
        super().__init__(f"{filename}:{line}:{col}: {message}")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+\.\d+(?:[eE][-+]?\d+)?|\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9']*)
  | (?P<op>\+\+|--|\+=|-=|<=|>=|\.\.|==|[-+*/=<>;,.(){}\[\]]|∈|∞)
""", re.VERBOSE)

_TYPES = {"int", "double", "float"}


def tokenize(src: str, filename: str = "<input>") -> List[Token]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise DSLSyntaxError(f"unexpected character {src[pos]!r}", line,
                                 pos - line_start + 1, filename)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if text == "∈":
                text = "in"
            elif text == "∞":
                text = "inf"
            toks.append(Token(kind, text, line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class _Scope:
    """Loop-variable scoping; tuple variables remember their reservoir."""

    def __init__(self):
        self.frames: List[dict] = [{}]

    def push(self, name, kind):
        self.frames.append({name: kind})

    def pop(self):
        self.frames.pop()

    def lookup(self, name):
        for f in reversed(self.frames):
            if name in f:
                return f[name]
        return None


class Parser:
    def __init__(self, src: str, filename: str = "<input>"):
        self.filename = filename
        self.toks = tokenize(src, filename)
        self.pos = 0
        self.reservoirs: dict = {}
        self.data: dict = {}
        self.dense: dict = {}
        self.sizes: set = set()
        self.scalars: set = set()
        self.scope = _Scope()
        # header-less programs declare reservoirs, bindings and operands on use
        self.implicit = False
        self.implicit_fields: dict = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, n=1) -> Token:
        return self.toks[min(self.pos + n, len(self.toks) - 1)]

    def error(self, msg, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise DSLSyntaxError(msg, tok.line, tok.col, self.filename)

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def accept(self, text) -> Optional[Token]:
        if self.at(text):
            t = self.tok
            self.pos += 1
            return t
        return None

    def expect(self, text) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            self.error(f"expected {text!r}, got {got!r}")
        t = self.tok
        self.pos += 1
        return t

    def name(self) -> Token:
        if self.tok.kind != "name":
            self.error(f"expected identifier, got {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.pos += 1
        return t

    # top level
    def program(self) -> Program:
        self.implicit = not (self.tok.kind == "name" and
                             self.tok.text in ("reservoir", "data", "dense"))
        while self.tok.text in ("reservoir", "data", "dense") and self.tok.kind == "name":
            self.decl()
        body = []
        while self.tok.kind != "eof":
            body.append(self.stmt())
        for name, fields in self.implicit_fields.items():
            self.reservoirs[name] = ReservoirDecl(name, tuple(fields))
        return Program(
            reservoirs=tuple(self.reservoirs.values()),
            data=tuple(self.data.values()),
            dense=tuple(self.dense.values()),
            body=tuple(body),
        )

    def decl(self):
        kw = self.name().text
        nt = self.name()
        if nt.text in self.reservoirs or nt.text in self.data or nt.text in self.dense:
            self.error(f"duplicate declaration of {nt.text!r}", nt)
        if kw == "reservoir":
            self.expect("(")
            fields = [self.name().text]
            while self.accept(","):
                fields.append(self.name().text)
            self.expect(")")
            if len(set(fields)) != len(fields):
                self.error(f"duplicate field in reservoir {nt.text!r}", nt)
            source = None
            if self.accept("from"):
                st = self.name()
                if st.text not in self.reservoirs:
                    self.error(f"unbound identifier {st.text!r}", st)
                source = st.text
            self.reservoirs[nt.text] = ReservoirDecl(nt.text, tuple(fields), source)
        elif kw == "data":
            self.expect("(")
            rt = self.name()
            if rt.text not in self.reservoirs:
                self.error(f"unbound identifier {rt.text!r}", rt)
            self.expect(")")
            self.data[nt.text] = DataDecl(nt.text, rt.text)
        else:
            self.expect("[")
            dims = [self.dim()]
            while self.accept(","):
                dims.append(self.dim())
            self.expect("]")
            self.dense[nt.text] = DenseDecl(nt.text, tuple(dims))
        self.expect(";")

    def dim(self):
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Const(int(t.text))
        n = self.name().text
        self.sizes.add(n)
        return Var(n)

    # statements
    def block(self) -> tuple:
        if self.accept("{"):
            out = []
            while not self.accept("}"):
                if self.tok.kind == "eof":
                    self.error("unterminated block")
                out.append(self.stmt())
            return tuple(out)
        return (self.stmt(),)

    def stmt(self):
        if self.at("for"):
            return self.for_stmt()
        if self.at("forelem"):
            return self.forelem_stmt()
        return self.assign_stmt()

    def for_stmt(self):
        self.expect("for")
        self.expect("(")
        vt = self.name()
        var = vt.text
        self.expect("=")
        start = self.expr()
        if self.accept(".."):
            end = self.expr()
            lo, hi, desc = shift(start, -1), end, False
        elif self.accept("downto"):
            end = self.expr()
            lo, hi, desc = shift(end, -1), start, True
        else:
            self.expect(";")
            if self.name().text != var:
                self.error("loop condition must test the loop variable", self.toks[self.pos - 1])
            rel = self.tok.text
            if rel not in ("<", "<=", ">", ">="):
                self.error(f"expected comparison, got {rel!r}")
            self.pos += 1
            end = self.expr()
            self.expect(";")
            if self.name().text != var:
                self.error("loop step must update the loop variable", self.toks[self.pos - 1])
            step = self.tok.text
            if step not in ("++", "--"):
                self.error(f"expected '++' or '--', got {step!r}")
            self.pos += 1
            if (step == "++") != (rel in ("<", "<=")):
                self.error("loop step direction contradicts its condition")
            if rel == "<":
                lo, hi, desc = start, end, False
            elif rel == "<=":
                lo, hi, desc = shift(start, -1), end, False
            elif rel == ">=":
                lo, hi, desc = shift(end, -1), start, True
            else:
                lo, hi, desc = shift(end, 1), shift(start, 1), True
        self.expect(")")
        self.scope.push(var, "int")
        body = self.block()
        self.scope.pop()
        return For(var, lo, hi, desc, body)

    def forelem_stmt(self):
        self.expect("forelem")
        self.expect("(")
        var = self.name().text
        self.expect(";")
        vt = self.name()
        if vt.text != var:
            self.error(f"membership must bind {var!r}", vt)
        self.expect("in")
        domain, kind = self.subset()
        self.expect(")")
        self.scope.push(var, kind)
        body = self.block()
        self.scope.pop()
        return Forelem(var, domain, body)

    def subset(self):
        if self.at("range") and self.peek().text == "(":
            self.pos += 1
            self.expect("(")
            lo = self.expr()
            self.expect(",")
            hi = self.expr()
            self.expect(")")
            return Range(lo, hi), "int"
        rt = self.name()
        res = self._reservoir(rt)
        if not self.accept("."):
            return ReservoirDomain(res.name), ("tuple", res.name)
        if self.accept("("):
            fields = [self.field_of(res)]
            while self.accept(","):
                fields.append(self.field_of(res))
            self.expect(")")
        else:
            fields = [self.field_of(res)]
            if not self.at("["):
                return FieldValues(res.name, fields[0]), "int"
        bt = self.expect("[")
        if len(fields) == 1:
            values = [self.val()]
        else:
            self.expect("(")
            values = [self.val()]
            while self.accept(","):
                values.append(self.val())
            self.expect(")")
        self.expect("]")
        if len(values) != len(fields):
            self.error(f"condition arity mismatch: {len(fields)} fields, "
                       f"{len(values)} values", bt)
        return (ReservoirDomain(res.name, Condition(tuple(fields), tuple(values))),
                ("tuple", res.name))

    def _reservoir(self, rt: Token):
        res = self.reservoirs.get(rt.text)
        if res is None and self.implicit and rt.text not in self.data \
                and rt.text not in self.dense:
            self.implicit_fields.setdefault(rt.text, [])
            return ReservoirDecl(rt.text, ())
        if res is None:
            self.error(f"unbound identifier {rt.text!r}", rt)
        return res

    def field_of(self, res: ReservoirDecl) -> str:
        ft = self.name()
        fields = self.implicit_fields.get(res.name)
        if fields is not None:
            if ft.text not in fields:
                fields.append(ft.text)
            return ft.text
        if ft.text not in res.schema:
            self.error(f"reservoir {res.name!r} has no field {ft.text!r}", ft)
        return ft.text

    def val(self):
        if self.at("("):
            self.pos += 1
            first = self.expr()
            if self.accept(","):
                if self.accept("inf"):
                    hi = None
                else:
                    hi = self.expr()
                self.expect(")")
                return Interval(first, hi)
            self.expect(")")
            return self.binary_rest(first, 1)
        return self.expr()

    def assign_stmt(self):
        declared = False
        if self.tok.kind == "name" and self.tok.text in _TYPES and self.peek().kind == "name":
            self.pos += 1
            declared = True
        st = self.tok
        target = self.lvalue(declared)
        op = self.tok.text
        if op not in ("=", "+=", "-="):
            self.error(f"expected assignment operator, got {op or 'end of input'!r}")
        self.pos += 1
        value = self.expr()
        self.expect(";")
        if isinstance(target, Var):
            if target.name not in self.scalars:
                if op != "=":
                    self.error(f"unbound identifier {target.name!r}", st)
                self.scalars.add(target.name)
        return Assign(target, op, value)

    def lvalue(self, declared: bool):
        nt = self.name()
        if self.implicit and nt.text not in self.data and nt.text not in self.dense \
                and self.scope.lookup(nt.text) is None and self.at("["):
            self._declare_on_use(nt)
        if nt.text in self.dense:
            return self.dense_index(nt)
        if nt.text in self.data:
            return self.data_ref(nt)
        if self.scope.lookup(nt.text) is not None or nt.text in self.reservoirs:
            self.error(f"cannot assign to {nt.text!r}", nt)
        if declared:
            self.scalars.add(nt.text)
        return Var(nt.text)

    # expressions
    def expr(self):
        return self.binary_rest(self.unary(), 1)

    def binary_rest(self, lhs, min_prec):
        """Precedence climbing over ``+ - * /`` (all left-associative)."""
        while self._binop_prec() >= min_prec:
            op = self.tok.text
            p = self._binop_prec()
            self.pos += 1
            rhs = self.unary()
            while self._binop_prec() > p:
                rhs = self.binary_rest(rhs, p + 1)
            lhs = BinOp(op, lhs, rhs)
        return lhs

    def _binop_prec(self) -> int:
        if self.tok.kind != "op":
            return -1
        return {"+": 1, "-": 1, "*": 2, "/": 2}.get(self.tok.text, -1)

    def unary(self):
        if self.accept("-"):
            operand = self.unary()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return BinOp("-", Const(0), operand)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Const(float(t.text)) if "." in t.text or "e" in t.text.lower() \
                else Const(int(t.text))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        nt = self.name()
        name = nt.text
        if name in ("min", "cdiv") and self.at("("):
            self.pos += 1
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(")")
            return BinOp(name, a, b)
        if name == "extent" and self.at("("):
            self.pos += 1
            rt = self.name()
            res = self.reservoirs.get(rt.text)
            if res is None:
                self.error(f"unbound identifier {rt.text!r}", rt)
            self.expect(".")
            f = self.field_of(res)
            self.expect(")")
            return Extent(res.name, f)
        if self.implicit and name not in self.data and name not in self.dense \
                and self.scope.lookup(name) is None and self.tok.text in ("(", "["):
            self._declare_on_use(nt)
        if name in self.data:
            return self.data_ref(nt)
        if name in self.dense:
            return self.dense_index(nt)
        kind = self.scope.lookup(name)
        if self.at(".") and self.peek().kind == "name":
            if not (isinstance(kind, tuple) and kind[0] == "tuple"):
                self.error(f"{name!r} is not a tuple variable", nt)
            self.pos += 1
            res = self.reservoirs.get(kind[1]) or ReservoirDecl(kind[1], ())
            return FieldRef(name, self.field_of(res))
        if kind is None and name not in self.scalars and name not in self.sizes:
            self.error(f"unbound identifier {name!r}", nt)
        if isinstance(kind, tuple):
            self.error(f"tuple variable {name!r} used as a value", nt)
        return Var(name)

    def _declare_on_use(self, nt: Token):
        """``A(t)`` or ``A[t]`` with a tuple variable is an address function;
        any other ``X[...]`` is a dense operand with one size per index."""
        arg, after = self.peek(), self.peek(2)
        kind = self.scope.lookup(arg.text) if arg.kind == "name" else None
        if isinstance(kind, tuple) and kind[0] == "tuple" and \
                after.text == {"(": ")", "[": "]"}[self.tok.text]:
            self.data[nt.text] = DataDecl(nt.text, kind[1])
            return
        if self.tok.text != "[":
            self.error(f"unbound identifier {nt.text!r}", nt)
        depth, n, i = 0, 1, self.pos
        while True:
            t = self.toks[i]
            if t.kind == "eof":
                break
            if t.text in ("(", "["):
                depth += 1
            elif t.text in (")", "]"):
                depth -= 1
                if depth == 0:
                    break
            elif t.text == "," and depth == 1:
                n += 1
            i += 1
        dims = tuple(Var(f"{nt.text}_n{d}") for d in range(n))
        self.sizes.update(v.name for v in dims)
        self.dense[nt.text] = DenseDecl(nt.text, dims)

    def data_ref(self, nt: Token):
        close = {"(": ")", "[": "]"}
        opener = self.tok.text
        if opener not in close:
            self.error(f"address function {nt.text!r} needs an argument")
        self.pos += 1
        vt = self.name()
        kind = self.scope.lookup(vt.text)
        if not (isinstance(kind, tuple) and kind[0] == "tuple"):
            self.error(f"{vt.text!r} is not a tuple variable", vt)
        self.expect(close[opener])
        return DataRef(nt.text, vt.text)

    def dense_index(self, nt: Token):
        decl = self.dense[nt.text]
        self.expect("[")
        idx = [self.expr()]
        while self.accept(","):
            idx.append(self.expr())
        self.expect("]")
        while self.at("["):  # C-style B[i][j]
            self.pos += 1
            idx.append(self.expr())
            self.expect("]")
        if len(idx) != len(decl.dims):
            self.error(f"{nt.text!r} has {len(decl.dims)} dimension(s), "
                       f"indexed with {len(idx)}", nt)
        return Index(nt.text, tuple(idx))


def parse_program(source: str, filename: str = "<input>") -> Program:
    """Parse DSL text into a :class:`Program` with resolved scopes."""
    return Parser(source, filename).program()
