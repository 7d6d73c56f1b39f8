"""Parser and printer for the textual bracket language.

Grammar (whitespace-insensitive)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | primary ;
    primary  = NUMBER | bracket | expect | variance | charfn | "(" expr ")" ;
    bracket  = "P" "(" event "|" { opseq "|" } ket ")" ;
    expect   = "E" "[" opseq [ "|" ket ] "]" ;
    variance = "Var" "[" opseq [ "|" ket ] "]" ;
    charfn   = "phi" "(" rvref "," signed ")" ;
    opseq    = op { ["*"] op } ;
    op       = "I" | "I_" NAME | NAME "(" rvref ")" | rvref ;
    ket      = rvref "," rvref { "," rvref } | NAME "@" NUMBER | event ;
    event    = inter { "union" inter } ;
    inter    = compl { "&" compl } ;
    compl    = "~" compl | atom ;
    atom     = "Omega" | rvref "=" signed | NAME | "(" event ")" ;
    rvref    = NAME [ "@" NUMBER ] ;
    signed   = [ "-" ] NUMBER ;

``E[...]`` and ``Var[...]`` are sugar: ``E[X | H]`` is ``P(Omega | X | H)`` and
``Var[X]`` is ``P(Omega | X X | Omega) - P(Omega | X | Omega) * P(Omega | X | Omega)``.
Names beginning with ``I_`` in operator position are indicators of the named
event; a bare ``I`` is the identity operator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from pbn.errors import PBNSyntaxError

Span = tuple


def _span():
    return field(default=(0, 0), compare=False, repr=False)


# --- events -----------------------------------------------------------------

@dataclass(frozen=True)
class Omega:
    span: Span = _span()


@dataclass(frozen=True)
class RvRef:
    name: str
    time: Optional[float] = None
    span: Span = _span()


@dataclass(frozen=True)
class EventRef:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class Assign:
    rv: RvRef
    value: float
    span: Span = _span()


@dataclass(frozen=True)
class Inter:
    left: "EventExpr"
    right: "EventExpr"
    span: Span = _span()


@dataclass(frozen=True)
class Union_:
    left: "EventExpr"
    right: "EventExpr"
    span: Span = _span()


@dataclass(frozen=True)
class Compl:
    inner: "EventExpr"
    span: Span = _span()


@dataclass(frozen=True)
class RvList:
    items: tuple
    span: Span = _span()


EventExpr = Union[Omega, EventRef, Assign, Inter, Union_, Compl]


# --- operators ----------------------------------------------------------------

@dataclass(frozen=True)
class Obs:
    rv: RvRef
    span: Span = _span()


@dataclass(frozen=True)
class Ind:
    event: str
    span: Span = _span()


@dataclass(frozen=True)
class Func:
    fn: str
    rv: RvRef
    span: Span = _span()


@dataclass(frozen=True)
class Ident:
    span: Span = _span()


OpExpr = Union[Obs, Ind, Func, Ident]


# --- expressions --------------------------------------------------------------

@dataclass(frozen=True)
class Bracket:
    bra: EventExpr
    ops: tuple
    ket: Union[EventExpr, RvList]
    span: Span = _span()


@dataclass(frozen=True)
class CharFn:
    rv: RvRef
    k: float
    span: Span = _span()


@dataclass(frozen=True)
class Scalar:
    value: float
    span: Span = _span()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "BracketExpr"
    right: "BracketExpr"
    span: Span = _span()


BracketExpr = Union[Bracket, CharFn, Scalar, BinOp]


# --- lexer --------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<NUMBER>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<NAME>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<SYM>[()\[\]|,&~=@+\-*/])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PBNSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            out.append(Token(tok if kind == "SYM" else kind, tok, pos))
        pos = m.end()
    out.append(Token("EOF", "", len(text)))
    return out


# --- parser -------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected, tok: Token | None = None):
        tok = tok or self.tok
        what = "end of input" if tok.kind == "EOF" else repr(tok.text)
        raise PBNSyntaxError(f"unexpected {what}", self.text, tok.pos, expected)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            self.fail([text or kind])
        return t

    def end(self) -> int:
        return self.toks[self.i - 1].pos + len(self.toks[self.i - 1].text)

    # expressions
    def parse(self):
        e = self.expr()
        if self.tok.kind != "EOF":
            self.fail(["+", "-", "*", "/", "EOF"])
        return e

    def expr(self):
        start = self.tok.pos
        left = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.tok.kind
            self.i += 1
            left = BinOp(op, left, self.term(), (start, self.end()))
        return left

    def term(self):
        start = self.tok.pos
        left = self.unary()
        while self.tok.kind in ("*", "/"):
            op = self.tok.kind
            self.i += 1
            left = BinOp(op, left, self.unary(), (start, self.end()))
        return left

    def unary(self):
        start = self.tok.pos
        if self.accept("-"):
            if self.tok.kind == "NUMBER":
                num = self.expect("NUMBER")
                return Scalar(-float(num.text), (start, self.end()))
            inner = self.unary()
            return BinOp("-", Scalar(0.0, (start, start)), inner, (start, self.end()))
        return self.primary()

    def primary(self):
        t = self.tok
        start = t.pos
        if t.kind == "NUMBER":
            self.i += 1
            return Scalar(float(t.text), (start, self.end()))
        if t.kind == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "NAME":
            nxt = self.peek().kind
            if t.text == "P" and nxt == "(":
                return self.bracket()
            if t.text in ("E", "Var") and nxt == "[":
                return self.expect_sugar()
            if t.text == "phi" and nxt == "(":
                return self.charfn()
        self.fail(["NUMBER", "(", "P(", "E[", "Var[", "phi(", "-"])

    def bracket(self):
        start = self.tok.pos
        self.expect("NAME", "P")
        self.expect("(")
        bra = self.event()
        self.expect("|")
        ops: list = []
        while True:
            save = self.i
            seg = self.try_opseq()
            if seg is not None and self.tok.kind == "|":
                self.i += 1
                ops.extend(seg)
                continue
            self.i = save
            break
        ket = self.ket()
        if self.tok.kind != ")":
            self.fail([")", "|", "&", "union", ","])
        self.i += 1
        return Bracket(bra, tuple(ops), ket, (start, self.end()))

    def expect_sugar(self):
        start = self.tok.pos
        kw = self.expect("NAME").text
        self.expect("[")
        ops = self.opseq()
        ket = Omega((self.tok.pos, self.tok.pos))
        if self.accept("|"):
            ket = self.ket()
        if self.tok.kind != "]":
            self.fail(["]"])
        self.i += 1
        span = (start, self.end())
        first = Bracket(Omega(span), tuple(ops), ket, span)
        if kw == "E":
            return first
        second = Bracket(Omega(span), tuple(ops) + tuple(ops), ket, span)
        return BinOp("-", second, BinOp("*", first, first, span), span)

    def charfn(self):
        start = self.tok.pos
        self.expect("NAME", "phi")
        self.expect("(")
        rv = self.rvref()
        self.expect(",")
        k = self.signed()
        self.expect(")")
        return CharFn(rv, k, (start, self.end()))

    def signed(self) -> float:
        neg = self.accept("-") is not None
        num = self.tok
        if num.kind != "NUMBER":
            self.fail(["NUMBER", "-"] if not neg else ["NUMBER"])
        self.i += 1
        return -float(num.text) if neg else float(num.text)

    def rvref(self) -> RvRef:
        t = self.tok
        if t.kind != "NAME":
            self.fail(["NAME"])
        self.i += 1
        time = None
        if self.accept("@"):
            num = self.tok
            if num.kind != "NUMBER":
                self.fail(["NUMBER"])
            self.i += 1
            time = float(num.text)
        return RvRef(t.text, time, (t.pos, self.end()))

    # operators
    def op(self):
        t = self.tok
        if t.kind != "NAME" or t.text in ("Omega", "union"):
            return None
        start = t.pos
        if t.text == "I" and self.peek().kind not in ("@", "("):
            self.i += 1
            return Ident((start, self.end()))
        if t.text.startswith("I_") and len(t.text) > 2 and self.peek().kind != "(":
            self.i += 1
            return Ind(t.text[2:], (start, self.end()))
        if self.peek().kind == "(":
            self.i += 2
            rv = self.rvref()
            self.expect(")")
            return Func(t.text, rv, (start, self.end()))
        rv = self.rvref()
        return Obs(rv, rv.span)

    def try_opseq(self):
        try:
            first = self.op()
        except PBNSyntaxError:
            return None
        if first is None:
            return None
        seq = [first]
        while True:
            save = self.i
            self.accept("*")
            try:
                nxt = self.op()
            except PBNSyntaxError:
                nxt = None
            if nxt is None:
                self.i = save
                return seq
            seq.append(nxt)

    def opseq(self):
        seq = self.try_opseq()
        if seq is None:
            self.fail(["NAME", "I", "I_<event>"])
        return seq

    # events
    def ket(self):
        if self.tok.kind == "NAME" and self.peek().kind in (",", "@"):
            save = self.i
            first = self.rvref()
            if self.tok.kind == ",":
                items = [first]
                while self.accept(","):
                    items.append(self.rvref())
                return RvList(tuple(items), (first.span[0], self.end()))
            if first.time is not None and self.tok.kind in (")", "]"):
                return RvList((first,), first.span)
            self.i = save
        return self.event()

    def event(self):
        start = self.tok.pos
        left = self.inter()
        while self.accept("NAME", "union"):
            left = Union_(left, self.inter(), (start, self.end()))
        return left

    def inter(self):
        start = self.tok.pos
        left = self.compl()
        while self.accept("&"):
            left = Inter(left, self.compl(), (start, self.end()))
        return left

    def compl(self):
        start = self.tok.pos
        if self.accept("~"):
            return Compl(self.compl(), (start, self.end()))
        return self.event_atom()

    def event_atom(self):
        t = self.tok
        start = t.pos
        if self.accept("("):
            e = self.event()
            self.expect(")")
            return e
        if t.kind == "NAME" and t.text == "Omega":
            self.i += 1
            return Omega((start, self.end()))
        if t.kind == "NAME" and t.text != "union":
            if self.peek().kind in ("=", "@"):
                rv = self.rvref()
                if not self.accept("="):
                    self.fail(["="])
                return Assign(rv, self.signed(), (start, self.end()))
            self.i += 1
            return EventRef(t.text, (start, self.end()))
        self.fail(["Omega", "NAME", "(", "~"])


def parse(text: str) -> BracketExpr:
    """Parse an expression; raises PBNSyntaxError with position information."""
    return _Parser(text).parse()


# --- printer ------------------------------------------------------------------

def _num(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _rv(r: RvRef) -> str:
    return r.name if r.time is None else f"{r.name}@{_num(r.time)}"


_EV_PREC = {Union_: 1, Inter: 2}


def print_event(e, ctx: int = 0) -> str:
    if isinstance(e, Omega):
        return "Omega"
    if isinstance(e, EventRef):
        return e.name
    if isinstance(e, Assign):
        return f"{_rv(e.rv)} = {_num(e.value)}"
    if isinstance(e, Compl):
        return "~" + print_event(e.inner, 3)
    if isinstance(e, RvList):
        return ", ".join(_rv(r) for r in e.items)
    prec = _EV_PREC[type(e)]
    sym = " union " if isinstance(e, Union_) else " & "
    s = print_event(e.left, prec) + sym + print_event(e.right, prec + 1)
    return f"({s})" if prec < ctx else s


def print_op(o) -> str:
    if isinstance(o, Ident):
        return "I"
    if isinstance(o, Ind):
        return f"I_{o.event}"
    if isinstance(o, Func):
        return f"{o.fn}({_rv(o.rv)})"
    return _rv(o.rv)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e, ctx: int = 0) -> str:
    """Canonical rendering; ``parse(to_text(e)) == e``."""
    if isinstance(e, Scalar):
        return _num(e.value)
    if isinstance(e, CharFn):
        return f"phi({_rv(e.rv)}, {_num(e.k)})"
    if isinstance(e, Bracket):
        mid = " ".join(print_op(o) for o in e.ops)
        ket = print_event(e.ket)
        if mid:
            return f"P({print_event(e.bra)} | {mid} | {ket})"
        return f"P({print_event(e.bra)} | {ket})"
    prec = _PREC[e.op]
    s = f"{to_text(e.left, prec)} {e.op} {to_text(e.right, prec + 1)}"
    return f"({s})" if prec < ctx else s


def walk(e):
    """Yield every node of an expression tree, parents first."""
    yield e
    children = []
    if isinstance(e, BinOp):
        children = [e.left, e.right]
    elif isinstance(e, Bracket):
        children = [e.bra, *e.ops, e.ket]
    elif isinstance(e, (Inter, Union_)):
        children = [e.left, e.right]
    elif isinstance(e, Compl):
        children = [e.inner]
    elif isinstance(e, Assign):
        children = [e.rv]
    elif isinstance(e, RvList):
        children = list(e.items)
    elif isinstance(e, (Obs, Func, CharFn)):
        children = [e.rv]
    for c in children:
        yield from walk(c)
