"""Abstract syntax, concrete syntax, and substitution for the core calculus.

Concrete grammar (labels use the principal syntax of :mod:`nmifc.lattice`)::

    type  ::= sum | sum -[pc]-> type
    sum   ::= prod (+ prod)*
    prod  ::= tatom (* tatom)*
    tatom ::= unit | bool | X | (type) | forall X [pc]. type | label says tatom

    expr  ::= lam (x : type) [pc]. expr | tlam X [pc]. expr
            | bind x = expr in expr | case expr of inj1 x. expr | inj2 y. expr
            | decl expr to label | endorse expr to label | app
    app   ::= pre (pre | [type])*
    pre   ::= inj1 [type]? pre | inj2 [type]? pre | proj1 pre | proj2 pre
            | eta[label] pre | etav[label] pre | bracket[H; pc] pre | atom
    atom  ::= x | () | (expr) | <expr, expr> | tt | ff | [hole n : H (: type)?]

The label after ``to`` stops at ``&``-level; wrap disjunctions in parentheses.
``tt``/``ff`` abbreviate ``inj1 [unit + unit] ()``/``inj2 [unit + unit] ()`` and
``bool`` abbreviates ``unit + unit``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace

from . import lattice
from .lattice import CONF, INTEG, parse_principal_from, show as show_principal
from .lexer import ParseError, TokenStream

# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class UnitT:
    pass


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class SumT:
    left: object
    right: object


@dataclass(frozen=True)
class ProdT:
    left: object
    right: object


@dataclass(frozen=True)
class FunT:
    arg: object
    pc: object
    result: object


@dataclass(frozen=True)
class ForallT:
    var: str
    pc: object
    body: object


@dataclass(frozen=True)
class Says:
    label: object
    body: object


UNIT_T = UnitT()
BOOL_T = SumT(UNIT_T, UNIT_T)

# ---------------------------------------------------------------------------
# Expressions. ``span`` is (line, col) of the first token and never compared.


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: object = _span()


@dataclass(frozen=True)
class UnitV:
    span: object = _span()


@dataclass(frozen=True)
class Pair:
    left: object
    right: object
    span: object = _span()


@dataclass(frozen=True)
class Inj:
    index: int
    body: object
    ann: object = None  # the whole sum type, when written
    span: object = _span()


@dataclass(frozen=True)
class Proj:
    index: int
    body: object
    span: object = _span()


@dataclass(frozen=True)
class Lam:
    var: str
    type: object
    pc: object
    body: object
    span: object = _span()


@dataclass(frozen=True)
class TLam:
    var: str
    pc: object
    body: object
    span: object = _span()


@dataclass(frozen=True)
class App:
    fn: object
    arg: object
    span: object = _span()


@dataclass(frozen=True)
class TApp:
    fn: object
    type: object
    span: object = _span()


@dataclass(frozen=True)
class Case:
    scrutinee: object
    left_var: str
    left: object
    right_var: str
    right: object
    span: object = _span()


@dataclass(frozen=True)
class Eta:
    """Source-level protection of a computed value."""

    label: object
    body: object
    span: object = _span()


@dataclass(frozen=True)
class EtaV:
    """Runtime value already protected at ``label``."""

    label: object
    body: object
    span: object = _span()


@dataclass(frozen=True)
class Bind:
    var: str
    bound: object
    body: object
    span: object = _span()


@dataclass(frozen=True)
class Downgrade:
    """``decl`` when aspect is conf, ``endorse`` when aspect is integ."""

    aspect: str
    body: object
    label: object
    span: object = _span()


@dataclass(frozen=True)
class Bracket:
    body: object
    high: object
    pc: object
    span: object = _span()


@dataclass(frozen=True)
class Hole:
    index: int
    high: object
    type: object = None
    span: object = _span()


def tt():
    return Inj(1, UnitV(), BOOL_T)


def ff():
    return Inj(2, UnitV(), BOOL_T)


def decl(e, label):
    return Downgrade(CONF, e, label)


def endorse(e, label):
    return Downgrade(INTEG, e, label)


def is_value(e):
    match e:
        case UnitV() | Lam() | TLam():
            return True
        case Inj(_, body) | EtaV(_, body) | Bracket(body):
            return is_value(body)
        case Pair(a, b):
            return is_value(a) and is_value(b)
    return False


def children(e):
    """Immediate subexpressions."""
    match e:
        case Var() | UnitV() | Hole():
            return ()
        case Pair(a, b) | App(a, b):
            return (a, b)
        case Inj(_, b) | Proj(_, b) | Eta(_, b) | EtaV(_, b) | Downgrade(_, b) | Bracket(b):
            return (b,)
        case Lam(_, _, _, b) | TLam(_, _, b) | TApp(b):
            return (b,)
        case Bind(_, a, b):
            return (a, b)
        case Case(s, _, a, _, b):
            return (s, a, b)
    raise TypeError(f"not an expression: {e!r}")


def node_count(e):
    return 1 + sum(node_count(c) for c in children(e))


def contains(e, pred):
    return pred(e) or any(contains(c, pred) for c in children(e))


def has_downgrade(e, aspect=None):
    return contains(e, lambda n: isinstance(n, Downgrade) and aspect in (None, n.aspect))


# ---------------------------------------------------------------------------
# Free variables and capture-avoiding substitution


def free_vars(e):
    match e:
        case Var(x):
            return {x}
        case Lam(x, _, _, body):
            return free_vars(body) - {x}
        case Bind(x, bound, body):
            return free_vars(bound) | (free_vars(body) - {x})
        case Case(s, x, a, y, b):
            return free_vars(s) | (free_vars(a) - {x}) | (free_vars(b) - {y})
    out = set()
    for c in children(e):
        out |= free_vars(c)
    return out


def free_type_vars(t):
    match t:
        case UnitT():
            return set()
        case TVar(x):
            return {x}
        case SumT(a, b) | ProdT(a, b):
            return free_type_vars(a) | free_type_vars(b)
        case FunT(a, _, b):
            return free_type_vars(a) | free_type_vars(b)
        case ForallT(x, _, body):
            return free_type_vars(body) - {x}
        case Says(_, body):
            return free_type_vars(body)
    raise TypeError(f"not a type: {t!r}")


def expr_free_type_vars(e):
    out = set()
    match e:
        case Lam(_, t, _, _) | TApp(_, t):
            out |= free_type_vars(t)
        case Inj(_, _, t) | Hole(_, _, t) if t is not None:
            out |= free_type_vars(t)
    for c in children(e):
        out |= expr_free_type_vars(c)
    if isinstance(e, TLam):
        out.discard(e.var)
    return out


_SUFFIX = re.compile(r"^(.*?)(_\d+)?$")


def fresh(name, avoid):
    base = _SUFFIX.match(name).group(1) or "_"
    if name not in avoid:
        return name
    sep = "" if base.endswith("_") else "_"
    k = 1
    while f"{base}{sep}{k}" in avoid:
        k += 1
    return f"{base}{sep}{k}"


def substitute(e, x, v):
    """e[x := v], renaming binders that would capture free variables of v."""
    return _subst(e, x, v, frozenset(free_vars(v)))


def _under(binder, body, x, v, fv):
    """Substitute below a binder, renaming it if it would capture."""
    if binder == x:
        return binder, body, False
    if binder in fv:
        new = fresh(binder, fv | free_vars(body) | {x})
        body = _subst(body, binder, Var(new), frozenset({new}))
        binder = new
    return binder, body, True


def _subst(e, x, v, fv):
    match e:
        case Var(y):
            return v if y == x else e
        case UnitV() | Hole():
            return e
        case Lam(y, _, _, body):
            y, body, go = _under(y, body, x, v, fv)
            return replace(e, var=y, body=_subst(body, x, v, fv) if go else body)
        case Bind(y, bound, body):
            bound = _subst(bound, x, v, fv)
            y, body, go = _under(y, body, x, v, fv)
            return replace(e, var=y, bound=bound, body=_subst(body, x, v, fv) if go else body)
        case Case(s, y, a, z, b):
            s = _subst(s, x, v, fv)
            y, a, go_a = _under(y, a, x, v, fv)
            z, b, go_b = _under(z, b, x, v, fv)
            return replace(
                e, scrutinee=s, left_var=y, left=_subst(a, x, v, fv) if go_a else a,
                right_var=z, right=_subst(b, x, v, fv) if go_b else b,
            )
    return _map_children(e, lambda c: _subst(c, x, v, fv))


def _map_children(e, f):
    match e:
        case Var() | UnitV() | Hole():
            return e
        case Pair(a, b):
            return replace(e, left=f(a), right=f(b))
        case App(a, b):
            return replace(e, fn=f(a), arg=f(b))
        case Inj() | Proj() | Eta() | EtaV() | Downgrade() | Bracket() | Lam() | TLam():
            return replace(e, body=f(e.body))
        case TApp(a):
            return replace(e, fn=f(a))
        case Bind(_, a, b):
            return replace(e, bound=f(a), body=f(b))
        case Case(s, _, a, _, b):
            return replace(e, scrutinee=f(s), left=f(a), right=f(b))
    raise TypeError(f"not an expression: {e!r}")


def subst_type(t, x, s):
    """t[X := s], capture-avoiding."""
    return _subst_type(t, x, s, frozenset(free_type_vars(s)))


def _subst_type(t, x, s, fv):
    match t:
        case UnitT():
            return t
        case TVar(y):
            return s if y == x else t
        case SumT(a, b):
            return SumT(_subst_type(a, x, s, fv), _subst_type(b, x, s, fv))
        case ProdT(a, b):
            return ProdT(_subst_type(a, x, s, fv), _subst_type(b, x, s, fv))
        case FunT(a, pc, b):
            return FunT(_subst_type(a, x, s, fv), pc, _subst_type(b, x, s, fv))
        case Says(label, body):
            return Says(label, _subst_type(body, x, s, fv))
        case ForallT(y, pc, body):
            if y == x:
                return t
            if y in fv:
                new = fresh(y, fv | free_type_vars(body) | {x})
                body = _subst_type(body, y, TVar(new), frozenset({new}))
                y = new
            return ForallT(y, pc, _subst_type(body, x, s, fv))
    raise TypeError(f"not a type: {t!r}")


def subst_type_in_expr(e, x, s):
    """e[X := s] for a type variable X."""
    return _subst_type_expr(e, x, s, frozenset(free_type_vars(s)))


def _subst_type_expr(e, x, s, fv):
    go = lambda c: _subst_type_expr(c, x, s, fv)  # noqa: E731
    match e:
        case Lam(_, t, _, body):
            return replace(e, type=_subst_type(t, x, s, fv), body=go(body))
        case TApp(fn, t):
            return replace(e, fn=go(fn), type=_subst_type(t, x, s, fv))
        case Inj(_, body, t):
            return replace(e, body=go(body), ann=None if t is None else _subst_type(t, x, s, fv))
        case Hole(_, _, t) if t is not None:
            return replace(e, type=_subst_type(t, x, s, fv))
        case TLam(y, _, body):
            if y == x:
                return e
            if y in fv:
                new = fresh(y, fv | expr_free_type_vars(body) | {x})
                body = _subst_type_expr(body, y, TVar(new), frozenset({new}))
                return replace(e, var=new, body=go(body))
            return replace(e, body=go(body))
    return _map_children(e, go)


# ---------------------------------------------------------------------------
# Alpha-equivalence via locally nameless keys


def type_key(t, env=(), label_key=None):
    lk = label_key or (lambda p: p)
    match t:
        case UnitT():
            return ("unit",)
        case TVar(x):
            for depth, name in enumerate(reversed(env)):
                if name == x:
                    return ("bound", depth)
            return ("tfree", x)
        case SumT(a, b):
            return ("sum", type_key(a, env, lk), type_key(b, env, lk))
        case ProdT(a, b):
            return ("prod", type_key(a, env, lk), type_key(b, env, lk))
        case FunT(a, pc, b):
            return ("fun", type_key(a, env, lk), lk(pc), type_key(b, env, lk))
        case ForallT(x, pc, body):
            return ("forall", lk(pc), type_key(body, env + (x,), lk))
        case Says(label, body):
            return ("says", lk(label), type_key(body, env, lk))
    raise TypeError(f"not a type: {t!r}")


def alpha_key(e, label_key=None, leaf=None):
    """Hashable key equal for alpha-equivalent expressions.

    ``leaf`` may map a node to a replacement key before the structural walk,
    which the security module uses to collapse invisible protected values.
    """
    lk = label_key or (lambda p: p)
    return _key(e, (), (), lk, leaf)


def _key(e, env, tenv, lk, leaf):
    if leaf is not None:
        hit = leaf(e)
        if hit is not None:
            return hit
    k = lambda c, env=env, tenv=tenv: _key(c, env, tenv, lk, leaf)  # noqa: E731
    tk = lambda t: None if t is None else type_key(t, tenv, lk)  # noqa: E731
    match e:
        case Var(x):
            for depth, name in enumerate(reversed(env)):
                if name == x:
                    return ("var", depth)
            return ("free", x)
        case UnitV():
            return ("unit",)
        case Pair(a, b):
            return ("pair", k(a), k(b))
        case Inj(i, body, ann):
            return ("inj", i, k(body), tk(ann))
        case Proj(i, body):
            return ("proj", i, k(body))
        case Lam(x, t, pc, body):
            return ("lam", tk(t), lk(pc), k(body, env + (x,)))
        case TLam(x, pc, body):
            return ("tlam", lk(pc), k(body, env, tenv + (x,)))
        case App(a, b):
            return ("app", k(a), k(b))
        case TApp(a, t):
            return ("tapp", k(a), tk(t))
        case Case(s, x, a, y, b):
            return ("case", k(s), k(a, env + (x,)), k(b, env + (y,)))
        case Eta(label, body):
            return ("eta", lk(label), k(body))
        case EtaV(label, body):
            return ("etav", lk(label), k(body))
        case Bind(x, a, b):
            return ("bind", k(a), k(b, env + (x,)))
        case Downgrade(aspect, body, label):
            return ("down", aspect, k(body), lk(label))
        case Bracket(body, high, pc):
            return ("bracket", getattr(high, "name", high), lk(pc), k(body))
        case Hole(i, high, t):
            return ("hole", i, getattr(high, "name", high), tk(t))
    raise TypeError(f"not an expression: {e!r}")


def alpha_equiv(e1, e2):
    return alpha_key(e1) == alpha_key(e2)


def types_alpha_equiv(t1, t2):
    return type_key(t1) == type_key(t2)


# ---------------------------------------------------------------------------
# Printing

_T_ARROW, _T_SUM, _T_PROD, _T_ATOM = range(4)


def show_type(t, prec=_T_ARROW):
    match t:
        case UnitT():
            return "unit"
        case TVar(x):
            return x
        case SumT(UnitT(), UnitT()):
            return "bool"
        case Says(label, body):
            return f"{show_principal(label)} says {show_type(body, _T_ATOM)}"
        case SumT(a, b):
            text, level = f"{show_type(a, _T_SUM)} + {show_type(b, _T_PROD)}", _T_SUM
        case ProdT(a, b):
            text, level = f"{show_type(a, _T_PROD)} * {show_type(b, _T_ATOM)}", _T_PROD
        case FunT(a, pc, b):
            text = f"{show_type(a, _T_SUM)} -[{show_principal(pc)}]-> {show_type(b, _T_ARROW)}"
            level = _T_ARROW
        case ForallT(x, pc, body):
            text, level = f"forall {x} [{show_principal(pc)}]. {show_type(body)}", _T_ARROW
        case _:
            raise TypeError(f"not a type: {t!r}")
    return f"({text})" if level < prec else text


_E_OPEN, _E_APP, _E_PRE, _E_ATOM = range(4)


def _label_after_to(label):
    text = show_principal(label)
    match label:
        case lattice.Disj() | lattice.Join() | lattice.Meet():
            return f"({text})"
    return text


def show_expr(e, prec=_E_OPEN):
    match e:
        case Var(x):
            return x
        case UnitV():
            return "()"
        case Inj(i, UnitV(), ann) if ann == BOOL_T:
            return "tt" if i == 1 else "ff"
        case Pair(a, b):
            return f"<{show_expr(a)}, {show_expr(b)}>"
        case Hole(i, high, t):
            name = getattr(high, "name", high)
            tail = "" if t is None else f" : {show_type(t)}"
            return f"[hole {i} : {name}{tail}]"
        case Inj(i, body, ann):
            ann_text = "" if ann is None else f" [{show_type(ann)}]"
            text, level = f"inj{i}{ann_text} {show_expr(body, _E_PRE)}", _E_PRE
        case Proj(i, body):
            text, level = f"proj{i} {show_expr(body, _E_PRE)}", _E_PRE
        case Eta(label, body):
            text, level = f"eta[{show_principal(label)}] {show_expr(body, _E_PRE)}", _E_PRE
        case EtaV(label, body):
            text, level = f"etav[{show_principal(label)}] {show_expr(body, _E_PRE)}", _E_PRE
        case Bracket(body, high, pc):
            name = getattr(high, "name", high)
            text = f"bracket[{name}; {show_principal(pc)}] {show_expr(body, _E_PRE)}"
            level = _E_PRE
        case App(a, b):
            text, level = f"{show_expr(a, _E_APP)} {show_expr(b, _E_PRE)}", _E_APP
        case TApp(a, t):
            text, level = f"{show_expr(a, _E_APP)} [{show_type(t)}]", _E_APP
        case Lam(x, t, pc, body):
            text = f"lam ({x} : {show_type(t)}) [{show_principal(pc)}]. {show_expr(body)}"
            level = _E_OPEN
        case TLam(x, pc, body):
            text, level = f"tlam {x} [{show_principal(pc)}]. {show_expr(body)}", _E_OPEN
        case Bind(x, a, b):
            text, level = f"bind {x} = {show_expr(a)} in {show_expr(b)}", _E_OPEN
        case Case(s, x, a, y, b):
            # a branch ending in an open form must not swallow the next branch
            left = show_expr(a, _E_APP if _ends_open(a) else _E_OPEN)
            text = f"case {show_expr(s)} of inj1 {x}. {left} | inj2 {y}. {show_expr(b)}"
            level = _E_OPEN
        case Downgrade(aspect, body, label):
            kw = "decl" if aspect == CONF else "endorse"
            text = f"{kw} {show_expr(body)} to {_label_after_to(label)}"
            level = _E_OPEN
        case _:
            raise TypeError(f"not an expression: {e!r}")
    return f"({text})" if level < prec else text


def _ends_open(e):
    """True when the printed form ends in a construct that extends rightwards
    through a following ``| inj2`` (only a case whose last branch is open)."""
    match e:
        case Lam(body=b) | TLam(body=b) | Bind(body=b):
            return _ends_open(b)
        case Case():
            return True
    return False


def show(e):
    return show_expr(e)


# ---------------------------------------------------------------------------
# Parsing


class Parser:
    def __init__(self, text, allow_runtime=False, high_sets=None):
        self.ts = TokenStream(text)
        self.allow_runtime = allow_runtime
        self.high_sets = high_sets or {}

    # -- principals and types

    def principal(self):
        return parse_principal_from(self.ts)

    def to_label(self):
        # conjunction level only, so that "| inj2" after a decl label is not consumed
        from .lattice import _parse_conj

        return _parse_conj(self.ts)

    def type(self):
        left = self.sum_type()
        if self.ts.accept("-["):
            pc = self.principal()
            self.ts.expect("]->")
            return FunT(left, pc, self.type())
        return left

    def sum_type(self):
        left = self.prod_type()
        while self.ts.accept("+"):
            left = SumT(left, self.prod_type())
        return left

    def prod_type(self):
        left = self.atom_type()
        while self.ts.accept("*"):
            left = ProdT(left, self.atom_type())
        return left

    def atom_type(self):
        ts = self.ts
        if ts.accept("unit"):
            return UNIT_T
        if ts.accept("bool"):
            return BOOL_T
        if ts.accept("forall"):
            x = ts.expect_ident("type variable").text
            ts.expect("[")
            pc = self.principal()
            ts.expect("]")
            ts.expect(".")
            return ForallT(x, pc, self.type())
        saved = ts.pos
        try:
            label = self.principal()
            if ts.accept("says"):
                return Says(label, self.atom_type())
        except ParseError:
            pass
        ts.pos = saved
        if ts.accept("("):
            t = self.type()
            ts.expect(")")
            return t
        tok = ts.peek
        if tok.kind == "ident" and tok.text not in lattice.RESERVED:
            ts.advance()
            return TVar(tok.text)
        ts.fail({"type"})

    # -- expressions

    def expr(self):
        ts = self.ts
        tok = ts.peek
        span = (tok.line, tok.col)
        if ts.accept("lam"):
            ts.expect("(")
            x = self.binder()
            ts.expect(":")
            t = self.type()
            ts.expect(")")
            ts.expect("[")
            pc = self.principal()
            ts.expect("]")
            ts.expect(".")
            return Lam(x, t, pc, self.expr(), span=span)
        if ts.accept("tlam"):
            x = ts.expect_ident("type variable").text
            ts.expect("[")
            pc = self.principal()
            ts.expect("]")
            ts.expect(".")
            return TLam(x, pc, self.expr(), span=span)
        if ts.accept("bind"):
            x = self.binder()
            ts.expect("=")
            bound = self.expr()
            ts.expect("in")
            return Bind(x, bound, self.expr(), span=span)
        if ts.accept("case"):
            s = self.expr()
            ts.expect("of")
            ts.expect("inj1")
            x = self.binder()
            ts.expect(".")
            a = self.expr()
            ts.expect("|")
            ts.expect("inj2")
            y = self.binder()
            ts.expect(".")
            return Case(s, x, a, y, self.expr(), span=span)
        for kw, aspect in (("decl", CONF), ("endorse", INTEG)):
            if ts.accept(kw):
                body = self.expr()
                ts.expect("to")
                return Downgrade(aspect, body, self.to_label(), span=span)
        return self.app()

    def binder(self):
        tok = self.ts.peek
        if tok.kind != "ident" or tok.text in lattice.RESERVED:
            self.ts.fail({"variable"})
        return self.ts.advance().text

    _PRE_START = {"inj1", "inj2", "proj1", "proj2", "eta", "etav", "bracket", "(", "<", "tt", "ff"}

    def starts_pre(self):
        tok = self.ts.peek
        if tok.kind == "ident":
            return tok.text not in lattice.RESERVED or tok.text in self._PRE_START
        if self.ts.at("["):
            return self.ts.peek_at(1).text == "hole"
        return self.ts.at("(", "<")

    def app(self):
        tok = self.ts.peek
        e = self.pre()
        while True:
            if self.ts.at("[") and self.ts.peek_at(1).text != "hole":
                self.ts.advance()
                t = self.type()
                self.ts.expect("]")
                e = TApp(e, t, span=(tok.line, tok.col))
            elif self.starts_pre():
                e = App(e, self.pre(), span=(tok.line, tok.col))
            else:
                return e

    def pre(self):
        ts = self.ts
        tok = ts.peek
        span = (tok.line, tok.col)
        for i in (1, 2):
            if ts.accept(f"inj{i}"):
                ann = None
                if ts.at("[") and ts.peek_at(1).text != "hole":
                    ts.advance()
                    ann = self.type()
                    ts.expect("]")
                return Inj(i, self.pre(), ann, span=span)
            if ts.accept(f"proj{i}"):
                return Proj(i, self.pre(), span=span)
        if ts.accept("eta"):
            ts.expect("[")
            label = self.principal()
            ts.expect("]")
            return Eta(label, self.pre(), span=span)
        if ts.at("etav"):
            if not self.allow_runtime:
                ts.fail({"expression"}, "runtime-only form 'etav' is not allowed in source")
            ts.advance()
            ts.expect("[")
            label = self.principal()
            ts.expect("]")
            return EtaV(label, self.pre(), span=span)
        if ts.at("bracket"):
            if not self.allow_runtime:
                ts.fail({"expression"}, "brackets are not allowed in source")
            ts.advance()
            ts.expect("[")
            high = self.high_set()
            ts.expect(";")
            pc = self.principal()
            ts.expect("]")
            return Bracket(self.pre(), high, pc, span=span)
        return self.atom()

    def high_set(self):
        name = self.ts.expect_ident("high set name").text
        return self.high_sets.get(name, name)

    def atom(self):
        ts = self.ts
        tok = ts.peek
        span = (tok.line, tok.col)
        if ts.accept("("):
            if ts.accept(")"):
                return UnitV(span=span)
            e = self.expr()
            ts.expect(")")
            return e
        if ts.accept("<"):
            a = self.expr()
            ts.expect(",")
            b = self.expr()
            ts.expect(">")
            return Pair(a, b, span=span)
        if ts.accept("tt"):
            return Inj(1, UnitV(span=span), BOOL_T, span=span)
        if ts.accept("ff"):
            return Inj(2, UnitV(span=span), BOOL_T, span=span)
        if ts.at("[") and ts.peek_at(1).text == "hole":
            ts.advance()
            ts.advance()
            num = ts.peek
            if num.kind != "int":
                ts.fail({"hole index"})
            ts.advance()
            ts.expect(":")
            high = self.high_set()
            t = None
            if ts.accept(":"):
                t = self.type()
            ts.expect("]")
            return Hole(int(num.text), high, t, span=span)
        if tok.kind == "ident" and tok.text not in lattice.RESERVED:
            ts.advance()
            return Var(tok.text, span=span)
        ts.fail({"expression", "variable", "'('", "'<'", "'tt'", "'ff'", "'[hole'"})


def parse(text, allow_runtime=False, high_sets=None, rename=True):
    """Parse one expression; bound variables are renamed apart unless ``rename`` is off."""
    p = Parser(text, allow_runtime, high_sets)
    e = p.expr()
    p.ts.expect_eof()
    return rename_apart(e) if rename else e


def parse_type(text):
    p = Parser(text)
    t = p.type()
    p.ts.expect_eof()
    return t


def parse_principal(text):
    return lattice.parse_principal(text)


# ---------------------------------------------------------------------------
# Renaming bound variables apart


def rename_apart(e):
    """Give every binder a name distinct from all free and other bound names."""
    used = set(free_vars(e))
    tused = set(expr_free_type_vars(e))
    return _rename(e, {}, {}, used, tused)


def _rename_type(t, tenv, tused):
    match t:
        case UnitT():
            return t
        case TVar(x):
            return TVar(tenv.get(x, x))
        case SumT(a, b):
            return SumT(_rename_type(a, tenv, tused), _rename_type(b, tenv, tused))
        case ProdT(a, b):
            return ProdT(_rename_type(a, tenv, tused), _rename_type(b, tenv, tused))
        case FunT(a, pc, b):
            return FunT(_rename_type(a, tenv, tused), pc, _rename_type(b, tenv, tused))
        case Says(label, body):
            return Says(label, _rename_type(body, tenv, tused))
        case ForallT(x, pc, body):
            new = fresh(x, tused)
            tused.add(new)
            return ForallT(new, pc, _rename_type(body, {**tenv, x: new}, tused))
    raise TypeError(f"not a type: {t!r}")


def _rename(e, env, tenv, used, tused):
    rt = lambda t: None if t is None else _rename_type(t, tenv, tused)  # noqa: E731

    def bind(x):
        new = fresh(x, used)
        used.add(new)
        return new, {**env, x: new}

    go = lambda c, env=env, tenv=tenv: _rename(c, env, tenv, used, tused)  # noqa: E731
    match e:
        case Var(x):
            return replace(e, name=env.get(x, x))
        case Lam(x, t, _, body):
            t = rt(t)
            new, env2 = bind(x)
            return replace(e, var=new, type=t, body=go(body, env2))
        case TLam(x, _, body):
            new = fresh(x, tused)
            tused.add(new)
            return replace(e, var=new, body=go(body, env, {**tenv, x: new}))
        case Bind(x, a, b):
            a = go(a)
            new, env2 = bind(x)
            return replace(e, var=new, bound=a, body=go(b, env2))
        case Case(s, x, a, y, b):
            s = go(s)
            nx, env_a = bind(x)
            a = go(a, env_a)
            ny, env_b = bind(y)
            return replace(e, scrutinee=s, left_var=nx, left=a, right_var=ny, right=go(b, env_b))
        case TApp(fn, t):
            return replace(e, fn=go(fn), type=rt(t))
        case Inj(_, body, ann):
            return replace(e, body=go(body), ann=rt(ann))
        case Hole(_, _, t):
            return replace(e, type=rt(t))
    return _map_children(e, go)


# ---------------------------------------------------------------------------
# Program files


@dataclass
class Program:
    expr: object
    lattice_path: str | None = None
    pc: object = None
    source: str = ""


def directives(text):
    """The ``#lattice`` path and ``#pc`` label of a program file (or None)."""
    lattice_path = None
    pc = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#lattice"):
            lattice_path = stripped[len("#lattice"):].strip()
        elif stripped.startswith("#pc"):
            try:
                pc = lattice.parse_principal(stripped[len("#pc"):].strip())
            except ParseError as err:
                raise ParseError(err.message, lineno, err.col + 3, err.expected) from None
    return lattice_path, pc


def parse_program(text, allow_runtime=False, high_sets=None):
    """Parse a program file with optional ``#lattice`` and ``#pc`` directives."""
    lattice_path, pc = directives(text)
    e = parse(text, allow_runtime, high_sets)
    return Program(e, lattice_path, pc, text)


# ---------------------------------------------------------------------------
# JSON export


def type_to_json(t):
    return show_type(t)


def to_json(e):
    """Structural JSON: {"node": kind, ...fields}; labels and types as source text."""
    kind = type(e).__name__.lower()
    out = {"node": kind}
    for f in fields(e):
        if f.name == "span":
            continue
        value = getattr(e, f.name)
        if f.name in ("label", "pc"):
            value = show_principal(value)
        elif f.name in ("type", "ann"):
            value = None if value is None else show_type(value)
        elif f.name == "high":
            value = getattr(value, "name", value)
        elif isinstance(value, (str, int)) or value is None:
            pass
        else:
            value = to_json(value)
        out[f.name] = value
    return out
