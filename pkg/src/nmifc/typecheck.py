"""Protection relation, high types, and the security type system."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import lattice
from .lattice import (
    CONF, INTEG, FLOW_TOP, acts_for, equivalent, flow_join, flow_meet, flows_to,
    label_key, project, view, voice,
)
from .lattice import show as show_label
from .syntax import (
    App, Bind, Bracket, Case, Downgrade, Eta, EtaV, ForallT, FunT, Hole, Inj, Lam, Pair,
    ProdT, Proj, Says, SumT, TApp, TLam, TVar, UnitT, UnitV, Var, UNIT_T,
    free_type_vars, show_type, subst_type, type_key,
)

KINDS = (
    "UnboundVar", "PcMismatch", "ProtectFail", "DeclPremise", "EndorsePremise",
    "Shape", "HoleContext",
)


class TypeCheckError(Exception):
    def __init__(self, kind, premise, labels=None, span=None):
        assert kind in KINDS
        self.kind = kind
        self.premise = premise
        self.labels = labels or {}
        self.span = span
        super().__init__(self.text())

    def text(self):
        where = f"{self.span[0]}:{self.span[1]}: " if self.span else ""
        out = f"{where}{self.kind}: {self.premise}"
        if self.labels:
            out += " [" + ", ".join(f"{k}={show_label(v)}" for k, v in self.labels.items()) + "]"
        return out

    def to_json(self):
        return {
            "kind": self.kind,
            "premise": self.premise,
            "labels": {k: show_label(v) for k, v in self.labels.items()},
            "span": None if self.span is None else {"line": self.span[0], "col": self.span[1]},
        }


# ---------------------------------------------------------------------------
# High sets


class HighSet:
    """Upward-closed set of labels given by a membership predicate."""

    def __init__(self, name, member):
        self.name = name
        self._member = member

    def member(self, label):
        return self._member(label)

    def __contains__(self, label):
        return self._member(label)

    def __repr__(self):
        return f"HighSet({self.name!r})"

    @classmethod
    def above(cls, d, labels, name="H"):
        """Upward closure of finitely many labels."""
        labels = list(labels)
        return cls(name, lambda l: any(flows_to(d, h, l) for h in labels))

    def intersect(self, other, name=None):
        return HighSet(name or f"{self.name}&{other.name}",
                       lambda l: self.member(l) and other.member(l))


# ---------------------------------------------------------------------------
# Protection


def protects(d, label, t):
    match t:
        case UnitT():
            return True
        case Says(l2, _):
            return flows_to(d, label, l2)
        case ProdT(a, b):
            return protects(d, label, a) and protects(d, label, b)
    return False


def _protect_bound(t):
    """Flow-meet of the labels a protecting label must flow to, or None when
    some component can never be protected."""
    match t:
        case UnitT():
            return FLOW_TOP
        case Says(label, _):
            return label
        case ProdT(a, b):
            x, y = _protect_bound(a), _protect_bound(b)
            if x is None or y is None:
                return None
            return flow_meet(x, y)
    return None


def high_type(high, t):
    """Some member of ``high`` protects t. The flow-meet of the type's labels is
    the greatest protecting label, so by upward closure it is the only
    candidate worth testing."""
    bound = _protect_bound(t)
    return bound is not None and high.member(bound)


# ---------------------------------------------------------------------------
# Downgrade premises


@dataclass
class PremiseReport:
    ok: bool
    premises: list = field(default_factory=list)  # (name, description, holds)

    @property
    def failed(self):
        return next((p for p in self.premises if not p[2]), None)


def downgrade_ok(d, kind, l_from, l_to, pc):
    """Evaluate the three side conditions of a declassification or endorsement."""
    if kind in ("decl", CONF):
        keep, move = INTEG, CONF
        bound = view(project(flow_join(l_from, pc), INTEG))
        last = ("robust", "from^-> flows to to^-> \\/ view((from \\/ pc)^<-)")
    else:
        keep, move = CONF, INTEG
        bound = voice(project(flow_join(l_from, pc), CONF))
        last = ("transparent", "from^<- flows to to^<- \\/ voice((from \\/ pc)^->)")
    arrow = lattice.ARROW[keep]
    premises = [
        ("equal", f"from{arrow} equals to{arrow}",
         equivalent(d, project(l_from, keep), project(l_to, keep))),
        ("pc", "pc flows to to", flows_to(d, pc, l_to)),
        (last[0], last[1],
         flows_to(d, project(l_from, move), flow_join(project(l_to, move), bound))),
    ]
    return PremiseReport(all(p[2] for p in premises), premises)


# ---------------------------------------------------------------------------
# Typing


def types_equal(d, t1, t2):
    lk = lambda p: label_key(d, p)  # noqa: E731
    return type_key(t1, label_key=lk) == type_key(t2, label_key=lk)


@dataclass(frozen=True)
class Context:
    """Ordered variable bindings plus type variables in scope."""

    vars: tuple = ()
    tvars: frozenset = frozenset()

    def lookup(self, x):
        for name, t in reversed(self.vars):
            if name == x:
                return t
        return None

    def extend(self, x, t):
        return Context(self.vars + ((x, t),), self.tvars)

    def extend_type(self, x):
        return Context(self.vars, self.tvars | {x})

    @classmethod
    def of(cls, bindings=(), tvars=()):
        return cls(tuple(bindings), frozenset(tvars))


class Checker:
    def __init__(self, d=None, harness=False, hole_sink=None):
        self.d = d if d is not None else lattice.NO_DELEGATIONS
        self.harness = harness
        self.hole_sink = hole_sink

    def fail(self, kind, premise, e, **labels):
        raise TypeCheckError(kind, premise, labels, getattr(e, "span", None))

    def flows(self, a, b):
        return flows_to(self.d, a, b)

    def well_formed(self, t, ctx, e):
        free = free_type_vars(t) - ctx.tvars
        if free:
            self.fail("Shape", f"type {show_type(t)} mentions unbound type variable {sorted(free)[0]}", e)

    def expect_equal(self, got, want, e, what):
        if not types_equal(self.d, got, want):
            self.fail("Shape", f"{what}: expected {show_type(want)}, got {show_type(got)}", e)

    def check(self, ctx, pc, e, expected=None):
        """Synthesize the type of e; ``expected`` only guides unannotated forms."""
        match e:
            case Var(x):
                t = ctx.lookup(x)
                if t is None:
                    self.fail("UnboundVar", f"variable {x} is not bound", e)
                return t
            case UnitV():
                return UNIT_T
            case Lam(x, t1, pc2, body):
                self.well_formed(t1, ctx, e)
                hint = expected.result if isinstance(expected, FunT) else None
                return FunT(t1, pc2, self.check(ctx.extend(x, t1), pc2, body, hint))
            case App(fn, arg):
                ft = self.check(ctx, pc, fn)
                if not isinstance(ft, FunT):
                    self.fail("Shape", f"applying a non-function of type {show_type(ft)}", e)
                at = self.check(ctx, pc, arg, ft.arg)
                self.expect_equal(at, ft.arg, arg, "argument type")
                if not self.flows(pc, ft.pc):
                    self.fail("PcMismatch", "App: pc flows to the function's pc", e, pc=pc, to=ft.pc)
                return ft.result
            case TLam(x, pc2, body):
                hint = None
                if isinstance(expected, ForallT):
                    hint = subst_type(expected.body, expected.var, TVar(x))
                return ForallT(x, pc2, self.check(ctx.extend_type(x), pc2, body, hint))
            case TApp(fn, t2):
                ft = self.check(ctx, pc, fn)
                if not isinstance(ft, ForallT):
                    self.fail("Shape", f"type application of non-polymorphic {show_type(ft)}", e)
                self.well_formed(t2, ctx, e)
                if not self.flows(pc, ft.pc):
                    self.fail("PcMismatch", "TApp: pc flows to the quantifier's pc", e, pc=pc, to=ft.pc)
                return subst_type(ft.body, ft.var, t2)
            case Pair(a, b):
                ha, hb = (expected.left, expected.right) if isinstance(expected, ProdT) else (None, None)
                return ProdT(self.check(ctx, pc, a, ha), self.check(ctx, pc, b, hb))
            case Proj(i, body):
                t = self.check(ctx, pc, body)
                if not isinstance(t, ProdT):
                    self.fail("Shape", f"projection from non-product {show_type(t)}", e)
                return t.left if i == 1 else t.right
            case Inj(i, body, ann):
                target = ann if ann is not None else expected
                if not isinstance(target, SumT):
                    what = "annotation is not a sum type" if ann is not None else "injection needs a sum type annotation"
                    self.fail("Shape", what, e)
                self.well_formed(target, ctx, e)
                part = target.left if i == 1 else target.right
                self.expect_equal(self.check(ctx, pc, body, part), part, body, f"inj{i} payload")
                return target
            case Case(s, x, a, y, b):
                st = self.check(ctx, pc, s)
                if not isinstance(st, SumT):
                    self.fail("Shape", f"case on non-sum {show_type(st)}", e)
                ta = self.check(ctx.extend(x, st.left), pc, a, expected)
                tb = self.check(ctx.extend(y, st.right), pc, b, ta)
                self.expect_equal(tb, ta, b, "case branches")
                if not protects(self.d, pc, ta):
                    self.fail("ProtectFail", f"Case: pc protects {show_type(ta)}", e, pc=pc)
                return ta
            case Eta(label, body):
                hint = expected.body if isinstance(expected, Says) else None
                t = self.check(ctx, pc, body, hint)
                if not self.flows(pc, label):
                    self.fail("PcMismatch", "UnitM: pc flows to label", e, pc=pc, to=label)
                return Says(label, t)
            case EtaV(label, body):
                hint = expected.body if isinstance(expected, Says) else None
                return Says(label, self.check(ctx, pc, body, hint))
            case Bind(x, bound, body):
                bt = self.check(ctx, pc, bound)
                if not isinstance(bt, Says):
                    self.fail("Shape", f"bind of non-labeled {show_type(bt)}", e)
                t = self.check(ctx.extend(x, bt.body), flow_join(pc, bt.label), body, expected)
                if not protects(self.d, bt.label, t):
                    self.fail("ProtectFail", f"BindM: label protects {show_type(t)}", e, **{"from": bt.label})
                return t
            case Downgrade(aspect, body, label):
                hint = Says(None, expected.body) if isinstance(expected, Says) else None
                bt = self.check(ctx, pc, body, hint)
                if not isinstance(bt, Says):
                    self.fail("Shape", f"downgrade of non-labeled {show_type(bt)}", e)
                report = downgrade_ok(self.d, aspect, bt.label, label, pc)
                if not report.ok:
                    name, text, _ = report.failed
                    rule = "Decl" if aspect == CONF else "Endorse"
                    index = [p[0] for p in report.premises].index(name) + 1
                    final = " (final premise)" if index == 3 else ""
                    kind = "DeclPremise" if aspect == CONF else "EndorsePremise"
                    self.fail(kind, f"{rule} premise {index}{final}: {text}", e,
                              **{"from": bt.label, "to": label, "pc": pc})
                return Says(label, bt.body)
            case Bracket(body, high, pc2):
                if not self.harness:
                    self.fail("Shape", "brackets are only allowed in harness mode", e)
                if not self.flows(pc, pc2):
                    self.fail("PcMismatch", "Bracket: pc flows to the bracket pc", e, pc=pc, to=pc2)
                if not high.member(pc2):
                    self.fail("HoleContext", f"Bracket: bracket pc in {high.name}", e, pc=pc2)
                t = self.check(ctx, pc2, body, expected)
                if not high_type(high, t):
                    self.fail("ProtectFail", f"Bracket: {show_type(t)} is a high type for {high.name}", e)
                return t
            case Hole(index, high, t):
                if not self.harness:
                    self.fail("Shape", "holes are only allowed in harness mode", e)
                t = t if t is not None else expected
                if t is None:
                    self.fail("Shape", "hole needs a type annotation", e)
                self.well_formed(t, ctx, e)
                if not high.member(pc):
                    self.fail("HoleContext", f"Hole: pc in {high.name}", e, pc=pc)
                if not high_type(high, t):
                    self.fail("HoleContext", f"Hole: {show_type(t)} is a high type for {high.name}", e)
                if self.hole_sink is not None:
                    self.hole_sink[index] = (ctx, pc, t)
                return t
        raise TypeError(f"not an expression: {e!r}")


def type_of(d, ctx, e, pc=None, expected=None, harness=False, hole_sink=None):
    """Type e under ctx at pc (default: the flow-least label)."""
    if ctx is None:
        ctx = Context()
    elif isinstance(ctx, dict):
        ctx = Context.of(ctx.items())
    pc = lattice.FLOW_BOTTOM if pc is None else pc
    return Checker(d, harness, hole_sink).check(ctx, pc, e, expected)


def well_typed(d, e, pc=None, ctx=None, harness=False):
    try:
        return type_of(d, ctx, e, pc, harness=harness)
    except TypeCheckError:
        return None


__all__ = [
    "TypeCheckError", "HighSet", "protects", "high_type", "downgrade_ok", "type_of",
    "types_equal", "Context", "well_typed", "acts_for",
]
