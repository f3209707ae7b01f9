"""Small-step evaluation with event traces, bracket rules, and hole desugaring."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

from . import lattice
from .lattice import CONF, flow_join, flow_meet
from .lattice import show as show_label
from .syntax import (
    App, Bind, Bracket, Case, Downgrade, Eta, EtaV, FunT, Hole, Inj, Lam, Pair, Proj, Says,
    TApp, TLam, UnitV, Var, UNIT_T, ProdT, children, fresh, free_vars, is_value, show,
    substitute, subst_type_in_expr, to_json, _map_children,
)

DEFAULT_FUEL = 10_000


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class Bullet:
    pass


@dataclass(frozen=True)
class Protect:
    label: object
    value: object


@dataclass(frozen=True)
class Downgraded:
    aspect: str
    source: object
    target: object
    value: object


BULLET = Bullet()


class Stuck(Exception):
    def __init__(self, expr, reason="no rule applies"):
        self.expr = expr
        self.reason = reason
        super().__init__(f"stuck: {reason}: {show(expr)}")


class OutOfFuel(Exception):
    def __init__(self, steps, expr, trace):
        self.steps = steps
        self.expr = expr
        self.trace = trace
        super().__init__(f"out of fuel after {steps} steps")


# ---------------------------------------------------------------------------
# One step


def _label_under(v):
    """Label of the protected value below any brackets, or None."""
    while isinstance(v, Bracket):
        v = v.body
    return v.label if isinstance(v, EtaV) else None


class Stepper:
    def __init__(self, d=None):
        self.d = d if d is not None else lattice.NO_DELEGATIONS

    def step(self, e, pc):
        """Return (e', event) for the unique redex of e; pc is the label the
        redex would be typed at, which the bracket rules need."""
        match e:
            case App(fn, arg):
                if not is_value(fn):
                    fn2, ev = self.step(fn, pc)
                    return replace(e, fn=fn2), ev
                if not is_value(arg):
                    arg2, ev = self.step(arg, pc)
                    return replace(e, arg=arg2), ev
                if isinstance(fn, Lam):
                    return substitute(fn.body, fn.var, arg), BULLET
                raise Stuck(e, "application of a non-function")
            case TApp(fn, t):
                if not is_value(fn):
                    fn2, ev = self.step(fn, pc)
                    return replace(e, fn=fn2), ev
                if isinstance(fn, TLam):
                    return subst_type_in_expr(fn.body, fn.var, t), BULLET
                raise Stuck(e, "type application of a non-type-abstraction")
            case Pair(a, b):
                if not is_value(a):
                    a2, ev = self.step(a, pc)
                    return replace(e, left=a2), ev
                if not is_value(b):
                    b2, ev = self.step(b, pc)
                    return replace(e, right=b2), ev
                raise Stuck(e, "pair is already a value")
            case Inj(_, body):
                if not is_value(body):
                    b2, ev = self.step(body, pc)
                    return replace(e, body=b2), ev
                raise Stuck(e, "injection is already a value")
            case Eta(label, body):
                if not is_value(body):
                    b2, ev = self.step(body, pc)
                    return replace(e, body=b2), ev
                return EtaV(label, body), Protect(label, body)
            case Proj(i, body):
                if not is_value(body):
                    b2, ev = self.step(body, pc)
                    return replace(e, body=b2), ev
                if isinstance(body, Pair):
                    return (body.left if i == 1 else body.right), BULLET
                if isinstance(body, Bracket):
                    return Bracket(Proj(i, body.body), body.high, body.pc), BULLET
                raise Stuck(e, "projection from a non-pair")
            case Bind(x, bound, body):
                if not is_value(bound):
                    b2, ev = self.step(bound, pc)
                    return replace(e, bound=b2), ev
                if isinstance(bound, EtaV):
                    return substitute(body, x, bound.body), BULLET
                if isinstance(bound, Bracket):
                    label = _label_under(bound.body)
                    inner = bound.pc if label is None else flow_meet(bound.pc, flow_join(pc, label))
                    return Bracket(Bind(x, bound.body, body), bound.high, inner), BULLET
                raise Stuck(e, "bind of a non-protected value")
            case Case(s, x, a, y, b):
                if not is_value(s):
                    s2, ev = self.step(s, pc)
                    return replace(e, scrutinee=s2), ev
                if isinstance(s, Inj):
                    if s.index == 1:
                        return substitute(a, x, s.body), BULLET
                    return substitute(b, y, s.body), BULLET
                raise Stuck(e, "case on a non-injection")
            case Downgrade(aspect, body, label):
                if not is_value(body):
                    b2, ev = self.step(body, pc)
                    return replace(e, body=b2), ev
                if isinstance(body, EtaV):
                    return EtaV(label, body.body), Downgraded(aspect, body.label, label, body.body)
                if isinstance(body, Bracket):
                    if body.high.member(label):
                        inner = Downgrade(aspect, body.body, label)
                        return Bracket(inner, body.high, flow_join(pc, label)), BULLET
                    return Downgrade(aspect, body.body, label), BULLET
                raise Stuck(e, "downgrade of a non-protected value")
            case Bracket(body, _, inner_pc):
                if not is_value(body):
                    b2, ev = self.step(body, inner_pc)
                    return replace(e, body=b2), ev
                raise Stuck(e, "bracket is already a value")
        raise Stuck(e)


def step(d, e, pc=None):
    """One top-level step: (e', event)."""
    return Stepper(d).step(e, lattice.FLOW_BOTTOM if pc is None else pc)


def evaluate(d, e, pc=None, fuel=DEFAULT_FUEL, observe=None):
    """Run e to a value. Returns (value, trace). ``observe(e', event)`` is
    called after every step."""
    pc = lattice.FLOW_BOTTOM if pc is None else pc
    stepper = Stepper(d)
    trace = []
    steps = 0
    while not is_value(e):
        if steps >= fuel:
            raise OutOfFuel(steps, e, trace)
        e, ev = stepper.step(e, pc)
        trace.append(ev)
        steps += 1
        if observe is not None:
            observe(e, ev)
    return e, trace


# ---------------------------------------------------------------------------
# Brackets


def bracket_project(e):
    match e:
        case Bracket(body):
            return bracket_project(body)
    return _map_children(e, bracket_project)


def project_event(ev):
    match ev:
        case Protect(label, v):
            return Protect(label, bracket_project(v))
        case Downgraded(aspect, src, tgt, v):
            return Downgraded(aspect, src, tgt, bracket_project(v))
    return ev


def has_brackets(e):
    return isinstance(e, Bracket) or any(has_brackets(c) for c in children(e))


# ---------------------------------------------------------------------------
# Serialization


def event_to_json(ev):
    match ev:
        case Bullet():
            return {"ev": "bullet"}
        case Protect(label, v):
            return {"ev": "protect", "label": show_label(label), "value": to_json(v)}
        case Downgraded(aspect, src, tgt, v):
            return {"ev": "downgrade", "aspect": aspect, "from": show_label(src),
                    "to": show_label(tgt), "value": to_json(v)}
    return ev.to_json()


def event_text(ev):
    match ev:
        case Bullet():
            return "bullet"
        case Protect(label, v):
            return f"protect {show_label(label)} {show(v)}"
        case Downgraded(aspect, src, tgt, v):
            kw = "decl" if aspect == CONF else "endorse"
            return f"{kw} {show_label(src)} -> {show_label(tgt)} {show(v)}"
    return ev.text()


def trace_to_json(trace):
    return [event_to_json(ev) for ev in trace]


def serialize_trace(trace):
    """Byte-stable JSON text of a trace."""
    return json.dumps(trace_to_json(trace), sort_keys=True, separators=(",", ":"))


def trace_text(trace):
    return "\n".join(event_text(ev) for ev in trace)


# ---------------------------------------------------------------------------
# Holes


class DesugarError(Exception):
    pass


def holes_of(e):
    out = []

    def walk(n):
        if isinstance(n, Hole):
            out.append(n)
        for c in children(n):
            walk(c)

    walk(e)
    return sorted(out, key=lambda h: h.index)


@dataclass
class Desugared:
    expr: object  # hole-free, with free variable ``var`` for the packed attacks
    var: str
    type: object  # type of the packed attack value
    value: object  # packed attack value, or None when no attacks were given
    pieces: list  # (hole index, y type, w value or None)


def _pack_types(types):
    out = types[-1]
    for t in reversed(types[:-1]):
        out = ProdT(t, out)
    return out


def _pack_values(values):
    out = values[-1]
    for v in reversed(values[:-1]):
        out = Pair(v, out)
    return out


def _select(var, k, count):
    """Expression picking element k of a right-nested tuple of length count."""
    e = Var(var)
    for _ in range(k):
        e = Proj(2, e)
    return Proj(1, e) if k < count - 1 else e


def desugar_holes(d, e, attacks=None, ctx=(), pc=None, var="y", exclude=(), check_attacks=True):
    """Replace every hole by ``bind y' = y_k in (y' z1 ... zk)``.

    ``ctx`` binds the free variables of e as (name, type) pairs. Every variable
    in scope at a hole is passed to the attack function, except those named in
    ``exclude``. Returns a :class:`Desugared` with the synthesized
    attack value ``eta[pc'] (lam z1 ... lam zk. a)`` per hole, packed as
    right-nested pairs.
    """
    from .typecheck import Context, TypeCheckError, type_of

    holes = holes_of(e)
    if not holes:
        return Desugared(e, var, UNIT_T, UnitV() if attacks is not None else None, [])
    if attacks is not None and len(attacks) != len(holes):
        raise DesugarError(f"{len(holes)} hole(s) but {len(attacks)} attack(s)")
    sink = {}
    type_of(d, Context.of(ctx), e, pc, harness=True, hole_sink=sink)
    avoid = free_vars(e) | {name for name, _ in ctx} | _bound_names(e)
    var = fresh(var, avoid)
    avoid.add(var)
    outer_names = set(exclude)
    pieces = []
    replacement = {}
    for k, hole in enumerate(holes):
        hole_ctx, hole_pc, result = sink[hole.index]
        zs = [(x, t) for x, t in hole_ctx.vars if x not in outer_names]
        if not zs:
            zs = [(fresh("u", avoid), UNIT_T)]
            args = [UnitV()]
        else:
            args = [Var(x) for x, _ in zs]
        avoid |= {x for x, _ in zs}
        fun_t = result
        for _, t in reversed(zs):
            fun_t = FunT(t, hole_pc, fun_t)
        y_t = Says(hole_pc, fun_t)
        inner = fresh(var + "'", avoid)
        avoid.add(inner)
        call = Var(inner)
        for a in args:
            call = App(call, a)
        replacement[hole.index] = Bind(inner, _select(var, k, len(holes)), call)
        w = None
        if attacks is not None:
            a = attacks[k]
            if check_attacks:
                try:
                    got = type_of(d, hole_ctx, a, hole_pc)
                except TypeCheckError as err:
                    raise DesugarError(f"attack {k} does not type at its hole: {err}") from None
                from .typecheck import types_equal

                if not types_equal(d, got, result):
                    raise DesugarError(f"attack {k} has the wrong type for its hole")
            body = a
            for x, t in reversed(zs):
                body = Lam(x, t, hole_pc, body)
            w = EtaV(hole_pc, body)
        pieces.append((hole.index, y_t, w))
    out = _fill(e, replacement)
    y_type = _pack_types([p[1] for p in pieces])
    value = None if attacks is None else _pack_values([p[2] for p in pieces])
    return Desugared(out, var, y_type, value, pieces)


def _bound_names(e):
    out = set()
    match e:
        case Lam(x) | Bind(x):
            out.add(x)
        case Case(_, x, _, y, _):
            out |= {x, y}
    for c in children(e):
        out |= _bound_names(c)
    return out


def _fill(e, replacement):
    if isinstance(e, Hole):
        return replacement[e.index]
    return _map_children(e, lambda c: _fill(c, replacement))


def fill_holes(e, attacks):
    """Plug attack code directly into the holes (the hole-based semantics)."""
    holes = holes_of(e)
    return _fill(e, {h.index: a for h, a in zip(holes, attacks)})
