"""Seeded random principals, types, values, and well-typed programs."""
from __future__ import annotations

import random

from . import lattice
from .lattice import (
    CONF, INTEG, Atom, Bot, Conj, Disj, Join, Meet, Projection, Top, flow_join, flows_to,
)
from .syntax import (
    App, Bind, Case, Downgrade, Eta, EtaV, ForallT, FunT, Inj, Lam, Pair, Proj, ProdT, Says,
    SumT, TApp, TLam, TVar, UnitT, UnitV, Var, UNIT_T, _map_children, alpha_key, node_count,
)
from .typecheck import TypeCheckError, downgrade_ok, protects, type_of, types_equal


def random_principal(rng, atoms=("a", "b", "c"), size=5):
    """A principal AST with at most ``size`` nodes."""
    if size <= 1:
        k = rng.randrange(len(atoms) + 2)
        if k < len(atoms):
            return Atom(atoms[k])
        return Top() if k == len(atoms) else Bot()
    kind = rng.randrange(6)
    if kind == 0:
        return Projection(random_principal(rng, atoms, size - 1), rng.choice((CONF, INTEG)))
    if kind == 1:
        return random_principal(rng, atoms, 1)
    left = rng.randrange(1, size - 1) if size > 2 else 1
    a = random_principal(rng, atoms, left)
    b = random_principal(rng, atoms, max(1, size - 1 - left))
    return (Conj, Disj, Join, Meet)[kind - 2](a, b)


def random_delegations(rng, atoms=("a", "b", "c"), count=2, size=3):
    axioms = [(rng.choice(atoms), random_principal(rng, atoms, size)) for _ in range(count)]
    return lattice.Delegations(axioms, atoms)


def label_pool(atoms=("a", "b")):
    """A small, fixed menu of labels over the given atoms."""
    out = [lattice.FLOW_BOTTOM, lattice.FLOW_TOP]
    for a in atoms:
        out += [Atom(a), Projection(Atom(a), CONF), Projection(Atom(a), INTEG)]
    if len(atoms) >= 2:
        a, b = Atom(atoms[0]), Atom(atoms[1])
        out += [Conj(a, b), Disj(a, b),
                Conj(Projection(a, CONF), Projection(b, INTEG)),
                Conj(Projection(b, CONF), Projection(a, INTEG))]
    return out


class _NoTerm(Exception):
    """No term of the requested type could be built here."""


class Generator:
    """Type-directed random generation; every result is re-checked by type_of."""

    def __init__(self, d=None, atoms=("a", "b"), seed=0, max_nodes=30):
        self.d = d if d is not None else lattice.NO_DELEGATIONS
        self.rng = random.Random(seed)
        self.labels = label_pool(atoms)
        self.max_nodes = max_nodes
        self._names = 0

    # -- basics

    def label(self):
        return self.rng.choice(self.labels)

    def name(self, base="x"):
        self._names += 1
        return f"{base}{self._names}"

    def type(self, depth=2):
        r = self.rng.random()
        if depth <= 0 or r < 0.25:
            return UNIT_T if self.rng.random() < 0.4 else SumT(UNIT_T, UNIT_T)
        if r < 0.6:
            return Says(self.label(), self.type(depth - 1))
        if r < 0.75:
            return ProdT(self.type(depth - 1), self.type(depth - 1))
        if r < 0.85:
            return SumT(self.type(depth - 1), self.type(depth - 1))
        return FunT(self.type(depth - 1), self.label(), self.type(depth - 1))

    def value(self, t):
        """A closed value of type t, or None when t has no closed values here."""
        match t:
            case UnitT():
                return UnitV()
            case SumT(a, b):
                i = self.rng.choice((1, 2))
                v = self.value(a if i == 1 else b)
                return None if v is None else Inj(i, v, t)
            case ProdT(a, b):
                x, y = self.value(a), self.value(b)
                return None if x is None or y is None else Pair(x, y)
            case Says(label, body):
                v = self.value(body)
                return None if v is None else EtaV(label, v)
            case FunT(arg, pc, result):
                x = self.name("z")
                v = self.value(result)
                return None if v is None else Lam(x, arg, pc, v)
        return None

    def values(self, t, count=4, tries=40):
        """Up to ``count`` pairwise distinct values of type t."""
        out, seen = [], set()
        for _ in range(tries):
            v = self.value(t)
            if v is None:
                break
            key = alpha_key(v)
            if key not in seen:
                seen.add(key)
                out.append(v)
            if len(out) >= count:
                break
        return out

    def source_value(self, t):
        """Like :meth:`value` but written with source ``eta`` instead of ``etav``."""
        v = self.value(t)
        return None if v is None else as_source(v)

    # -- expressions

    def expr(self, ctx, pc, t, fuel):
        rng = self.rng
        options = [self._intro]
        if fuel > 0:
            options += [self._intro, self._beta, self._proj, self._case, self._bind, self._poly]
        if any(types_equal(self.d, ty, t) for _, ty in ctx):
            options += [self._var, self._var]
        for _ in range(4):
            try:
                e = rng.choice(options)(ctx, pc, t, fuel)
            except _NoTerm:
                continue
            if e is not None:
                return e
        e = self._intro(ctx, pc, t, 0)
        if e is None:
            raise _NoTerm
        return e

    def _var(self, ctx, pc, t, fuel):
        names = [x for x, ty in ctx if types_equal(self.d, ty, t)]
        return Var(self.rng.choice(names)) if names else None

    def _intro(self, ctx, pc, t, fuel):
        sub = max(fuel - 1, 0)
        match t:
            case UnitT():
                return UnitV()
            case SumT(a, b):
                i = self.rng.choice((1, 2))
                return Inj(i, self.expr(ctx, pc, a if i == 1 else b, sub), t)
            case ProdT(a, b):
                return Pair(self.expr(ctx, pc, a, sub // 2), self.expr(ctx, pc, b, sub // 2))
            case FunT(arg, pc2, result):
                x = self.name()
                return Lam(x, arg, pc2, self.expr(ctx + [(x, arg)], pc2, result, sub))
            case ForallT(var, pc2, body):
                return TLam(var, pc2, self.expr(ctx, pc2, body, sub))
            case Says(label, body):
                if fuel > 0 and self.rng.random() < 0.35:
                    e = self._downgrade(ctx, pc, label, body, sub)
                    if e is not None:
                        return e
                if flows_to(self.d, pc, label):
                    return Eta(label, self.expr(ctx, pc, body, sub))
                return None
            case TVar():
                return self._var(ctx, pc, t, fuel)
        return None

    def _downgrade(self, ctx, pc, label, body, fuel):
        aspect = self.rng.choice((CONF, INTEG))
        sources = [l for l in self.labels if downgrade_ok(self.d, aspect, l, label, pc).ok]
        if not sources:
            return None
        src = self.rng.choice(sources)
        return Downgrade(aspect, self.expr(ctx, pc, Says(src, body), fuel), label)

    def _beta(self, ctx, pc, t, fuel):
        x = self.name()
        s = self.type(1)
        return App(Lam(x, s, pc, self.expr(ctx + [(x, s)], pc, t, fuel // 2)),
                   self.expr(ctx, pc, s, fuel // 2))

    def _proj(self, ctx, pc, t, fuel):
        s = self.type(0)
        if self.rng.random() < 0.5:
            return Proj(1, Pair(self.expr(ctx, pc, t, fuel // 2), self.expr(ctx, pc, s, 0)))
        return Proj(2, Pair(self.expr(ctx, pc, s, 0), self.expr(ctx, pc, t, fuel // 2)))

    def _case(self, ctx, pc, t, fuel):
        if not protects(self.d, pc, t):
            return None
        a, b = self.type(0), self.type(0)
        x, y = self.name(), self.name()
        third = max(fuel // 3, 0)
        return Case(self.expr(ctx, pc, SumT(a, b), third), x,
                    self.expr(ctx + [(x, a)], pc, t, third), y,
                    self.expr(ctx + [(y, b)], pc, t, third))

    def _bind(self, ctx, pc, t, fuel):
        labels = [l for l in self.labels if protects(self.d, l, t)]
        if not labels:
            return None
        l = self.rng.choice(labels)
        s = self.type(0)
        x = self.name()
        return Bind(x, self.expr(ctx, pc, Says(l, s), fuel // 2),
                    self.expr(ctx + [(x, s)], flow_join(pc, l), t, fuel // 2))

    def _poly(self, ctx, pc, t, fuel):
        var, z = self.name("X"), self.name("z")
        ident = TLam(var, pc, Lam(z, TVar(var), pc, Var(z)))
        return App(TApp(ident, t), self.expr(ctx, pc, t, fuel - 1))

    # -- whole programs

    def program(self, pc=None, tries=200):
        """A closed well-typed program within the node budget: (expr, type, pc)."""
        pc = pc if pc is not None else lattice.FLOW_BOTTOM
        for _ in range(tries):
            t = self.type(2)
            try:
                e = self.expr([], pc, t, self.rng.randint(3, 10))
            except _NoTerm:
                continue
            if node_count(e) > self.max_nodes:
                continue
            try:
                got = type_of(self.d, None, e, pc)
            except TypeCheckError:
                continue
            return e, got, pc
        raise RuntimeError("no well-typed program found within the retry budget")


def as_source(e):
    """Replace runtime protected values by the source terms that produce them."""
    if isinstance(e, EtaV):
        return Eta(e.label, as_source(e.body))
    return _map_children(e, as_source)


def programs(count, seed=0, d=None, atoms=("a", "b"), max_nodes=30):
    gen = Generator(d, atoms, seed, max_nodes)
    return [gen.program() for _ in range(count)]
