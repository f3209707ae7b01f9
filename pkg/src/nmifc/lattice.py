"""Principals, their normal forms, and the acts-for / flows-to decision procedures.

A principal denotes a pair of elements of the free distributive lattice over
atomic names, one per aspect (confidentiality, integrity). Each component is
kept in conjunctive normal form: a set of clauses, a clause being a set of
atoms read as their disjunction. The empty component is bottom; a component
holding the empty clause is top.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .lexer import ParseError, TokenStream

CONF = "conf"
INTEG = "integ"
ASPECTS = (CONF, INTEG)

ARROW = {CONF: "^->", INTEG: "^<-"}


def other_aspect(aspect):
    return INTEG if aspect == CONF else CONF


# ---------------------------------------------------------------------------
# Principal expressions


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class Projection:
    principal: object
    aspect: str


@dataclass(frozen=True)
class Conj:
    left: object
    right: object


@dataclass(frozen=True)
class Disj:
    left: object
    right: object


@dataclass(frozen=True)
class Join:
    """Least upper bound in the information-flow ordering."""

    left: object
    right: object


@dataclass(frozen=True)
class Meet:
    """Greatest lower bound in the information-flow ordering."""

    left: object
    right: object


TOP = Top()
BOT = Bot()


def conj_all(parts):
    parts = list(parts)
    if not parts:
        return BOT
    out = parts[0]
    for p in parts[1:]:
        out = Conj(out, p)
    return out


def disj_all(parts):
    parts = list(parts)
    if not parts:
        return TOP
    out = parts[0]
    for p in parts[1:]:
        out = Disj(out, p)
    return out


def atoms_of(p):
    match p:
        case Atom(name):
            return {name}
        case Top() | Bot():
            return set()
        case Projection(q, _):
            return atoms_of(q)
        case Conj(a, b) | Disj(a, b) | Join(a, b) | Meet(a, b):
            return atoms_of(a) | atoms_of(b)
    raise TypeError(f"not a principal: {p!r}")


def size(p):
    match p:
        case Atom() | Top() | Bot():
            return 1
        case Projection(q, _):
            return 1 + size(q)
        case Conj(a, b) | Disj(a, b) | Join(a, b) | Meet(a, b):
            return 1 + size(a) + size(b)
    raise TypeError(f"not a principal: {p!r}")


# ---------------------------------------------------------------------------
# CNF components

CNF_TOP = frozenset({frozenset()})
CNF_BOT = frozenset()


def _absorb(clauses):
    clauses = set(clauses)
    return frozenset(c for c in clauses if not any(d < c for d in clauses))


def cnf_and(a, b):
    return _absorb(a | b)


def cnf_or(a, b):
    return _absorb(c | d for c in a for d in b)


def cnf_covers(a, b):
    """a acts for b, both delegation-free CNF components."""
    return all(any(c <= d for c in a) for d in b)


def cnf_atom(name):
    return frozenset({frozenset({name})})


@dataclass(frozen=True)
class NormalForm:
    conf: frozenset
    integ: frozenset

    def component(self, aspect):
        return self.conf if aspect == CONF else self.integ


NF_TOP = NormalForm(CNF_TOP, CNF_TOP)
NF_BOT = NormalForm(CNF_BOT, CNF_BOT)


@lru_cache(maxsize=1 << 16)
def normalize(p):
    match p:
        case Atom(name):
            c = cnf_atom(name)
            return NormalForm(c, c)
        case Top():
            return NF_TOP
        case Bot():
            return NF_BOT
        case Projection(q, aspect):
            n = normalize(q)
            if aspect == CONF:
                return NormalForm(n.conf, CNF_BOT)
            return NormalForm(CNF_BOT, n.integ)
        case Conj(a, b):
            x, y = normalize(a), normalize(b)
            return NormalForm(cnf_and(x.conf, y.conf), cnf_and(x.integ, y.integ))
        case Disj(a, b):
            x, y = normalize(a), normalize(b)
            return NormalForm(cnf_or(x.conf, y.conf), cnf_or(x.integ, y.integ))
        case Join(a, b):
            x, y = normalize(a), normalize(b)
            return NormalForm(cnf_and(x.conf, y.conf), cnf_or(x.integ, y.integ))
        case Meet(a, b):
            x, y = normalize(a), normalize(b)
            return NormalForm(cnf_or(x.conf, y.conf), cnf_and(x.integ, y.integ))
    raise TypeError(f"not a principal: {p!r}")


def _cnf_principal(cnf):
    if cnf == CNF_TOP:
        return TOP
    if cnf == CNF_BOT:
        return BOT
    clauses = sorted(sorted(c) for c in cnf)
    return conj_all(disj_all(Atom(a) for a in clause) for clause in clauses)


def to_principal(nf):
    """Canonical principal expression denoting a normal form."""
    if nf.conf == nf.integ:
        return _cnf_principal(nf.conf)
    parts = []
    for aspect in ASPECTS:
        cnf = nf.component(aspect)
        if cnf != CNF_BOT:
            parts.append(Projection(_cnf_principal(cnf), aspect))
    return conj_all(parts)


def canonical(p):
    return to_principal(normalize(p))


# ---------------------------------------------------------------------------
# Delegations


class Delegations:
    """Static axioms ``n actsfor p`` with ``n`` atomic.

    Each atom is mapped to the CNF of everything it can act for, computed as a
    least fixpoint: n stands for n & r for every axiom n >= r, with atoms inside
    r expanded in turn. The free distributive lattice over the finitely many
    atoms involved is finite and every round only adds authority, so the
    iteration stops.
    """

    def __init__(self, axioms=(), atoms=()):
        self.axioms = tuple((name, p) for name, p in axioms)
        names = set(atoms)
        for name, p in self.axioms:
            names.add(name)
            names |= atoms_of(p)
        self.atoms = frozenset(names)
        self._expansion = {aspect: self._saturate(aspect) for aspect in ASPECTS}
        self._cache = {}

    def __repr__(self):
        return f"Delegations({list(self.axioms)!r})"

    def _saturate(self, aspect):
        heads = {}
        for name, p in self.axioms:
            heads.setdefault(name, []).append(normalize(p).component(aspect))
        table = {name: cnf_atom(name) for name in heads}
        changed = True
        while changed:
            changed = False
            for name, targets in heads.items():
                new = table[name]
                for target in targets:
                    new = cnf_and(new, _substitute(target, table))
                if new != table[name]:
                    table[name] = new
                    changed = True
        return table

    def expand(self, cnf, aspect):
        key = (cnf, aspect)
        hit = self._cache.get(key)
        if hit is None:
            hit = _substitute(cnf, self._expansion[aspect])
            self._cache[key] = hit
        return hit

    def covering(self, p, q, aspect):
        """Per-clause covering report: list of (clause of q, covering clause or None)."""
        actor = self.expand(normalize(p).component(aspect), aspect)
        out = []
        for d in sorted(normalize(q).component(aspect), key=sorted):
            cover = next((c for c in sorted(actor, key=sorted) if c <= d), None)
            out.append((d, cover))
        return out


def _substitute(cnf, table):
    out = CNF_BOT
    for clause in cnf:
        disj = CNF_TOP
        for a in clause:
            disj = cnf_or(disj, table.get(a) or cnf_atom(a))
        out = cnf_and(out, disj)
    return out


NO_DELEGATIONS = Delegations()


def _deleg(d):
    return NO_DELEGATIONS if d is None else d


# ---------------------------------------------------------------------------
# Orderings and operators


def acts_for(d, p, q):
    d = _deleg(d)
    x, y = normalize(p), normalize(q)
    return all(
        cnf_covers(d.expand(x.component(a), a), y.component(a)) for a in ASPECTS
    )


def label_key(d, p):
    """Canonical key: equal exactly when the principals are equivalent under d.

    Expansion is a closure operator on the free lattice, so two principals act
    for each other iff their expansions coincide, and absorbed CNF is unique.
    """
    d = _deleg(d)
    n = normalize(p)
    return (d.expand(n.conf, CONF), d.expand(n.integ, INTEG))


def equivalent(d, p, q):
    return acts_for(d, p, q) and acts_for(d, q, p)


def project(p, aspect):
    n = normalize(p)
    if aspect == CONF:
        return to_principal(NormalForm(n.conf, CNF_BOT))
    return to_principal(NormalForm(CNF_BOT, n.integ))


def flows_to(d, l, l2):
    return acts_for(d, project(l2, CONF), project(l, CONF)) and acts_for(
        d, project(l, INTEG), project(l2, INTEG)
    )


def flow_join(l, l2):
    return to_principal(normalize(Join(l, l2)))


def flow_meet(l, l2):
    return to_principal(normalize(Meet(l, l2)))


def voice(l):
    """Integrity needed to declassify the confidentiality of ``l``."""
    return to_principal(NormalForm(CNF_BOT, normalize(l).conf))


def view(l):
    """Confidentiality that the integrity of ``l`` may read."""
    return to_principal(NormalForm(normalize(l).integ, CNF_BOT))


FLOW_BOTTOM = Projection(TOP, INTEG)
FLOW_TOP = Projection(TOP, CONF)


# ---------------------------------------------------------------------------
# Concrete syntax

_PREC_JM, _PREC_DISJ, _PREC_CONJ, _PREC_POST = range(4)


def show(p, prec=_PREC_JM):
    match p:
        case Atom(name):
            return name
        case Top():
            return "top"
        case Bot():
            return "bot"
        case Projection(q, aspect):
            return show(q, _PREC_POST) + ARROW[aspect]
        case Conj(a, b):
            text, level = f"{show(a, _PREC_CONJ)} & {show(b, _PREC_POST)}", _PREC_CONJ
        case Disj(a, b):
            text, level = f"{show(a, _PREC_DISJ)} | {show(b, _PREC_CONJ)}", _PREC_DISJ
        case Join(a, b):
            text, level = f"{show(a, _PREC_JM)} \\/ {show(b, _PREC_DISJ)}", _PREC_JM
        case Meet(a, b):
            text, level = f"{show(a, _PREC_JM)} /\\ {show(b, _PREC_DISJ)}", _PREC_JM
        case _:
            raise TypeError(f"not a principal: {p!r}")
    return f"({text})" if level < prec else text


PRINCIPAL_START = {"identifier", "'top'", "'bot'", "'('"}


def parse_principal_from(ts: TokenStream):
    left = _parse_disj(ts)
    while True:
        if ts.accept("\\/"):
            left = Join(left, _parse_disj(ts))
        elif ts.accept("/\\") or ts.accept("/\\_"):
            left = Meet(left, _parse_disj(ts))
        else:
            return left


def _parse_disj(ts):
    left = _parse_conj(ts)
    while ts.accept("|"):
        left = Disj(left, _parse_conj(ts))
    return left


def _parse_conj(ts):
    left = _parse_post(ts)
    while ts.accept("&"):
        left = Conj(left, _parse_post(ts))
    return left


def _parse_post(ts):
    p = _parse_primary(ts)
    while True:
        if ts.accept("^->"):
            p = Projection(p, CONF)
        elif ts.accept("^<-"):
            p = Projection(p, INTEG)
        else:
            return p


RESERVED = frozenset(
    """lam tlam bind in case of inj1 inj2 proj1 proj2 eta etav decl endorse to
    unit says forall tt ff bool hole bracket top bot""".split()
)


def _parse_primary(ts):
    tok = ts.peek
    if ts.accept("("):
        p = parse_principal_from(ts)
        ts.expect(")")
        return p
    if ts.accept("top"):
        return TOP
    if ts.accept("bot"):
        return BOT
    if tok.kind == "ident" and tok.text not in RESERVED:
        ts.advance()
        return Atom(tok.text)
    ts.fail(PRINCIPAL_START)


def parse_principal(text):
    ts = TokenStream(text)
    p = parse_principal_from(ts)
    ts.expect_eof()
    return p


# ---------------------------------------------------------------------------
# Lattice configuration files


def delegations_from_json(data):
    atoms = list(data.get("atoms", []))
    axioms = []
    for entry in data.get("delegations", []):
        who = entry["who"]
        target = entry["actsFor"]
        axioms.append((who, parse_principal(target) if isinstance(target, str) else target))
    return Delegations(axioms, atoms)


def load_lattice(path):
    return delegations_from_json(json.loads(Path(path).read_text()))


def delegations_to_json(d):
    return {
        "atoms": sorted(d.atoms),
        "delegations": [{"who": n, "actsFor": show(p)} for n, p in d.axioms],
    }


__all__ = [
    "Atom", "Top", "Bot", "Projection", "Conj", "Disj", "Join", "Meet", "TOP", "BOT",
    "CONF", "INTEG", "NormalForm", "Delegations", "normalize", "to_principal",
    "acts_for", "equivalent", "flows_to", "flow_join", "flow_meet", "voice", "view",
    "project", "parse_principal", "show", "load_lattice", "ParseError",
]
