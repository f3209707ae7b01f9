"""Attackers, low equivalence, and executable checks of the security conditions.

Universally quantified inputs are drawn from finite pools, so a Pass verdict
means no violation was found over the pools supplied.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import lattice
from .evaluate import (
    DEFAULT_FUEL, Bullet, DesugarError, Downgraded, Protect, desugar_holes, evaluate,
    event_to_json, event_text,
)
from .lattice import CONF, INTEG, acts_for, conj_all, label_key, project
from .syntax import (
    EtaV, Lam, UnitV, alpha_key, free_vars, has_downgrade, is_value, parse, show, show_type,
    substitute, to_json,
)
from .typecheck import HighSet, TypeCheckError, high_type, type_of, types_equal

# ---------------------------------------------------------------------------
# Attackers and low sets


class Attacker:
    """Labels that a coalition of atomic principals acts for."""

    def __init__(self, d, atoms):
        atoms = sorted(set(atoms))
        if not atoms:
            raise ValueError("an attacker needs at least one atomic principal")
        self.d = d if d is not None else lattice.NO_DELEGATIONS
        self.atoms = atoms
        self.power = conj_all(lattice.Atom(a) for a in atoms)
        self._memo = {}
        self.untrusted = HighSet("U", lambda l: self.member(project(l, INTEG)))
        self.secret = HighSet("S", lambda l: not self.member(project(l, CONF)))

    def member(self, label):
        hit = self._memo.get(label)
        if hit is None:
            hit = self._memo[label] = acts_for(self.d, self.power, label)
        return hit

    __contains__ = member

    def __repr__(self):
        return f"Attacker({self.atoms})"

    def high_set(self, kind):
        match kind:
            case "untrusted" | "U":
                return self.untrusted
            case "secret" | "S":
                return self.secret
            case "both" | "US":
                return self.untrusted.intersect(self.secret, "US")
        raise ValueError(f"unknown high set {kind!r}")

    def high_sets(self):
        """Name environment for brackets and holes."""
        return {"U": self.untrusted, "S": self.secret, "US": self.high_set("US")}

    def lows(self):
        trusted = LowSet.complement(self.untrusted, name="T")
        public = LowSet.complement(self.secret, name="P")
        return trusted, public, LowSet.complement(self.untrusted, self.secret, name="Low")

    def to_json(self):
        return sorted(self.atoms)


def induced_high_set(attacker, kind):
    return attacker.high_set(kind)


class LowSet:
    def __init__(self, name, member):
        self.name = name
        self._member = member
        self._memo = {}

    def member(self, label):
        hit = self._memo.get(label)
        if hit is None:
            hit = self._memo[label] = self._member(label)
        return hit

    __contains__ = member

    def __repr__(self):
        return f"LowSet({self.name!r})"

    @classmethod
    def complement(cls, *highs, name=None):
        name = name or "not " + "|".join(h.name for h in highs)
        return cls(name, lambda l: not any(h.member(l) for h in highs))


# ---------------------------------------------------------------------------
# Low equivalence


@dataclass(frozen=True)
class Input:
    """Marker for an input value that is not itself a protected value."""

    value: object

    def to_json(self):
        return {"ev": "input", "value": to_json(self.value)}

    def text(self):
        return f"input {show(self.value)}"


def input_marker(v):
    if isinstance(v, EtaV):
        return Protect(v.label, v.body)
    return Input(v)


_HIDDEN = ("bullet",)


class Equivalence:
    """Keys events so that equal keys mean low-equivalent events; None means
    the event is equivalent to the silent event."""

    def __init__(self, d, low):
        self.d = d if d is not None else lattice.NO_DELEGATIONS
        self.low = low
        self._labels = {}

    def label(self, p):
        hit = self._labels.get(p)
        if hit is None:
            hit = self._labels[p] = label_key(self.d, p)
        return hit

    def _leaf(self, e):
        if isinstance(e, EtaV) and not self.low.member(e.label):
            return _HIDDEN
        return None

    def value(self, v):
        return alpha_key(v, label_key=self.label, leaf=self._leaf)

    def event(self, ev):
        match ev:
            case Bullet():
                return None
            case Protect(label, v):
                if not self.low.member(label):
                    return None
                return ("protect", self.label(label), self.value(v))
            case Downgraded(aspect, src, tgt, v):
                if not self.low.member(tgt):
                    return None
                return ("down", aspect, self.label(src), self.label(tgt), self.value(v))
            case Input(v):
                return ("input", self.value(v))
        raise TypeError(f"not an event: {ev!r}")

    def trace(self, trace):
        return tuple(k for k in map(self.event, trace) if k is not None)


def event_equiv(d, low, c1, c2):
    eq = Equivalence(d, low)
    return eq.event(c1) == eq.event(c2)


def trace_equiv(d, low, t1, t2):
    eq = Equivalence(d, low)
    return eq.trace(t1) == eq.trace(t2)


class KeyedTrace:
    """Per-position event keys and interned prefix keys under one equivalence."""

    def __init__(self, eq, trace, interner):
        self.keys = [eq.event(ev) for ev in trace]
        self.prefix = [interner(())]
        acc = ()
        for k in self.keys:
            if k is not None:
                acc = acc + (k,)
            self.prefix.append(interner(acc))

    def upto(self, n):
        """Interned key of the prefix holding the first n events."""
        return self.prefix[n]


def _interner():
    table = {}

    def intern(key):
        return table.setdefault(key, len(table))

    return intern


# ---------------------------------------------------------------------------
# Verdicts


@dataclass
class Verdict:
    condition: str
    status: str  # pass | violation | skip | downgrade-witness
    reason: str = ""
    witness: dict | None = None
    implementation_bug: bool = False
    checked: int = 0

    @property
    def passed(self):
        return self.status == "pass"

    def to_json(self, attacker=None, pools=None):
        out = {"condition": self.condition, "verdict": self.status, "checked": self.checked}
        if attacker is not None:
            out["attacker"] = attacker.to_json()
        if pools is not None:
            out["pools"] = pools.to_json()
        if self.reason:
            out["reason"] = self.reason
        if self.witness is not None:
            out["witness"] = self.witness
        if self.status == "violation":
            out["implementation_bug"] = self.implementation_bug
        return out


def trace_json(trace):
    return [event_to_json(ev) for ev in trace]


# ---------------------------------------------------------------------------
# Harness: programs with leading input binders


@dataclass
class Run:
    value: object
    trace: list


@dataclass
class InputPool:
    secrets: list
    attacks: list
    fixed: dict = field(default_factory=dict)

    def to_json(self):
        out = {"secrets": [show(v) for v in self.secrets],
               "attacks": [show(v) for v in self.attacks]}
        if self.fixed:
            out["fixed"] = {k: show(v) for k, v in sorted(self.fixed.items())}
        return out


class PoolError(Exception):
    pass


def parse_value(d, text, fuel=DEFAULT_FUEL):
    """A closed value from program text; non-values are evaluated first."""
    e = parse(text, allow_runtime=True)
    if free_vars(e):
        raise PoolError(f"pool entry {text!r} has free variables")
    if not is_value(e):
        e, _ = evaluate(d, e, fuel=fuel)
    return e


def load_pools(data, harness, check=True, attacks=None):
    """InputPool from its JSON form; entries must type at the input binders.
    ``attacks`` supplies ready-made attack values instead of ``data["attacks"]``."""
    d = harness.d

    def typed(v, binder, text):
        if check and binder is not None and not harness.value_types(v, binder[1]):
            raise PoolError(f"pool entry {text} does not have type {show_type(binder[1])}")
        return v

    def values(texts, binder):
        return [typed(parse_value(d, t, harness.fuel), binder, t) for t in texts]

    secrets = values(data.get("secrets", []), harness.binders[0] if harness.binders else None)
    attack_binder = harness.binders[1] if len(harness.binders) > 1 else None
    if attacks is None:
        attacks = values(data.get("attacks", []), attack_binder)
    else:
        attacks = [typed(v, attack_binder, show(v)) for v in attacks]
    fixed = {name: values([text], harness.binder(name))[0]
             for name, text in data.get("fixed", {}).items()}
    if not secrets:
        raise PoolError("the secret pool is empty")
    if attack_binder is not None and not attacks:
        raise PoolError("the attack pool is empty")
    return InputPool(secrets, attacks or [UnitV()], fixed)


def attach_attack_binder(d, e, pc=None, attacks=None, var="y"):
    """Desugar the holes of ``lam (x : t) [pc]. e`` and bind the packed attack
    functions with a new binder right after x.

    ``attacks`` is a list of attack vectors, one code expression per hole.
    Returns the new program and the packed attack value for each vector.
    """
    if not isinstance(e, Lam):
        raise DesugarError("a program with holes needs a leading input binder")
    out = desugar_holes(d, e, None, pc=pc, var=var)
    body = out.expr.body
    program = Lam(e.var, e.type, e.pc, Lam(out.var, out.type, e.pc, body))
    values = [desugar_holes(d, e, list(vec), pc=pc, var=var).value for vec in attacks or []]
    return program, values


class Harness:
    """Evaluates a program ``lam (x : tx) [pc]. lam (y : ty) [pc]. body`` on inputs.

    The first binder is the secret input and the second the untrusted one.
    Runs are memoized on the alpha-equivalence class of the inputs.
    """

    def __init__(self, d, program, pc=None, fuel=DEFAULT_FUEL, unsafe=False):
        self.d = d if d is not None else lattice.NO_DELEGATIONS
        self.program = program
        self.fuel = fuel
        self.unsafe = unsafe
        self.binders = []
        body = program
        body_pc = pc if pc is not None else lattice.FLOW_BOTTOM
        while isinstance(body, Lam):
            self.binders.append((body.var, body.type, body.pc))
            body_pc = body.pc
            body = body.body
        self.body = body
        self.body_pc = body_pc
        self.pc = pc if pc is not None else lattice.FLOW_BOTTOM
        self.type = None
        self.well_typed = False
        try:
            self.type = type_of(self.d, None, program, self.pc)
            self.well_typed = True
        except TypeCheckError:
            if not unsafe:
                raise
        self._runs = {}

    def binder(self, name):
        for b in self.binders:
            if b[0] == name:
                return b
        raise KeyError(f"no input binder named {name}")

    @property
    def secret_binder(self):
        return self.binders[0]

    @property
    def attack_binder(self):
        return self.binders[1]

    def value_types(self, v, t, pc=None):
        try:
            got = type_of(self.d, None, v, pc or self.pc)
        except TypeCheckError:
            return False
        return types_equal(self.d, got, t)

    def run(self, assignment):
        """assignment: mapping binder name -> closed value."""
        names = [b[0] for b in self.binders]
        missing = [n for n in names if n not in assignment]
        if missing:
            raise ValueError(f"no input value for {', '.join(missing)}")
        key = tuple(alpha_key(assignment[n]) for n in names)
        hit = self._runs.get(key)
        if hit is None:
            e = self.body
            for n in names:
                e = substitute(e, n, assignment[n])
            value, trace = evaluate(self.d, e, self.body_pc, self.fuel)
            hit = self._runs[key] = Run(value, trace)
        return hit

    def run2(self, secret, attack, fixed=None):
        assignment = dict(fixed or {})
        assignment[self.secret_binder[0]] = secret
        if len(self.binders) > 1:
            assignment[self.attack_binder[0]] = attack
        return self.run(assignment)


# ---------------------------------------------------------------------------
# Noninterference family


def _downgrade_witness(trace, high):
    for ev in trace:
        if isinstance(ev, Downgraded) and high.member(ev.source) and not high.member(ev.target):
            return ev
    return None


def check_noninterference(variant, harness, attacker_or_high, v1, v2, binding=None,
                          fixed=None, kind="untrusted"):
    """Run the program with ``binding`` set to v1 and to v2 and compare traces.

    Variants: thm1 is noninterference modulo downgrading and takes a HighSet
    (or an attacker plus ``kind``); thm2 covers programs whose pc is already
    untrusted or secret and takes an attacker plus ``kind``; thm3 covers
    inputs that are both secret and untrusted and takes an attacker.
    """
    condition = f"ni-{variant[-1]}"
    d = harness.d
    if variant == "thm1":
        high = attacker_or_high if isinstance(attacker_or_high, HighSet) else attacker_or_high.high_set(kind)
    elif variant == "thm2":
        high = attacker_or_high.high_set(kind)
    elif variant == "thm3":
        high = attacker_or_high.high_set("both")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    name = binding or harness.secret_binder[0]
    _, t_in, _ = harness.binder(name)
    if not harness.well_typed:
        return Verdict(condition, "skip", "program is not well typed")
    if not high_type(high, t_in):
        return Verdict(condition, "skip", f"{show_type(t_in)} is not a high type for {high.name}")
    for v in (v1, v2):
        if not harness.value_types(v, t_in):
            return Verdict(condition, "skip", f"input {show(v)} does not have type {show_type(t_in)}")
    if variant == "thm2":
        pc = harness.body_pc
        if not (attacker_or_high.untrusted.member(pc) or attacker_or_high.secret.member(pc)):
            return Verdict(condition, "skip", "pc is neither untrusted nor secret")
    fixed = dict(fixed or {})
    runs = []
    for v in (v1, v2):
        assignment = dict(fixed)
        assignment[name] = v
        runs.append(harness.run(assignment))
    low = LowSet.complement(high)
    witness = {"v1": show(v1), "v2": show(v2),
               "traces": [trace_json(r.trace) for r in runs]}
    if trace_equiv(d, low, runs[0].trace, runs[1].trace):
        return Verdict(condition, "pass", checked=1)
    if variant == "thm1":
        for r in runs:
            ev = _downgrade_witness(r.trace, high)
            if ev is not None:
                witness["event"] = event_to_json(ev)
                return Verdict(condition, "downgrade-witness", event_text(ev), witness, checked=1)
    return Verdict(condition, "violation", "low-distinguishable traces", witness,
                   implementation_bug=harness.well_typed, checked=1)


# ---------------------------------------------------------------------------
# Irrelevant inputs


@dataclass
class Irrelevance:
    irrelevant: bool
    witness: dict | None = None


class Experiment:
    """Keyed traces of all pool runs under the attacker's three observers."""

    def __init__(self, harness, attacker, pools):
        self.h = harness
        self.a = attacker
        self.pools = pools
        trusted, public, low = attacker.lows()
        self.eq = {name: Equivalence(harness.d, ls) for name, ls in
                   (("T", trusted), ("P", public), ("Low", low))}
        self.intern = {name: _interner() for name in self.eq}
        self._keyed = {}
        self._relevance = {}

    def run(self, secret, attack):
        return self.h.run2(secret, attack, self.pools.fixed)

    def keyed(self, secret, attack):
        key = (alpha_key(secret), alpha_key(attack))
        hit = self._keyed.get(key)
        if hit is None:
            trace = self.run(secret, attack).trace
            hit = {name: KeyedTrace(eq, trace, self.intern[name]) for name, eq in self.eq.items()}
            hit["visible"] = [i + 1 for i, k in enumerate(hit["Low"].keys) if k is not None]
            hit["trace"] = trace
            self._keyed[key] = hit
        return hit

    def relevant(self, aspect, v1):
        key = (aspect, alpha_key(v1))
        hit = self._relevance.get(key)
        if hit is None:
            hit = self._relevance[key] = not irrelevant_input(self, aspect, v1).irrelevant
        return hit


def _roles(exp, aspect, v1, row2, col):
    """Runs t^{ij} for the irrelevance search: row inputs are the tested kind."""
    if aspect == INTEG:  # tested input is an attack, columns vary the secret
        return lambda i, j: exp.keyed(col[j], (v1, row2)[i])
    return lambda i, j: exp.keyed((v1, row2)[i], col[j])


def irrelevant_input(exp, aspect, v1):
    """Search the pools for a witness that v1 is an irrelevant input.

    aspect INTEG tests an attack (a relevant attack is one the robust
    declassification quantifier keeps); CONF tests a secret. Rows of the four
    runs vary the tested kind, columns the other kind. Indices sit on events
    visible to the public-trusted observer; since the four inclusive prefixes
    must be equivalent for that observer, they hold the same number c of
    visible events, so the search ranges over c instead of index quadruples.
    """
    same = "P" if aspect == INTEG else "T"
    rows = exp.pools.attacks if aspect == INTEG else exp.pools.secrets
    cols = exp.pools.secrets if aspect == INTEG else exp.pools.attacks
    for row2 in rows:
        for c1 in cols:
            for c2 in cols:
                t = _roles(exp, aspect, v1, row2, (c1, c2))
                ts = {(i, j): t(i, j) for i in (0, 1) for j in (0, 1)}
                depth = min(len(k["visible"]) for k in ts.values())
                for c in range(1, depth + 1):
                    n = {ij: ts[ij]["visible"][c - 1] for ij in ts}
                    lows = {ts[ij]["Low"].upto(n[ij]) for ij in ts}
                    if len(lows) != 1:
                        continue
                    eq1 = ts[0, 0][same].upto(n[0, 0]) == ts[0, 1][same].upto(n[0, 1])
                    neq2 = ts[1, 0][same].upto(n[1, 0]) != ts[1, 1][same].upto(n[1, 1])
                    if eq1 and neq2:
                        role_row = "attack" if aspect == INTEG else "secret"
                        role_col = "secret" if aspect == INTEG else "attack"
                        return Irrelevance(True, {
                            "aspect": aspect,
                            f"{role_row}1": show(v1), f"{role_row}2": show(row2),
                            f"{role_col}1": show(c1), f"{role_col}2": show(c2),
                            "indices": {f"n{i + 1}{j + 1}": n[i, j] for i, j in ts},
                            "traces": {f"t{i + 1}{j + 1}": trace_json(ts[i, j]["trace"]) for i, j in ts},
                        })
    return Irrelevance(False)


def irrelevant(harness, attacker, aspect, v1, pools):
    return irrelevant_input(Experiment(harness, attacker, pools), aspect, v1)


# ---------------------------------------------------------------------------
# Robust declassification, transparent endorsement, NMIF


def _quadruples(pools):
    for v1, v2 in itertools.product(pools.secrets, repeat=2):
        for w1, w2 in itertools.product(pools.attacks, repeat=2):
            yield v1, v2, w1, w2


def _quad_witness(exp, v1, v2, w1, w2, extra=None):
    out = {"v1": show(v1), "v2": show(v2), "w1": show(w1), "w2": show(w2)}
    out.update(extra or {})
    out["traces"] = {f"t{i}{j}": trace_json(exp.run(v, w).trace)
                     for i, v in ((1, v1), (2, v2)) for j, w in ((1, w1), (2, w2))}
    return out


def check_robust_declassification(harness, attacker, pools):
    if has_downgrade(harness.program, INTEG):
        return Verdict("rd", "skip", "program contains endorse")
    exp = Experiment(harness, attacker, pools)
    checked = 0
    for v1, v2, w1, w2 in _quadruples(pools):
        checked += 1
        P = lambda v, w: exp.keyed(v, w)["P"].upto(len(exp.keyed(v, w)["trace"]))  # noqa: E731
        if P(v1, w1) == P(v2, w1) and P(v1, w2) != P(v2, w2) and exp.relevant(INTEG, w1):
            return Verdict("rd", "violation", "relevant attack changes what is released",
                           _quad_witness(exp, v1, v2, w1, w2),
                           implementation_bug=harness.well_typed, checked=checked)
    return Verdict("rd", "pass", checked=checked)


def check_transparent_endorsement(harness, attacker, pools):
    if has_downgrade(harness.program, CONF):
        return Verdict("te", "skip", "program contains decl")
    exp = Experiment(harness, attacker, pools)
    checked = 0
    for v1, v2, w1, w2 in _quadruples(pools):
        checked += 1
        T = lambda v, w: exp.keyed(v, w)["T"].upto(len(exp.keyed(v, w)["trace"]))  # noqa: E731
        if T(v1, w1) == T(v1, w2) and T(v2, w1) != T(v2, w2) and exp.relevant(CONF, v1):
            return Verdict("te", "violation", "relevant secret changes what is endorsed",
                           _quad_witness(exp, v1, v2, w1, w2),
                           implementation_bug=harness.well_typed, checked=checked)
    return Verdict("te", "pass", checked=checked)


def check_nmif(harness, attacker, pools, max_indices=None):
    """Both clauses over every quadruple and every index quadruple at events
    visible to the public-trusted observer."""
    exp = Experiment(harness, attacker, pools)
    checked = 0
    for v1, v2, w1, w2 in _quadruples(pools):
        t = {(1, 1): exp.keyed(v1, w1), (1, 2): exp.keyed(v1, w2),
             (2, 1): exp.keyed(v2, w1), (2, 2): exp.keyed(v2, w2)}
        idx = {ij: k["visible"][:max_indices] if max_indices else k["visible"] for ij, k in t.items()}
        checked += 1
        hit = _nmif_clause(t, idx, "T", "P", ((1, 1), (1, 2)), ((2, 1), (2, 2)),
                           ((1, 1), (2, 1)), ((1, 2), (2, 2)))
        if hit is not None and exp.relevant(INTEG, w1):
            return Verdict("nmif", "violation", "clause 1: attack influences a declassification",
                           _quad_witness(exp, v1, v2, w1, w2, {"clause": 1, "indices": hit}),
                           implementation_bug=harness.well_typed, checked=checked)
        hit = _nmif_clause(t, idx, "P", "T", ((1, 1), (2, 1)), ((1, 2), (2, 2)),
                           ((1, 1), (1, 2)), ((2, 1), (2, 2)))
        if hit is not None and exp.relevant(CONF, v1):
            return Verdict("nmif", "violation", "clause 2: secret influences an endorsement",
                           _quad_witness(exp, v1, v2, w1, w2, {"clause": 2, "indices": hit}),
                           implementation_bug=harness.well_typed, checked=checked)
    return Verdict("nmif", "pass", checked=checked)


def _nmif_clause(t, idx, pre, obs, pre_a, pre_b, same, differ):
    """First index assignment where the prefix preconditions hold under ``pre``
    (prefixes up to n-1 for both pairs pre_a, pre_b), the ``same`` pair is
    equivalent under ``obs`` up to n and the ``differ`` pair is not."""

    def pairs(a, b):
        for na in idx[a]:
            for nb in idx[b]:
                if t[a][pre].upto(na - 1) == t[b][pre].upto(nb - 1):
                    yield na, nb

    first = list(pairs(*pre_a))
    if not first:
        return None
    second = list(pairs(*pre_b))
    for na, nb in first:
        for nc, nd in second:
            n = {pre_a[0]: na, pre_a[1]: nb, pre_b[0]: nc, pre_b[1]: nd}
            s0, s1 = same
            d0, d1 = differ
            if (t[s0][obs].upto(n[s0]) == t[s1][obs].upto(n[s1])
                    and t[d0][obs].upto(n[d0]) != t[d1][obs].upto(n[d1])):
                return {f"n{i}{j}": n[i, j] for i, j in sorted(n)}
    return None


# ---------------------------------------------------------------------------
# Four-trace membership predicates


def hyper_traces(harness, pools, v1, v2, w1, w2):
    """t^{ij} with the two input markers in front of each run's trace."""
    out = {}
    for i, v in ((1, v1), (2, v2)):
        for j, w in ((1, w1), (2, w2)):
            out[i, j] = [input_marker(v), input_marker(w)] + list(harness.run2(v, w, pools.fixed).trace)
    return out


def _syntactic(eq, ev):
    """Event identity: collapse nothing, compare labels by equivalence."""
    match ev:
        case Bullet():
            return ("bullet",)
        case Protect(label, v):
            return ("protect", eq.label(label), alpha_key(v, label_key=eq.label))
        case Downgraded(aspect, src, tgt, v):
            return ("down", aspect, eq.label(src), eq.label(tgt), alpha_key(v, label_key=eq.label))
        case Input(v):
            return ("input", alpha_key(v, label_key=eq.label))
    raise TypeError(ev)


def _hyper(d, attacker, traces, dual, indices):
    trusted, public, low = attacker.lows()
    pre_obs, obs = (public, trusted) if dual else (trusted, public)
    intern = _interner()
    keyed = {}
    for name, ls in (("pre", pre_obs), ("obs", obs), ("Low", low)):
        eq = Equivalence(d, ls)
        keyed[name] = {ij: KeyedTrace(eq, t, intern) for ij, t in traces.items()}
    eq = Equivalence(d, low)
    # input-agreement premise of the comprehension
    for t in traces.values():
        if len(t) < 2 or isinstance(t[0], Bullet) or isinstance(t[1], Bullet):
            return True
    s = lambda ij, n: _syntactic(eq, traces[ij][n - 1])  # noqa: E731
    if not (s((1, 1), 1) == s((1, 2), 1) and s((2, 1), 1) == s((2, 2), 1)
            and s((1, 1), 2) == s((2, 1), 2) and s((1, 2), 2) == s((2, 2), 2)):
        return True
    if indices == "full":
        cands = {ij: [len(t)] for ij, t in traces.items()}
    else:
        cands = {ij: [n for n in range(1, len(t) + 1) if keyed["Low"][ij].keys[n - 1] is not None]
                 for ij, t in traces.items()}
    if dual:
        pre_pairs = (((1, 1), (2, 1)), ((1, 2), (2, 2)))
        same, differ = ((1, 1), (1, 2)), ((2, 1), (2, 2))
    else:
        pre_pairs = (((1, 1), (1, 2)), ((2, 1), (2, 2)))
        same, differ = ((1, 1), (2, 1)), ((1, 2), (2, 2))
    P, O, L = keyed["pre"], keyed["obs"], keyed["Low"]
    order = [(1, 1), (1, 2), (2, 1), (2, 2)]
    for combo in itertools.product(*(cands[ij] for ij in order)):
        n = dict(zip(order, combo))
        if not all(P[a].upto(n[a] - 1) == P[b].upto(n[b] - 1) for a, b in pre_pairs):
            continue
        if O[same[0]].upto(n[same[0]]) != O[same[1]].upto(n[same[1]]):
            continue
        if O[differ[0]].upto(n[differ[0]]) == O[differ[1]].upto(n[differ[1]]):
            continue
        if L[differ[0]].upto(n[differ[0]]) != L[differ[1]].upto(n[differ[1]]):
            return False
    return True


def rd_hyper_member(d, attacker, t11, t12, t21, t22, indices="all"):
    """Membership of four traces (input markers first) in the robust
    declassification 4-safety property for one attacker."""
    traces = {(1, 1): t11, (1, 2): t12, (2, 1): t21, (2, 2): t22}
    return _hyper(d, attacker, traces, False, indices)


def te_hyper_member(d, attacker, t11, t12, t21, t22, indices="all"):
    traces = {(1, 1): t11, (1, 2): t12, (2, 1): t21, (2, 2): t22}
    return _hyper(d, attacker, traces, True, indices)


def nmif_hyper_member(d, attacker, t11, t12, t21, t22, indices="all"):
    return (rd_hyper_member(d, attacker, t11, t12, t21, t22, indices)
            and te_hyper_member(d, attacker, t11, t12, t21, t22, indices))
