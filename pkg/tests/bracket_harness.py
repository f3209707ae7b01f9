"""Runs a program with one input wrapped in a bracket and compares the result
with the ordinary run, for the bracket soundness and completeness checks."""
from __future__ import annotations

from dataclasses import dataclass

from nmifc import lattice
from nmifc.evaluate import Bullet, OutOfFuel, Stuck, bracket_project, evaluate, project_event
from nmifc.syntax import Bracket, ProdT, Says, UnitT, alpha_equiv, substitute
from nmifc.typecheck import type_of, types_equal


def protect_bound(t):
    """Greatest label protecting t (None when nothing protects it)."""
    match t:
        case UnitT():
            return lattice.FLOW_TOP
        case Says(label, _):
            return label
        case ProdT(a, b):
            x, y = protect_bound(a), protect_bound(b)
            return None if x is None or y is None else lattice.flow_meet(x, y)
    return None


@dataclass
class Comparison:
    sound: bool
    complete: bool
    typed: bool
    detail: str = ""


def bracketed(d, body, name, t, v, high, pc):
    """body[name := bracket[high; top^->] v].

    The input may occur under lambdas with any pc, and the bracket pc must be
    above each of them; the flow-top label is, and it lies in every nonempty
    upward-closed high set.
    """
    assert protect_bound(t) is not None and high.member(lattice.FLOW_TOP)
    return substitute(body, name, Bracket(v, high, lattice.FLOW_TOP))


def non_bullets(trace):
    return [ev for ev in trace if not isinstance(ev, Bullet)]


def compare(d, e_br, pc, fuel=10_000, check_types=True):
    """Soundness: projecting the bracketed run gives the plain run's events
    (bracket rules only add silent steps) and value. Completeness: when the
    plain run terminates, so does the bracketed one."""
    plain_e = bracket_project(e_br)
    value, trace = evaluate(d, plain_e, pc, fuel)
    typed = True
    if check_types:
        t0 = type_of(d, None, e_br, pc, harness=True)
        states = []
        try:
            bv, bt = evaluate(d, e_br, pc, fuel, observe=lambda e, ev: states.append(e))
        except (Stuck, OutOfFuel) as err:
            return Comparison(True, False, True, str(err))
        typed = all(types_equal(d, type_of(d, None, s, pc, harness=True), t0) for s in states)
    else:
        try:
            bv, bt = evaluate(d, e_br, pc, fuel)
        except (Stuck, OutOfFuel) as err:
            return Comparison(True, False, True, str(err))
    projected = [project_event(ev) for ev in non_bullets(bt)]
    sound = (len(bt) >= len(trace)
             and len(projected) == len(non_bullets(trace))
             and all(_same_event(a, b) for a, b in zip(projected, non_bullets(trace)))
             and alpha_equiv(bracket_project(bv), value))
    return Comparison(sound, True, typed)


def _same_event(a, b):
    if type(a) is not type(b):
        return False
    if hasattr(a, "value"):
        fields_a = [getattr(a, f) for f in a.__dataclass_fields__ if f != "value"]
        fields_b = [getattr(b, f) for f in b.__dataclass_fields__ if f != "value"]
        return fields_a == fields_b and alpha_equiv(a.value, b.value)
    return a == b


def corpus_cases():
    """(name, d, bracketed expr, pc) for each typed bundled program with pools,
    each input binder whose type is high for one of the attacker's high sets,
    and each pool value for that binder."""
    from nmifc import corpus
    from nmifc.typecheck import high_type

    for entry in corpus.entries():
        if not entry.typed or entry.pools is None:
            continue
        s = corpus.load(entry)
        h, pools = s.harness, s.pools
        defaults = {h.binders[0][0]: pools.secrets[0]}
        if len(h.binders) > 1:
            defaults[h.binders[1][0]] = pools.attacks[0]
        defaults.update(pools.fixed)
        for index, (name, t, _) in enumerate(h.binders[:2]):
            values = pools.secrets if index == 0 else pools.attacks
            kinds = ("secret", "untrusted") if index == 0 else ("untrusted", "secret")
            high = next((s.attacker.high_set(k) for k in kinds
                         if high_type(s.attacker.high_set(k), t)), None)
            if high is None:
                continue
            for v in values:
                body = h.body
                for other, w in defaults.items():
                    if other != name:
                        body = substitute(body, other, w)
                yield entry.name, s.d, bracketed(s.d, body, name, t, v, high, h.body_pc), h.body_pc
