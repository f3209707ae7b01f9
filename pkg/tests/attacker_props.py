"""Sampled checks of the five attacker properties (collusion, attenuation,
closure of non-members under disjunction, conjunction with a non-member,
and aspect symmetry)."""
from __future__ import annotations

import random

from nmifc.generate import random_principal
from nmifc.lattice import CONF, INTEG, Atom, Conj, Delegations, Disj, Projection, view, voice
from nmifc.security import Attacker

ATOMS = ("a", "b", "c", "d")


def random_attacker(rng, atoms=ATOMS):
    """Nonempty coalition plus up to two delegations to conjunctions of atoms.

    Delegation targets stay disjunction-free and unprojected: authority must
    remain join-prime and the same in both aspects for the properties to hold.
    """
    axioms = []
    for _ in range(rng.randrange(3)):
        names = rng.sample(atoms, rng.randint(1, 2))
        target = Atom(names[0])
        for n in names[1:]:
            target = Conj(target, Atom(n))
        axioms.append((rng.choice(atoms), target))
    coalition = rng.sample(atoms, rng.randint(1, len(atoms) - 1))
    return Attacker(Delegations(axioms, atoms), coalition)


def in_aspect(attacker, p, aspect):
    """p in A^pi: some p^pi & q^pi' is in A, equivalently p^pi is."""
    return attacker.member(Projection(p, aspect))


def check_attacker(attacker, rng, samples=1000, atoms=ATOMS):
    """Return a list of (property number, witness) failures."""
    pool = [random_principal(rng, atoms, rng.randint(1, 5)) for _ in range(samples)]
    failures = []
    for aspect in (CONF, INTEG):
        members = [p for p in pool if in_aspect(attacker, p, aspect)]
        others = [p for p in pool if not in_aspect(attacker, p, aspect)]
        for _ in range(samples):
            b = rng.choice(pool)
            if members:
                a1, a2 = rng.choice(members), rng.choice(members)
                if not in_aspect(attacker, Conj(a1, a2), aspect):
                    failures.append((1, (a1, a2, aspect)))
                if not in_aspect(attacker, Disj(a1, b), aspect):
                    failures.append((2, (a1, b, aspect)))
            if others:
                b1, b2 = rng.choice(others), rng.choice(others)
                if in_aspect(attacker, Disj(b1, b2), aspect):
                    failures.append((3, (b1, b2, aspect)))
                if in_aspect(attacker, Conj(b, b1), aspect):
                    failures.append((4, (b, b1, aspect)))
    for a in pool:
        if attacker.member(a):
            swapped = Conj(voice(Projection(a, CONF)), view(Projection(a, INTEG)))
            if not attacker.member(swapped):
                failures.append((5, a))
    return failures


def run(attackers=100, samples=1000, seed=0):
    rng = random.Random(seed)
    out = []
    for _ in range(attackers):
        out += check_attacker(random_attacker(rng), rng, samples)
    return out
