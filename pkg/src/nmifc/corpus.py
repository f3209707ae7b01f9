"""The bundled example programs and the loader shared by the CLI and tests."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import lattice
from .evaluate import holes_of
from .security import Attacker, Harness, InputPool, attach_attack_binder, load_pools
from .syntax import directives, parse, parse_program

CORPUS_DIR = Path(__file__).parent / "corpus"


@dataclass
class Entry:
    name: str
    attacker: list
    pools: str | None = None
    expect: object = "typed"
    exploit: str | None = None
    violates: list = field(default_factory=list)

    @property
    def path(self):
        return CORPUS_DIR / f"{self.name}.nm"

    @property
    def pools_path(self):
        return None if self.pools is None else CORPUS_DIR / self.pools

    @property
    def typed(self):
        return self.expect == "typed"

    @property
    def unsafe(self):
        return self.expect == "ill-typed"


def entries():
    data = json.loads((CORPUS_DIR / "manifest.json").read_text())
    return [Entry(**item) for item in data["programs"]]


def entry(name):
    for e in entries():
        if e.name == name:
            return e
    raise KeyError(name)


@dataclass
class Setup:
    """A parsed program with its lattice, attacker, harness, and pools."""

    path: Path
    d: object
    pc: object
    attacker: Attacker | None
    program: object  # parsed expression as written (holes kept)
    expr: object  # expression the harness runs (holes desugared)
    holes: int
    harness: Harness | None = None
    pools: InputPool | None = None


def resolve_lattice(path, text, lattice_path=None):
    """Delegations from an explicit path, else from the ``#lattice`` directive."""
    if lattice_path is None:
        rel, _ = directives(text)
        if rel is None:
            return lattice.NO_DELEGATIONS
        lattice_path = Path(path).parent / rel
    return lattice.load_lattice(lattice_path)


def setup(path, lattice_path=None, pc=None, atoms=None, unsafe=False, pools=None,
          fuel=None, harness=True):
    """Parse and prepare a program file.

    ``pools`` is the JSON form of an input pool. For programs with holes its
    attacks are lists of attack code, one expression per hole.
    """
    path = Path(path)
    text = path.read_text()
    d = resolve_lattice(path, text, lattice_path)
    attacker = Attacker(d, atoms) if atoms else None
    prog = parse_program(text, high_sets=attacker.high_sets() if attacker else None)
    pc = pc if pc is not None else prog.pc
    expr = prog.expr
    n_holes = len(holes_of(expr))
    attack_values = None
    if n_holes:
        vectors = [v if isinstance(v, list) else [v] for v in (pools or {}).get("attacks", [])]
        expr, attack_values = attach_attack_binder(
            d, expr, pc, [[parse(code) for code in vec] for vec in vectors])
    out = Setup(path, d, pc, attacker, prog.expr, expr, n_holes)
    if not harness:
        return out
    out.harness = Harness(d, expr, pc, unsafe=unsafe, **({} if fuel is None else {"fuel": fuel}))
    if pools is not None:
        out.pools = load_pools(pools, out.harness, check=not unsafe, attacks=attack_values)
    return out


def load(name, unsafe=None, **kwargs):
    """Set up a bundled program by name, with its attacker and pools."""
    e = entry(name) if isinstance(name, str) else name
    pools = json.loads(e.pools_path.read_text()) if e.pools else None
    kwargs.setdefault("harness", e.typed or e.unsafe)
    return setup(e.path, atoms=e.attacker, unsafe=e.unsafe if unsafe is None else unsafe,
                 pools=pools, **kwargs)
