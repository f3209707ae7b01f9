"""Command-line entry point: lattice queries, type checking, evaluation, verification."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import lattice
from .corpus import resolve_lattice, setup
from .evaluate import (
    DEFAULT_FUEL, DesugarError, OutOfFuel, Stuck, evaluate, holes_of, trace_text, trace_to_json,
)
from .generate import Generator
from .lattice import CONF, INTEG, flow_join, flow_meet, flows_to, project, view, voice
from .lattice import show as show_label
from .lexer import ParseError, TokenStream
from .security import (
    Attacker, PoolError, Verdict, attach_attack_binder, check_nmif,
    check_noninterference, check_robust_declassification, check_transparent_endorsement,
    parse_value,
)
from .syntax import Lam, free_vars, parse, parse_program, show, show_type, substitute, to_json
from .typecheck import TypeCheckError, high_type, type_of, types_equal

SCHEMA = "nmifc/1"

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_TYPE = 2
EXIT_PARSE = 3
EXIT_FUEL = 4
EXIT_SKIP = 5

CONDITIONS = ("rd", "te", "nmif", "ni-1", "ni-2", "ni-3")


class Failure(Exception):
    """An error that ends the command with a given exit code."""

    def __init__(self, code, message, detail=None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail


# ---------------------------------------------------------------------------
# Output


class Out:
    def __init__(self, fmt, stream):
        self.fmt = fmt
        self.stream = stream

    @property
    def json(self):
        return self.fmt == "json"

    def emit(self, text, data):
        if self.json:
            data = {"schema": SCHEMA, **data}
            self.stream.write(json.dumps(data, sort_keys=True, indent=2) + "\n")
        else:
            self.stream.write(text.rstrip("\n") + "\n")


# ---------------------------------------------------------------------------
# Arguments


def _common(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--lattice", "--config", dest="lattice", metavar="PATH", default=default(None),
                        help="delegation file (JSON with atoms and delegations)")
    parser.add_argument("--pc", metavar="PRINCIPAL", default=default(None),
                        help="program counter label (overrides a #pc directive)")
    parser.add_argument("--format", choices=("text", "json"), default=default("text"))
    parser.add_argument("--seed", type=int, default=default(0), help="seed for generated pools")
    parser.add_argument("--fuel", type=int, default=default(DEFAULT_FUEL), help="step limit")
    parser.add_argument("--unsafe", action="store_true", default=default(False),
                        help="run and verify programs that do not type-check")
    parser.add_argument("--attacker", metavar="ATOMS", default=default(None),
                        help="comma-separated atomic principals the attacker controls")


def build_parser():
    parser = argparse.ArgumentParser(prog="nmifc", description=__doc__)
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", help="query the principal lattice")
    _common(p, suppress=True)
    p.add_argument("query", nargs="+", help="actsfor p q | flows l l' | voice l | view l | join l l' | meet l l'")
    p.add_argument("--explain", action="store_true", help="show the covering clauses")

    p = sub.add_parser("check", help="type-check a program")
    _common(p, suppress=True)
    p.add_argument("file")

    p = sub.add_parser("run", help="evaluate a program and print its trace")
    _common(p, suppress=True)
    p.add_argument("file")
    p.add_argument("--input", action="append", default=[], metavar="NAME=VALUE",
                   help="bind a leading input (or free variable) to a value")

    p = sub.add_parser("verify", help="check a security condition over input pools")
    _common(p, suppress=True)
    p.add_argument("file")
    p.add_argument("--condition", choices=CONDITIONS, required=True)
    p.add_argument("--pools", metavar="PATH", help="pool file; generated from --seed when omitted")
    p.add_argument("--binding", help="input varied by the noninterference conditions")
    p.add_argument("--kind", choices=("untrusted", "secret"),
                   help="high set for ni-1 and ni-2 (default: the first one the input is high for)")
    p.add_argument("--max-indices", type=int, help="cap on events considered per trace")

    p = sub.add_parser("desugar", help="replace holes by calls to an attack input")
    _common(p, suppress=True)
    p.add_argument("file")
    p.add_argument("--attack", action="append", default=[], metavar="CODE",
                   help="attack code for the next hole, in order")
    return parser


# ---------------------------------------------------------------------------
# Shared helpers


def _atoms(args):
    if not args.attacker:
        return None
    return [a.strip() for a in args.attacker.split(",") if a.strip()]


def _pc(args):
    return None if args.pc is None else lattice.parse_principal(args.pc)


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as err:
        raise Failure(EXIT_PARSE, f"cannot read {path}: {err.strerror}") from None


def _delegations(args, file=None):
    try:
        if file is None:
            return lattice.NO_DELEGATIONS if args.lattice is None else lattice.load_lattice(args.lattice)
        return resolve_lattice(file, _read(file), args.lattice)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        raise Failure(EXIT_PARSE, f"cannot load lattice: {err}") from None


def _type_error(err):
    return Failure(EXIT_TYPE, err.text(), {"error": err.to_json()})


# ---------------------------------------------------------------------------
# lattice


def _binary(ts):
    p = lattice.parse_principal_from(ts)
    q = lattice.parse_principal_from(ts)
    ts.expect_eof()
    return p, q


def _unary(ts):
    p = lattice.parse_principal_from(ts)
    ts.expect_eof()
    return p


def _covering(d, p, q):
    out = {}
    for aspect in (CONF, INTEG):
        out[aspect] = [{"clause": sorted(clause),
                        "covered_by": None if cover is None else sorted(cover)}
                       for clause, cover in d.covering(p, q, aspect)]
    return out


def _explain_text(title, report):
    lines = [title]
    if not any(report.values()):
        lines.append("  nothing to cover")
    for aspect, rows in report.items():
        for row in rows:
            clause = " | ".join(row["clause"]) or "top"
            cover = row["covered_by"]
            how = "uncovered" if cover is None else "covered by " + (" | ".join(cover) or "top")
            lines.append(f"  {aspect}: ({clause}) {how}")
    return "\n".join(lines)


def cmd_lattice(args, out):
    d = _delegations(args)
    text = " ".join(args.query)
    ts = TokenStream(text)
    op = ts.expect_ident("query").text
    explain = {}
    if op == "actsfor":
        p, q = _binary(ts)
        result = lattice.acts_for(d, p, q)
        if args.explain:
            explain["actsfor"] = _covering(d, p, q)
    elif op == "flows":
        p, q = _binary(ts)
        result = flows_to(d, p, q)
        if args.explain:
            explain["confidentiality"] = _covering(d, project(q, CONF), project(p, CONF))
            explain["integrity"] = _covering(d, project(p, INTEG), project(q, INTEG))
    elif op in ("voice", "view"):
        result = (voice if op == "voice" else view)(_unary(ts))
    elif op in ("join", "meet"):
        p, q = _binary(ts)
        result = (flow_join if op == "join" else flow_meet)(p, q)
    else:
        raise Failure(EXIT_PARSE, f"unknown query {op!r}")
    shown = result if isinstance(result, bool) else show_label(result)
    text_out = str(shown).lower() if isinstance(shown, bool) else shown
    for title, report in explain.items():
        text_out += "\n" + _explain_text(title, report)
    data = {"query": text, "result": shown}
    if explain:
        data["explain"] = explain
    out.emit(text_out, data)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# check


def _load_program(args, runtime=False):
    path = Path(args.file)
    text = _read(path)
    d = _delegations(args, path)
    atoms = _atoms(args)
    attacker = Attacker(d, atoms) if atoms else None
    prog = parse_program(text, allow_runtime=runtime, high_sets=attacker.high_sets() if attacker else None)
    pc = _pc(args) or prog.pc
    return path, d, attacker, prog.expr, pc


def cmd_check(args, out):
    path, d, attacker, e, pc = _load_program(args)
    harness = bool(holes_of(e))
    try:
        t = type_of(d, None, e, pc, harness=harness)
    except TypeCheckError as err:
        raise _type_error(err) from None
    out.emit(show_type(t), {"file": str(path), "ok": True, "type": show_type(t)})
    return EXIT_PASS


# ---------------------------------------------------------------------------
# run


def _bind_inputs(d, e, pc, inputs, unsafe):
    """Substitute --input values into leading binders (or free variables)."""
    values = {}
    for item in inputs:
        name, sep, text = item.partition("=")
        if not sep or not name.strip():
            raise Failure(EXIT_PARSE, f"--input expects NAME=VALUE, got {item!r}")
        values[name.strip()] = parse_value(d, text)
    while isinstance(e, Lam) and e.var in values:
        v = values.pop(e.var)
        if not unsafe:
            try:
                got = type_of(d, None, v, e.pc)
            except TypeCheckError as err:
                raise _type_error(err) from None
            if not types_equal(d, got, e.type):
                raise Failure(EXIT_TYPE, f"input {e.var} = {show(v)} does not have type {show_type(e.type)}")
        pc = e.pc
        e = substitute(e.body, e.var, v)
    for name, v in values.items():
        if name not in free_vars(e):
            raise Failure(EXIT_TYPE, f"no input binder or free variable named {name}")
        e = substitute(e, name, v)
    missing = sorted(free_vars(e))
    if missing:
        raise Failure(EXIT_TYPE, f"program is not closed: no value for {', '.join(missing)}")
    return e, pc


def cmd_run(args, out):
    path, d, attacker, e, pc = _load_program(args)
    if holes_of(e):
        raise Failure(EXIT_TYPE, "program has holes; desugar it or use verify")
    pc = pc if pc is not None else lattice.FLOW_BOTTOM
    if not args.unsafe:
        try:
            type_of(d, None, e, pc)
        except TypeCheckError as err:
            raise _type_error(err) from None
    e, run_pc = _bind_inputs(d, e, pc, args.input, args.unsafe)
    try:
        value, trace = evaluate(d, e, run_pc, args.fuel)
    except OutOfFuel as err:
        raise Failure(EXIT_FUEL, f"out of fuel after {err.steps} steps",
                      {"steps": err.steps, "trace": trace_to_json(err.trace)}) from None
    except Stuck as err:
        raise Failure(EXIT_TYPE, f"evaluation is stuck: {err.reason}: {show(err.expr)}") from None
    text = f"value: {show(value)}\nsteps: {len(trace)}\ntrace:\n" + "\n".join(
        "  " + line for line in trace_text(trace).splitlines())
    out.emit(text, {"file": str(path), "value": show(value), "value_ast": to_json(value),
                    "steps": len(trace), "trace": trace_to_json(trace)})
    return EXIT_PASS


# ---------------------------------------------------------------------------
# verify


def _generated_pools(args, s):
    """Seeded pools drawn from the input binder types."""
    gen = Generator(s.d, sorted(s.d.atoms) or ("a",), args.seed)
    h = s.harness
    data = {"secrets": [show(v) for v in gen.values(h.binders[0][1])]}
    if len(h.binders) > 1:
        data["attacks"] = [show(v) for v in gen.values(h.binders[1][1])]
    return data


def _setup_verify(args):
    atoms = _atoms(args)
    if not atoms:
        raise Failure(EXIT_SKIP, "verify needs --attacker")
    pools = None
    if args.pools:
        try:
            pools = json.loads(_read(args.pools))
        except json.JSONDecodeError as err:
            raise Failure(EXIT_PARSE, f"cannot parse pools: {err}") from None
    path = Path(args.file)
    _read(path)
    kwargs = dict(lattice_path=args.lattice, pc=_pc(args), atoms=atoms, unsafe=args.unsafe,
                  fuel=args.fuel)
    try:
        if pools is None:
            bare = setup(path, harness=False, **kwargs)
            pools = _hole_pools(args, bare) if bare.holes else _generated_pools(args, setup(path, **kwargs))
        return setup(path, pools=pools, **kwargs)
    except TypeCheckError as err:
        raise _type_error(err) from None
    except (PoolError, DesugarError) as err:
        raise Failure(EXIT_SKIP, str(err)) from None


def _hole_pools(args, bare):
    gen = Generator(bare.d, sorted(bare.d.atoms) or ("a",), args.seed)
    binder = bare.program if isinstance(bare.program, Lam) else None
    if binder is None:
        raise Failure(EXIT_SKIP, "a program with holes needs a leading input binder")
    holes = holes_of(bare.program)
    if any(hole.type is None for hole in holes):
        raise Failure(EXIT_SKIP, "cannot generate attacks for holes without a type annotation")
    return {"secrets": [show(v) for v in gen.values(binder.type)],
            "attacks": [[show(gen.source_value(hole.type)) for hole in holes] for _ in range(3)]}


def _ni_kinds(condition, kind, attacker, t):
    if condition == "ni-3":
        return ["both"]
    if kind:
        return [kind]
    for k in ("secret", "untrusted"):
        if high_type(attacker.high_set(k), t):
            return [k]
    return ["secret"]


def _verify_ni(args, s):
    h, a, pools = s.harness, s.attacker, s.pools
    variant = "thm" + args.condition[-1]
    names = [b[0] for b in h.binders]
    binding = args.binding or names[0]
    if binding not in names:
        raise Failure(EXIT_SKIP, f"no input binder named {binding}")
    pool = pools.secrets if binding == names[0] else pools.attacks
    fixed = dict(pools.fixed)
    for n, vals in zip(names[:2], (pools.secrets, pools.attacks)):
        if n != binding:
            fixed.setdefault(n, vals[0])
    _, t_in, _ = h.binder(binding)
    kind = _ni_kinds(args.condition, args.kind, a, t_in)[0]
    verdicts = []
    for i, v1 in enumerate(pool):
        for v2 in pool[i + 1:]:
            verdicts.append(check_noninterference(variant, h, a, v1, v2, binding, fixed, kind))
    for status in ("violation", "downgrade-witness"):
        for v in verdicts:
            if v.status == status:
                v.checked = len(verdicts)
                return v
    skips = [v for v in verdicts if v.status == "skip"]
    if verdicts and len(skips) == len(verdicts):
        return skips[0]
    return Verdict(args.condition, "pass", checked=len(verdicts))


def cmd_verify(args, out):
    s = _setup_verify(args)
    h, a, pools = s.harness, s.attacker, s.pools
    if not h.well_typed and not args.unsafe:
        raise Failure(EXIT_TYPE, "program is not well typed")
    try:
        if args.condition == "rd":
            verdict = check_robust_declassification(h, a, pools)
        elif args.condition == "te":
            verdict = check_transparent_endorsement(h, a, pools)
        elif args.condition == "nmif":
            verdict = check_nmif(h, a, pools, args.max_indices)
        else:
            verdict = _verify_ni(args, s)
    except OutOfFuel as err:
        raise Failure(EXIT_FUEL, f"out of fuel after {err.steps} steps") from None
    except Stuck as err:
        raise Failure(EXIT_TYPE, f"evaluation is stuck: {err.reason}: {show(err.expr)}") from None
    data = verdict.to_json(a, pools)
    data["condition"] = args.condition
    data["file"] = str(s.path)
    data["well_typed"] = h.well_typed
    text = f"{args.condition}: {verdict.status} ({verdict.checked} checked)"
    if verdict.reason:
        text += f"\nreason: {verdict.reason}"
    if verdict.status == "violation" and verdict.implementation_bug:
        text += "\nIMPLEMENTATION-BUG: the program is well typed, so this cannot happen"
    if verdict.witness is not None:
        text += "\nwitness:\n" + json.dumps(verdict.witness, sort_keys=True, indent=2)
    out.emit(text, data)
    return {"pass": EXIT_PASS, "downgrade-witness": EXIT_PASS, "violation": EXIT_VIOLATION,
            "skip": EXIT_SKIP}[verdict.status]


# ---------------------------------------------------------------------------
# desugar


def cmd_desugar(args, out):
    path, d, attacker, e, pc = _load_program(args)
    if attacker is None:
        raise Failure(EXIT_SKIP, "desugar needs --attacker to resolve hole high sets")
    attacks = [parse(code) for code in args.attack] if args.attack else None
    try:
        program, values = attach_attack_binder(d, e, pc, [attacks] if attacks else None)
        t = type_of(d, None, program, pc)
    except TypeCheckError as err:
        raise _type_error(err) from None
    except DesugarError as err:
        raise Failure(EXIT_TYPE, str(err)) from None
    text = f"{show(program)}\ntype: {show_type(t)}"
    data = {"file": str(path), "program": show(program), "type": show_type(t)}
    if values:
        text += f"\nattack: {show(values[0])}"
        data["attack"] = show(values[0])
    out.emit(text, data)
    return EXIT_PASS


COMMANDS = {"lattice": cmd_lattice, "check": cmd_check, "run": cmd_run,
            "verify": cmd_verify, "desugar": cmd_desugar}


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    out = Out(args.format, stdout)
    if args.fuel <= 0:
        stderr.write("error: --fuel must be positive\n")
        return EXIT_PARSE
    try:
        return COMMANDS[args.command](args, out)
    except ParseError as err:
        failure = Failure(EXIT_PARSE, f"parse error: {err}",
                          {"error": {"kind": "ParseError", "message": err.message,
                                     "line": err.line, "col": err.col,
                                     "expected": sorted(err.expected)}})
    except Failure as err:
        failure = err
    if out.json:
        out.emit("", {"ok": False, "exit": failure.code, "message": failure.message,
                      **(failure.detail or {})})
    stderr.write(f"error: {failure.message}\n")
    return failure.code


if __name__ == "__main__":
    sys.exit(main())
