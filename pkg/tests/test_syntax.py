import pytest

from nmifc import corpus, lattice
from nmifc.generate import Generator, _NoTerm, as_source, programs
from nmifc.lattice import CONF, INTEG, Atom, ParseError
from nmifc.syntax import (
    App, Bind, BOOL_T, Downgrade, Eta, EtaV, FunT, Hole, Inj, Lam, Proj, Says, SumT, UnitT,
    UnitV, Var, alpha_equiv, free_vars, parse, parse_program, parse_type, show, substitute,
    to_json,
)
from nmifc.typecheck import Context, TypeCheckError, type_of, types_equal

P = lattice.parse_principal


def test_parse_eta():
    assert parse("eta[alice] ()") == Eta(Atom("alice"), UnitV())


def test_parse_decl_with_labels():
    e = parse("decl (eta[s^-> & t^<-] ()) to (p^-> & t^<-)")
    assert e == Downgrade(CONF, Eta(P("s^-> & t^<-"), UnitV()), P("p^-> & t^<-"))


def test_parse_bind():
    e = parse("bind x = y in proj1 x", rename=False)
    assert e == Bind("x", Var("y"), Proj(1, Var("x")))


def test_parse_endorse_and_booleans():
    e = parse("endorse tt to a^<-")
    assert e == Downgrade(INTEG, Inj(1, UnitV(), BOOL_T), P("a^<-"))
    assert parse_type("bool") == SumT(UnitT(), UnitT())


def test_parse_types():
    t = parse_type("a says unit -[b^<-]-> unit + unit")
    assert t == FunT(Says(Atom("a"), UnitT()), P("b^<-"), SumT(UnitT(), UnitT()))


def test_print_etav_marker():
    assert show(EtaV(Atom("a"), UnitV())) == "etav[a] ()"


def test_print_hole():
    assert show(Hole(0, "H")) == "[hole 0 : H]"


def test_runtime_forms_rejected_in_source():
    with pytest.raises(ParseError, match="etav"):
        parse("etav[a] ()")
    with pytest.raises(ParseError, match="bracket"):
        parse("bracket[U; a] ()")
    assert parse("etav[a] ()", allow_runtime=True) == EtaV(Atom("a"), UnitV())


def test_parse_error_position_and_expected():
    with pytest.raises(ParseError) as info:
        parse("bind x = () in\n  proj1")
    err = info.value
    assert (err.line, err.col) == (2, 8)
    assert "expression" in err.expected


def test_directives():
    prog = parse_program("#lattice pwd.json\n#pc T^<-\n()")
    assert prog.lattice_path == "pwd.json"
    assert prog.pc == P("T^<-")
    assert prog.expr == UnitV()


def test_bound_variables_renamed_apart():
    e = parse("lam (x : unit) [a]. lam (x : unit) [a]. x")
    assert e.var != e.body.var
    assert e.body.body == Var(e.body.var)


# -- round trips


@pytest.mark.parametrize("entry", corpus.entries(), ids=lambda e: e.name)
def test_corpus_round_trip(entry):
    e = parse_program(entry.path.read_text()).expr
    again = parse(show(e))
    assert alpha_equiv(again, e)
    assert alpha_equiv(parse(show(again)), again)


def test_generated_round_trip():
    for e, _, _ in programs(300, seed=5):
        src = as_source(e)
        assert alpha_equiv(parse(show(src)), src), show(src)


def test_alpha_equivalence():
    assert alpha_equiv(parse("lam (x : unit) [a]. x"), parse("lam (y : unit) [a]. y"))
    assert not alpha_equiv(parse("lam (x : unit) [a]. x"), parse("lam (x : unit) [b]. x"))
    assert not alpha_equiv(parse("lam (x : unit) [a]. y"), parse("lam (y : unit) [a]. y"))


# -- substitution


def test_substitute_variable():
    assert substitute(Var("x"), "x", UnitV()) == UnitV()


def test_substitute_respects_shadowing():
    e = Lam("x", UnitT(), Atom("a"), Var("x"))
    assert substitute(e, "x", UnitV()) == e


def test_substitute_avoids_capture():
    e = Lam("y", UnitT(), Atom("a"), App(Var("x"), Var("y")))
    out = substitute(e, "x", Var("y"))
    assert out.var != "y"
    assert out.body == App(Var("y"), Var(out.var))
    assert free_vars(out) == {"y"}


def test_substitution_preserves_typing():
    gen = Generator(seed=3)
    done = 0
    for _ in range(400):
        s, t = gen.type(1), gen.type(2)
        v = gen.value(s)
        if v is None:
            continue
        try:
            body = gen.expr([("x0", s)], lattice.FLOW_BOTTOM, t, 4)
            before = type_of(None, Context.of([("x0", s)]), body, lattice.FLOW_BOTTOM)
        except (_NoTerm, TypeCheckError):
            continue
        after = type_of(None, None, substitute(body, "x0", v), lattice.FLOW_BOTTOM)
        assert types_equal(None, before, after)
        done += 1
    assert done >= 100


def test_json_export():
    out = to_json(parse("eta[a] ()"))
    assert out == {"node": "eta", "label": "a", "body": {"node": "unitv"}}


def test_ill_formed_typing_is_reported_not_crashing():
    with pytest.raises(TypeCheckError):
        type_of(None, None, parse("proj1 ()"))
