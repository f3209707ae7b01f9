import io
import json
import subprocess
import sys

import pytest

from nmifc.cli import SCHEMA, main
from nmifc.corpus import CORPUS_DIR


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, _ = run(*argv, "--format", "json")
    data = json.loads(out)
    assert data["schema"] == SCHEMA
    return code, data


def corpus(name):
    return str(CORPUS_DIR / name)


# -- lattice


def test_lattice_voice():
    assert run("lattice", "voice (t^->)")[:2] == (0, "t^<-\n")


def test_lattice_top_acts_for_everything():
    assert run("lattice", "actsfor top alice")[:2] == (0, "true\n")


def test_lattice_flow_needs_delegation(tmp_path):
    cfg = tmp_path / "aucdel.json"
    cfg.write_text(json.dumps({"atoms": ["t", "u"], "delegations": [{"who": "t", "actsFor": "u"}]}))
    assert run("lattice", "flows (u^->) (t^->)")[:2] == (0, "false\n")
    assert run("lattice", "--config", str(cfg), "flows (u^->) (t^->)")[:2] == (0, "true\n")


def test_lattice_join_meet_json():
    code, data = run_json("lattice", "join a b")
    assert code == 0 and data["result"] == "(a & b)^-> & (a | b)^<-"
    code, data = run_json("lattice", "meet a b")
    assert code == 0 and data["result"] == "(a | b)^-> & (a & b)^<-"


def test_lattice_explain_lists_clauses():
    code, out, _ = run("lattice", "actsfor a a & b", "--explain")
    assert code == 0
    assert out.splitlines()[0] == "false"
    assert "uncovered" in out
    code, data = run_json("lattice", "actsfor a & b a", "--explain")
    assert data["result"] is True
    assert all(row["covered_by"] is not None for rows in data["explain"]["actsfor"].values()
               for row in rows)


@pytest.mark.parametrize("query", ["actsfor a", "frobnicate a b", "voice (a"])
def test_lattice_parse_errors_exit_3(query):
    assert run("lattice", query)[0] == 3


# -- check


def test_check_secure_password_checker():
    code, out, _ = run("check", corpus("pwd_secure.nm"))
    assert code == 0
    assert "->" in out


def test_check_insecure_endorse_names_final_premise():
    code, data = run_json("check", corpus("pwd_insecure.nm"))
    assert code == 2
    assert data["ok"] is False
    assert data["error"]["kind"] == "EndorsePremise"
    assert "final premise" in data["error"]["premise"]
    assert data["error"]["labels"] == {"from": "T^->", "pc": "T^<-", "to": "T"}


@pytest.mark.parametrize("name", ["auction_bad.nm", "launder_bad.nm"])
def test_check_rejects_exploits(name):
    assert run("check", corpus(name))[0] == 2


def test_check_parse_error(tmp_path):
    f = tmp_path / "bad.nm"
    f.write_text("lam (x : unit) [a].\n  (x")
    code, data = run_json("check", str(f))
    assert code == 3
    assert data["error"]["kind"] == "ParseError" and data["error"]["line"] == 2


def test_check_missing_file():
    assert run("check", "/nonexistent/file.nm")[0] == 3


def test_check_pc_flag_overrides_directive(tmp_path):
    f = tmp_path / "p.nm"
    f.write_text("eta[a] ()")
    assert run("check", str(f))[0] == 0
    assert run("check", str(f), "--pc", "top^<-")[0] == 0
    assert run("check", str(f), "--pc", "top^->")[0] == 2


# -- run


def test_run_with_input(tmp_path):
    f = tmp_path / "prog.nm"
    f.write_text("lam (x : a says unit) [bot^-> & top^<-]. bind y = x in eta[a] y")
    code, data = run_json("run", str(f), "--input", "x=eta[a] ()")
    assert code == 0
    assert data["value"] == "etav[a] ()"
    assert [e["ev"] for e in data["trace"]] == ["bullet", "protect"]
    assert data["steps"] == 2


def test_run_is_deterministic():
    args = ("run", corpus("inept.nm"), "--input", "sec=etav[S^-> & T^<-] tt",
            "--input", "atk=<etav[P^-> & U^<-] tt, etav[P^-> & U^<-] ff>", "--format", "json")
    first, second = run(*args), run(*args)
    assert first[0] == 0 and first == second


def test_run_out_of_fuel(tmp_path):
    f = tmp_path / "prog.nm"
    f.write_text("bind x = eta[a] () in eta[a] x")
    code, data = run_json("run", str(f), "--fuel", "2")
    assert code == 4
    assert data["steps"] == 2


def test_run_rejects_zero_fuel(tmp_path):
    f = tmp_path / "prog.nm"
    f.write_text("()")
    assert run("run", str(f), "--fuel", "0")[0] == 3


def test_run_open_program_is_an_error(tmp_path):
    f = tmp_path / "prog.nm"
    f.write_text("lam (x : unit) [a]. x")
    assert run("run", str(f), "--input", "y=()")[0] == 2


def test_run_ill_typed_needs_unsafe(tmp_path):
    f = tmp_path / "prog.nm"
    f.write_text("proj1 ()")
    assert run("run", str(f))[0] == 2
    # with --unsafe the program runs and gets stuck, which is also exit 2
    assert run("run", str(f), "--unsafe")[0] == 2


def test_run_input_of_wrong_type(tmp_path):
    f = tmp_path / "prog.nm"
    f.write_text("lam (x : a says unit) [bot^-> & top^<-]. x")
    assert run("run", str(f), "--input", "x=()")[0] == 2


# -- verify


def test_verify_well_typed_nmif_passes():
    code, data = run_json("verify", corpus("inept.nm"), "--condition", "nmif", "--attacker", "P,U",
                          "--pools", corpus("inept.pools.json"))
    assert code == 0
    assert data["verdict"] == "pass"
    assert data["condition"] == "nmif" and data["well_typed"] is True


def test_verify_cast_mutant_violates_rd():
    code, data = run_json("verify", corpus("pwd_rd_mutant.nm"), "--condition", "rd",
                          "--attacker", "U", "--pools", corpus("pwd_fn.pools.json"), "--unsafe")
    assert code == 1
    assert data["verdict"] == "violation"
    assert set(data["witness"]) >= {"v1", "v2", "w1", "w2", "traces"}


def test_verify_endorse_mutant_skips_rd():
    code, out, _ = run("verify", corpus("pwd_mutant.nm"), "--condition", "rd", "--attacker", "U",
                       "--pools", corpus("pwd_fn.pools.json"), "--unsafe")
    assert code == 5
    assert "program contains endorse" in out


def test_verify_endorse_program_skips_rd():
    code, out, _ = run("verify", corpus("endorse_only.nm"), "--condition", "rd", "--attacker", "U")
    assert code == 5
    assert "reason: program contains endorse" in out


@pytest.mark.parametrize("name,pools", [("pwd_mutant.nm", "pwd_fn.pools.json"),
                                        ("auction_mutant.nm", "auction_fn.pools.json"),
                                        ("launder_mutant.nm", "launder_fn.pools.json")])
def test_verify_exploit_mutants_violate_nmif(name, pools):
    atk = {"pwd": "U", "auction": "B", "launder": "L"}[name.split("_")[0]]
    code, data = run_json("verify", corpus(name), "--condition", "nmif", "--attacker", atk,
                          "--pools", corpus(pools), "--unsafe")
    assert code == 1, data
    assert data["witness"]["clause"] in (1, 2)


def test_verify_mutant_refused_without_unsafe():
    code, _, err = run("verify", corpus("pwd_mutant.nm"), "--condition", "nmif", "--attacker", "U",
                       "--pools", corpus("pwd_fn.pools.json"))
    assert code == 2 and err.startswith("error:")


def test_verify_needs_attacker():
    assert run("verify", corpus("inept.nm"), "--condition", "nmif")[0] == 5


def test_verify_thm1_identical_attack_passes():
    # the first pool attack supplies the same value twice, so the secret is not released
    code, data = run_json("verify", corpus("inept.nm"), "--condition", "ni-1", "--attacker", "P,U",
                          "--pools", corpus("inept.pools.json"), "--kind", "secret")
    assert code == 0 and data["verdict"] == "pass"


def test_verify_thm1_downgrade_witness_exits_zero(tmp_path):
    pools = json.loads((CORPUS_DIR / "inept.pools.json").read_text())
    pools["attacks"] = pools["attacks"][1:]
    f = tmp_path / "pools.json"
    f.write_text(json.dumps(pools))
    code, data = run_json("verify", corpus("inept.nm"), "--condition", "ni-1", "--attacker", "P,U",
                          "--pools", str(f), "--kind", "secret")
    assert code == 0
    assert data["verdict"] == "downgrade-witness"


def test_verify_generated_pools_are_seeded():
    args = ("verify", corpus("relabel.nm"), "--condition", "nmif", "--attacker", "L",
            "--seed", "7", "--format", "json")
    first, second = run(*args), run(*args)
    assert first == second
    assert first[0] == 0


def test_verify_hole_program_is_desugared():
    code, data = run_json("verify", corpus("pwd_hole.nm"), "--condition", "nmif", "--attacker", "U",
                          "--pools", corpus("pwd_hole.pools.json"))
    assert code == 0, data


# -- desugar


def test_desugar_hole_program():
    code, data = run_json("desugar", corpus("pwd_hole.nm"), "--attacker", "U")
    assert code == 0
    assert "[hole" not in data["program"]


def test_desugar_needs_attacker():
    assert run("desugar", corpus("pwd_hole.nm"))[0] == 5


# -- entry point


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "nmifc.cli", "lattice", "voice (t^->)"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout == "t^<-\n"
