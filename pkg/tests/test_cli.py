import json
import subprocess
import sys
from importlib import resources

import pytest

from rulesynth import canonical_scan_grammar, load_grammar, read_episode
from rulesynth.cli import main


def data_path(name):
    return str(resources.files("rulesynth") / "data" / name)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def last_manifest(err):
    return json.loads(err.strip().splitlines()[-1])


# ---------------------------------------------------------------- apply


@pytest.mark.parametrize("words,expected", [
    (["jump", "around", "left"], "LTURN JUMP LTURN JUMP LTURN JUMP LTURN JUMP"),
    (["walk twice after run"], "RUN WALK WALK"),
])
def test_apply_sequence(capsys, words, expected):
    code, out, err = run(capsys, "apply", data_path("scan.grammar"), *words)
    assert code == 0 and out.strip() == expected
    assert last_manifest(err)["result"]["output"] == expected


def test_apply_turn_prints_empty_line(capsys):
    code, out, _ = run(capsys, "apply", data_path("scan.grammar"), "turn", "left", "and", "turn")
    assert code == 0 and out == "LTURN\n"


def test_apply_number(capsys):
    code, out, _ = run(capsys, "apply", data_path("numbers_a.grammar"), "token16 token13 token50")
    assert code == 0 and out.strip() == "203"


def test_apply_no_match(capsys):
    code, _, err = run(capsys, "apply", data_path("scan.grammar"), "blah")
    assert code == 4 and "NoMatch" in err


def test_apply_budget(capsys, tmp_path):
    g = tmp_path / "loop.grammar"
    g.write_text("a -> A\nx1 b x2 -> [x1] [x2]\n")
    code, _, _ = run(capsys, "apply", str(g), "a b a b a", "--eval-budget", "2")
    assert code == 5


def test_apply_parse_error(capsys, tmp_path):
    g = tmp_path / "bad.grammar"
    g.write_text("walk WALK\n")
    code, _, err = run(capsys, "apply", str(g), "walk")
    assert code == 3 and "GrammarSyntaxError" in err


def test_usage_error(capsys):
    code, _, _ = run(capsys, "apply")
    assert code == 2
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "apply", str(tmp_path / "nope.grammar"), "walk")
    assert code == 7


# ---------------------------------------------------------------- sample / episode


def test_sample_deterministic(capsys):
    _, a, _ = run(capsys, "sample", "miniscan", "--seed", "3", "--count", "4")
    _, b, _ = run(capsys, "sample", "miniscan", "--seed", "3", "--count", "4")
    _, c, _ = run(capsys, "sample", "miniscan", "--seed", "4", "--count", "4")
    assert a == b != c
    assert len(a.strip().split("\n\n")) == 4


def test_sample_bad_params(capsys, tmp_path):
    p = tmp_path / "p.cfg"
    p.write_text("rhs_max_len = 99\n")
    code, _, err = run(capsys, "sample", "miniscan", "--params", str(p))
    assert code == 6 and "rhs_max_len" in err


def test_sample_params_family_mismatch(capsys, tmp_path):
    p = tmp_path / "p.cfg"
    p.write_text("family = number\n")
    code, _, _ = run(capsys, "sample", "miniscan", "--params", str(p))
    assert code == 6


def test_episode_file(capsys, tmp_path):
    out = tmp_path / "ep.tsv"
    gout = tmp_path / "target.grammar"
    code, _, _ = run(capsys, "episode", "miniscan", "--n-support", "30", "--n-query", "10",
                     "--out", str(out), "--grammar-out", str(gout), "--seed", "1")
    assert code == 0
    ep = read_episode(out)
    assert len(ep.support) == 30 and len(ep.query) == 10
    assert len(out.read_text().splitlines()) == 40
    code, text, _ = run(capsys, "apply", "--sequence", str(gout), " ".join(ep.query[0].input))
    assert code == 0 and tuple(text.split()) == ep.query[0].output


def test_episode_rejects_empty_query(capsys):
    code, _, err = run(capsys, "episode", "miniscan", "--n-query", "0")
    assert code == 6 and "n_query" in err


def test_episode_unsatisfiable(capsys, tmp_path):
    g = tmp_path / "tiny.grammar"
    g.write_text("a -> A\n")
    code, _, _ = run(capsys, "episode", "miniscan", "--grammar", str(g), "--n-support", "5")
    assert code == 9


def test_number_episode(capsys, tmp_path):
    out = tmp_path / "n.tsv"
    code, _, _ = run(capsys, "episode", "number", "--grammar", data_path("numbers_a.grammar"),
                     "--n-support", "20", "--out", str(out))
    assert code == 0
    assert read_episode(out).domain == "number"


# ---------------------------------------------------------------- scan


def test_scan_build_and_load(capsys, tmp_path):
    out = tmp_path / "all.txt"
    code, _, err = run(capsys, "scan", "build", "--out", str(out))
    assert code == 0
    assert len(out.read_text().splitlines()) == 20_910
    assert last_manifest(err)["result"] == {"examples": 20_910, "max_output": 48}
    code, text, _ = run(capsys, "scan", "load", str(out))
    assert code == 0 and text.strip() == "20910"


def test_scan_split(capsys, tmp_path):
    code, out, _ = run(capsys, "scan", "split", "length", "--out", str(tmp_path))
    rec = json.loads(out)
    assert code == 0
    assert rec["max_train_output"] == 22 and rec["min_test_output"] == 24
    assert rec["train"] + rec["test"] == 20_910
    assert (tmp_path / "length_train.txt").exists()


def test_scan_bogus_split(capsys, tmp_path):
    code, _, err = run(capsys, "scan", "split", "bogus", "--out", str(tmp_path))
    assert code == 6 and "UnknownSplit" in err


def test_scan_load_bad_file(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("IN: walk OUT: WALK\nwalk WALK\n")
    code, _, err = run(capsys, "scan", "load", str(p))
    assert code == 7 and "line 2" in err


# ---------------------------------------------------------------- synth


def test_synth_needs_budget(capsys):
    code, _, err = run(capsys, "synth", "--split", "simple")
    assert code == 6 and "budget" in err


def test_synth_external_oracle_on_split(capsys, tmp_path):
    code, out, err = run(capsys, "synth", "--split", "add-jump", "--proposer", "external",
                         "--external-file", data_path("scan.grammar"), "--budget-proposals", "5")
    assert code == 0
    rec = last_manifest(err)["result"]
    assert rec["termination"] == "FoundConsistent" and rec["query_accuracy"] == 1.0
    assert "accuracy=1.000" in out


def test_synth_external_command(capsys, tmp_path):
    cmd = f"{sys.executable} -c \"print(open({data_path('scan.grammar')!r}).read())\""
    code, _, err = run(capsys, "synth", "--split", "simple", "--proposer", "external",
                       "--external-cmd", cmd, "--budget-proposals", "3", "--ransac",
                       "--subset-proposals", "3")
    assert code == 0
    assert last_manifest(err)["result"]["query_accuracy"] == 1.0


def test_synth_spawn_failure(capsys):
    code, _, _ = run(capsys, "synth", "--split", "simple", "--proposer", "external",
                     "--external-cmd", "/nonexistent/proposer", "--budget-proposals", "3")
    assert code == 8
    code, _, _ = run(capsys, "synth", "--split", "simple", "--proposer", "external",
                     "--external-file", "/nonexistent/blocks", "--budget-proposals", "3")
    assert code == 8


def test_synth_episode_with_prior(capsys, tmp_path):
    ep = tmp_path / "ep.tsv"
    assert main(["episode", "miniscan", "--seed", "2", "--out", str(ep)]) == 0
    best = tmp_path / "best.grammar"
    code, out, err = run(capsys, "synth", "--episode", str(ep), "--budget-proposals", "200",
                         "--out", str(best))
    assert code == 0
    rec = last_manifest(err)["result"]
    assert rec["proposals_seen"] <= 200 and rec["n_query"] == 10
    assert best.exists()


def test_synth_numbers_rejects_prior(capsys, tmp_path):
    code, _, err = run(capsys, "numbers", "--grammar", data_path("numbers_a.grammar"),
                       "--mode", "synth", "--budget-proposals", "5")
    assert code == 6 and "external" in err


# ---------------------------------------------------------------- numbers


def test_numbers_roundtrip(capsys):
    code, out, _ = run(capsys, "numbers", "--grammar", data_path("numbers_b.grammar"),
                       "--roundtrip", "200")
    assert code == 0
    assert "disagree=0" in out and "accuracy=1.000" in out


def test_numbers_external_oracle(capsys):
    code, out, _ = run(capsys, "numbers", "--grammar", data_path("numbers_a.grammar"),
                       "--mode", "synth", "--proposer", "external",
                       "--external-file", data_path("numbers_a.grammar"),
                       "--budget-proposals", "2")
    assert code == 0 and "accuracy=1.000" in out and "FoundConsistent" in out


def test_numbers_lexicon_error(capsys, tmp_path):
    lex = tmp_path / "lex.tsv"
    lex.write_text("one\ttoken01\nbroken\n")
    code, _, err = run(capsys, "numbers", "--grammar", data_path("numbers_a.grammar"),
                       "--lexicon", str(lex))
    assert code == 7 and "line 2" in err


# ---------------------------------------------------------------- manifests


def test_manifest_and_replay(capsys, tmp_path):
    m = tmp_path / "run.json"
    code, _, _ = run(capsys, "sample", "scanlike", "--seed", "5", "--count", "3",
                     "--manifest", str(m))
    assert code == 0
    manifest = json.loads(m.read_text())
    assert manifest["seed"] == 5 and manifest["exit_code"] == 0
    assert manifest["config"]["count"] == 3
    code, out, _ = run(capsys, "replay", str(m))
    assert code == 0 and "identical" in out

    manifest["result"]["grammars"][0] = "dax -> RED"
    m.write_text(json.dumps(manifest))
    code, out, _ = run(capsys, "replay", str(m))
    assert code == 1 and "MISMATCH" in out


def test_replay_of_search_run(capsys, tmp_path):
    m = tmp_path / "run.json"
    ep = tmp_path / "ep.tsv"
    main(["episode", "miniscan", "--seed", "8", "--out", str(ep)])
    capsys.readouterr()
    code, _, _ = run(capsys, "synth", "--episode", str(ep), "--budget-proposals", "150",
                     "--seed", "8", "--manifest", str(m))
    assert code == 0
    code, out, _ = run(capsys, "replay", str(m))
    assert code == 0 and "identical" in out


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rulesynth.cli", "apply",
                          data_path("scan.grammar"), "walk left"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "LTURN WALK"


def test_oracle_grammar_file_is_canonical():
    # the external-oracle tests above lean on the packaged file being the canonical grammar
    assert load_grammar(data_path("scan.grammar")) == canonical_scan_grammar()
