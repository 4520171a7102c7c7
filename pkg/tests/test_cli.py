"""CLI surface: flags, exit codes, determinism, config merging."""

import json

import numpy as np
import pytest

from lattice_hasimoto.cli import run
from lattice_hasimoto.core import read_jsonl, read_scalar_csv

SUBCOMMANDS = ["sample", "transform", "evolve", "verify", "invariance",
               "converge", "spectrum"]


def test_help_exits_zero_everywhere(capsys):
    assert run(["--help"]) == 0
    capsys.readouterr()
    for sub in SUBCOMMANDS:
        assert run([sub, "--help"]) == 0, sub
        out = capsys.readouterr().out
        assert "--" in out


def test_version_embeds_table_hash(capsys):
    assert run(["--version"]) == 0
    out = capsys.readouterr().out
    assert "lattice-hasimoto" in out and "tables" in out


def test_unknown_flag_usage_error(capsys):
    assert run(["sample", "--measure", "wn", "--frobnicate"]) == 2
    capsys.readouterr()


def test_missing_subcommand_usage_error(capsys):
    assert run([]) == 2
    capsys.readouterr()


def test_sample_beta_zero_rejected(tmp_path, capsys):
    code = run(["sample", "--measure", "wn", "--beta", "0", "--window=0..1",
                "--seed", "1", "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    assert "beta" in capsys.readouterr().err


def test_sample_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        assert run(["sample", "--measure", "wn", "--beta", "1",
                    "--window=-4..4", "--count", "3", "--seed", "11",
                    "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    capsys.readouterr()


def test_sample_without_seed_prints_replay_line(tmp_path, capsys):
    assert run(["sample", "--measure", "gibbs", "--beta", "1",
                "--window=0..3", "--out", str(tmp_path / "g.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "--seed" in out and "replay" in out


def test_evolve_round_trip_deterministic(tmp_path, capsys):
    src = tmp_path / "f.jsonl"
    run(["sample", "--measure", "wn", "--beta", "1", "--window=-6..6",
         "--seed", "3", "--out", str(src)])
    outs = []
    for name in ("g1.jsonl", "g2.jsonl"):
        dst = tmp_path / name
        assert run(["evolve", "--model", "al", "--tfinal", "1",
                    "--in", str(src), "--out", str(dst)]) == 0
        outs.append(dst.read_bytes())
    assert outs[0] == outs[1]
    capsys.readouterr()


def test_evolve_conserved_csv(tmp_path, capsys):
    src, dst = tmp_path / "f.jsonl", tmp_path / "t.jsonl"
    csvp = tmp_path / "cons.csv"
    run(["sample", "--measure", "wn", "--beta", "1", "--window=-4..4",
         "--seed", "5", "--out", str(src)])
    assert run(["evolve", "--model", "al", "--tfinal", "0.5", "--samples", "5",
                "--in", str(src), "--out", str(dst),
                "--conserved", str(csvp)]) == 0
    rows = read_scalar_csv(csvp)
    names = {name for _, name, _ in rows}
    assert {"H_LHM", "H_AL"} <= names
    h_lhm = [v for _, n, v in rows if n == "H_LHM"]
    assert max(h_lhm) - min(h_lhm) <= 1e-8 * max(1.0, abs(h_lhm[0]))
    capsys.readouterr()


def test_transform_round_trip_via_files(tmp_path, capsys):
    sp, al, fr, sp2 = (tmp_path / n for n in
                       ("s.jsonl", "a.jsonl", "f.jsonl", "s2.jsonl"))
    run(["sample", "--measure", "gibbs", "--beta", "1", "--window=-5..5",
         "--seed", "7", "--out", str(sp)])
    assert run(["transform", "--direction", "s2a", "--in", str(sp),
                "--out", str(al), "--frames-out", str(fr)]) == 0
    assert run(["transform", "--direction", "a2s", "--gauge", "file",
                "--gauge-file", str(fr), "--in", str(al),
                "--out", str(sp2)]) == 0
    s1 = read_jsonl(sp)[0][1]
    s2 = read_jsonl(sp2)[0][1]
    assert np.max(np.abs(s1.values - s2.values[:len(s1.values)])) <= 1e-10
    capsys.readouterr()


def test_verify_suites_exit_zero(tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert run(["verify", "--suite", "hamilton", "--window", "3",
                "--out", str(rep)]) == 0
    payload = json.loads(rep.read_text())
    assert payload["pass"] is True
    assert run(["verify", "--suite", "jacobi", "--window", "1"]) == 0
    assert run(["verify", "--suite", "compat", "--window", "1"]) == 0
    assert run(["verify", "--suite", "tables", "--samples", "5",
                "--seed", "2"]) == 0
    capsys.readouterr()


def test_spectrum_subcommand(tmp_path, capsys):
    out = tmp_path / "spec.json"
    assert run(["spectrum", "--beta", "1", "--lmax", "4",
                "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["eigenvalues"][0] == pytest.approx(1.0, abs=1e-10)
    assert payload["eigenvalues"][1] == pytest.approx(0.5, abs=1e-8)
    capsys.readouterr()


def test_invariance_subcommand_small(tmp_path, capsys):
    out = tmp_path / "inv.json"
    assert run(["invariance", "--measure", "wn", "--beta", "1", "-K", "8",
                "-N", "400", "--tfinal", "0.5", "--times", "0,0.5",
                "--seed", "42", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["verdicts"]["overall"] is True
    for entry in payload["statistics"]:
        assert {"criterion", "value", "target", "tolerance", "pass"} <= set(entry)
    capsys.readouterr()


def test_converge_subcommand(tmp_path, capsys):
    out = tmp_path / "conv.json"
    assert run(["converge", "--beta", "1", "--Ks", "8,16", "--tfinal", "0.5",
                "--seed", "3", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["strictly_decreasing"] in (True, False)
    capsys.readouterr()


def test_config_file_merged_under_flags(tmp_path, capsys):
    conf = tmp_path / "run.toml"
    conf.write_text('[sample]\nbeta = 1.0\nwindow = "0..3"\ncount = 2\n'
                    'seed = 9\n')
    out = tmp_path / "c.jsonl"
    assert run(["--config", str(conf), "sample", "--measure", "wn",
                "--out", str(out)]) == 0
    recs = read_jsonl(out)
    assert len(recs) == 2
    assert recs[0][1].window.lo == 0
    # flags win over the config
    out2 = tmp_path / "c2.jsonl"
    assert run(["--config", str(conf), "sample", "--measure", "wn",
                "--count", "1", "--out", str(out2)]) == 0
    assert len(read_jsonl(out2)) == 1
    capsys.readouterr()


def test_parser_rejects_bad_choice(capsys):
    assert run(["evolve", "--model", "bogus", "--tfinal", "1",
                "--in", "x", "--out", "y"]) == 2
    capsys.readouterr()
