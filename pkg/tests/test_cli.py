"""The four subcommands and their exit-code contract."""

import json
import subprocess
import sys

import numpy as np
import pytest

from cfgzip.cli import main

from conftest import GRAMMARS, suite_vocabulary


@pytest.fixture()
def dyck1_files(tmp_path):
    grammar = tmp_path / "dyck1.cfg"
    grammar.write_text(GRAMMARS["dyck1"] + "\n")
    vocab = tmp_path / "dyck1.vocab"
    vocab.write_text(suite_vocabulary("dyck1", long_tokens=10).render())
    cache = tmp_path / "dyck1.czc"
    return grammar, vocab, cache


def run_cli(*args):
    return main([str(a) for a in args])


def compile_args(grammar, vocab, cache, *extra):
    return ["compile", "--grammar", grammar, "--vocab", vocab, "--cache", cache, *extra]


def test_compile_writes_cache_and_summary(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    assert run_cli(*compile_args(grammar, vocab, cache)) == 0
    out = capsys.readouterr().out
    assert "|T|=" in out and "|E|=" in out and "ratio=" in out and "fallbacks=0" in out
    assert cache.exists()


def test_compile_deterministic_bytes(dyck1_files, tmp_path):
    grammar, vocab, cache = dyck1_files
    other = tmp_path / "again.czc"
    assert run_cli(*compile_args(grammar, vocab, cache)) == 0
    assert run_cli(*compile_args(grammar, vocab, other)) == 0
    assert cache.read_bytes() == other.read_bytes()


def test_compile_strict_compression_on_mini_c(tmp_path, capsys):
    grammar = tmp_path / "mini.cfg"
    grammar.write_text(GRAMMARS["mini_c"] + "\n")
    vocab = tmp_path / "mini.vocab"
    vocab.write_text(suite_vocabulary("mini_c").render())
    cache = tmp_path / "mini.czc"
    assert run_cli(*compile_args(grammar, vocab, cache, "--format", "json-lines")) == 0
    rec = json.loads(capsys.readouterr().out.strip())
    assert rec["classes"] < rec["tokens"]


def test_compile_bad_grammar_exits_2(tmp_path, capsys):
    grammar = tmp_path / "bad.cfg"
    grammar.write_text('root ::= "a\n')
    vocab = tmp_path / "v.vocab"
    vocab.write_text("61\n")
    assert run_cli(*compile_args(grammar, vocab, tmp_path / "c.czc")) == 2
    assert "line 1" in capsys.readouterr().err


def test_compile_missing_file_exits_2(tmp_path, capsys):
    assert run_cli(*compile_args(tmp_path / "nope.cfg", tmp_path / "nope.vocab", "x.czc")) == 2


def test_compile_dump_gnf(dyck1_files, tmp_path):
    grammar, vocab, cache = dyck1_files
    dump = tmp_path / "dyck1.gnf"
    assert run_cli(*compile_args(grammar, vocab, cache, "--dump-gnf", dump)) == 0
    text = dump.read_text()
    assert "::=" in text
    from cfgzip import parse_grammar, validate

    validate(parse_grammar(text))  # the dump reparses


def test_verify_fresh_cache_passes(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    rc = run_cli(
        "verify", "--grammar", grammar, "--vocab", vocab, "--cache", cache,
        "--steps", "25", "--runs", "4", "--congruence-pairs", "20",
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "mismatches=0" in out and "refuted=0" in out and "OK" in out


def test_verify_corrupted_cache_fails(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    data = bytearray(cache.read_bytes())
    data[len(data) // 2] ^= 1
    cache.write_bytes(bytes(data))
    rc = run_cli("verify", "--grammar", grammar, "--vocab", vocab, "--cache", cache)
    assert rc == 1
    assert "checksum" in capsys.readouterr().err


def test_verify_stale_cache_fails(dyck1_files, tmp_path, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    vocab.write_text(suite_vocabulary("dyck1", long_tokens=11).render())
    rc = run_cli("verify", "--grammar", grammar, "--vocab", vocab, "--cache", cache)
    assert rc == 1
    assert "different vocabulary" in capsys.readouterr().err


def test_verify_no_adjacency_identical_outcome(dyck1_files, tmp_path, capsys):
    grammar, vocab, cache = dyck1_files
    pruned_cache = cache
    raw_cache = tmp_path / "raw.czc"
    run_cli(*compile_args(grammar, vocab, pruned_cache))
    run_cli(*compile_args(grammar, vocab, raw_cache, "--no-adjacency"))
    capsys.readouterr()  # drain compile output
    results = []
    for c in (pruned_cache, raw_cache):
        rc = run_cli(
            "verify", "--grammar", grammar, "--vocab", vocab, "--cache", c,
            "--steps", "25", "--runs", "4", "--format", "json-lines",
        )
        rec = json.loads(capsys.readouterr().out.strip())
        results.append((rc, rec["mask_mismatches"], rec["congruence_refuted"], rec["ok"]))
    assert results[0] == results[1] == (0, 0, 0, True)


def test_bench_json_lines_and_speedup(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    capsys.readouterr()  # drain compile output
    rc = run_cli(
        "bench", "--grammar", grammar, "--vocab", vocab, "--cache", cache,
        "--steps", "20", "--runs", "3", "--format", "json-lines",
    )
    assert rc == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.strip().split("\n")]
    runs = [r for r in lines if r["record"] == "run"]
    summary = [r for r in lines if r["record"] == "summary"]
    assert len(runs) == 3 and len(summary) == 1
    s = summary[0]
    assert s["naive"]["mean_us"] > 0 and s["compressed"]["mean_us"] > 0
    assert s["speedup"] is not None
    for r in runs:
        assert {"outcome", "steps", "naive_total_ms", "compressed_total_ms"} <= set(r)


def test_bench_naive_cost_scales_linearly_in_vocab(tmp_path):
    # Mean naive mask time against |T| for 100/1k/10k-token vocabularies
    # fits a line: dead-token checks dominate and are constant-cost.
    import random

    from cfgzip import FuzzConfig, Vocabulary, fuzz_decode
    from conftest import suite_grammar

    g = suite_grammar("dyck1")
    rng = random.Random(9)
    sizes = [100, 1000, 10000]
    means = []
    for size in sizes:
        tokens = [
            bytes(rng.choice(b"()") for _ in range(rng.randint(1, 6))) for _ in range(size - 1)
        ]
        tokens.append(b"\x00")
        vocab = Vocabulary(
            tokens=tuple(tokens), specials=frozenset({size - 1}), eos_id=size - 1
        )
        report = fuzz_decode(g, vocab, None, FuzzConfig(seed=4, steps=12, runs=2))
        naive, _ = report.mask_times_ns(exclude_stuck=False)
        means.append(sum(naive) / len(naive))
    x = np.array(sizes, dtype=float)
    y = np.array(means)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    assert 1 - ss_res / ss_tot >= 0.9
    assert means[2] > means[0]


def test_bench_speedup_tracks_class_ratio_for_duplicates(tmp_path):
    # Ten byte-identical copies of each token: |E|/|T| lands near 0.1 and
    # every class representative has the same cost profile as its members,
    # so the measured speedup stays within 2x of the ideal 10x.
    import itertools
    import statistics

    from cfgzip import (
        FuzzConfig,
        Vocabulary,
        build_class_table,
        build_stack_adjacency,
        compute_all_displacements,
        fuzz_decode,
        to_gnf,
    )
    from conftest import suite_grammar

    g = suite_grammar("dyck1")
    gnf = to_gnf(g)
    adj = build_stack_adjacency(gnf)
    distinct = [bytes(p) for n in range(1, 4) for p in itertools.product(b"()", repeat=n)]
    tokens = tuple(distinct * 10) + (b"\x00",)
    eos = len(tokens) - 1
    vocab = Vocabulary(tokens=tokens, specials=frozenset({eos}), eos_id=eos)
    sweep = compute_all_displacements(vocab.tokens, gnf, adj)
    tbl = build_class_table(vocab, sweep.displacements)
    class_ratio = tbl.class_count / len(vocab)
    assert 0.05 <= class_ratio <= 0.15
    report = fuzz_decode(g, vocab, tbl, FuzzConfig(seed=8, steps=40, runs=4))
    naive, comp = report.mask_times_ns(exclude_stuck=True)
    speedup = statistics.fmean(naive) / statistics.fmean(comp)
    assert 5.0 <= speedup <= 20.0, f"speedup {speedup:.1f}x outside [5x, 20x]"


def test_compressed_unaffected_by_byte_duplicates(tmp_path, capsys):
    # Duplicating tokens byte-for-byte leaves |E| unchanged.
    grammar = tmp_path / "g.cfg"
    grammar.write_text(GRAMMARS["dyck1"] + "\n")
    base = suite_vocabulary("dyck1", long_tokens=10)
    v1 = tmp_path / "v1.vocab"
    v1.write_text(base.render())
    doubled = base.tokens[: base.eos_id] * 2 + (base.tokens[base.eos_id],)
    from cfgzip import Vocabulary

    v2 = tmp_path / "v2.vocab"
    v2.write_text(
        Vocabulary(
            tokens=doubled, specials=frozenset({len(doubled) - 1}), eos_id=len(doubled) - 1
        ).render()
    )
    sizes = []
    for v, c in ((v1, tmp_path / "c1.czc"), (v2, tmp_path / "c2.czc")):
        run_cli(*compile_args(grammar, v, c, "--format", "json-lines"))
        sizes.append(json.loads(capsys.readouterr().out.strip())["classes"])
    assert sizes[0] == sizes[1]


def test_inspect_lists_classes_and_tags(tmp_path, capsys):
    # arith has dead tokens (juxtaposed operands like "nn" fit no context).
    grammar = tmp_path / "arith.cfg"
    grammar.write_text(GRAMMARS["arith"] + "\n")
    vocab = tmp_path / "arith.vocab"
    vocab.write_text(suite_vocabulary("arith", long_tokens=5).render())
    cache = tmp_path / "arith.czc"
    run_cli(*compile_args(grammar, vocab, cache))
    rc = run_cli("inspect", "--grammar", grammar, "--vocab", vocab, "--cache", cache)
    out = capsys.readouterr().out
    assert rc == 0
    assert "never valid" in out
    assert "pass-through" in out


def test_inspect_partition_sums(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    capsys.readouterr()  # drain compile output
    run_cli(
        "inspect", "--grammar", grammar, "--vocab", vocab, "--cache", cache,
        "--format", "json-lines",
    )
    lines = [json.loads(l) for l in capsys.readouterr().out.strip().split("\n")]
    classes = [r for r in lines if "size" in r]
    totals = [r for r in lines if "non_special_tokens" in r][0]
    assert sum(r["size"] for r in classes) == totals["tokens"]
    specials = sum(r["size"] for r in classes if "pass-through" in r.get("tags", []))
    assert totals["non_special_tokens"] == totals["tokens"] - specials


def test_inspect_token_query(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    capsys.readouterr()  # drain compile output
    rc = run_cli(
        "inspect", "--grammar", grammar, "--vocab", vocab, "--cache", cache,
        "--token-id", "0", "--format", "json-lines",
    )
    assert rc == 0
    rec = json.loads(capsys.readouterr().out.strip())
    assert rec["token"] == 0 and "class" in rec and "representative" in rec


def test_inspect_dump_adjacency(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    capsys.readouterr()
    rc = run_cli(
        "inspect", "--grammar", grammar, "--vocab", vocab, "--cache", cache,
        "--dump-adjacency",
    )
    out = capsys.readouterr().out.strip().splitlines()
    assert rc == 0
    assert out, "expected at least one adjacency pair for dyck1"
    assert all(len(line.split()) == 2 for line in out)


def test_inspect_unknown_token_exits_2(dyck1_files, capsys):
    grammar, vocab, cache = dyck1_files
    run_cli(*compile_args(grammar, vocab, cache))
    rc = run_cli(
        "inspect", "--grammar", grammar, "--vocab", vocab, "--cache", cache,
        "--token-id", "99999",
    )
    assert rc == 2


def test_cache_dir_env_var(dyck1_files, tmp_path, monkeypatch, capsys):
    grammar, vocab, _ = dyck1_files
    cache_dir = tmp_path / "cachehome"
    monkeypatch.setenv("CFGZIP_CACHE_DIR", str(cache_dir))
    assert run_cli("compile", "--grammar", grammar, "--vocab", vocab) == 0
    out = capsys.readouterr().out
    written = list(cache_dir.glob("*.czc"))
    assert len(written) == 1
    assert str(written[0]) in out
    assert (
        run_cli("verify", "--grammar", grammar, "--vocab", vocab, "--steps", "10", "--runs", "2")
        == 0
    )


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "cfgzip.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "compile" in proc.stdout and "inspect" in proc.stdout
