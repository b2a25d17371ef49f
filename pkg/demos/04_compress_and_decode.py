"""The whole pipeline: classes, cache, masks, and a lossless decode.

Builds the class table for a small vocabulary over the balanced-paren
grammar, shows which tokens fold together, round-trips the cache file,
and runs a seeded decode checking at every step that the compressed mask
expands to exactly the naive mask.
"""

import itertools
import tempfile
from pathlib import Path

from cfgzip import (
    FuzzConfig,
    Vocabulary,
    build_class_table,
    build_stack_adjacency,
    compute_all_displacements,
    fuzz_decode,
    load_cache,
    oracle_membership,
    parse_grammar,
    save_cache,
    to_gnf,
    validate,
)

g = validate(parse_grammar('root ::= "(" root ")" root | ""'))
gnf = to_gnf(g)
adj = build_stack_adjacency(gnf)

tokens = [bytes(p) for n in range(1, 4) for p in itertools.product(b"()", repeat=n)]
tokens += [b"(()", b"(()(", b"", b"\x00"]
eos = len(tokens) - 1
vocab = Vocabulary(tokens=tuple(tokens), specials=frozenset({eos}), eos_id=eos)

sweep = compute_all_displacements(vocab.tokens, gnf, adj)
tbl = build_class_table(vocab, sweep.displacements)
print(f"|T|={len(vocab)} tokens -> |E|={tbl.class_count} classes "
      f"({tbl.compression_ratio():.2f}:1)")
for k, members in enumerate(tbl.class_members()):
    if len(members) > 1:
        rep = vocab.tokens[int(tbl.r[k])]
        print(f"  class {k}: rep {rep!r} <- {[vocab.tokens[m] for m in members]}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "dyck.czc"
    save_cache(tbl, path)
    print(f"cache: {path.stat().st_size} bytes, round-trips:", load_cache(path) == tbl)

report = fuzz_decode(g, vocab, tbl, FuzzConfig(seed=11, steps=40, runs=3))
print(f"\nfuzz decode: {report.total_steps} steps, "
      f"{report.total_mismatches} mask mismatches")
for run in report.runs:
    note = ""
    if run.outcome == "completed":
        note = f" word={oracle_membership(g, run.output, bound=128)}"
    print(f"  run {run.run_index}: {run.outcome:9} output={run.output!r}{note}")
