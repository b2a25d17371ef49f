"""Command-line pipeline: compile, verify, bench, inspect.

Exit codes are a stable contract: 0 success, 1 verification failure,
2 input error.  ``--format json-lines`` switches every subcommand to one
JSON object per output record; text is the default.  The default cache
location honours the CFGZIP_CACHE_DIR environment variable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .adjacency import build_stack_adjacency
from .classtable import (
    CacheError,
    StaleCacheError,
    build_class_table,
    load_cache,
    load_vocabulary,
    save_cache,
)
from .displacement import compute_all_displacements, compute_displacement
from .fuzz import FuzzConfig, fuzz_decode
from .gnf import render_gnf, to_gnf
from .grammar import GrammarError, GrammarSource, parse_grammar, validate
from .grammar import _escape_bytes
from .oracle import oracle_congruence_sample

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2


def _emit(records, fmt: str):
    for rec in records:
        if fmt == "json-lines":
            print(json.dumps(rec, sort_keys=True))
        else:
            print(rec.pop("_text", None) or " ".join(f"{k}={v}" for k, v in rec.items()))


def _load_inputs(ns):
    grammar_bytes = Path(ns.grammar).read_bytes()
    g = validate(parse_grammar(GrammarSource(grammar_bytes.decode("utf-8"), ns.grammar)))
    vocab = load_vocabulary(ns.vocab)
    gdig = hashlib.sha256(grammar_bytes).digest()
    vdig = hashlib.sha256(Path(ns.vocab).read_bytes()).digest()
    return g, vocab, gdig, vdig


def _default_cache_path(gdig: bytes, vdig: bytes) -> Path:
    base = Path(os.environ.get("CFGZIP_CACHE_DIR", "."))
    return base / f"{gdig.hex()[:12]}-{vdig.hex()[:12]}.czc"


def cmd_compile(ns) -> int:
    t_start = time.perf_counter()
    g, vocab, gdig, vdig = _load_inputs(ns)
    gnf = to_gnf(g)
    if ns.dump_gnf:
        Path(ns.dump_gnf).write_text(render_gnf(gnf))
    adj = None if ns.no_adjacency else build_stack_adjacency(gnf)
    sweep = compute_all_displacements(
        vocab.tokens, gnf, adj, budget=ns.budget, threads=ns.threads
    )
    tbl = build_class_table(vocab, sweep.displacements, grammar_digest=gdig, vocab_digest=vdig)
    cache_path = Path(ns.cache) if ns.cache else _default_cache_path(gdig, vdig)
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    save_cache(tbl, cache_path)
    wall = time.perf_counter() - t_start
    _emit(
        [
            {
                "tokens": tbl.token_count,
                "classes": tbl.class_count,
                "ratio": round(tbl.compression_ratio(), 3),
                "budget_fallbacks": len(sweep.budget_exceeded),
                "wall_s": round(wall, 3),
                "cache": str(cache_path),
                "_text": (
                    f"|T|={tbl.token_count} |E|={tbl.class_count} "
                    f"ratio={tbl.compression_ratio():.2f}:1 "
                    f"fallbacks={len(sweep.budget_exceeded)} "
                    f"wall={wall:.2f}s cache={cache_path}"
                ),
            }
        ],
        ns.format,
    )
    return EXIT_OK


def _load_cache_for(ns, gdig, vdig):
    cache_path = Path(ns.cache) if ns.cache else _default_cache_path(gdig, vdig)
    return load_cache(cache_path, grammar_digest=gdig, vocab_digest=vdig), cache_path


def cmd_verify(ns) -> int:
    g, vocab, gdig, vdig = _load_inputs(ns)
    try:
        tbl, cache_path = _load_cache_for(ns, gdig, vdig)
    except CacheError as exc:
        print(f"verify: cache failed to load: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED

    # Structural invariants first: partition, self-map, minimality.
    problems = []
    for k in range(tbl.class_count):
        rid = int(tbl.r[k])
        if int(tbl.c[rid]) != k:
            problems.append(f"class {k}: representative {rid} maps to class {int(tbl.c[rid])}")
    members = tbl.class_members()
    for k, mem in enumerate(members):
        if not mem:
            problems.append(f"class {k} is empty")
            continue
        rep_len = len(vocab.tokens[int(tbl.r[k])])
        if any(len(vocab.tokens[m]) < rep_len for m in mem):
            problems.append(f"class {k}: representative is not byte-shortest")

    # Losslessness sweep: expanded compressed masks must equal naive masks.
    mismatches = 0
    first = None
    total_steps = 0
    for s in range(ns.seeds):
        report = fuzz_decode(
            g, vocab, tbl, FuzzConfig(seed=ns.seed + s, steps=ns.steps, runs=ns.runs)
        )
        total_steps += report.total_steps
        mismatches += report.total_mismatches
        for run in report.runs:
            if run.first_mismatch and first is None:
                first = run.first_mismatch

    # Refinement spot check: same-class pairs must never be refuted.
    refuted = 0
    checked_pairs = 0
    if ns.congruence_pairs > 0:
        for k, mem in enumerate(members):
            if k in tbl.passthrough or checked_pairs >= ns.congruence_pairs:
                continue
            rep_tok = vocab.tokens[int(tbl.r[k])]
            seen = {rep_tok}
            for m in mem:
                if checked_pairs >= ns.congruence_pairs:
                    break
                tok = vocab.tokens[m]
                if tok in seen:
                    continue
                seen.add(tok)
                checked_pairs += 1
                if not oracle_congruence_sample(g, rep_tok, tok, ns.congruence_bound):
                    refuted += 1
                    if first is None:
                        first = {"class": k, "rep": rep_tok.hex(), "member": tok.hex()}

    ok = not problems and mismatches == 0 and refuted == 0
    _emit(
        [
            {
                "fuzz_steps": total_steps,
                "mask_mismatches": mismatches,
                "structure_problems": len(problems),
                "congruence_pairs": checked_pairs,
                "congruence_refuted": refuted,
                "first_failure": first,
                "ok": ok,
                "_text": (
                    f"steps={total_steps} mismatches={mismatches} "
                    f"structure_problems={len(problems)} "
                    f"congruence_pairs={checked_pairs} refuted={refuted} "
                    f"{'OK' if ok else 'FAIL ' + str(first or problems[:1])}"
                ),
            }
        ],
        ns.format,
    )
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def _quantiles(values):
    if not values:
        return {"mean_us": None, "p50_us": None, "p99_us": None}
    arr = np.asarray(values, dtype=np.float64) / 1000.0
    return {
        "mean_us": round(float(arr.mean()), 2),
        "p50_us": round(float(np.percentile(arr, 50)), 2),
        "p99_us": round(float(np.percentile(arr, 99)), 2),
    }


def cmd_bench(ns) -> int:
    g, vocab, gdig, vdig = _load_inputs(ns)
    try:
        tbl, _ = _load_cache_for(ns, gdig, vdig)
    except CacheError as exc:
        print(f"bench: cache failed to load: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    records = []
    all_naive, all_comp = [], []
    stuck = 0
    for s in range(ns.seeds):
        report = fuzz_decode(
            g, vocab, tbl, FuzzConfig(seed=ns.seed + s, steps=ns.steps, runs=ns.runs)
        )
        naive, comp = report.mask_times_ns(exclude_stuck=True)
        all_naive += naive
        all_comp += comp
        stuck += sum(1 for r in report.runs if r.outcome == "stuck")
        for run in report.runs:
            run_naive = [st.naive_ns for st in run.steps]
            run_comp = [st.compressed_ns for st in run.steps if st.compressed_ns is not None]
            records.append(
                {
                    "record": "run",
                    "seed": run.seed,
                    "run": run.run_index,
                    "outcome": run.outcome,
                    "steps": len(run.steps),
                    "naive_total_ms": round(sum(run_naive) / 1e6, 3),
                    "compressed_total_ms": round(sum(run_comp) / 1e6, 3),
                    "_text": (
                        f"run seed={run.seed}/{run.run_index} {run.outcome} "
                        f"steps={len(run.steps)} naive={sum(run_naive)/1e6:.2f}ms "
                        f"compressed={sum(run_comp)/1e6:.2f}ms"
                    ),
                }
            )
    nstats = _quantiles(all_naive)
    cstats = _quantiles(all_comp)
    speedup = (
        round(statistics.fmean(all_naive) / statistics.fmean(all_comp), 2)
        if all_comp and all_naive
        else None
    )
    summary = {
        "record": "summary",
        "tokens": tbl.token_count,
        "classes": tbl.class_count,
        "naive": nstats,
        "compressed": cstats,
        "speedup": speedup,
        "stuck_runs_excluded": stuck,
        "_text": (
            f"|T|={tbl.token_count} |E|={tbl.class_count} "
            f"naive mean={nstats['mean_us']}us p50={nstats['p50_us']}us p99={nstats['p99_us']}us | "
            f"compressed mean={cstats['mean_us']}us p50={cstats['p50_us']}us "
            f"p99={cstats['p99_us']}us | speedup={speedup}x stuck_excluded={stuck}"
        ),
    }
    _emit(records + [summary], ns.format)
    return EXIT_OK


def cmd_inspect(ns) -> int:
    g, vocab, gdig, vdig = _load_inputs(ns)
    try:
        tbl, _ = _load_cache_for(ns, gdig, vdig)
    except CacheError as exc:
        print(f"inspect: cache failed to load: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED

    if ns.dump_adjacency:
        gnf = to_gnf(g)
        adj = build_stack_adjacency(gnf)
        _emit(
            [
                {"before": y, "after": z, "_text": f"{y} {z}"}
                for y, z in adj.sorted_pairs()
            ],
            ns.format,
        )
        return EXIT_OK

    if ns.token_id is not None:
        tid = ns.token_id
        if not 0 <= tid < tbl.token_count:
            print(f"inspect: token id {tid} out of range", file=sys.stderr)
            return EXIT_INPUT_ERROR
        k = int(tbl.c[tid])
        rep = int(tbl.r[k])
        _emit(
            [
                {
                    "token": tid,
                    "bytes": vocab.tokens[tid].hex(),
                    "class": k,
                    "representative": rep,
                    "_text": (
                        f'token {tid} "{_escape_bytes(vocab.tokens[tid])}" -> '
                        f'class {k} rep {rep} "{_escape_bytes(vocab.tokens[rep])}"'
                    ),
                }
            ],
            ns.format,
        )
        return EXIT_OK

    # Tag never-valid classes by recomputing the representative displacements.
    gnf = to_gnf(g)
    adj = None if ns.no_adjacency else build_stack_adjacency(gnf)
    members = tbl.class_members()
    records = []
    order = sorted(range(tbl.class_count), key=lambda k: (-len(members[k]), k))
    for k in order:
        rep_id = int(tbl.r[k])
        rep_bytes = vocab.tokens[rep_id]
        tags = []
        if k in tbl.passthrough:
            tags.append("pass-through")
        else:
            disp = compute_displacement(rep_bytes, gnf, adj, budget=ns.budget)
            if not disp.pairs:
                tags.append("never valid")
        sample = [f'"{_escape_bytes(vocab.tokens[m])}"' for m in members[k][:5]]
        records.append(
            {
                "class": k,
                "representative": rep_id,
                "bytes": rep_bytes.hex(),
                "size": len(members[k]),
                "tags": tags,
                "_text": (
                    f'class {k}: rep "{_escape_bytes(rep_bytes)}" size={len(members[k])} '
                    f"members=[{', '.join(sample)}]"
                    + (f" [{', '.join(tags)}]" if tags else "")
                ),
            }
        )
    non_special = tbl.token_count - sum(len(members[k]) for k in tbl.passthrough)
    records.append(
        {
            "classes": tbl.class_count,
            "tokens": tbl.token_count,
            "non_special_tokens": non_special,
            "_text": f"{tbl.class_count} classes over {tbl.token_count} tokens "
            f"({non_special} grammar-classed)",
        }
    )
    _emit(records, ns.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="cfgzip", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, cache_required=False):
        p.add_argument("--grammar", required=True, help="grammar file")
        p.add_argument("--vocab", required=True, help="vocabulary file (hex lines)")
        p.add_argument("--cache", help="cache file (default: CFGZIP_CACHE_DIR)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--steps", type=int, default=50, help="max tokens per run")
        p.add_argument("--runs", type=int, default=4, help="runs per seed")
        p.add_argument("--seeds", type=int, default=1, help="number of seeds")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--budget", type=int, default=10_000_000, help="search node cap per token")
        p.add_argument("--format", choices=["text", "json-lines"], default="text")
        p.add_argument(
            "--no-adjacency",
            action="store_true",
            help="disable backtrack pruning (A/B testing)",
        )

    p = sub.add_parser("compile", help="precompute and cache the class table")
    common(p)
    p.add_argument("--dump-gnf", help="also write the GNF grammar to this path")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="check losslessness and class structure")
    common(p)
    p.add_argument("--congruence-pairs", type=int, default=50)
    p.add_argument("--congruence-bound", type=int, default=4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="measure naive vs compressed mask latency")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="list classes or query a token")
    common(p)
    p.add_argument("--token-id", type=int, help="query one token id")
    p.add_argument(
        "--dump-adjacency",
        action="store_true",
        help="print the stack-adjacency pairs instead of the class listing",
    )
    p.set_defaults(func=cmd_inspect)
    return top


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.threads < 1:
        print("cfgzip: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        return ns.func(ns)
    except (GrammarError, StaleCacheError) as exc:
        print(f"cfgzip: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (OSError, ValueError) as exc:
        print(f"cfgzip: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
