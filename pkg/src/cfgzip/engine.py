"""Reference constrained-decoding engine over the original grammar.

An incremental byte-level Earley recognizer: a state holds one frontier
of dotted items per consumed byte and is never mutated, so trial
advances are cheap to roll back (just drop the returned state).  The
recognizer runs on the original grammar, not the GNF one; the GNF side
of the pipeline exists purely to compute equivalence classes.

The naive mask checks every vocabulary token with a trial advance; the
compressed mask does the same work per class representative only, which
is the entire speedup.  End-of-sequence is modelled as a special token
whose bit equals state completeness; other specials are always blocked.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .classtable import ClassTable, Vocabulary, map_token
from .grammar import Cfg, nullable_set, validate


class MaskedTokenError(ValueError):
    """A token was committed that the current mask does not allow."""


class _Frontier:
    """One Earley item set, pre-indexed for scanning and completion."""

    __slots__ = ("items", "scan_map", "wait_map", "complete")

    def __init__(self, items, scan_map, wait_map, complete):
        self.items = items
        self.scan_map = scan_map
        self.wait_map = wait_map
        self.complete = complete


class _EngineGrammar:
    """Compiled production tables shared by every state of one grammar."""

    def __init__(self, g: Cfg):
        g = validate(g)
        self.grammar = g
        self.start = g.start
        self.heads = tuple(h for h, _ in g.productions)
        self.bodies = tuple(b for _, b in g.productions)
        by_head: dict[str, list[int]] = {}
        for pid, head in enumerate(self.heads):
            by_head.setdefault(head, []).append(pid)
        self.by_head = {k: tuple(v) for k, v in by_head.items()}
        self.nullable = nullable_set(g)

    def close(self, chart, seeds, pos: int) -> _Frontier:
        # Predictor/completer closure; scanning happens between frontiers.
        # Completions that span zero bytes are skipped: the predictor
        # advances over nullable symbols directly, which covers them.
        items: set[tuple[int, int, int]] = set()
        work = list(seeds)
        scan: dict[int, list] = {}
        wait: dict[str, list] = {}
        complete = False
        heads, bodies, by_head, nullable = self.heads, self.bodies, self.by_head, self.nullable
        while work:
            item = work.pop()
            if item in items:
                continue
            items.add(item)
            pid, dot, org = item
            body = bodies[pid]
            if dot == len(body):
                if org == 0 and heads[pid] == self.start:
                    complete = True
                if org != pos:
                    for ppid, pdot, porg in chart[org].wait_map.get(heads[pid], ()):
                        work.append((ppid, pdot + 1, porg))
            else:
                sym = body[dot]
                if isinstance(sym, int):
                    scan.setdefault(sym, []).append((pid, dot + 1, org))
                else:
                    wait.setdefault(sym, []).append(item)
                    for q in by_head.get(sym, ()):
                        work.append((q, 0, pos))
                    if sym in nullable:
                        work.append((pid, dot + 1, org))
        return _Frontier(
            frozenset(items),
            {b: tuple(v) for b, v in scan.items()},
            {nt: tuple(v) for nt, v in wait.items()},
            complete,
        )


_engines: dict[Cfg, _EngineGrammar] = {}


def _engine_for(g: Cfg) -> _EngineGrammar:
    got = _engines.get(g)
    if got is None:
        got = _engines[g] = _EngineGrammar(g)
    return got


@dataclass
class EngineState:
    """A viable recognizer state: the consumed bytes form a valid prefix.

    Treated as immutable; advancing returns a fresh state sharing all
    earlier frontiers.
    """

    eg: _EngineGrammar
    chart: tuple
    consumed: int
    complete: bool

    def digest(self) -> str:
        h = hashlib.sha1()
        h.update(str(self.consumed).encode())
        for item in sorted(self.chart[-1].items):
            h.update(repr(item).encode())
        return h.hexdigest()[:16]


def new_state(g: Cfg) -> EngineState:
    """Initial state for the empty prefix; errors on an empty language."""
    eg = _engine_for(g)  # validate() inside raises EmptyLanguageError
    seeds = [(pid, 0, 0) for pid in eg.by_head[eg.start]]
    frontier = eg.close((), seeds, 0)
    return EngineState(eg, (frontier,), 0, frontier.complete)


def try_advance(s: EngineState, data: bytes) -> EngineState | None:
    """Extend the state by ``data`` if that keeps the prefix viable.

    Returns the new state, or None on reject; ``s`` itself is unchanged
    either way.  The empty byte string always succeeds and is a no-op.
    """
    if not data:
        return s
    chart = list(s.chart)
    for b in data:
        seeds = chart[-1].scan_map.get(b)
        if not seeds:
            return None
        chart.append(s.eg.close(chart, seeds, len(chart)))
    return EngineState(s.eg, tuple(chart), s.consumed + len(data), chart[-1].complete)


@dataclass
class Mask:
    """A validity bitset, tagged with the vocabulary it ranges over."""

    bits: np.ndarray
    space: str  # "tokens" (full vocabulary) or "classes"

    def count(self) -> int:
        return int(self.bits.sum())


def compute_mask_naive(s: EngineState, vocab: Vocabulary) -> Mask:
    """The honest baseline: one trial advance per vocabulary token."""
    bits = np.zeros(len(vocab), dtype=bool)
    specials = vocab.specials
    for tid, token in enumerate(vocab.tokens):
        if tid in specials:
            bits[tid] = s.complete and tid == vocab.eos_id
        else:
            bits[tid] = try_advance(s, token) is not None
    return Mask(bits, "tokens")


def compute_mask_compressed(s: EngineState, tbl: ClassTable, vocab: Vocabulary) -> Mask:
    """One trial advance per class representative: cost scales with the
    class count, not the vocabulary size."""
    bits = np.zeros(tbl.class_count, dtype=bool)
    eos_class = int(tbl.c[vocab.eos_id]) if vocab.eos_id is not None else -1
    reps = tbl.r
    tokens = vocab.tokens
    passthrough = tbl.passthrough
    for k in range(tbl.class_count):
        if k in passthrough:
            bits[k] = s.complete and k == eos_class
        else:
            bits[k] = try_advance(s, tokens[int(reps[k])]) is not None
    return Mask(bits, "classes")


def commit_token(
    s: EngineState, token_id: int, tbl: ClassTable | None, vocab: Vocabulary
) -> EngineState:
    """Advance the engine after sampling ``token_id``.

    With a class table the engine sees the class representative's bytes,
    not the sampled token's; the caller owns the output text stream.
    Committing a token the grammar rejects is a contract violation.
    """
    if token_id in vocab.specials:
        raise MaskedTokenError(f"special token {token_id} is never committed to the engine")
    advance_id = map_token(token_id, tbl) if tbl is not None else token_id
    nxt = try_advance(s, vocab.tokens[advance_id])
    if nxt is None:
        raise MaskedTokenError(
            f"token {token_id} (advanced as {advance_id}) is not viable in this state"
        )
    return nxt
