"""Per-token stack displacement computation.

A token's displacement is the set of (input stack, output stack) pairs
the PDA can realise while consuming exactly that token: the input stack
is the sequence of symbols that had to be hypothesised at the bottom of
the stack (via backtracks), the output stack is whatever is left when the
last byte is consumed.  Tokens with equal displacement sets are
interchangeable under the grammar, which is what the class table exploits.

The search mirrors the nondeterministic PDA byte by byte.  When the
working stack empties mid-token it "backtracks": it picks a production
producing the current byte, enqueues its head as an extra input symbol,
and continues with its tail.  Backtracks are pruned through the
stack-adjacency relation keyed on the most recent pop (or the previously
enqueued symbol when backtracks chain); the very first step has no
predecessor and is never pruned.  Search states are memoized on
(position, output stack, previous symbol); the input queue is
reconstructed from the returned path suffixes, so memoization cannot
change the result set.
"""

from __future__ import annotations

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

from .adjacency import StackAdjacency
from .gnf import GnfGrammar

DEFAULT_NODE_BUDGET = 10_000_000

EMPTY_PAIRS: frozenset = frozenset()


class SearchBudgetExceeded(RuntimeError):
    """The displacement search for one token exceeded its node budget."""

    def __init__(self, token: bytes, budget: int):
        self.token = token
        self.budget = budget
        super().__init__(f"displacement search for token {token!r} exceeded {budget} nodes")


@dataclass(frozen=True)
class Displacement:
    """Set of (input stack, output stack) pairs for one token.

    Equality and hashing go through the frozenset, so class identity is
    independent of discovery order; ``sorted_pairs`` gives the canonical
    ordering used for dumps and serialisation.
    """

    pairs: frozenset

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def sorted_pairs(self) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
        return sorted(self.pairs)

    def max_input_len(self) -> int:
        return max((len(a) for a, _ in self.pairs), default=0)


EPSILON_DISPLACEMENT = Displacement(frozenset({((), ())}))


def _productions_by_byte(g: GnfGrammar) -> dict[int, tuple[tuple[str, tuple[str, ...]], ...]]:
    out: dict[int, list[tuple[str, tuple[str, ...]]]] = {}
    for head, term, tail in g.productions:
        out.setdefault(term, []).append((head, tail))
    return {k: tuple(v) for k, v in out.items()}


def compute_displacement(
    token: bytes,
    g: GnfGrammar,
    adj: StackAdjacency | None,
    budget: int = DEFAULT_NODE_BUDGET,
) -> Displacement:
    """Run the displacement search for one token.

    Passing ``adj=None`` disables backtrack pruning (the raw search),
    which explores every hypothetical input stack.  Raises
    SearchBudgetExceeded when the node budget runs out.
    """
    if not token:
        # The empty token moves no stack: a dedicated always-congruent value.
        return EPSILON_DISPLACEMENT
    if any(b not in g.alphabet for b in token):
        return Displacement(EMPTY_PAIRS)

    by_byte = _productions_by_byte(g)
    n = len(token)
    nodes = 0
    memo: dict[tuple, frozenset] = {}

    def search(pos: int, out: tuple[str, ...], prev: str | None) -> frozenset:
        # Returns pairs (input symbols appended from here on, final stack).
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise SearchBudgetExceeded(token, budget)
        key = (pos, out, prev)
        got = memo.get(key)
        if got is not None:
            return got
        if pos == n:
            res = frozenset({((), out)})
        elif not out:
            acc = set()
            for head, tail in by_byte.get(token[pos], ()):
                if adj is not None and prev is not None and (prev, head) not in adj:
                    continue
                for appended, final in search(pos + 1, tail, head):
                    acc.add(((head,) + appended, final))
            res = frozenset(acc)
        else:
            acc = set()
            top = out[0]
            rest = out[1:]
            for tail in g.delta(token[pos], top):
                acc |= search(pos + 1, tail + rest, top)
            res = frozenset(acc)
        memo[key] = res
        return res

    return Displacement(search(0, (), None))


def compute_displacement_annotated(
    token: bytes,
    g: GnfGrammar,
    adj: StackAdjacency,
    budget: int = DEFAULT_NODE_BUDGET,
) -> tuple[Displacement, Displacement]:
    """Unpruned search that also replays the adjacency checks after the fact.

    Returns ``(raw, filtered)``: the full unpruned displacement and the
    subset of pairs reachable through a path whose every backtrack passes
    the adjacency check.  ``filtered`` must equal the pruned search's
    result; the comparison is a regression check on the in-search pruning.
    """
    if not token:
        return EPSILON_DISPLACEMENT, EPSILON_DISPLACEMENT
    if any(b not in g.alphabet for b in token):
        empty = Displacement(EMPTY_PAIRS)
        return empty, empty

    by_byte = _productions_by_byte(g)
    n = len(token)
    nodes = 0
    memo: dict[tuple, frozenset] = {}

    def search(pos: int, out: tuple[str, ...], prev: str | None) -> frozenset:
        # Elements are (appended input symbols, final stack, all checks passed).
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise SearchBudgetExceeded(token, budget)
        key = (pos, out, prev)
        got = memo.get(key)
        if got is not None:
            return got
        if pos == n:
            res = frozenset({((), out, True)})
        elif not out:
            acc = set()
            for head, tail in by_byte.get(token[pos], ()):
                ok_here = prev is None or (prev, head) in adj
                for appended, final, ok in search(pos + 1, tail, head):
                    acc.add(((head,) + appended, final, ok and ok_here))
            res = frozenset(acc)
        else:
            acc = set()
            top = out[0]
            rest = out[1:]
            for tail in g.delta(token[pos], top):
                acc |= search(pos + 1, tail + rest, top)
            res = frozenset(acc)
        memo[key] = res
        return res

    triples = search(0, (), None)
    raw = Displacement(frozenset((a, f) for a, f, _ in triples))
    filtered = Displacement(frozenset((a, f) for a, f, ok in triples if ok))
    return raw, filtered


@dataclass(frozen=True)
class TraceStep:
    """One byte of an accepting search path (for inspection and goldens)."""

    byte: int
    head: str
    tail: tuple[str, ...]
    backtrack: bool
    input_queue: tuple[str, ...]
    output_stack: tuple[str, ...]


def trace_displacement(
    token: bytes, g: GnfGrammar, budget: int = 100_000
) -> list[tuple[tuple[str, ...], tuple[str, ...], tuple[TraceStep, ...]]]:
    """Enumerate accepting unpruned search paths with per-step stack snapshots.

    Returns (input stack, output stack, steps) triples sorted for
    determinism.  Exponential in the worst case: intended for small
    inspection grammars only.
    """
    if not token:
        return [((), (), ())]
    by_byte = _productions_by_byte(g)
    n = len(token)
    results = []
    nodes = 0

    def walk(pos, inq, out, steps):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise SearchBudgetExceeded(token, budget)
        if pos == n:
            results.append((inq, out, tuple(steps)))
            return
        byte = token[pos]
        if not out:
            for head, tail in by_byte.get(byte, ()):
                step = TraceStep(byte, head, tail, True, inq + (head,), tail)
                walk(pos + 1, inq + (head,), tail, steps + [step])
        else:
            top, rest = out[0], out[1:]
            for tail in g.delta(byte, top):
                new_out = tail + rest
                step = TraceStep(byte, top, tail, False, inq, new_out)
                walk(pos + 1, inq, new_out, steps + [step])

    walk(0, (), (), [])
    return sorted(results, key=lambda t: (t[0], t[1]))


@dataclass
class SweepResult:
    """Displacements for a whole vocabulary plus budget bookkeeping."""

    displacements: list
    budget_exceeded: list
    node_budget: int

    def fallback_ids(self) -> frozenset[int]:
        return frozenset(self.budget_exceeded)


def compute_all_displacements(
    vocab_tokens,
    g: GnfGrammar,
    adj: StackAdjacency | None,
    budget: int = DEFAULT_NODE_BUDGET,
    threads: int = 1,
) -> SweepResult:
    """Displacement sweep over a vocabulary.

    Byte-identical tokens are computed once.  Tokens that blow the budget
    get ``None`` entries (the class table gives them safe singleton
    classes); the sweep itself never aborts.  Results are written into a
    pre-sized list so thread scheduling cannot affect the output.
    """
    tokens = list(vocab_tokens)
    distinct: dict[bytes, object] = {}
    order = []
    for t in tokens:
        if t not in distinct:
            distinct[t] = None
            order.append(t)

    def work(t: bytes):
        try:
            d = compute_displacement(t, g, adj, budget)
        except SearchBudgetExceeded:
            return None
        assert d.max_input_len() <= len(t), "input stack outgrew the token"
        return d

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for t, d in zip(order, pool.map(work, order)):
                distinct[t] = d
    else:
        for t in order:
            distinct[t] = work(t)

    displacements = [distinct[t] for t in tokens]
    exceeded = [i for i, d in enumerate(displacements) if d is None]
    return SweepResult(displacements=displacements, budget_exceeded=exceeded, node_budget=budget)
