"""Conversion of a Cfg to Greibach Normal Form and the PDA it induces.

Every emitted production has the shape ``head -> byte tail`` where the
tail is a (possibly empty) sequence of nonterminals that never contains
the start symbol.  The empty string, if in the language, is carried by a
flag on the grammar rather than by a production.

The conversion pipeline is the classical one: epsilon elimination, unit
elimination, Paull's left-recursion elimination over the interned
nonterminal order, back-substitution until every body leads with a
terminal, then promotion of interior terminals to fresh byte rules.
Fresh helper names are derived from the source nonterminal (``A'``,
``A''``, ...) so dumps stay readable; byte rules are named ``b_XX`` by
hex value.  Nothing here tries to minimise the result: correctness is
what matters, size only affects offline time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .grammar import Cfg, GrammarError, nullable_set, validate

DEFAULT_PRODUCTION_CAP = 1_000_000


class GnfSizeError(GrammarError):
    """The intermediate grammar blew past the production cap."""


@dataclass(frozen=True)
class GnfGrammar:
    """A grammar in Greibach Normal Form plus its PDA transition function.

    ``productions`` hold ``(head, terminal_byte, tail)`` triples;
    ``start_derives_epsilon`` stands in for the lone permitted epsilon
    production.  ``delta_map`` is derived once at construction and maps
    ``(byte, nonterminal)`` to the tuple of tails pushed when that
    nonterminal is popped on that byte.
    """

    nonterminals: tuple[str, ...]
    alphabet: frozenset[int]
    productions: tuple[tuple[str, int, tuple[str, ...]], ...]
    start: str
    start_derives_epsilon: bool = False
    delta_map: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.start not in self.nonterminals:
            raise GrammarError(f"start symbol {self.start!r} is not a nonterminal")
        for head, term, tail in self.productions:
            if not 0 <= term <= 255:
                raise GrammarError(f"production {head!r} does not lead with a byte")
            if self.start in tail:
                raise GrammarError(f"start symbol appears in the tail of a {head!r} production")
            for nt in tail:
                if nt not in self.nonterminals:
                    raise GrammarError(f"unknown tail symbol {nt!r}")
        if not self.delta_map:
            self.delta_map.update(transition_function(self))

    def delta(self, byte: int, nt: str) -> tuple[tuple[str, ...], ...]:
        """Tails pushed when ``nt`` is popped on ``byte`` (empty if none)."""
        return self.delta_map.get((byte, nt), ())

    def max_tail_len(self) -> int:
        return max((len(tail) for _, _, tail in self.productions), default=0)


def transition_function(g: GnfGrammar) -> dict[tuple[int, str], tuple[tuple[str, ...], ...]]:
    """The PDA transition function: (byte, nonterminal) -> tails.

    Total over the domain with the empty tuple as default; tails keep the
    production order of the grammar, deduplicated.
    """
    out: dict[tuple[int, str], list[tuple[str, ...]]] = {}
    for head, term, tail in g.productions:
        slot = out.setdefault((term, head), [])
        if tail not in slot:
            slot.append(tail)
    return {k: tuple(v) for k, v in out.items()}


def _fresh(base: str, taken: set[str]) -> str:
    name = base + "'"
    while name in taken:
        name += "'"
    taken.add(name)
    return name


def _check_cap(count: int, cap: int, stage: str):
    if count > cap:
        raise GnfSizeError(
            f"grammar exploded during {stage}: {count} productions exceeds the cap of {cap}"
        )


def to_gnf(g: Cfg, max_productions: int = DEFAULT_PRODUCTION_CAP) -> GnfGrammar:
    """Convert a validated Cfg to an equivalent GNF grammar.

    Raises GnfSizeError if any intermediate stage exceeds ``max_productions``.
    """
    g = validate(g)
    nullable = nullable_set(g)
    eps_in_language = g.start in nullable
    taken = set(g.nonterminals)

    start = g.start
    prods: list[tuple[str, tuple[int | str, ...]]] = list(g.productions)
    start_in_tail = any(start in body for _, body in prods)
    if start_in_tail or eps_in_language:
        fresh_start = _fresh(start, taken)
        prods.insert(0, (fresh_start, (start,)))
        start = fresh_start

    # Epsilon elimination: expand every body over its nullable symbols and
    # drop empty variants (the start flag carries epsilon).
    expanded: list[tuple[str, tuple[int | str, ...]]] = []
    seen: set[tuple[str, tuple[int | str, ...]]] = set()
    for head, body in prods:
        null_positions = [i for i, s in enumerate(body) if isinstance(s, str) and s in nullable]
        if len(null_positions) > 20:
            raise GnfSizeError(
                f"body of {head!r} has {len(null_positions)} nullable symbols; "
                "epsilon elimination would explode"
            )
        for mask in range(1 << len(null_positions)):
            drop = {null_positions[k] for k in range(len(null_positions)) if mask >> k & 1}
            variant = tuple(s for i, s in enumerate(body) if i not in drop)
            if not variant:
                continue
            if (head, variant) not in seen:
                seen.add((head, variant))
                expanded.append((head, variant))
        _check_cap(len(expanded), max_productions, "epsilon elimination")
    prods = expanded

    # Unit elimination via unit-pair closure, in first-appearance order so
    # the output is deterministic.
    all_nts = [start] + [nt for nt in g.nonterminals if nt != start]
    unit_lists: dict[str, list[str]] = {nt: [nt] for nt in all_nts}
    unit_sets: dict[str, set[str]] = {nt: {nt} for nt in all_nts}
    changed = True
    while changed:
        changed = False
        for head, body in prods:
            if len(body) == 1 and isinstance(body[0], str):
                tgt = body[0]
                for a in all_nts:
                    if head in unit_sets[a] and tgt not in unit_sets[a]:
                        unit_sets[a].add(tgt)
                        unit_lists[a].append(tgt)
                        changed = True
    non_unit: list[tuple[str, tuple[int | str, ...]]] = []
    seen = set()
    for a in all_nts:
        for b in unit_lists[a]:
            for head, body in prods:
                if head != b:
                    continue
                if len(body) == 1 and isinstance(body[0], str):
                    continue
                if (a, body) not in seen:
                    seen.add((a, body))
                    non_unit.append((a, body))
    prods = non_unit
    _check_cap(len(prods), max_productions, "unit elimination")

    # Paull's ordering: make every body lead with a terminal or a
    # later-ordered nonterminal, eliminating direct left recursion as we go.
    by_head: dict[str, list[tuple[int | str, ...]]] = {nt: [] for nt in all_nts}
    for head, body in prods:
        by_head[head].append(body)
    ordered = all_nts
    helper_of: dict[str, str] = {}

    def total() -> int:
        return sum(len(v) for v in by_head.values())

    for i, ai in enumerate(ordered):
        for j in range(i):
            aj = ordered[j]
            out = []
            for body in by_head[ai]:
                if body and body[0] == aj:
                    for sub in by_head[aj]:
                        out.append(sub + body[1:])
                else:
                    out.append(body)
            by_head[ai] = out
            _check_cap(total(), max_productions, "left-recursion substitution")
        recursive = [b[1:] for b in by_head[ai] if b and b[0] == ai]
        rest = [b for b in by_head[ai] if not b or b[0] != ai]
        if recursive:
            if any(not alpha for alpha in recursive):
                raise GrammarError(f"cycle: {ai!r} derives itself")
            helper = _fresh(ai, taken)
            helper_of[ai] = helper
            by_head[ai] = rest + [b + (helper,) for b in rest]
            by_head[helper] = list(recursive) + [alpha + (helper,) for alpha in recursive]
            _check_cap(total(), max_productions, "left-recursion elimination")

    # Back-substitute so every body leads with a terminal: mains in reverse
    # order (the last one already does), then the recursion helpers.
    helpers = [helper_of[h] for h in ordered if h in helper_of]
    for h in list(reversed(ordered)) + helpers:
        out = []
        for body in by_head.get(h, ()):
            lead = body[0]
            if isinstance(lead, str):
                for sub in by_head[lead]:
                    out.append(sub + body[1:])
            else:
                out.append(body)
        by_head[h] = out
        _check_cap(total(), max_productions, "back substitution")

    # Promote interior terminals to byte rules.
    byte_rule: dict[int, str] = {}
    gnf_prods: list[tuple[str, int, tuple[str, ...]]] = []
    for head in ordered + helpers:
        for body in by_head.get(head, ()):
            lead = body[0]
            assert isinstance(lead, int), f"body of {head!r} does not lead with a byte: {body!r}"
            tail = []
            for sym in body[1:]:
                if isinstance(sym, int):
                    name = byte_rule.get(sym)
                    if name is None:
                        name = f"b_{sym:02x}"
                        while name in taken:
                            name += "'"
                        taken.add(name)
                        byte_rule[sym] = name
                    tail.append(name)
                else:
                    tail.append(sym)
            gnf_prods.append((head, lead, tuple(tail)))
    for byte, name in byte_rule.items():
        gnf_prods.append((name, byte, ()))
    _check_cap(len(gnf_prods), max_productions, "terminal promotion")

    # Source symbols that only derived epsilon leave dead tails behind;
    # drop productions that can never complete a parse.
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for head, _, tail in gnf_prods:
            if head not in productive and all(s in productive for s in tail):
                productive.add(head)
                changed = True
    gnf_prods = [
        p for p in gnf_prods if p[0] in productive and all(s in productive for s in p[2])
    ]

    # Drop symbols that ended up unreachable from the new start.
    by_h: dict[str, list[tuple[str, int, tuple[str, ...]]]] = {}
    for p in gnf_prods:
        by_h.setdefault(p[0], []).append(p)
    reach = {start}
    stack = [start]
    while stack:
        nt = stack.pop()
        for _, _, tail in by_h.get(nt, ()):
            for s in tail:
                if s not in reach:
                    reach.add(s)
                    stack.append(s)
    gnf_prods = [p for p in gnf_prods if p[0] in reach]

    nonterminals: list[str] = []
    for head, _, tail in gnf_prods:
        if head not in nonterminals:
            nonterminals.append(head)
        for s in tail:
            if s not in nonterminals:
                nonterminals.append(s)
    if start not in nonterminals:
        # Language is exactly {epsilon}: keep the bare start symbol.
        nonterminals.insert(0, start)
    alphabet = frozenset(term for _, term, _ in gnf_prods)

    return GnfGrammar(
        nonterminals=tuple(nonterminals),
        alphabet=alphabet,
        productions=tuple(gnf_prods),
        start=start,
        start_derives_epsilon=eps_in_language,
    )


def render_gnf(g: GnfGrammar) -> str:
    """Dump a GNF grammar in the grammar file format (tails as rule refs)."""
    from .grammar import _escape_bytes  # shared byte escaping

    by_head: dict[str, list[tuple[int, tuple[str, ...]]]] = {}
    order = []
    for head, term, tail in g.productions:
        if head not in by_head:
            by_head[head] = []
            order.append(head)
        by_head[head].append((term, tail))
    if order and order[0] != g.start and g.start in by_head:
        order.remove(g.start)
        order.insert(0, g.start)
    lines = []
    for head in order:
        rendered = [
            " ".join([f'"{_escape_bytes(bytes([term]))}"'] + list(tail))
            for term, tail in by_head[head]
        ]
        if head == g.start and g.start_derives_epsilon:
            rendered.append('""')
        lines.append(f"{head} ::= {' | '.join(rendered)}")
    if g.start not in by_head:
        lines.insert(0, f'{g.start} ::= ""')
    return "\n".join(lines) + "\n"


def gnf_to_cfg(g: GnfGrammar) -> Cfg:
    """View a GNF grammar as a plain Cfg (the epsilon flag becomes a real
    epsilon production on the start symbol)."""
    prods: list[tuple[str, tuple[int | str, ...]]] = [
        (head, (term,) + tail) for head, term, tail in g.productions
    ]
    if g.start_derives_epsilon:
        prods.insert(0, (g.start, ()))
    return Cfg(
        nonterminals=g.nonterminals,
        alphabet=g.alphabet,
        productions=tuple(prods),
        start=g.start,
    )


def pda_accepts(g: GnfGrammar, w: bytes) -> bool:
    """Nondeterministic PDA run from stack (S): accept iff the stack is
    empty exactly when the input ends."""
    if not w:
        return g.start_derives_epsilon
    states = {(g.start,)}
    for i, byte in enumerate(w):
        remaining = len(w) - i - 1
        nxt: set[tuple[str, ...]] = set()
        for stack in states:
            if not stack:
                continue
            top, rest = stack[0], stack[1:]
            for tail in g.delta(byte, top):
                stack2 = tail + rest
                # Each later byte shrinks the stack by at most one, so a
                # stack taller than the remaining input can never drain.
                if len(stack2) <= remaining:
                    nxt.add(stack2)
        states = nxt
        if not states:
            return False
    return () in states


def pda_prefix_viable(g: GnfGrammar, w: bytes) -> bool:
    """True iff some PDA path consumes all of ``w`` from stack (S).

    For a GNF grammar with every nonterminal productive this is exactly
    prefix-language membership.
    """
    if not w:
        return True
    states = {(g.start,)}
    for byte in w:
        nxt: set[tuple[str, ...]] = set()
        for stack in states:
            if not stack:
                continue
            top, rest = stack[0], stack[1:]
            for tail in g.delta(byte, top):
                nxt.add(tail + rest)
        states = nxt
        if not states:
            return False
    return True
