"""Displacement search: goldens, pruning losslessness, budgets."""

import pytest

from cfgzip import (
    Displacement,
    SearchBudgetExceeded,
    build_stack_adjacency,
    compute_all_displacements,
    compute_displacement,
    compute_displacement_annotated,
    parse_grammar,
    to_gnf,
    trace_displacement,
    validate,
)
from cfgzip.displacement import EPSILON_DISPLACEMENT

from conftest import figure_grammar, hosted_figure_grammar, suite_grammar, suite_vocabulary


def single_rule_gnf():
    return to_gnf(validate(parse_grammar('root ::= "a"')))


def test_single_production_single_step():
    gnf = single_rule_gnf()
    d = compute_displacement(b"a", gnf, None)
    assert d.pairs == frozenset({(("root",), ())})


def test_walkthrough_token_displacement_exact():
    # The raw search finds exactly one pair for "abcxyz"; nothing else.
    toy = figure_grammar()
    d = compute_displacement(b"abcxyz", toy, None)
    assert d.pairs == frozenset({(("A", "X"), ("J", "K"))})


def test_walkthrough_six_step_trace():
    toy = figure_grammar()
    paths = trace_displacement(b"abcxyz", toy)
    assert len(paths) == 1
    inq, out, steps = paths[0]
    assert (inq, out) == (("A", "X"), ("J", "K"))
    snapshots = [(s.input_queue, s.output_stack) for s in steps]
    assert snapshots == [
        (("A",), ("B", "C")),
        (("A",), ("C",)),
        (("A",), ()),
        (("A", "X"), ("Y",)),
        (("A", "X"), ("Z", "J", "K")),
        (("A", "X"), ("J", "K")),
    ]
    assert [s.backtrack for s in steps] == [True, False, False, True, False, False]
    assert [(s.head, s.tail) for s in steps] == [
        ("A", ("B", "C")),
        ("B", ()),
        ("C", ()),
        ("X", ("Y",)),
        ("Y", ("Z", "J", "K")),
        ("Z", ()),
    ]


def test_walkthrough_pruned_on_hosted_grammar():
    # With the host production the adjacency-pruned search reproduces the
    # same single pair; on the bare fragment the backtrack at 'x' has no
    # admissible predecessor and the pruned set is empty.
    hosted = hosted_figure_grammar()
    adj = build_stack_adjacency(hosted)
    assert compute_displacement(b"abcxyz", hosted, adj).pairs == frozenset(
        {(("A", "X"), ("J", "K"))}
    )
    bare = figure_grammar()
    bare_adj = build_stack_adjacency(bare)
    assert compute_displacement(b"abcxyz", bare, bare_adj).pairs == frozenset()


def test_first_step_backtrack_is_unpruned():
    gnf = single_rule_gnf()
    adj = build_stack_adjacency(gnf)  # empty relation
    assert adj.pairs == frozenset()
    d = compute_displacement(b"a", gnf, adj)
    assert d.pairs == frozenset({(("root",), ())})


def test_empty_token_gets_identity_displacement():
    gnf = to_gnf(suite_grammar("dyck1"))
    d = compute_displacement(b"", gnf, None)
    assert d == EPSILON_DISPLACEMENT
    assert d.pairs == frozenset({((), ())})


def test_byte_outside_alphabet_is_dead_without_search():
    gnf = single_rule_gnf()
    assert compute_displacement(b"b", gnf, None).pairs == frozenset()
    assert compute_displacement(b"ab", gnf, None).pairs == frozenset()


def test_dyck_goldens_from_raw_search():
    # Frozen from the unpruned oracle: "(()" folds into "("'s class while
    # "()(" stays apart (it admits two-symbol input stacks).
    g = suite_grammar("dyck1")
    gnf = to_gnf(g)
    adj = build_stack_adjacency(gnf)
    d_open = compute_displacement(b"(", gnf, adj)
    assert len(d_open.pairs) == 8
    assert d_open.max_input_len() == 1
    assert compute_displacement(b"(()", gnf, adj) == d_open
    d_reopen = compute_displacement(b"()(", gnf, adj)
    assert d_reopen != d_open
    assert d_reopen.max_input_len() == 2


@pytest.mark.parametrize("name", ["dyck1", "dyck2", "arith", "json_mini"])
def test_pruned_equals_filtered_raw(name):
    # In-search pruning must agree with replaying the adjacency checks over
    # the raw search, token by token.
    g = suite_grammar(name)
    gnf = to_gnf(g)
    adj = build_stack_adjacency(gnf)
    vocab = suite_vocabulary(name, long_tokens=20)
    for token in dict.fromkeys(vocab.tokens):
        raw, filtered = compute_displacement_annotated(token, gnf, adj)
        pruned = compute_displacement(token, gnf, adj)
        assert pruned.pairs == filtered.pairs, token
        assert pruned.pairs <= raw.pairs, token


def test_input_stack_never_longer_than_token():
    gnf = to_gnf(suite_grammar("dyck2"))
    adj = build_stack_adjacency(gnf)
    vocab = suite_vocabulary("dyck2", long_tokens=25)
    for token in dict.fromkeys(vocab.tokens):
        d = compute_displacement(token, gnf, adj)
        assert d.max_input_len() <= len(token)


def test_budget_exceeded_raises():
    gnf = to_gnf(suite_grammar("mini_c"))
    with pytest.raises(SearchBudgetExceeded):
        compute_displacement(b"x=01;x=1;", gnf, None, budget=200)


def test_displacement_hash_is_order_independent():
    a = Displacement(frozenset({(("A",), ("B",)), (("C",), ())}))
    b = Displacement(frozenset({(("C",), ()), (("A",), ("B",))}))
    assert a == b and hash(a) == hash(b)
    assert a.sorted_pairs() == b.sorted_pairs()


def test_sweep_trivial_vocab():
    gnf = single_rule_gnf()
    sweep = compute_all_displacements([b"a", b"b"], gnf, None)
    assert sweep.displacements[0].pairs == frozenset({(("root",), ())})
    assert sweep.displacements[1].pairs == frozenset()
    assert sweep.budget_exceeded == []


def test_sweep_duplicates_share_value():
    gnf = to_gnf(suite_grammar("dyck1"))
    adj = build_stack_adjacency(gnf)
    sweep = compute_all_displacements([b"()", b"(", b"()"], gnf, adj)
    assert sweep.displacements[0] == sweep.displacements[2]
    assert sweep.displacements[0] is sweep.displacements[2]  # computed once


def test_sweep_aggregates_budget_failures():
    gnf = to_gnf(suite_grammar("mini_c"))
    sweep = compute_all_displacements([b"x", b"x=01;x=1;", b"y"], gnf, None, budget=200)
    assert 1 in sweep.budget_exceeded
    assert sweep.displacements[1] is None
    assert sweep.displacements[0] is not None  # the sweep never aborts


def test_sweep_threaded_matches_serial():
    gnf = to_gnf(suite_grammar("arith"))
    adj = build_stack_adjacency(gnf)
    vocab = suite_vocabulary("arith")
    serial = compute_all_displacements(vocab.tokens, gnf, adj, threads=1)
    threaded = compute_all_displacements(vocab.tokens, gnf, adj, threads=4)
    assert serial.displacements == threaded.displacements


def test_memoized_matches_naive_recursion():
    # The memoized search must return exactly the set the plain recursion
    # finds (trace_displacement shares no memo).
    gnf = to_gnf(suite_grammar("dyck2"))
    vocab = suite_vocabulary("dyck2", long_tokens=5)
    for token in list(dict.fromkeys(vocab.tokens))[:40]:
        if not token or token == b"\x00":
            continue
        naive_pairs = frozenset((inq, out) for inq, out, _ in trace_displacement(token, gnf))
        assert compute_displacement(token, gnf, None).pairs == naive_pairs, token
