from __future__ import annotations

import pytest

from rgse.errors import GraphParseError
from rgse.graph import (BACKWARD, FORWARD, FUTURE_ONLY, PAST_ONLY, TOTAL,
                        EdgeRef, incoming_edges, make_graph, parse_conllu,
                        to_conllu)

MONKEY_CONLLU = """\
# sent_id = monkey
1\tmonkey\t_\t_\t_\t_\t2\tnsubj\t_\t_
2\tlikes\t_\t_\t_\t_\t0\troot\t_\t_
3\teating\t_\t_\t_\t_\t2\txcomp\t_\t_
4\tbananas\t_\t_\t_\t_\t3\tobj\t_\t_
"""


def monkey_graph():
    """'monkey likes eating bananas' with monkey->likes, eating->likes, bananas->eating."""
    return make_graph(["monkey", "likes", "eating", "bananas"],
                      {(0, 1), (2, 1), (3, 2)})


def test_parse_conllu_monkey_sentence():
    graphs = parse_conllu(MONKEY_CONLLU)
    assert len(graphs) == 1
    g = graphs[0]
    assert g.tokens == ("monkey", "likes", "eating", "bananas")
    assert g.edges == {(0, 1), (2, 1), (3, 2)}
    assert g.labels[(0, 1)] == "nsubj"
    assert g.sentence_id == "monkey"


def test_parse_conllu_empty_input():
    assert parse_conllu("") == []
    assert parse_conllu("\n\n") == []


def test_parse_conllu_single_token_root():
    graphs = parse_conllu("1\thi\t_\t_\t_\t_\t0\troot\t_\t_\n")
    assert len(graphs) == 1
    assert graphs[0].edges == frozenset()


def test_parse_conllu_skips_ranges_and_empty_nodes():
    text = ("1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tde\t_\t_\t_\t_\t2\tcase\t_\t_\n"
            "2\tel\t_\t_\t_\t_\t0\troot\t_\t_\n"
            "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n")
    g = parse_conllu(text)[0]
    assert g.tokens == ("de", "el")
    assert g.edges == {(0, 1)}


def test_parse_conllu_column_count_error_carries_line_number():
    with pytest.raises(GraphParseError, match="line 2"):
        parse_conllu("1\ta\t_\t_\t_\t_\t0\troot\t_\t_\nbad line\n")


def test_parse_conllu_head_out_of_range():
    with pytest.raises(GraphParseError, match="head 9"):
        parse_conllu("1\ta\t_\t_\t_\t_\t9\tdep\t_\t_\n")


def test_roundtrip_token_order():
    for g in parse_conllu(MONKEY_CONLLU):
        again = parse_conllu(to_conllu(g))[0]
        assert again.tokens == g.tokens
        assert again.edges == g.edges


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError, match="out of range"):
        make_graph(["a", "b"], {(0, 5)})
    with pytest.raises(ValueError, match="self-pair"):
        make_graph(["a", "b"], {(1, 1)})


def test_incoming_edges_forward_total_on_likes():
    g = monkey_graph()
    refs = incoming_edges(g, 1, FORWARD, TOTAL)
    assert refs == [EdgeRef(0, 1, "past"), EdgeRef(1, 1, "self"), EdgeRef(2, 1, "future")]


def test_incoming_edges_backward_past_only_on_likes():
    # in reverse order, "eating" is past information for "likes"
    g = monkey_graph()
    refs = incoming_edges(g, 1, BACKWARD, PAST_ONLY)
    assert {(r.source, r.temporal) for r in refs} == {(1, "self"), (2, "past")}


def test_incoming_edges_isolated_token_self_only():
    g = make_graph(["a", "b", "c"], {(0, 1)})
    assert incoming_edges(g, 2) == [EdgeRef(2, 2, "self")]


def test_incoming_edges_reversed_head_links_included():
    # bananas -> eating means node "bananas" also hears from its head
    g = monkey_graph()
    refs = incoming_edges(g, 3, FORWARD, TOTAL)
    assert {r.source for r in refs} == {2, 3}


def test_incoming_edges_invalid_position():
    with pytest.raises(ValueError):
        incoming_edges(monkey_graph(), 7)


def test_edge_set_properties_across_traversals_and_filters():
    g = monkey_graph()
    for j in range(len(g)):
        fwd = incoming_edges(g, j, FORWARD, TOTAL)
        bwd = incoming_edges(g, j, BACKWARD, TOTAL)
        assert {(r.source, r.target) for r in fwd} == {(r.source, r.target) for r in bwd}
        past = incoming_edges(g, j, FORWARD, PAST_ONLY)
        future = incoming_edges(g, j, FORWARD, FUTURE_ONLY)
        union = {(r.source, r.target) for r in past} | {(r.source, r.target) for r in future}
        assert union == {(r.source, r.target) for r in fwd}
        for refs in (fwd, bwd, past, future):
            assert sum(r.temporal == "self" for r in refs) == 1
