from __future__ import annotations

import pytest

from rgse.errors import CoverageError
from rgse.subword import BpeCoder, SubwordMap, apply_subwords, learn_bpe, strip_markers
from tests.test_graph import monkey_graph


def test_zero_merges_splits_to_characters():
    coder = learn_bpe(["ab cd"], merges=0)
    assert coder.segment_word("ab") == ["a@@", "b"]
    assert coder.segment_word("cab") == ["c@@", "a@@", "b"]


def test_first_merge_is_most_frequent_pair():
    # "abab": pairs (a,b) twice, (b,a) once -> first merge is (a, b)
    coder = learn_bpe(["abab"], merges=1)
    assert coder.merges[0] == ("a", "b")
    assert coder.segment_word("abab") == ["ab@@", "a@@", "b"]


def test_fully_merged_word_is_single_piece():
    coder = learn_bpe(["ab ab ab"], merges=4)
    assert coder.segment_word("ab") == ["ab"]


def test_learn_bpe_argument_errors():
    with pytest.raises(ValueError):
        learn_bpe([], 4)
    with pytest.raises(ValueError):
        learn_bpe(["a"], -1)


def test_pieces_reassemble_to_word():
    coder = learn_bpe(["bananas monkey likes eating"], merges=3)
    for word in ["bananas", "monkey", "unseen"]:
        assert strip_markers(coder.segment_word(word)) == word


def test_merge_table_roundtrip(tmp_path):
    coder = learn_bpe(["low lower lowest"], merges=5)
    path = tmp_path / "merges.txt"
    coder.save(path)
    again = BpeCoder.load(path)
    assert again.merges == coder.merges
    assert again.segment_word("lowest") == coder.segment_word("lowest")


def test_apply_subwords_identity_when_no_splitting():
    g = monkey_graph()
    ident = SubwordMap(g.tokens, tuple(range(len(g))))
    out = apply_subwords(g, ident)
    assert out.tokens == g.tokens
    assert out.edges == g.edges


def test_apply_subwords_replicates_edge_to_both_pieces():
    g = monkey_graph()
    pieces = ("monkey", "likes", "eating", "bana@@", "nas")
    out = apply_subwords(g, SubwordMap(pieces, (0, 1, 2, 3, 3)))
    # bananas->eating becomes one edge per piece, both pointing at "eating"
    assert {(i, j) for i, j in out.edges if j == 2 and i >= 3} == {(3, 2), (4, 2)}
    assert (0, 1) in out.edges and (2, 1) in out.edges


def test_apply_subwords_replication_count_is_product_of_piece_counts():
    g = monkey_graph()
    pieces = ("monkey", "likes", "ea@@", "ting", "ba@@", "nanas")
    out = apply_subwords(g, SubwordMap(pieces, (0, 1, 2, 2, 3, 3)))
    replicated = {(i, j) for i, j in out.edges if i >= 4}
    assert replicated == {(4, 2), (4, 3), (5, 2), (5, 3)}
    assert len(replicated) == 2 * 2


def test_apply_subwords_propagates_labels():
    g = monkey_graph()
    g.labels[(3, 2)] = "obj"
    pieces = ("monkey", "likes", "eating", "bana@@", "nas")
    out = apply_subwords(g, SubwordMap(pieces, (0, 1, 2, 3, 3)))
    assert out.labels[(3, 2)] == "obj"
    assert out.labels[(4, 2)] == "obj"


def test_apply_subwords_coverage_error():
    g = monkey_graph()
    with pytest.raises(CoverageError):
        apply_subwords(g, SubwordMap(("monkey",), (0,)))


def test_apply_subwords_preserves_reachability():
    g = monkey_graph()
    coder = learn_bpe(["xx"], merges=0)  # trained elsewhere: everything splits to chars
    sw = coder.map_sentence(g.tokens)
    out = apply_subwords(g, sw)

    def reaches(edges, start, goal):
        seen, frontier = set(), {start}
        while frontier:
            node = frontier.pop()
            seen.add(node)
            frontier |= {j for i, j in edges if i == node} - seen
        return goal in seen

    for i, j in [(0, 1), (3, 2), (3, 1)]:
        if reaches(g.edges, i, j):
            assert any(reaches(out.edges, pi, pj)
                       for pi in sw.pieces_of(i) for pj in sw.pieces_of(j))
