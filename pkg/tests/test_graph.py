import pytest
from hypothesis import given, strategies as st

from midmod.graph import SelfLinkError, SocialGraph, read_edge_list, write_edge_list


def test_follower_index_after_add():
    g = SocialGraph()
    g.add_edge(1, 2)
    assert g.followers(1) == {2}
    assert g.friends(2) == {1}


def test_self_link_rejected():
    with pytest.raises(SelfLinkError):
        SocialGraph().add_edge(1, 1)


def test_duplicate_edges_collapse():
    g = SocialGraph([(1, 2), (1, 2)])
    assert g.edge_count == 1


def test_followers_of_star_center():
    g = SocialGraph([(1, 2), (1, 3)])
    assert g.followers(1) == {2, 3}


def test_isolated_and_unknown_nodes_have_no_followers():
    g = SocialGraph(nodes=[4])
    assert g.followers(4) == set()
    assert g.followers(99) == set()


def test_transpose():
    g = SocialGraph([(2, 1)])
    assert g.followers(1) == set()
    assert g.friends(1) == {2}


@pytest.mark.parametrize(
    "edges,a,b,expected",
    [
        # N(10) = N(11) = {5, 6}
        ([(5, 10), (10, 6), (5, 11), (6, 11)], 10, 11, 1.0),
        ([(1, 10), (2, 11)], 10, 11, 0.0),
        # N(a) = {1,2,3}, N(b) = {3,4}: 1 shared of 4
        ([(1, 10), (10, 2), (3, 10), (3, 11), (11, 4)], 10, 11, 0.25),
    ],
)
def test_social_homogeneity(edges, a, b, expected):
    assert SocialGraph(edges).social_homogeneity(a, b) == pytest.approx(expected)


def test_homogeneity_ignores_the_endpoints():
    # a and b follow each other and share one follower
    g = SocialGraph([(10, 11), (11, 10), (10, 5), (11, 5)])
    assert g.social_homogeneity(10, 11) == 1.0


def test_homogeneity_of_two_bare_nodes_is_zero():
    assert SocialGraph([(1, 2)]).social_homogeneity(1, 2) == 0.0


edge_lists = st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)).filter(lambda e: e[0] != e[1]), max_size=60)


@given(edge_lists)
def test_indexes_are_exact_transposes(edges):
    g = SocialGraph(edges)
    for v in g.nodes:
        assert g.followers(v) == {u for a, u in set(edges) if a == v}
        assert g.friends(v) == {w for w, b in set(edges) if b == v}
    assert g.edge_count == len(set(edges)) == len(list(g.edges()))


@given(edge_lists, st.integers(0, 15), st.integers(0, 15))
def test_homogeneity_is_a_symmetric_ratio(edges, a, b):
    g = SocialGraph(edges)
    h = g.social_homogeneity(a, b)
    assert 0.0 <= h <= 1.0
    assert h == g.social_homogeneity(b, a)


def test_edge_list_round_trip_keeps_isolated_nodes(tmp_path):
    g = SocialGraph([(0, 1), (2, 0)], nodes=[7])
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    back = read_edge_list(path)
    assert list(back.edges()) == list(g.edges())
    assert back.nodes == [0, 1, 2, 7]


def test_edge_list_rejects_bad_lines(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("1 2 3\n")
    with pytest.raises(ValueError, match="expected"):
        read_edge_list(path)
