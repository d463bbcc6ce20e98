"""Network loading, validation, adjacency, and reachability."""

import numpy as np
import pytest

from corrpath import (
    DuplicateLinkId,
    Link,
    MalformedRow,
    MissingHeader,
    NonPositiveLength,
    RoadNetwork,
    SelfLoop,
    UnknownNode,
    load_network,
    paths_exist,
    save_network,
)

from conftest import chain_net


def reachable_oracle(net, origin, destination):
    """Reachability via boolean adjacency-matrix powers, no search code shared."""
    nodes = sorted(net.nodes)
    idx = {n: i for i, n in enumerate(nodes)}
    a = np.zeros((len(nodes), len(nodes)), dtype=bool)
    for ln in net.links:
        a[idx[ln.from_node], idx[ln.to_node]] = True
    reach = np.eye(len(nodes), dtype=bool)
    for _ in range(len(nodes)):
        reach = reach | (reach @ a)
    return bool(reach[idx[origin], idx[destination]])


def test_adjacency_rows_follow_table_order():
    net = RoadNetwork(
        [
            Link(5, 0, 1, 1.0),
            Link(2, 0, 2, 2.0),
            Link(9, 1, 2, 3.0),
            Link(7, 0, 1, 4.0),  # parallel to link 5, must stay distinct
        ]
    )
    assert net.adjacency[0] == (0, 1, 3)
    assert net.adjacency[1] == (2,)
    assert 2 not in net.adjacency or net.adjacency[2] == ()
    assert net.nodes == frozenset({0, 1, 2})
    assert net.row_by_link_id[9] == 2


def test_parallel_links_kept_separate():
    net = RoadNetwork([Link(1, 0, 1, 1.0), Link(2, 0, 1, 9.0)])
    assert len(net.links) == 2
    assert {ln.length_km for ln in net.links} == {1.0, 9.0}


def test_self_loop_rejected():
    with pytest.raises(SelfLoop):
        RoadNetwork([Link(1, 3, 3, 1.0)])


@pytest.mark.parametrize("bad_km", [0.0, -1.5])
def test_nonpositive_length_rejected(bad_km):
    with pytest.raises(NonPositiveLength):
        RoadNetwork([Link(1, 0, 1, bad_km)])


def test_duplicate_link_id_rejected():
    with pytest.raises(DuplicateLinkId):
        RoadNetwork([Link(1, 0, 1, 1.0), Link(1, 1, 2, 1.0)])


def test_load_requires_exact_header(tmp_path):
    p = tmp_path / "links.csv"
    p.write_text("link_id,from,to,length_km\n1,0,1,1.0\n")
    with pytest.raises(MissingHeader):
        load_network(str(p))


def test_load_reports_malformed_row_number(tmp_path):
    p = tmp_path / "links.csv"
    p.write_text("link_id,from_node,to_node,length_km\n1,0,1,1.0\n2,0,x,1.0\n")
    with pytest.raises(MalformedRow) as ei:
        load_network(str(p))
    assert ":3:" in str(ei.value)


def test_save_load_round_trip_is_byte_identical(tmp_path):
    net = chain_net([1.25, 0.4, 7.0])
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    save_network(net, str(p1))
    loaded = load_network(str(p1))
    assert loaded.links == net.links
    save_network(loaded, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_paths_exist_trivial_and_unknown():
    net = chain_net([1.0, 1.0])
    assert paths_exist(net, 1, 1)  # empty path counts
    assert paths_exist(net, 0, 2)
    assert not paths_exist(net, 2, 0)
    with pytest.raises(UnknownNode):
        paths_exist(net, 0, 99)


def test_paths_exist_matches_matrix_power_oracle():
    rng = np.random.default_rng(42)
    for _ in range(30):
        n_nodes = int(rng.integers(2, 9))
        n_links = int(rng.integers(1, 15))
        links, used = [], set()
        for lid in range(1, n_links + 1):
            u = int(rng.integers(0, n_nodes))
            v = int(rng.integers(0, n_nodes))
            if u == v:
                continue
            links.append(Link(lid, u, v, float(rng.uniform(0.1, 5.0))))
            used.update((u, v))
        if not links:
            continue
        net = RoadNetwork(links)
        nodes = sorted(net.nodes)
        for o in nodes:
            for d in nodes:
                assert paths_exist(net, o, d) == reachable_oracle(net, o, d), (o, d, links)
