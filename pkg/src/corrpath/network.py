"""Directed road network: typed links, CSV ingestion, reachability."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

from .errors import (
    DuplicateLinkId,
    MalformedRow,
    MissingHeader,
    NonPositiveLength,
    SelfLoop,
    UnknownNode,
)

LINKS_HEADER = ("link_id", "from_node", "to_node", "length_km")


@dataclass(frozen=True)
class Link:
    """One directed road segment."""

    link_id: int
    from_node: int
    to_node: int
    length_km: float


class RoadNetwork:
    """Immutable directed multigraph over integer node ids.

    Parallel links between one node pair are allowed and stay distinct;
    self-loops are rejected at load time.  ``links`` keeps source-table
    order, and that row order is the link axis used by every speed array
    in the package.  ``adjacency`` maps a node to the row indices of its
    outgoing links.
    """

    def __init__(self, links: list[Link] | tuple[Link, ...]):
        self.links: tuple[Link, ...] = tuple(links)
        seen_ids: dict[int, int] = {}
        for row, ln in enumerate(self.links):
            if ln.from_node == ln.to_node:
                raise SelfLoop(f"link {ln.link_id} is a self-loop on node {ln.from_node}")
            if ln.length_km <= 0:
                raise NonPositiveLength(f"link {ln.link_id} has length {ln.length_km}")
            if ln.link_id in seen_ids:
                raise DuplicateLinkId(f"link id {ln.link_id} appears more than once")
            seen_ids[ln.link_id] = row
        nodes: set[int] = set()
        for ln in self.links:
            nodes.add(ln.from_node)
            nodes.add(ln.to_node)
        self.nodes: frozenset[int] = frozenset(nodes)
        adj: dict[int, list[int]] = {node: [] for node in nodes}
        for row, ln in enumerate(self.links):
            adj[ln.from_node].append(row)
        self.adjacency: dict[int, tuple[int, ...]] = {
            node: tuple(rows) for node, rows in adj.items()
        }
        self.row_by_link_id: dict[int, int] = seen_ids

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def link_ids(self) -> tuple[int, ...]:
        return tuple(ln.link_id for ln in self.links)

    def __repr__(self) -> str:
        return f"RoadNetwork(nodes={self.n_nodes}, links={self.n_links})"


def load_network(path: str) -> RoadNetwork:
    """Read a ``links.csv`` table into a RoadNetwork.

    Expected header: ``link_id,from_node,to_node,length_km``.  Errors
    name the offending row (1-based, counting the header as row 1).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != LINKS_HEADER:
            raise MissingHeader(
                f"{path}: expected header {','.join(LINKS_HEADER)!r}, got {','.join(header)!r}"
            )
        links: list[Link] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRow(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                link = Link(
                    link_id=int(row[0]),
                    from_node=int(row[1]),
                    to_node=int(row[2]),
                    length_km=float(row[3]),
                )
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
            if link.from_node == link.to_node:
                raise SelfLoop(f"{path}:{lineno}: link {link.link_id} is a self-loop")
            if link.length_km <= 0:
                raise NonPositiveLength(
                    f"{path}:{lineno}: link {link.link_id} has non-positive length {row[3]}"
                )
            links.append(link)
    try:
        return RoadNetwork(links)
    except DuplicateLinkId as exc:
        raise DuplicateLinkId(f"{path}: {exc}") from None


def save_network(net: RoadNetwork, path: str) -> None:
    """Write the canonical ``links.csv`` form; load/save round-trips byte-identically."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LINKS_HEADER)
        for ln in net.links:
            writer.writerow([ln.link_id, ln.from_node, ln.to_node, repr(float(ln.length_km))])


def paths_exist(net: RoadNetwork, origin: int, destination: int) -> bool:
    """True when at least one directed path connects origin to destination.

    The empty path makes origin == destination trivially reachable.
    """
    for node in (origin, destination):
        if node not in net.nodes:
            raise UnknownNode(f"node {node} is not in the network")
    if origin == destination:
        return True
    seen = {origin}
    queue = deque([origin])
    while queue:
        node = queue.popleft()
        for row in net.adjacency[node]:
            nxt = net.links[row].to_node
            if nxt == destination:
                return True
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False
