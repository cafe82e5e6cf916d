"""Directed followership graph.

An edge ``(v, u)`` means *u follows v*: content posted by ``v`` can flow to ``u``.
For a node ``v`` the followers are ``{u : (v, u) in E}`` and the friends (the
accounts ``v`` follows) are ``{w : (w, v) in E}``.
"""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Iterable, Iterator


class SelfLinkError(ValueError):
    """Raised when an edge from a node to itself is added."""


class SocialGraph:
    def __init__(self, edges: Iterable[tuple[int, int]] = (), nodes: Iterable[int] = ()):
        self._followers: dict[int, set[int]] = defaultdict(set)
        self._friends: dict[int, set[int]] = defaultdict(set)
        self._nodes: set[int] = set()
        self._n_edges = 0
        for n in nodes:
            self.add_node(n)
        for v, u in edges:
            self.add_edge(v, u)

    def add_node(self, v: int) -> None:
        if v < 0:
            raise ValueError(f"node ids must be non-negative, got {v}")
        self._nodes.add(int(v))

    def add_edge(self, v: int, u: int) -> None:
        """Record that ``u`` follows ``v``. Repeated edges are ignored."""
        v, u = int(v), int(u)
        if v == u:
            raise SelfLinkError(f"self-link ({v}, {v}) is not allowed")
        self.add_node(v)
        self.add_node(u)
        if u in self._followers[v]:
            return
        self._followers[v].add(u)
        self._friends[u].add(v)
        self._n_edges += 1

    def followers(self, v: int) -> set[int]:
        """Users following ``v``; empty for unknown nodes."""
        return set(self._followers.get(v, ()))

    def friends(self, v: int) -> set[int]:
        """Users ``v`` follows; empty for unknown nodes."""
        return set(self._friends.get(v, ()))

    def follower_count(self, v: int) -> int:
        return len(self._followers.get(v, ()))

    def friend_count(self, v: int) -> int:
        return len(self._friends.get(v, ()))

    def has_edge(self, v: int, u: int) -> bool:
        return u in self._followers.get(v, ())

    def neighborhood(self, v: int) -> set[int]:
        return self._followers.get(v, set()) | self._friends.get(v, set())

    def social_homogeneity(self, a: int, b: int) -> float:
        """Jaccard overlap of the combined friend/follower sets of ``a`` and ``b``.

        Both endpoints are removed from the neighborhoods first, so an edge
        between the two does not count as shared context.
        """
        na = self.neighborhood(a)
        nb = self.neighborhood(b)
        union = len(na | nb)
        shared = len(na & nb)
        # discount the endpoints themselves
        for x in {a, b}:
            in_a, in_b = x in na, x in nb
            if in_a or in_b:
                union -= 1
            if in_a and in_b:
                shared -= 1
        if union <= 0:
            return 0.0
        return shared / union

    @property
    def nodes(self) -> list[int]:
        return sorted(self._nodes)

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return self._n_edges

    def edges(self) -> Iterator[tuple[int, int]]:
        """Edges in ``(source, destination)`` sorted order."""
        for v in sorted(self._followers):
            for u in sorted(self._followers[v]):
                yield v, u

    def __contains__(self, v: int) -> bool:
        return v in self._nodes

    def __repr__(self) -> str:
        return f"SocialGraph(nodes={self.node_count}, edges={self.edge_count})"


def read_edge_list(path: str | os.PathLike) -> SocialGraph:
    """Parse a ``v u`` per line edge list ("u follows v"); ``#`` starts a comment."""
    g = SocialGraph()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 1:
                g.add_node(int(parts[0]))
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'v u', got {line!r}")
            g.add_edge(int(parts[0]), int(parts[1]))
    return g


def write_edge_list(graph: SocialGraph, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write("# v u  (u follows v)\n")
        for v, u in graph.edges():
            fh.write(f"{v} {u}\n")
        isolated = [n for n in graph.nodes if not graph.neighborhood(n)]
        for n in isolated:
            fh.write(f"{n}\n")
