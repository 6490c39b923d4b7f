"""Critical parents and children of participants.

``j`` is a critical parent of ``i`` when every invitation chain from the
seller to ``i`` passes through ``j``; graph-theoretically ``j`` is a proper
dominator of ``i`` in the invitation digraph rooted at the seller. The
partial order ``i > j`` ("i precedes j") holds iff ``i`` is a critical parent
of ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Mapping, Tuple

import numpy as np

from . import kernels
from .network import SELLER, Action, Network, participants


class NotAParticipant(KeyError):
    """Critical structure queried for a buyer that does not participate."""


@dataclass(frozen=True)
class CriticalStructure:
    # parents[i] is ordered from the seller outward (closest to the seller first)
    parents: Mapping[int, Tuple[int, ...]]
    children: Mapping[int, FrozenSet[int]]

    def __post_init__(self):
        object.__setattr__(self, "_parent_sets", {i: frozenset(p) for i, p in self.parents.items()})

    @property
    def participants(self) -> FrozenSet[int]:
        return frozenset(self.parents)

    def parents_of(self, i: int) -> Tuple[int, ...]:
        try:
            return self.parents[i]
        except KeyError:
            raise NotAParticipant(i) from None

    def parent_set(self, i: int) -> FrozenSet[int]:
        try:
            return self._parent_sets[i]
        except KeyError:
            raise NotAParticipant(i) from None

    def children_of(self, i: int) -> FrozenSet[int]:
        try:
            return self.children[i]
        except KeyError:
            raise NotAParticipant(i) from None

    def descendants(self, i: int) -> FrozenSet[int]:
        """``D_i``: the buyer together with all her critical children."""
        return self.children_of(i) | {i}


def invitation_graph(net: Network, profile: Mapping[int, Action]):
    """Index the invitation digraph of the participants.

    Returns ``(nodes, indptr, indices)`` where ``nodes[0]`` is the seller and
    ``nodes[k]`` the buyer id at index ``k``.
    """
    part = participants(net, profile)
    nodes = [SELLER] + sorted(part)
    index = {b: k for k, b in enumerate(nodes)}
    src, dst = [], []
    for j in net.seller_neighbors:
        if j in part:
            src.append(0)
            dst.append(index[j])
    for i in part:
        for j in profile[i].invited:
            if j in part:
                src.append(index[i])
                dst.append(index[j])
    indptr, indices = kernels.to_csr(len(nodes), src, dst)
    return nodes, indptr, indices


def _from_parent_sets(parent_sets: Dict[int, set], depth_key) -> CriticalStructure:
    children: Dict[int, set] = {i: set() for i in parent_sets}
    for i, ps in parent_sets.items():
        for j in ps:
            children[j].add(i)
    parents = {i: tuple(sorted(ps, key=depth_key)) for i, ps in parent_sets.items()}
    return CriticalStructure(parents, {i: frozenset(c) for i, c in children.items()})


def critical_structure(net: Network, profile: Mapping[int, Action], backend=None) -> CriticalStructure:
    """Critical parents/children via the dominator tree of the invitation digraph."""
    nodes, indptr, indices = invitation_graph(net, profile)
    idom = kernels.immediate_dominators(indptr, indices, 0, backend=backend)
    n = len(nodes)
    chains: Dict[int, Tuple[int, ...]] = {}
    # walk each node's dominator chain; memoise on the way up
    memo = {0: ()}
    for v in range(1, n):
        path = []
        u = v
        while u not in memo:
            path.append(u)
            u = int(idom[u])
        for w in reversed(path):
            parent = int(idom[w])
            memo[w] = memo[parent] + ((nodes[parent],) if parent != 0 else ())
        chains[nodes[v]] = memo[v]
    children: Dict[int, set] = {b: set() for b in chains}
    for i, ps in chains.items():
        for j in ps:
            children[j].add(i)
    return CriticalStructure(chains, {i: frozenset(c) for i, c in children.items()})


def critical_structure_oracle(net: Network, profile: Mapping[int, Action], backend=None) -> CriticalStructure:
    """Critical structure by deleting each participant and re-testing reachability."""
    nodes, indptr, indices = invitation_graph(net, profile)
    reach = kernels.removal_reachability(indptr, indices, 0, backend=backend)
    n = len(nodes)
    parent_sets: Dict[int, set] = {nodes[v]: set() for v in range(1, n)}
    for j in range(1, n):
        for v in np.flatnonzero(~reach[j]):
            if v != j and v != 0:
                parent_sets[nodes[v]].add(nodes[j])
    # j is above l iff j is a critical parent of l, so fewer parents means closer to the seller
    return _from_parent_sets(parent_sets, lambda j: (len(parent_sets[j]), j))


def precedes(cs: CriticalStructure, i: int, j: int) -> bool:
    """``i > j`` in the partial order: ``i`` is a critical parent of ``j``."""
    cs.parent_set(i)
    return i in cs.parent_set(j)
