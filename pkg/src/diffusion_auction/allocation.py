"""Efficient and constrained welfare maximisation, and the optimal allocation tree.

Every ranking of buyers uses one canonical order: descending reported value,
ties broken by ascending buyer id. With unit demand and identical items, the
welfare-maximising allocation under "forced winners" and "excluded buyers"
constraints is greedy: take the forced buyers, then fill the remaining slots
in canonical order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence

from .critical import CriticalStructure
from .network import SELLER, Action, Network, participants


class InfeasibleProgram(RuntimeError):
    """A welfare program with contradictory constraints (an internal invariant breach)."""


def rank_key(values: Mapping[int, object]):
    return lambda i: (-values[i], i)


def ranking(values: Mapping[int, object]) -> List[int]:
    """Buyers in canonical order, best first."""
    return sorted(values, key=rank_key(values))


def reported_values(net: Network, profile: Mapping[int, Action]) -> Dict[int, object]:
    return {i: profile[i].value for i in participants(net, profile)}


@dataclass(frozen=True)
class Allocation:
    winners: FrozenSet[int]
    welfare: object


@dataclass(frozen=True)
class WelfareProgram:
    excluded: FrozenSet[int] = frozenset()
    forced: FrozenSet[int] = frozenset()
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        object.__setattr__(self, "forced", frozenset(self.forced))


def solve_program(order: Sequence[int], values: Mapping[int, object], prog: WelfareProgram) -> Allocation:
    """Greedy solution of ``prog`` over participants listed in canonical ``order``."""
    if len(prog.forced) > prog.k:
        raise InfeasibleProgram(f"{len(prog.forced)} forced winners for {prog.k} items")
    if prog.forced & prog.excluded:
        raise InfeasibleProgram(f"buyers {sorted(prog.forced & prog.excluded)} both forced and excluded")
    missing = [j for j in prog.forced if j not in values]
    if missing:
        raise InfeasibleProgram(f"forced buyers {sorted(missing)} do not participate")
    winners = set(prog.forced)
    free = prog.k - len(winners)
    for j in order:
        if free == 0:
            break
        if j in winners or j in prog.excluded:
            continue
        winners.add(j)
        free -= 1
    return Allocation(frozenset(winners), sum((values[j] for j in winners), 0))


def efficient_allocation(net: Network, profile: Mapping[int, Action], k: int) -> Allocation:
    """The top ``min(k, #participants)`` participants by reported value."""
    values = reported_values(net, profile)
    return solve_program(ranking(values), values, WelfareProgram(k=k))


def constrained_welfare(net: Network, profile: Mapping[int, Action], prog: WelfareProgram) -> Allocation:
    values = reported_values(net, profile)
    return solve_program(ranking(values), values, prog)


def top_k_critical_children(cs: CriticalStructure, values: Mapping[int, object], i: int, k: int) -> List[int]:
    """The ``k`` best-ranked critical children of ``i`` (all of them if fewer)."""
    return sorted(cs.children_of(i), key=rank_key(values))[:k]


def competitor_closure(cs: CriticalStructure, values: Mapping[int, object], i: int, k: int,
                       whole_subtrees: bool = True) -> FrozenSet[int]:
    """Buyers removed when testing whether ``i`` may keep an item.

    The top-k critical children of ``i``, their critical parents lying
    strictly below ``i``, and all critical children of those parents. With
    ``whole_subtrees`` (the default) the critical children of the top-k
    children are removed as well, so every top-k child leaves together with
    her whole down-set. Without it, a buyer reachable only through a top
    child can still bid against ``i``; that breaks budget balance already on
    a three-buyer path with one item.
    """
    top = top_k_critical_children(cs, values, i, k)
    below = set()
    for j in top:
        for l in cs.parents_of(j):
            if i in cs.parent_set(l):
                below.add(l)
    closure = set(top) | below
    for l in below:
        closure |= cs.children_of(l)
    if whole_subtrees:
        for j in top:
            closure |= cs.children_of(j)
    return frozenset(closure)


@dataclass
class AllocationTree:
    """Efficient winners and their critical parents, arranged by the dominator order.

    ``weight`` starts as the number of efficient winners in each node's
    subtree and is decremented in place while GIDM runs.
    """

    efficient: FrozenSet[int]
    parent_of: Dict[int, int]
    children: Dict[int, List[int]]
    weight: Dict[int, int]
    value_of: Dict[int, object]
    root: int = SELLER
    initial_weight: Dict[int, int] = field(default_factory=dict)

    @property
    def nodes(self) -> FrozenSet[int]:
        return frozenset(self.parent_of)

    def subtree(self, i: int) -> List[int]:
        """Nodes strictly below ``i``, in depth-first order."""
        out = []
        stack = list(reversed(self.children.get(i, [])))
        while stack:
            j = stack.pop()
            out.append(j)
            stack.extend(reversed(self.children.get(j, [])))
        return out

    def path(self, i: int) -> List[int]:
        """Nodes from just below the root down to ``i``."""
        out = []
        while i != self.root:
            out.append(i)
            i = self.parent_of[i]
        return out[::-1]


def build_allocation_tree(net: Network, profile: Mapping[int, Action], cs: CriticalStructure, k: int,
                          values: Mapping[int, object] = None) -> AllocationTree:
    if values is None:
        values = reported_values(net, profile)
    eff = solve_program(ranking(values), values, WelfareProgram(k=k)).winners
    nodes = set(eff)
    for i in eff:
        nodes.update(cs.parents_of(i))
    parent_of = {}
    for i in nodes:
        # the deepest critical parent; all of them are tree nodes by transitivity
        ps = [j for j in cs.parents_of(i) if j in nodes]
        parent_of[i] = ps[-1] if ps else SELLER
    children: Dict[int, List[int]] = {SELLER: []}
    for i in nodes:
        children.setdefault(i, [])
    for i in sorted(nodes):
        children[parent_of[i]].append(i)
    weight = {i: 0 for i in nodes}
    for j in eff:
        weight[j] += 1
        for l in cs.parents_of(j):
            weight[l] += 1
    return AllocationTree(
        efficient=frozenset(eff),
        parent_of=parent_of,
        children=children,
        weight=weight,
        value_of={i: values[i] for i in nodes},
        initial_weight=dict(weight),
    )


def welfare(values: Mapping[int, object], winners: Iterable[int]):
    return sum((values[j] for j in winners), 0)
