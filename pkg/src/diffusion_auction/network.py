"""Social network, buyer types, action profiles and feasibility.

Buyers are identified by non-negative integers; the seller is the sentinel
``SELLER`` (-1). The ground-truth neighbour relation is symmetric, while the
invitations carried by an action profile are directed.

An action is either ``None`` (nil, the buyer never joined) or a
:class:`Report`. An action profile is a plain ``dict`` from buyer id to
action; ids missing from the dict are treated as nil.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional

SELLER = -1


class NetworkError(ValueError):
    """Raised when a network violates its structural invariants."""


class FeasibilityError(ValueError):
    """Base class for infeasible action profiles."""

    def __init__(self, buyer: int, message: str):
        super().__init__(message)
        self.buyer = buyer


class NilButReachable(FeasibilityError):
    def __init__(self, buyer: int):
        super().__init__(buyer, f"buyer {buyer} is invited but has a nil action")


class ReportButUnreachable(FeasibilityError):
    def __init__(self, buyer: int):
        super().__init__(buyer, f"buyer {buyer} reports but no invitation chain reaches her")


class InvitedNonNeighbor(FeasibilityError):
    def __init__(self, buyer: int, invitee: int):
        super().__init__(buyer, f"buyer {buyer} invites {invitee}, who is not her neighbour")
        self.invitee = invitee


class UnknownBuyer(FeasibilityError):
    def __init__(self, buyer: int):
        super().__init__(buyer, f"action given for unknown buyer {buyer}")


@dataclass(frozen=True)
class BuyerType:
    valuation: object
    neighbors: frozenset

    def __post_init__(self):
        object.__setattr__(self, "neighbors", frozenset(self.neighbors))
        if self.valuation < 0:
            raise NetworkError(f"negative valuation {self.valuation}")


@dataclass(frozen=True)
class Report:
    """A participating buyer's action: reported valuation and invited neighbours."""

    value: object
    invited: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "invited", frozenset(self.invited))
        if self.value < 0:
            raise ValueError(f"negative valuation report {self.value}")


Action = Optional[Report]
ActionProfile = Dict[int, Action]


@dataclass(frozen=True)
class Network:
    seller_neighbors: frozenset
    buyers: Mapping[int, BuyerType]
    item_count: int = 1
    labels: Mapping[int, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "seller_neighbors", frozenset(self.seller_neighbors))
        object.__setattr__(self, "buyers", dict(sorted(self.buyers.items())))
        if self.item_count < 1:
            raise NetworkError("item count must be at least 1")
        ids = set(self.buyers)
        if any(i < 0 for i in ids):
            raise NetworkError("buyer ids must be non-negative")
        if not self.seller_neighbors <= ids:
            raise NetworkError(f"seller neighbours {sorted(self.seller_neighbors - ids)} are not buyers")
        for i, t in self.buyers.items():
            if i in t.neighbors:
                raise NetworkError(f"buyer {i} lists herself as a neighbour")
            for j in t.neighbors:
                if j == SELLER:
                    if i not in self.seller_neighbors:
                        raise NetworkError(f"buyer {i} lists the seller but the seller does not list her")
                elif j not in ids:
                    raise NetworkError(f"buyer {i} has unknown neighbour {j}")
                elif i not in self.buyers[j].neighbors:
                    raise NetworkError(f"neighbour relation not symmetric between {i} and {j}")
            if i in self.seller_neighbors and SELLER not in t.neighbors:
                raise NetworkError(f"seller lists buyer {i} but she does not list the seller")

    @classmethod
    def from_edges(cls, valuations: Mapping[int, object], edges: Iterable[tuple],
                   item_count: int = 1, labels: Optional[Mapping[int, str]] = None) -> "Network":
        """Build a network from undirected edges; use ``SELLER`` for the seller endpoint."""
        nbrs = {i: set() for i in valuations}
        seller = set()
        for a, b in edges:
            if a == b:
                raise NetworkError(f"self loop on {a}")
            for x, y in ((a, b), (b, a)):
                if x == SELLER:
                    seller.add(y)
                else:
                    if x not in nbrs:
                        raise NetworkError(f"edge endpoint {x} has no valuation")
                    nbrs[x].add(y)
        buyers = {i: BuyerType(v, frozenset(nbrs[i])) for i, v in valuations.items()}
        return cls(frozenset(seller), buyers, item_count, dict(labels or {}))

    def buyer_neighbors(self, i: int) -> frozenset:
        """Neighbours of ``i`` excluding the seller sentinel."""
        return self.buyers[i].neighbors - {SELLER}

    def valuation(self, i: int):
        return self.buyers[i].valuation

    def label(self, i: int) -> str:
        if i == SELLER:
            return "s"
        return self.labels.get(i, str(i))

    def with_items(self, k: int) -> "Network":
        return Network(self.seller_neighbors, self.buyers, k, self.labels)


def truthful_profile(net: Network) -> ActionProfile:
    """Every buyer reachable from the seller reports her type; everyone else is nil."""
    profile: ActionProfile = {i: None for i in net.buyers}
    queue = deque(sorted(net.seller_neighbors))
    seen = set(queue)
    while queue:
        i = queue.popleft()
        t = net.buyers[i]
        profile[i] = Report(t.valuation, t.neighbors)
        for j in sorted(net.buyer_neighbors(i)):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return profile


def _invited_closure(net: Network, profile: Mapping[int, Action], removed: Optional[int] = None) -> set:
    """Buyers reached by some invitation, traversing only non-nil buyers.

    ``removed`` is treated as absent: she is neither reached nor traversed.
    """
    reached = set()
    queue = deque()
    for j in net.seller_neighbors:
        if j != removed:
            reached.add(j)
            queue.append(j)
    while queue:
        i = queue.popleft()
        action = profile.get(i)
        if action is None:
            continue
        for j in action.invited:
            if j != SELLER and j != removed and j not in reached and j in net.buyers:
                reached.add(j)
                queue.append(j)
    return reached


def participants(net: Network, profile: Mapping[int, Action], removed: Optional[int] = None) -> frozenset:
    """Buyers with an invitation chain from the seller (and a non-nil action).

    With ``removed`` set, computes the participants when that buyer takes no
    part at all (the set written N_{-i} for IDM's payments).
    """
    reached = _invited_closure(net, profile, removed)
    return frozenset(i for i in reached if profile.get(i) is not None)


def check_feasible(net: Network, profile: Mapping[int, Action]) -> None:
    """Raise a :class:`FeasibilityError` unless ``profile`` is feasible for ``net``."""
    for i in sorted(profile):
        if i not in net.buyers:
            raise UnknownBuyer(i)
    for i in sorted(net.buyers):
        action = profile.get(i)
        if action is None:
            continue
        allowed = net.buyers[i].neighbors
        for j in sorted(action.invited):
            if j not in allowed:
                raise InvitedNonNeighbor(i, j)
    reached = _invited_closure(net, profile)
    for i in sorted(net.buyers):
        nil = profile.get(i) is None
        if i in reached and nil:
            raise NilButReachable(i)
        if i not in reached and not nil:
            raise ReportButUnreachable(i)


def reclose(net: Network, profile: Mapping[int, Action]) -> ActionProfile:
    """Set to nil every buyer no longer reached by an invitation chain.

    Buyers that stay reachable keep their actions. This is the feasibility
    repair applied after a buyer shrinks her invitations.
    """
    out: ActionProfile = {i: profile.get(i) for i in net.buyers}
    while True:
        reached = _invited_closure(net, out)
        dropped = [i for i in net.buyers if out[i] is not None and i not in reached]
        if not dropped:
            return out
        for i in dropped:
            out[i] = None
