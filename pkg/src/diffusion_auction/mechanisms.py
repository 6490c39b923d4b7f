"""IDM (one item), GIDM (K items) and the neighbours-only (K+1)-price auction.

Every mechanism maps a network and a feasible action profile to an
:class:`Outcome`. Payments are what buyers pay; a negative payment is a
reward paid out by the seller.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional

from .allocation import (
    Allocation,
    AllocationTree,
    InfeasibleProgram,
    WelfareProgram,
    build_allocation_tree,
    competitor_closure,
    rank_key,
    ranking,
    solve_program,
)
from .critical import CriticalStructure, critical_structure
from .network import SELLER, Action, Network, participants

CORRECTED = "corrected"
ORIGINAL = "original"  # superseded constraint form; differential testing only


class InternalInvariant(RuntimeError):
    """An invariant of the GIDM pass was violated; this is a bug, not bad input."""


class NoParticipants(UserWarning):
    """Nobody joined the sale; nothing is sold."""


@dataclass
class Snapshot:
    """What GIDM saw when it popped ``buyer`` off the stack."""

    buyer: int
    items: int  # k_i, items handed to the buyer
    received: FrozenSet[int]
    out: FrozenSet[int]
    closure: FrozenSet[int]
    sw_closure: Allocation
    wins: bool
    sw_without: Optional[Allocation] = None  # SW_{-D_i}; filled in by the payment step


@dataclass
class PassState:
    stack: List[int] = field(default_factory=list)
    winners: List[int] = field(default_factory=list)
    get_from: Dict[int, int] = field(default_factory=dict)
    taken: set = field(default_factory=set)
    snapshots: Dict[int, Snapshot] = field(default_factory=dict)
    pushed_by: Dict[int, List[int]] = field(default_factory=dict)


@dataclass
class Outcome:
    mechanism: str
    k: int
    item: Dict[int, int]
    payment: Dict[int, object]
    revenue: object
    values: Dict[int, object] = field(default_factory=dict)
    trace: List[dict] = field(default_factory=list)
    state: Optional[PassState] = None
    tree: Optional[AllocationTree] = None
    cs: Optional[CriticalStructure] = None

    @property
    def winners(self) -> FrozenSet[int]:
        return frozenset(i for i, x in self.item.items() if x)

    @property
    def welfare(self):
        return sum((self.values[i] for i in self.winners), 0)

    def utility(self, i: int, true_value) -> object:
        return self.item.get(i, 0) * true_value - self.payment.get(i, 0)

    def same_result(self, other: "Outcome") -> bool:
        return self.item == other.item and self.payment == other.payment and self.revenue == other.revenue


def _empty(net: Network, mechanism: str, k: int) -> Outcome:
    warnings.warn("no buyer participates; nothing is sold", NoParticipants, stacklevel=3)
    return Outcome(mechanism, k, {i: 0 for i in net.buyers}, {i: 0 for i in net.buyers}, 0)


def _finish(net, mechanism, k, winners, payments, values, **extra) -> Outcome:
    item = {i: int(i in winners) for i in net.buyers}
    payment = {i: payments.get(i, 0) for i in net.buyers}
    revenue = sum((payment[i] for i in sorted(payment)), 0)
    return Outcome(mechanism, k, item, payment, revenue, dict(values), **extra)


# ------------------------------------------------------------------------ IDM


def run_idm(net: Network, profile: Mapping[int, Action]) -> Outcome:
    """Single-item information diffusion mechanism.

    The diffusion-critical buyers of the top bidder are found by deleting
    each participant in turn, independently of the dominator computation.
    Ties follow the canonical order: a buyer keeps the item iff she ranks
    first among the participants that remain without the next buyer on the
    chain.
    """
    part = participants(net, profile)
    if not part:
        return _empty(net, "idm", 1)
    values = {i: profile[i].value for i in part}
    key = rank_key(values)
    top = min(part, key=key)
    without = {j: participants(net, profile, removed=j) for j in part}
    chain = sorted((j for j in part if j != top and top not in without[j]), key=lambda j: len(without[j]))
    chain.append(top)

    def best(group):
        return min(group, key=key) if group else None

    def price(j):
        b = best(without[j])
        return values[b] if b is not None else 0

    payments = {}
    for pos, i in enumerate(chain):
        if pos == len(chain) - 1:
            payments[i] = price(i)
            winner = i
            break
        nxt = chain[pos + 1]
        if best(without[nxt]) == i:
            payments[i] = price(i)
            winner = i
            break
        payments[i] = price(i) - price(nxt)
    return _finish(net, "idm", 1, {winner}, payments, values)


# ------------------------------------------------------------------ VCG local


def run_vcg_local(net: Network, k: Optional[int] = None) -> Outcome:
    """(K+1)-price auction among the seller's neighbours only, on true values."""
    k = net.item_count if k is None else k
    values = {i: net.valuation(i) for i in net.seller_neighbors}
    if not values:
        return _empty(net, "vcg-local", k)
    order = ranking(values)
    winners = order[:k]
    price = values[order[k]] if len(order) > k else 0
    return _finish(net, "vcg-local", k, set(winners), {i: price for i in winners}, values)


# ----------------------------------------------------------------------- GIDM


def _ascending(node, kids):
    return sorted(kids)


def run_gidm(net: Network, profile: Mapping[int, Action], k: Optional[int] = None, *,
             cs: Optional[CriticalStructure] = None, constraints: str = CORRECTED,
             sibling_order: Optional[Callable[[int, List[int]], List[int]]] = None,
             whole_subtrees: bool = True) -> Outcome:
    """Generalised information diffusion mechanism for ``k`` identical items.

    ``sibling_order(node, children)`` fixes the order in which a node's tree
    children are pushed (the last pushed is popped first); the default pushes
    in ascending id. ``cs`` may be supplied to reuse a critical structure
    computed for the same invitation graph. ``constraints=ORIGINAL`` and
    ``whole_subtrees=False`` select superseded or literal readings of the
    rules; they exist for differential testing and are not conforming.
    """
    k = net.item_count if k is None else k
    if constraints not in (CORRECTED, ORIGINAL):
        raise ValueError(f"unknown constraint mode {constraints!r}")
    part = participants(net, profile)
    if not part:
        return _empty(net, "gidm", k)
    push_order = sibling_order or _ascending
    values = {i: profile[i].value for i in part}
    order = ranking(values)
    key = rank_key(values)
    if cs is None:
        cs = critical_structure(net, profile)
    tree = build_allocation_tree(net, profile, cs, k, values)
    eff = tree.efficient
    st = PassState()
    trace: List[dict] = []
    in_w = set()

    def solve(prog):
        try:
            return solve_program(order, values, prog)
        except InfeasibleProgram as exc:
            raise InternalInvariant(str(exc)) from exc

    def push_children(i):
        pushed = []
        for j in push_order(i, list(tree.children[i])):
            if tree.weight[j] > 0:
                trace.append({"event": "give", "from": i, "to": j, "items": tree.weight[j]})
                st.stack.append(j)
                pushed.append(j)
        st.pushed_by[i] = pushed

    push_children(SELLER)
    while st.stack:
        i = st.stack.pop()
        k_i = tree.weight[i]
        received = frozenset(l for l in cs.parents_of(i) if l in in_w)
        out = frozenset(st.get_from[l] for l in received) - received
        closure = competitor_closure(cs, values, i, k, whole_subtrees)
        if constraints == CORRECTED:
            prog = WelfareProgram(excluded=closure, forced=received | (eff - closure - out - {i}), k=k)
        else:
            prog = WelfareProgram(excluded=closure | (out - {i}), forced=received, k=k)
        sw = solve(prog)
        wins = i in sw.winners
        st.snapshots[i] = Snapshot(i, k_i, received, out, closure, sw, wins)
        trace.append({"event": "pop", "buyer": i, "items": k_i, "received": sorted(received),
                      "out": sorted(out), "closure": sorted(closure),
                      "closure_winners": sorted(sw.winners), "wins": wins})
        if wins:
            st.winners.append(i)
            in_w.add(i)
            kids = tree.children[i]
            if sum(tree.weight[c] for c in kids) == tree.weight[i] - 1:
                st.get_from[i] = i
            else:
                below = set(tree.subtree(i))
                pool = [j for j in eff if j in below and j not in st.taken]
                if len(pool) != k_i:
                    raise InternalInvariant(f"{len(pool)} untaken winners below {i}, expected {k_i}")
                pool.sort(key=key)
                taken_from = pool[-1]  # the k_i-th best in the subtree
                for j in tree.path(taken_from):
                    if i in cs.parent_set(j):
                        tree.weight[j] -= 1
                        if tree.weight[j] < 0:
                            raise InternalInvariant(f"weight of {j} became negative")
                        trace.append({"event": "decrement", "buyer": j, "weight": tree.weight[j]})
                st.get_from[i] = taken_from
                st.taken.add(taken_from)
            trace.append({"event": "getfrom", "buyer": i, "from": st.get_from[i]})
        push_children(i)

    if len(st.winners) > k:
        raise InternalInvariant(f"{len(st.winners)} winners for {k} items")

    # payments, from the pop-time snapshots
    parents_of_winners = set()
    for w in st.winners:
        parents_of_winners.update(cs.parents_of(w))
    payments = {}
    for i in sorted(in_w | parents_of_winners):
        snap = st.snapshots.get(i)
        if snap is None:
            raise InternalInvariant(f"buyer {i} needs a payment but was never popped")
        d_i = cs.descendants(i)
        if constraints == CORRECTED:
            prog = WelfareProgram(excluded=d_i, forced=snap.received | (eff - d_i - snap.out), k=k)
        else:
            prog = WelfareProgram(excluded=d_i | snap.out, forced=snap.received, k=k)
        snap.sw_without = solve(prog)
        if i in in_w:
            payments[i] = snap.sw_without.welfare - (snap.sw_closure.welfare - values[i])
        else:
            payments[i] = snap.sw_without.welfare - snap.sw_closure.welfare
    return _finish(net, "gidm", k, in_w, payments, values, trace=trace, state=st, tree=tree, cs=cs)


# ------------------------------------------------------ payment decomposition


@dataclass(frozen=True)
class PaymentTerms:
    first: object   # SW_{-D_i} minus the value of N_i^still
    second: object  # SW_{-C_i^K} minus the value of N_i^still (and v_i for winners)
    still: FrozenSet[int]
    items: int


def payment_decomposition(outcome: Outcome, state: Optional[PassState] = None,
                          tree: Optional[AllocationTree] = None) -> Dict[int, PaymentTerms]:
    """Split each paying buyer's payment into the two terms used in the revenue argument.

    ``N_i^still`` is the set of efficient winners outside ``D_i`` whose items
    were not taken by ``i``'s winning critical parents, plus those parents.
    Terms are reported for every buyer popped during the pass whose
    ``SW_{-D_i}`` was computed.
    """
    state = state or outcome.state
    tree = tree or outcome.tree
    cs = outcome.cs
    values = outcome.values
    if state is None or tree is None or cs is None:
        raise ValueError("payment decomposition needs a GIDM outcome with its pass state")
    terms = {}
    for i, snap in state.snapshots.items():
        if snap.sw_without is None:
            continue
        d_i = cs.descendants(i)
        still = (tree.efficient - (d_i | snap.out)) | snap.received
        v_still = sum((values[j] for j in still), 0)
        first = snap.sw_without.welfare - v_still
        second = snap.sw_closure.welfare - v_still
        if outcome.item.get(i):
            second -= values[i]
        terms[i] = PaymentTerms(first, second, frozenset(still), snap.items)
    return terms
