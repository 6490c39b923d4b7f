"""Brute-force property checks for the mechanisms, and seeded campaigns over random instances.

Incentive compatibility is checked by exhaustive unilateral deviation: for a
buyer ``i`` every subset of her neighbours is tried as an invitation set,
combined with a finite grid of misreports. GIDM's outcome, as a function of
``i``'s report, only changes where her report crosses another reported
value, so the grid of those values, the midpoints between them, and the two
extremes reaches every behaviour. :func:`piecewise_constancy_guard` checks
that assumption on sampled points.
"""
from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import fileformat
from .critical import critical_structure, critical_structure_oracle
from .mechanisms import CORRECTED, Outcome, payment_decomposition, run_gidm, run_idm, run_vcg_local
from .network import (
    SELLER,
    ActionProfile,
    Network,
    Report,
    check_feasible,
    participants,
    reclose,
    truthful_profile,
)

JOBS_ENV = "DIFFUSION_AUCTION_JOBS"
FLOAT_TOLERANCE = 1e-9


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


# ------------------------------------------------------------------ instances


@dataclass(frozen=True)
class InstanceGenConfig:
    buyer_count: int
    edge_probability: float
    valuation_domain: Tuple = tuple(range(10))
    item_count: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "valuation_domain", tuple(self.valuation_domain))
        dom = self.valuation_domain
        if self.buyer_count < 1:
            raise ValueError("buyer_count must be at least 1")
        if not 0 <= self.edge_probability <= 1:
            raise ValueError("edge_probability must lie in [0, 1]")
        if not dom or any(v < 0 for v in dom) or any(a >= b for a, b in zip(dom, dom[1:])):
            raise ValueError("valuation domain must be non-empty, non-negative and strictly ascending")
        if self.item_count < 1:
            raise ValueError("item_count must be at least 1")


def gen_instance(cfg: InstanceGenConfig) -> Network:
    """Random symmetric graph on the seller plus ``buyer_count`` buyers (ids 0..n-1).

    Each seller-buyer and buyer-buyer pair is an edge with probability
    ``edge_probability``. If the seller ends up isolated one uniformly chosen
    buyer is attached to her.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.buyer_count
    nodes = [SELLER] + list(range(n))
    edges = [(a, b) for a, b in itertools.combinations(nodes, 2) if rng.random() < cfg.edge_probability]
    if not any(a == SELLER for a, _ in edges):
        edges.append((SELLER, int(rng.integers(n))))
    dom = cfg.valuation_domain
    vals = {i: dom[int(rng.integers(len(dom)))] for i in range(n)}
    return Network.from_edges(vals, edges, cfg.item_count)


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, trial]).generate_state(1, np.uint64)[0])


def random_profile(net: Network, seed: int, keep: float = 0.7) -> ActionProfile:
    """A feasible profile where each participant invites a random subset of her neighbours."""
    rng = np.random.default_rng(seed)
    profile = truthful_profile(net)
    for i in sorted(net.buyers):
        if profile[i] is not None:
            kept = frozenset(j for j in sorted(net.buyer_neighbors(i)) if rng.random() < keep)
            profile[i] = Report(profile[i].value, kept)
    return reclose(net, profile)


def no_diffusion_profile(net: Network) -> ActionProfile:
    """Seller's neighbours report truthfully and invite nobody."""
    profile = {i: None for i in net.buyers}
    for i in net.seller_neighbors:
        profile[i] = Report(net.valuation(i), frozenset())
    return profile


def parse_values(text: str) -> Tuple:
    """``"0..9"`` for an integer range or a comma list such as ``"0,2.5,7"``."""
    text = text.strip()
    if ".." in text and "," not in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(sorted({fileformat.parse_value(x.strip(), "--values") for x in text.split(",") if x.strip()}))


# ----------------------------------------------------------------- deviations


@dataclass
class Violation:
    instance: str
    buyer: int
    valuation: object
    invited: Tuple[int, ...]
    truthful_utility: object
    deviant_utility: object

    @property
    def gain(self):
        return self.deviant_utility - self.truthful_utility

    def sort_key(self):
        return (self.instance, self.buyer, Fraction(self.valuation), self.invited)

    def as_dict(self):
        return {"instance": self.instance, "buyer": self.buyer, "valuation": fileformat.format_value(self.valuation),
                "invited": list(self.invited), "truthful_utility": fileformat.format_value(self.truthful_utility),
                "deviant_utility": fileformat.format_value(self.deviant_utility),
                "gain": fileformat.format_value(self.gain)}


@dataclass
class DeviationReport:
    checked_instances: int = 0
    checked_deviations: int = 0
    violations: List[Violation] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)  # broken invariants other than utility gains

    @property
    def max_gain(self):
        return max((v.gain for v in self.violations), default=0)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.failures

    def merge(self, other: "DeviationReport") -> "DeviationReport":
        self.checked_instances += other.checked_instances
        self.checked_deviations += other.checked_deviations
        self.violations.extend(other.violations)
        self.failures.extend(other.failures)
        return self

    def as_dict(self):
        return {"checked_instances": self.checked_instances, "checked_deviations": self.checked_deviations,
                "violations": [v.as_dict() for v in sorted(self.violations, key=Violation.sort_key)],
                "failures": sorted(self.failures), "max_gain": fileformat.format_value(self.max_gain)}


def misreport_candidates(others: Iterable, domain: Sequence = ()) -> List:
    """Domain values, others' values, midpoints between adjacent breakpoints, and the extremes."""
    others = set(others)
    top = max(others | set(domain) | {0})
    points = sorted(others | set(domain) | {0, top + 1})
    mids = [Fraction(a + b) / 2 for a, b in zip(points, points[1:])]
    return sorted({_norm(v) for v in points + mids})


def _norm(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


def _subsets(items: Sequence[int]):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def enumerate_deviations(net: Network, i: int, k: int = None, domain: Sequence = ()) -> List[Report]:
    """Every (misreport, invited subset) pair for buyer ``i``; nil is not included.

    Subsets range over ``i``'s buyer neighbours; the seller, if adjacent, is
    always kept in the invited set since inviting her changes nothing.
    """
    profile = truthful_profile(net)
    if profile.get(i) is None:
        raise ValueError(f"buyer {i} is not reached under the truthful profile")
    others = [profile[j].value for j in participants(net, profile) if j != i]
    cands = misreport_candidates(others, domain)
    nbrs = sorted(net.buyer_neighbors(i))
    extra = frozenset({SELLER}) & net.buyers[i].neighbors
    return [Report(v, frozenset(s) | extra) for s in _subsets(nbrs) for v in cands]


def _deviant_profile(net: Network, truth: ActionProfile, i: int, action: Report) -> ActionProfile:
    prof = dict(truth)
    prof[i] = action
    return reclose(net, prof)


def _gain_exceeds(gain, exact: bool) -> bool:
    return gain > 0 if exact else gain > FLOAT_TOLERANCE


def decomposition_failures(outcome: Outcome, tag: str = "") -> List[str]:
    """Check the payment split and the revenue telescoping on one GIDM outcome."""
    fails = []
    st, tree = outcome.state, outcome.tree
    if st is None:
        return fails
    terms = payment_decomposition(outcome)
    n_opt = len(tree.efficient)
    for i, t in terms.items():
        if len(t.still) != n_opt - t.items:
            fails.append(f"{tag} buyer {i}: |N_still|={len(t.still)} but K-k_i={n_opt - t.items}")
        if t.first - t.second != outcome.payment[i]:
            fails.append(f"{tag} buyer {i}: terms {t.first}-{t.second} != payment {outcome.payment[i]}")
        kids = st.pushed_by.get(i, [])
        if outcome.item[i] and t.items == 1 and t.second != 0:
            fails.append(f"{tag} winner {i} with one item has second term {t.second}")
        if kids:
            bound = sum((terms[c].first for c in kids), 0)
            if t.second > bound:
                fails.append(f"{tag} buyer {i}: second term {t.second} exceeds children's first terms {bound}")
    top = tree.children[SELLER]
    delta = outcome.revenue - sum((terms[c].first for c in top), 0)
    if delta < 0:
        fails.append(f"{tag} revenue telescoping remainder {delta} < 0")
    if outcome.revenue < 0:
        fails.append(f"{tag} revenue {outcome.revenue} < 0")
    return fails


def telescoping_remainder(outcome: Outcome):
    terms = payment_decomposition(outcome)
    return outcome.revenue - sum((terms[c].first for c in outcome.tree.children[SELLER]), 0)


def check_ic_ir(net: Network, k: Optional[int] = None, domain: Sequence = (), *, constraints: str = CORRECTED,
                instance: str = "", audit: bool = True, self_check: bool = False):
    """Exhaustive unilateral deviations for every participant; returns ``(ic, ir)`` reports.

    IR is judged on the deviations that keep the true valuation report.
    With ``audit`` every GIDM run also goes through :func:`decomposition_failures`.
    """
    k = net.item_count if k is None else k
    ic, ir = DeviationReport(checked_instances=1), DeviationReport(checked_instances=1)
    truth = truthful_profile(net)
    part = participants(net, truth)
    exact = all(not isinstance(net.valuation(j), float) for j in net.buyers)

    def run(profile, cs=None):
        out = run_gidm(net, profile, k, cs=cs, constraints=constraints)
        if audit and constraints == CORRECTED:
            ic.failures.extend(decomposition_failures(out, instance))
        return out

    base = run(truth)
    for i in sorted(part):
        v_true = net.valuation(i)
        u_true = base.utility(i, v_true)
        if u_true < 0:
            ir.violations.append(Violation(instance, i, v_true, tuple(sorted(net.buyer_neighbors(i))), 0, u_true))
        others = [truth[j].value for j in part if j != i]
        cands = misreport_candidates(others, domain)
        nbrs = sorted(net.buyer_neighbors(i))
        extra = frozenset({SELLER}) & net.buyers[i].neighbors
        for s in _subsets(nbrs):
            invited = frozenset(s) | extra
            shell = _deviant_profile(net, truth, i, Report(v_true, invited))
            if self_check:
                check_feasible(net, shell)
            cs = critical_structure(net, shell)
            for v in cands:
                prof = dict(shell)
                prof[i] = Report(v, invited)
                out = base if (v == v_true and len(s) == len(nbrs)) else run(prof, cs)
                u = out.utility(i, v_true)
                ic.checked_deviations += 1
                if _gain_exceeds(u - u_true, exact):
                    ic.violations.append(Violation(instance, i, v, tuple(s), u_true, u))
                if v == v_true:
                    ir.checked_deviations += 1
                    if u < 0:
                        ir.violations.append(Violation(instance, i, v, tuple(s), 0, u))
    return ic, ir


def check_ic(net: Network, k: Optional[int] = None, domain: Sequence = (), **kw) -> DeviationReport:
    return check_ic_ir(net, k, domain, **kw)[0]


def check_ir(net: Network, k: Optional[int] = None, domain: Sequence = (), **kw) -> DeviationReport:
    return check_ic_ir(net, k, domain, **kw)[1]


def check_silence(net: Network, k: Optional[int] = None) -> List[int]:
    """Buyers who would rather not take part at all (utility 0) than act truthfully."""
    k = net.item_count if k is None else k
    truth = truthful_profile(net)
    base = run_gidm(net, truth, k)
    return [i for i in sorted(participants(net, truth)) if base.utility(i, net.valuation(i)) < 0]


def check_revenue_bound(net: Network, k: Optional[int] = None):
    """``(revenue, bound, passed)`` with bound ``k * v_{k+1}`` over the seller's neighbours."""
    k = net.item_count if k is None else k
    truth = truthful_profile(net)
    revenue = run_gidm(net, truth, k).revenue
    local = sorted((net.valuation(i) for i in net.seller_neighbors), reverse=True)
    bound = k * local[k] if len(local) > k else 0
    vcg = run_vcg_local(net, k).revenue if local else 0
    return revenue, bound, revenue >= bound and revenue >= vcg and revenue >= 0


def check_idm_equivalence(net: Network, profile: Optional[ActionProfile] = None) -> bool:
    profile = truthful_profile(net) if profile is None else profile
    return run_gidm(net, profile, 1).same_result(run_idm(net, profile))


def check_no_diffusion(net: Network, k: Optional[int] = None) -> bool:
    k = net.item_count if k is None else k
    if not net.seller_neighbors:
        return True
    return run_gidm(net, no_diffusion_profile(net), k).same_result(run_vcg_local(net, k))


def check_critical_oracle(net: Network, profile: Optional[ActionProfile] = None) -> bool:
    profile = truthful_profile(net) if profile is None else profile
    return critical_structure(net, profile) == critical_structure_oracle(net, profile)


def piecewise_constancy_guard(net: Network, i: int, k: Optional[int] = None, samples: int = 3) -> List[str]:
    """Sample reports strictly between adjacent breakpoints; ``i``'s own item and payment must not change inside.

    Other buyers' payments may move with ``i``'s report (her bid can sit in
    their welfare terms); only ``i``'s own outcome matters for her incentives.
    """
    k = net.item_count if k is None else k
    truth = truthful_profile(net)
    part = participants(net, truth)
    points = sorted({truth[j].value for j in part if j != i} | {0})
    points.append(points[-1] + 1)
    invited = truth[i].invited
    cs = critical_structure(net, truth)
    fails = []
    for a, b in zip(points, points[1:]):
        results = []
        for m in range(1, samples + 1):
            v = a + (b - a) * Fraction(m, samples + 1)
            prof = dict(truth)
            prof[i] = Report(v, invited)
            out = run_gidm(net, prof, k, cs=cs)
            results.append((out.item[i], out.payment[i]))
        if any(r != results[0] for r in results[1:]):
            fails.append(f"buyer {i}: outcome varies inside ({a}, {b})")
    return fails


def order_sensitivity(net: Network, k: Optional[int] = None, limit: int = 5040) -> List[dict]:
    """Run GIDM under every sibling push order; report orders whose outcome differs from the default."""
    k = net.item_count if k is None else k
    truth = truthful_profile(net)
    base = run_gidm(net, truth, k)
    if base.tree is None:
        return []
    groups = [(node, kids) for node, kids in sorted(base.tree.children.items()) if len(kids) > 1]
    divergences = []
    perms = [list(itertools.permutations(kids)) for _, kids in groups]
    for count, choice in enumerate(itertools.product(*perms)):
        if count >= limit:
            break
        order = {node: list(p) for (node, _), p in zip(groups, choice)}
        out = run_gidm(net, truth, k, sibling_order=lambda node, kids: order.get(node, sorted(kids)))
        if not out.same_result(base):
            divergences.append({"order": {str(n): list(p) for n, p in order.items()},
                                "winners": sorted(out.winners), "revenue": fileformat.format_value(out.revenue),
                                "trace": out.trace})
    return divergences


# ------------------------------------------------------------------ campaigns

KINDS = ("ic", "ir", "revenue", "idm-equiv", "no-diffusion", "critical-oracle", "order-sensitivity")


@dataclass(frozen=True)
class Campaign:
    kind: str
    trials: int
    max_buyers: int
    items: Tuple[int, ...] = (1,)
    seed: int = 0
    edge_probability: float = 0.4
    values: Tuple = tuple(range(10))
    min_buyers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown campaign {self.kind!r}")
        if self.trials < 0 or self.max_buyers < self.min_buyers or self.min_buyers < 1:
            raise ValueError("invalid campaign size")
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "values", tuple(self.values))

    def instance(self, t: int) -> Network:
        seed = trial_seed(self.seed, t)
        n = self.min_buyers + int(np.random.default_rng(seed).integers(self.max_buyers - self.min_buyers + 1))
        k = self.items[t % len(self.items)]
        return gen_instance(InstanceGenConfig(n, self.edge_probability, self.values, k, seed))


def _run_trial(args) -> dict:
    camp, t = args
    net = camp.instance(t)
    k = net.item_count
    tag = f"trial {t}"
    res = {"trial": t, "checked": 1, "deviations": 0, "violations": [], "failures": [], "net": net, "skip": False}
    if camp.kind in ("ic", "ir"):
        ic, ir = check_ic_ir(net, k, camp.values, instance=tag)
        rep = ic if camp.kind == "ic" else ir
        res["deviations"] = rep.checked_deviations
        res["violations"] = rep.violations
        res["failures"] = ic.failures
    elif camp.kind == "revenue":
        revenue, bound, ok = check_revenue_bound(net, k)
        res["skip"] = len(net.seller_neighbors) <= k
        out = run_gidm(net, truthful_profile(net), k)
        res["failures"] = decomposition_failures(out, tag)
        if not ok:
            res["failures"].append(f"{tag}: revenue {revenue} below bound {bound} or local VCG")
    elif camp.kind == "idm-equiv":
        if not check_idm_equivalence(net):
            res["failures"].append(f"{tag}: GIDM(K=1) differs from IDM")
        res["failures"] += decomposition_failures(run_gidm(net, truthful_profile(net), 1), tag)
    elif camp.kind == "no-diffusion":
        if not check_no_diffusion(net, k):
            res["failures"].append(f"{tag}: GIDM without diffusion differs from local (K+1)-price auction")
        if net.seller_neighbors:
            res["failures"] += decomposition_failures(run_gidm(net, no_diffusion_profile(net), k), tag)
    elif camp.kind == "critical-oracle":
        profile = truthful_profile(net) if t % 2 == 0 else random_profile(net, trial_seed(camp.seed, t) ^ 0x5DEECE66D)
        if not check_critical_oracle(net, profile):
            res["failures"].append(f"{tag}: dominator structure differs from removal oracle")
    elif camp.kind == "order-sensitivity":
        res["divergences"] = order_sensitivity(net, k)
    return res


def run_campaign(camp: Campaign, jobs: Optional[int] = None) -> dict:
    """Run a campaign; the returned report is deterministic given the campaign parameters."""
    jobs = default_jobs() if jobs is None else jobs
    results = []
    t = 0
    wanted = camp.trials
    counted = 0
    while counted < wanted:
        batch = [(camp, t + j) for j in range(max(wanted - counted, 1))]
        t += len(batch)
        if jobs > 1:
            with ProcessPoolExecutor(jobs) as pool:
                chunk = list(pool.map(_run_trial, batch))
        else:
            chunk = [_run_trial(b) for b in batch]
        for r in chunk:
            results.append(r)
            # the revenue campaign only counts instances where the bound is non-trivial
            if not (camp.kind == "revenue" and r["skip"]):
                counted += 1
            if counted >= wanted:
                break
    violations = sorted((v for r in results for v in r["violations"]), key=Violation.sort_key)
    failures = [f for r in results for f in r["failures"]]
    report = {
        "campaign": camp.kind,
        "trials": camp.trials,
        "instances_run": len(results),
        "max_buyers": camp.max_buyers,
        "items": list(camp.items),
        "seed": camp.seed,
        "edge_probability": camp.edge_probability,
        "values": [fileformat.format_value(v) for v in camp.values],
        "checked_deviations": sum(r["deviations"] for r in results),
        "violations": [v.as_dict() for v in violations],
        "failures": failures,
        "max_gain": fileformat.format_value(max((v.gain for v in violations), default=0)),
    }
    if camp.kind == "revenue":
        report["instances_with_competition"] = sum(1 for r in results if not r["skip"])
    if camp.kind == "order-sensitivity":
        report["divergences"] = [{"trial": r["trial"], **d} for r in results for d in r.get("divergences", [])]
    bad_trials = sorted({int(v.instance.split()[-1]) for v in violations} |
                        {r["trial"] for r in results if r["failures"]})
    if bad_trials:
        first = next(r for r in results if r["trial"] == bad_trials[0])
        report["witness"] = {"trial": first["trial"], "network": json.loads(fileformat.dumps(first["net"]))}
    report["ok"] = not violations and not failures
    return report
