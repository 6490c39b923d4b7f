from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusion_auction.mechanisms import (
    ORIGINAL,
    NoParticipants,
    payment_decomposition,
    run_gidm,
    run_idm,
    run_vcg_local,
)
from diffusion_auction.network import SELLER, Network, Report, truthful_profile
from diffusion_auction.verify import (
    InstanceGenConfig,
    check_ic,
    decomposition_failures,
    gen_instance,
    telescoping_remainder,
)

from .conftest import names


def star(values, k=1):
    return Network.from_edges(values, [(SELLER, i) for i in values], k)


def by_label(net, mapping):
    return {net.label(i): v for i, v in mapping.items() if v}


# ------------------------------------------------------------------ example


def test_idm_on_example(fig):
    net, prof, _ = fig
    out = run_idm(net, prof)
    assert names(net, out.winners) == {"K"}
    assert by_label(net, out.payment) == {"C": -1, "K": 17}
    assert out.revenue == 16


def test_removal_prices_on_example(fig):
    from diffusion_auction.network import participants

    net, prof, ids = fig
    best = {x: max(prof[j].value for j in participants(net, prof, removed=ids[x])) for x in "CKY"}
    assert best == {"C": 16, "K": 17, "Y": 19}
    assert max(net.valuation(i) for i in net.buyers) == 20
    assert max(net.valuation(i) for i in net.seller_neighbors) == 7


def test_gidm_walkthrough_on_example(fig):
    net, prof, ids = fig
    out = run_gidm(net, prof, 5)
    label = net.label
    gives = [(label(e["from"]), label(e["to"]), e["items"]) for e in out.trace if e["event"] == "give"]
    assert ("s", "C", 3) in gives and ("s", "D", 2) in gives
    snaps = out.state.snapshots
    d, h, c = snaps[ids["D"]], snaps[ids["H"]], snaps[ids["C"]]
    assert d.wins and label(out.state.get_from[ids["D"]]) == "M"
    assert names(net, d.closure) == set("HIJMO")
    assert h.wins and names(net, h.received) == {"D"} and names(net, h.out) == {"M"}
    assert not c.wins and names(net, c.closure) == set("FGKLPQY")
    assert names(net, c.sw_closure.winners) == set("HMDAE")
    assert out.state.stack == []
    assert [label(j) for j in out.state.pushed_by[ids["C"]]] == ["G", "K"]
    assert ("C", "K", 2) in gives and ("C", "G", 1) in gives


def test_gidm_payments_on_example(fig):
    net, prof, _ = fig
    out = run_gidm(net, prof, 5)
    # by hand: H pays 85 - (86 - 16) = 15, D pays 81 - (83 - 14) = 12, C pays 55 - 62 = -7
    assert by_label(net, out.payment) == {"C": -7, "D": 12, "G": 14, "H": 15, "K": 13, "Y": 14}
    assert names(net, out.winners) == set("DGHKY")
    assert out.revenue == 61


def test_local_auction_on_example(fig):
    net, _, _ = fig
    assert run_vcg_local(net, 1).revenue == 6


# ------------------------------------------------------------ small networks


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=7), st.integers(1, 4))
def test_star_is_a_uniform_price_auction(vals, k):
    values = dict(enumerate(vals))
    net = star(values, k)
    order = sorted(values, key=lambda i: (-values[i], i))
    price = values[order[k]] if len(order) > k else 0
    expect_pay = {i: (price if i in order[:k] else 0) for i in values}
    for out in (run_gidm(net, truthful_profile(net), k), run_vcg_local(net, k)):
        assert out.winners == set(order[:k])
        assert out.payment == expect_pay
    if k == 1:
        idm = run_idm(net, truthful_profile(net))
        assert idm.payment == expect_pay


def test_path_with_side_branch():
    # s - 1 - 2 - 3 and s - 4: buyer 3 wins; nobody above her is rewarded since 4 sets the price anyway
    net = Network.from_edges({1: 1, 2: 2, 3: 5, 4: 3}, [(SELLER, 1), (1, 2), (2, 3), (SELLER, 4)])
    for out in (run_idm(net, truthful_profile(net)), run_gidm(net, truthful_profile(net), 1)):
        assert out.winners == {3}
        assert out.payment == {1: 0, 2: 0, 3: 3, 4: 0}
        assert out.revenue == 3


def test_intermediary_rewarded_for_bringing_in_a_sibling():
    # s - 1, 1 - 2, 1 - 3, s - 4: 3 wins; without 1 the best bid is 2, without 3 it is 3, so 1 earns 1
    net = Network.from_edges({1: 1, 2: 3, 3: 5, 4: 2}, [(SELLER, 1), (1, 2), (1, 3), (SELLER, 4)])
    for out in (run_idm(net, truthful_profile(net)), run_gidm(net, truthful_profile(net), 1)):
        assert out.winners == {3}
        assert out.payment == {1: -1, 2: 0, 3: 3, 4: 0}
        assert out.revenue == 2


def test_intermediary_keeps_the_item_without_outside_competition():
    # s - 1 - 2, values 1 and 5: without 2 the best remaining bidder is 1 herself
    net = Network.from_edges({1: 1, 2: 5}, [(SELLER, 1), (1, 2)])
    out = run_idm(net, truthful_profile(net))
    assert out.winners == {1}
    assert out.payment == {1: 0, 2: 0}


def test_local_auction_takes_k_plus_first_price():
    net = star({1: 5, 2: 4, 3: 3, 4: 2}, 2)
    out = run_vcg_local(net)
    assert out.winners == {1, 2}
    assert out.revenue == 6


def test_local_auction_ignores_buyers_beyond_the_seller():
    net = Network.from_edges({1: 1, 2: 9}, [(SELLER, 1), (1, 2)])
    out = run_vcg_local(net, 1)
    assert out.winners == {1} and out.revenue == 0


def test_no_participants_warns_and_sells_nothing():
    net = Network.from_edges({1: 3}, [])
    for run in (lambda: run_gidm(net, truthful_profile(net), 2), lambda: run_idm(net, truthful_profile(net)),
                lambda: run_vcg_local(net, 1)):
        with pytest.warns(NoParticipants):
            out = run()
        assert out.winners == frozenset() and out.revenue == 0


def test_nil_buyers_are_ignored():
    net = Network.from_edges({1: 2, 2: 9, 3: 4}, [(SELLER, 1), (1, 2), (SELLER, 3)])
    prof = truthful_profile(net)
    prof[1] = Report(2, frozenset())
    prof[2] = None
    out = run_gidm(net, prof, 1)
    assert out.winners == {3} and out.payment[2] == 0


def test_float_valuations():
    net = Network.from_edges({1: 1.0, 2: 3.5, 3: 5.25, 4: 2.5}, [(SELLER, 1), (1, 2), (1, 3), (SELLER, 4)])
    out = run_gidm(net, truthful_profile(net), 1)
    assert out.winners == {3}
    assert out.payment[3] == pytest.approx(3.5) and out.payment[1] == pytest.approx(-1.0)


def test_exact_rational_valuations():
    net = Network.from_edges({1: Fraction(1, 3), 2: Fraction(2, 3)}, [(SELLER, 1), (SELLER, 2)])
    out = run_gidm(net, truthful_profile(net), 1)
    assert out.payment[2] == Fraction(1, 3)


def test_reversed_sibling_order_still_balances_budget(fig):
    net, prof, _ = fig
    rev = run_gidm(net, prof, 5, sibling_order=lambda node, kids: sorted(kids, reverse=True))
    assert rev.winners and rev.revenue >= 0


def test_unknown_constraint_mode():
    net = star({1: 1})
    with pytest.raises(ValueError):
        run_gidm(net, truthful_profile(net), constraints="relaxed")


# ----------------------------------------------------------- decomposition


def _cases(count):
    for t in range(count):
        net = gen_instance(InstanceGenConfig(2 + t % 9, (0.25, 0.4, 0.6)[t % 3], range(10), 1 + t % 3, t))
        yield t, net


def test_payment_terms_on_example(fig):
    net, prof, ids = fig
    out = run_gidm(net, prof, 5)
    terms = payment_decomposition(out)
    assert decomposition_failures(out) == []
    for i, t in terms.items():
        assert t.first - t.second == out.payment[i]
        assert len(t.still) == 5 - t.items
    assert telescoping_remainder(out) >= 0
    assert names(net, terms[ids["H"]].still) == set("DGKY")


def test_payment_terms_on_random_instances():
    for t, net in _cases(300):
        out = run_gidm(net, truthful_profile(net))
        assert decomposition_failures(out, f"case {t}") == []


def test_idm_and_single_item_gidm_agree():
    for t, net in _cases(200):
        prof = truthful_profile(net)
        assert run_gidm(net, prof, 1).same_result(run_idm(net, prof)), t


def test_gidm_never_sells_more_than_k():
    for t, net in _cases(200):
        out = run_gidm(net, truthful_profile(net))
        assert len(out.winners) <= net.item_count


def test_gidm_requires_its_pass_state_for_decomposition():
    net = star({1: 1, 2: 2})
    with pytest.raises(ValueError):
        payment_decomposition(run_vcg_local(net))


# --------------------------------------------------- incentive counterexample


def overbid_network():
    # s - a; a - b, a - c; b - d; c - e with values a 1, b 5/2, c 2, d 3/2, e 3 and two items
    return Network.from_edges({1: 1, 2: Fraction(5, 2), 3: 2, 4: Fraction(3, 2), 5: 3},
                              [(SELLER, 1), (1, 2), (1, 3), (2, 4), (3, 5)], 2, labels=dict(zip(range(1, 6), "abcde")))


def test_overbid_that_flips_a_parent_decision_pays_off():
    """A buyer's report moves her critical parent's top-K set, so it can change whether that parent wins.

    Truthfully c ranks below b, the parent a is allowed to keep an item, and
    c must then compete with b for the one remaining slot and loses. By
    reporting 3 c displaces b from a's top two critical children, a no
    longer wins, and c takes an item at price 3/2 < 2.
    """
    net = overbid_network()
    truth = truthful_profile(net)
    honest = run_gidm(net, truth)
    assert honest.winners == {1, 5} and honest.utility(3, 2) == 0
    lie = dict(truth)
    lie[3] = Report(3, truth[3].invited)
    dev = run_gidm(net, lie)
    assert dev.winners == {3, 5}
    assert dev.payment[3] == Fraction(3, 2)
    assert dev.utility(3, 2) == Fraction(1, 2)
    report = check_ic(net, 2, range(6))
    assert report.violations and report.max_gain == Fraction(1, 2)
    assert {v.buyer for v in report.violations} == {3}


def test_overbid_pays_off_under_superseded_constraints_too():
    net = overbid_network()
    assert check_ic(net, 2, range(6), constraints=ORIGINAL).violations
