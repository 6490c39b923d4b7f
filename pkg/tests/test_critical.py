import itertools

import pytest

from diffusion_auction.critical import NotAParticipant, critical_structure, critical_structure_oracle, precedes
from diffusion_auction.network import SELLER, Network, truthful_profile
from diffusion_auction.verify import InstanceGenConfig, gen_instance, random_profile

from .conftest import names


def test_example_critical_sets(fig):
    net, prof, ids = fig
    cs = critical_structure(net, prof)
    assert names(net, cs.children_of(ids["D"])) == set("HIJMO")
    assert names(net, cs.children_of(ids["C"])) == set("EFGKLYPQ")
    assert names(net, cs.parents_of(ids["Y"])) == set("CK")
    assert [net.label(j) for j in cs.parents_of(ids["P"])] == ["C", "K", "Y"]
    assert cs.parents_of(ids["A"]) == () and cs.children_of(ids["A"]) == frozenset()


def test_example_partial_order(fig):
    net, prof, ids = fig
    cs = critical_structure(net, prof)
    assert precedes(cs, ids["D"], ids["M"])
    assert precedes(cs, ids["I"], ids["M"])
    assert precedes(cs, ids["D"], ids["I"])
    assert not precedes(cs, ids["M"], ids["D"])
    assert not precedes(cs, ids["H"], ids["J"])
    assert not precedes(cs, ids["D"], ids["D"])


def test_path_with_side_branch():
    # s - 1 - 2 - 3 and s - 4
    net = Network.from_edges({1: 1, 2: 2, 3: 5, 4: 3}, [(SELLER, 1), (1, 2), (2, 3), (SELLER, 4)])
    cs = critical_structure(net, truthful_profile(net))
    assert cs.parents_of(3) == (1, 2)
    assert cs.children_of(1) == {2, 3}
    assert cs.parents_of(4) == ()


def test_non_participant_is_an_error():
    net = Network.from_edges({1: 1, 2: 2}, [(SELLER, 1)])
    cs = critical_structure(net, truthful_profile(net))
    with pytest.raises(NotAParticipant):
        cs.parents_of(2)
    with pytest.raises(NotAParticipant):
        precedes(cs, 1, 2)


def test_seller_never_listed(fig):
    net, prof, _ = fig
    cs = critical_structure(net, prof)
    assert all(SELLER not in p for p in cs.parents.values())
    assert SELLER not in cs.children


def _instances(count, n):
    for t in range(count):
        p = (0.2, 0.35, 0.5)[t % 3]
        net = gen_instance(InstanceGenConfig(1 + t % n, p, range(10), 1, t))
        yield net, truthful_profile(net)
        yield net, random_profile(net, t)


def test_dominators_equal_deletion_oracle():
    for net, prof in _instances(150, 12):
        assert critical_structure(net, prof) == critical_structure_oracle(net, prof)


def test_partial_order_laws():
    for net, prof in _instances(50, 10):
        cs = critical_structure(net, prof)
        part = sorted(cs.participants)
        for i in part:
            assert not precedes(cs, i, i)
            ps = cs.parents_of(i)
            # the critical parents of a buyer form a chain, listed from the seller outward
            for a, b in zip(ps, ps[1:]):
                assert precedes(cs, a, b)
        for i, j in itertools.permutations(part, 2):
            if precedes(cs, i, j):
                assert not precedes(cs, j, i)
                for l in part:
                    if precedes(cs, j, l):
                        assert precedes(cs, i, l)


def test_backends_give_same_structure(fig):
    net, prof, _ = fig
    assert critical_structure(net, prof, backend="numpy") == critical_structure(net, prof, backend="numba")
    assert critical_structure_oracle(net, prof, backend="numpy") == critical_structure(net, prof)
