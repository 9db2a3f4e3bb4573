"""Tests for graph records, evidence weights and row normalization."""

import numpy as np
import pytest

from trustprop.errors import ValidationError
from trustprop.graph import (
    Agent,
    Edge,
    WeightConfig,
    blind_proxy,
    flag_weight,
    normalize,
    raw_weight,
)

E2 = np.array([1.0, 0.0])


def make_agent(agent_id, profile=None, owner_key=None, archetype="active"):
    p = E2 if profile is None else np.asarray(profile, dtype=np.float64)
    return Agent(
        id=agent_id,
        primary_domain="d",
        profile=p,
        teleport=0.1 * p,
        exogenous=np.zeros_like(p),
        archetype=archetype,
        owner_key=owner_key,
    )


def labeled(sender, receiver, base=1.0, content=E2, payment=False, confidence=None):
    return Edge(
        sender=sender,
        receiver=receiver,
        kind="labeled",
        base_weight=base,
        content=content,
        payment=payment,
        confidence=confidence,
    )


# ---------------------------------------------------------------- records


def test_agent_rejects_non_unit_profile():
    with pytest.raises(ValidationError):
        make_agent("a", profile=[2.0, 0.0])


def test_agent_rejects_mismatched_prior_dims():
    with pytest.raises(ValidationError):
        Agent(
            id="a",
            primary_domain="d",
            profile=E2,
            teleport=np.zeros(3),
            exogenous=np.zeros(2),
        )


def test_agent_rejects_unknown_archetype_and_empty_id():
    with pytest.raises(ValidationError):
        make_agent("a", archetype="wizard")
    with pytest.raises(ValidationError):
        make_agent("")


def test_edge_kind_contracts():
    # labeled needs unit content, blind and flag must not carry content
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="labeled")
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="labeled", content=[3.0, 0.0])
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="blind", content=E2)
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="flag", content=E2, severity=0.5)
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="mystery")


def test_edge_severity_contracts():
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="flag")  # severity required
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="flag", severity=1.5)
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="b", kind="labeled", content=E2, severity=0.5)
    # flag edges may target the reporter's own id? no-self rule covers only
    # labeled/blind; a flag against oneself is odd but not structural.
    Edge(sender="a", receiver="b", kind="flag", severity=0.0)


def test_edge_rejects_self_loops_and_bad_confidence():
    with pytest.raises(ValidationError):
        labeled("a", "a")
    with pytest.raises(ValidationError):
        Edge(sender="a", receiver="a", kind="blind")
    with pytest.raises(ValidationError):
        labeled("a", "b", confidence=1.2)


# ---------------------------------------------------------------- weights


def test_raw_weight_payment_triples():
    cfg = WeightConfig()
    assert raw_weight(labeled("a", "b", payment=True), cfg, False) == pytest.approx(3.0)
    assert raw_weight(labeled("a", "b"), cfg, False) == pytest.approx(1.0)


def test_raw_weight_blind_discount():
    cfg = WeightConfig()
    e = Edge(sender="a", receiver="b", kind="blind")
    assert raw_weight(e, cfg, False) == pytest.approx(0.3)


def test_raw_weight_stacks_all_multipliers():
    cfg = WeightConfig()
    e = Edge(sender="a", receiver="b", kind="blind", base_weight=2.0, payment=True)
    assert raw_weight(e, cfg, True) == pytest.approx(2.0 * 3.0 * 0.3 * 0.1)


def test_raw_weight_rejects_flags():
    with pytest.raises(ValidationError):
        raw_weight(Edge(sender="a", receiver="b", kind="flag", severity=0.5), WeightConfig(), False)


def test_flag_weight_verified_and_zero_severity():
    cfg = WeightConfig()
    hot = Edge(sender="a", receiver="b", kind="flag", severity=0.95, verified=True)
    assert flag_weight(hot, 1.0, cfg) == pytest.approx(0.95 * 6.0)
    cold = Edge(sender="a", receiver="b", kind="flag", severity=0.0, verified=True)
    assert flag_weight(cold, 1.0, cfg) == 0.0
    assert flag_weight(hot, 0.5, cfg) == pytest.approx(0.95 * 6.0 * 0.5)
    with pytest.raises(ValidationError):
        flag_weight(hot, -0.1, cfg)


def test_weight_config_validation():
    with pytest.raises(ValidationError):
        WeightConfig(payment_multiplier=0.5)
    with pytest.raises(ValidationError):
        WeightConfig(blind_discount=0.0)
    with pytest.raises(ValidationError):
        WeightConfig(same_owner_discount=1.5)
    with pytest.raises(ValidationError):
        WeightConfig(verified_flag_multiplier=0.9)


def test_blind_proxy_is_normalized_midpoint():
    a = make_agent("a", profile=[1.0, 0.0])
    b = make_agent("b", profile=[0.0, 1.0])
    proxy = blind_proxy(a, b)
    expected = np.array([1.0, 1.0]) / np.sqrt(2.0)
    np.testing.assert_allclose(proxy, expected, atol=1e-12)


def test_blind_proxy_antipodal_falls_back_to_sender():
    a = make_agent("a", profile=[1.0, 0.0])
    b = make_agent("b", profile=[-1.0, 0.0])
    np.testing.assert_array_equal(blind_proxy(a, b), a.profile)


# ---------------------------------------------------------------- normalize


def test_normalize_rows_sum_to_one_or_zero():
    agents = [make_agent(x) for x in "abcd"]
    edges = [
        labeled("a", "b", base=3.0),
        labeled("a", "c", base=1.0),
        Edge(sender="b", receiver="a", kind="blind"),
    ]
    g = normalize(agents, edges)
    sums = g.pos_row_sums()
    np.testing.assert_allclose(sums[:2], 1.0, atol=1e-12)
    np.testing.assert_allclose(sums[2:], 0.0, atol=1e-12)


def test_normalize_new_edge_dilutes_existing_weights():
    agents = [make_agent(x) for x in "abcd"]
    base_edges = [labeled("a", "b", base=3.0), labeled("a", "c", base=1.0)]
    before = normalize(agents, base_edges)
    after = normalize(agents, base_edges + [labeled("a", "d", base=1.0)])
    np.testing.assert_allclose(before.pos_weight, [0.75, 0.25], atol=1e-12)
    np.testing.assert_allclose(after.pos_weight, [0.6, 0.2, 0.2], atol=1e-12)
    assert np.all(after.pos_weight[:2] < before.pos_weight)


def test_normalize_same_owner_requires_matching_keys():
    a = make_agent("a", owner_key="k1")
    b = make_agent("b", owner_key="k1")
    c = make_agent("c", owner_key="k2")
    d = make_agent("d")  # no owner recorded
    g = normalize([a, b, c, d], [labeled("a", "b"), labeled("a", "c"), labeled("a", "d")])
    # raw weights 0.1, 1, 1 -> normalized
    np.testing.assert_allclose(g.pos_weight, np.array([0.1, 1.0, 1.0]) / 2.1, atol=1e-12)


def test_normalize_keeps_parallel_edges_separate():
    a = make_agent("a")
    b = make_agent("b")
    c1 = np.array([1.0, 0.0])
    c2 = np.array([0.0, 1.0])
    g = normalize([a, b], [labeled("a", "b", content=c1), labeled("a", "b", content=c2)])
    assert g.n_pos_edges == 2
    np.testing.assert_allclose(g.pos_weight, [0.5, 0.5], atol=1e-12)
    np.testing.assert_array_equal(g.pos_content[0], c1)
    np.testing.assert_array_equal(g.pos_content[1], c2)


def test_normalize_blind_edges_get_proxy_content():
    a = make_agent("a", profile=[1.0, 0.0])
    b = make_agent("b", profile=[0.0, 1.0])
    g = normalize([a, b], [Edge(sender="a", receiver="b", kind="blind")])
    assert g.pos_blind[0]
    np.testing.assert_allclose(
        g.pos_content[0], np.array([1.0, 1.0]) / np.sqrt(2.0), atol=1e-12
    )


def test_normalize_flag_rows_per_reporter():
    agents = [make_agent(x) for x in "abc"]
    edges = [
        Edge(sender="a", receiver="b", kind="flag", severity=0.8),
        Edge(sender="a", receiver="c", kind="flag", severity=0.2),
    ]
    g = normalize(agents, edges, reporter_reputations={"a": 2.0})
    assert g.n_neg_edges == 2
    np.testing.assert_allclose(g.neg_weight, [0.8, 0.2], atol=1e-12)
    np.testing.assert_allclose(g.neg_row_sums()[0], 1.0, atol=1e-12)


def test_normalize_drops_zero_weight_flags():
    agents = [make_agent(x) for x in "ab"]
    g = normalize(agents, [Edge(sender="a", receiver="b", kind="flag", severity=0.0)])
    assert g.n_neg_edges == 0


def test_normalize_missing_reporter_reputation_defaults_to_one():
    agents = [make_agent(x) for x in "ab"]
    g = normalize(agents, [Edge(sender="a", receiver="b", kind="flag", severity=0.5)])
    assert g.n_neg_edges == 1


def test_normalize_confidence_nan_where_absent():
    agents = [make_agent(x) for x in "abc"]
    g = normalize(agents, [labeled("a", "b", confidence=0.7), labeled("a", "c")])
    assert g.pos_confidence[0] == pytest.approx(0.7)
    assert np.isnan(g.pos_confidence[1])


def test_normalize_rejects_bad_references():
    agents = [make_agent("a"), make_agent("b")]
    with pytest.raises(ValidationError):
        normalize(agents, [labeled("a", "zz")])
    with pytest.raises(ValidationError):
        normalize([make_agent("a"), make_agent("a")], [])
    with pytest.raises(ValidationError):
        normalize([], [])


def test_normalize_stacks_priors_in_agent_order():
    a = make_agent("a", profile=[1.0, 0.0])
    b = make_agent("b", profile=[0.0, 1.0])
    g = normalize([a, b], [])
    np.testing.assert_array_equal(g.teleport, np.vstack([a.teleport, b.teleport]))
    assert g.teleport.shape == (2, 2)
    assert g.index == {"a": 0, "b": 1}
