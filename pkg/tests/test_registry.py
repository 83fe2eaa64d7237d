import dataclasses

import pytest

from minet.names import ContentName, ForwardingInfo, Identifier
from minet.registry import (
    ComplianceRejected,
    ConsensusFailed,
    Duplicate,
    Hierarchy,
    RegistrationRequest,
    ResolutionOutcome,
    read_record_store,
    record_from_dict,
    record_to_dict,
    request_from_dict,
    request_to_dict,
    resolution_to_dict,
)

ALICE = Identifier.identity("alice")
FWD = ForwardingInfo(face_id=7, metric=1)


def content_request(name: str, face: int = 7) -> RegistrationRequest:
    return RegistrationRequest(Identifier.content(name), ALICE,
                               forwarding=ForwardingInfo(face_id=face))


def test_default_hierarchy_shape():
    hier = Hierarchy.default()
    names = sorted(d.name.text for d in hier.domains())
    assert names == [
        "/top", "/top/cn", "/top/cn/bj", "/top/cn/gd",
        "/top/eu", "/top/eu/de", "/top/eu/es", "/top/eu/fr",
        "/top/us", "/top/us/ca", "/top/us/ny",
    ]
    gd = hier.domain("/top/cn/gd")
    assert gd.parent is hier.domain("/top/cn")
    assert gd.parent.parent is hier.root
    assert gd.parent.parent.parent is None


def test_register_commits_record_chain_and_fib():
    hier = Hierarchy.default()
    cn = hier.domain("/top/cn")
    record = hier.register(cn, content_request("/video/v1"))
    assert record.status == "committed"
    assert record.height == 1
    assert record.domain == cn.name
    assert cn.chain.height == 1
    group = cn.chain.groups[1]
    assert {t.id for b in group.body for t in b.txs} == {record.tx_id}
    hit = cn.fib.lookup_lpm(ContentName.parse("/video/v1"))
    assert hit.hit and hit.forwarding.face_id == 7


def test_compliance_rejections():
    hier = Hierarchy.default()
    cn = hier.domain("/top/cn")
    with pytest.raises(ComplianceRejected, match="forwarding"):
        hier.register(cn, RegistrationRequest(
            Identifier.content("/video/v1"), ALICE))
    with pytest.raises(ComplianceRejected, match="owner"):
        hier.register(cn, RegistrationRequest(
            Identifier.content("/video/v1"), Identifier.geo("cn/gd"),
            forwarding=FWD))
    with pytest.raises(ComplianceRejected, match="binds_to target"):
        hier.register(cn, RegistrationRequest(
            Identifier.ip("10.0.0.1"), ALICE,
            binds_to=ContentName.parse("/video/v1")))
    assert cn.chain.height == 0 and not cn.offchain


def test_duplicate_rejected_from_any_domain():
    hier = Hierarchy.default()
    hier.register("/top/cn/gd", content_request("/video/v1"))
    heights = {d.name: d.chain.height for d in hier.domains()}
    for origin in ("/top/cn/gd", "/top/us", "/top"):
        with pytest.raises(Duplicate, match="/top/cn/gd"):
            hier.register(origin, content_request("/video/v1"))
    assert {d.name: d.chain.height for d in hier.domains()} == heights


def test_resolve_local():
    hier = Hierarchy.default()
    hier.register("/top/cn", content_request("/video/v1"))
    res = hier.resolve("/top/cn", Identifier.content("/video/v1"))
    assert res.outcome is ResolutionOutcome.RESOLVED
    assert [h.text for h in res.hops] == ["/top/cn"]
    assert res.forwarding.face_id == 7
    assert res.record.status == "committed"


def test_resolve_cross_domain_directed_descent():
    hier = Hierarchy.default()
    hier.register("/top/cn/gd", content_request("/top/cn/gd/video/v1"))
    res = hier.resolve("/top/us", Identifier.content("/top/cn/gd/video/v1"))
    assert res.outcome is ResolutionOutcome.RESOLVED
    assert [h.text for h in res.hops] == [
        "/top/us", "/top", "/top/cn", "/top/cn/gd"]
    assert res.forwarding.face_id == 7


def test_resolve_breadth_first_for_unprefixed_names():
    hier = Hierarchy.default()
    hier.register("/top/eu/fr", content_request("/video/v9", face=3))
    res = hier.resolve("/top/cn/gd", Identifier.content("/video/v9"))
    assert res.outcome is ResolutionOutcome.RESOLVED
    texts = [h.text for h in res.hops]
    assert texts[:3] == ["/top/cn/gd", "/top/cn", "/top"]
    assert texts[-1] == "/top/eu/fr"
    assert len(texts) == len(set(texts))


def test_resolve_identity_record_without_forwarding():
    hier = Hierarchy.default()
    hier.register("/top/us/ca", RegistrationRequest(ALICE, ALICE))
    res = hier.resolve("/top/cn", ALICE)
    assert res.outcome is ResolutionOutcome.RESOLVED
    assert res.record.identifier == ALICE
    assert res.forwarding is None
    assert res.hops[0].text == "/top/cn"


def test_ip_identifier_proxies_when_unknown_locally():
    hier = Hierarchy.default()
    res = hier.resolve("/top/cn/gd", Identifier.ip("203.0.113.9"))
    assert res.outcome is ResolutionOutcome.PROXIED_TO_IP
    assert [h.text for h in res.hops] == ["/top/cn/gd"]
    assert "IP proxy" in res.message


def test_ip_binding_resolves_only_where_bound():
    hier = Hierarchy.default()
    hier.register("/top/cn", content_request("/video/v1"))
    ip = Identifier.ip("10.1.2.3")
    hier.register("/top/cn", RegistrationRequest(
        ip, ALICE, binds_to=ContentName.parse("/video/v1")))
    local = hier.resolve("/top/cn", ip)
    assert local.outcome is ResolutionOutcome.RESOLVED
    assert local.forwarding.face_id == 7
    remote = hier.resolve("/top/us", ip)
    assert remote.outcome is ResolutionOutcome.PROXIED_TO_IP


def test_not_found_exhausts_tree_with_nonempty_hops():
    hier = Hierarchy.default()
    res = hier.resolve("/top/cn/gd", Identifier.content("/no/such/thing"))
    assert res.outcome is ResolutionOutcome.NOT_FOUND
    texts = [h.text for h in res.hops]
    assert texts[0] == "/top/cn/gd"
    assert len(texts) == 11 and len(set(texts)) == 11
    assert "not found" in res.message


def test_consensus_failure_leaves_no_trace():
    hier = Hierarchy.default()
    gd = hier.domain("/top/cn/gd")
    gd.down_supervisors.add(gd.supervisors[-1])
    with pytest.raises(ConsensusFailed, match="stalled"):
        hier.register(gd, content_request("/video/v1"))
    assert gd.chain.height == 0
    assert not gd.offchain and not hier.committed
    gd.down_supervisors.clear()
    record = hier.register(gd, content_request("/video/v1"))
    assert record.height == 1


def test_cache_is_pass_through():
    hier = Hierarchy.default()
    hier.register("/top/cn/gd", content_request("/top/cn/gd/video/v1"))
    first = hier.resolve("/top/us", Identifier.content("/top/cn/gd/video/v1"))
    assert len(first.hops) == 4
    second = hier.resolve("/top/us", Identifier.content("/top/cn/gd/video/v1"))
    assert second.outcome is ResolutionOutcome.RESOLVED
    assert len(second.hops) == 1
    assert second.message == "served from cache"
    # the querying domain's own table stays untouched
    assert not hier.domain("/top/us").fib.lookup_lpm(
        ContentName.parse("/top/cn/gd/video/v1")).hit


def test_record_store_roundtrip(tmp_path):
    store = tmp_path / "records.jsonl"
    hier = Hierarchy.default(store_path=store)
    hier.register("/top/cn", content_request("/video/v1"))
    hier.register("/top/us", RegistrationRequest(ALICE, ALICE))
    hier.register("/top/eu/de", RegistrationRequest(
        Identifier.geo("eu/de/berlin"), ALICE))
    records = read_record_store(store)
    assert len(records) == 3
    assert records[0] == hier.domain("/top/cn").offchain[
        Identifier.content("/video/v1")]
    assert {r.identifier.kind.value for r in records} == {
        "content", "id", "geo"}


def test_verify_consistency():
    hier = Hierarchy.default()
    hier.register("/top/cn", content_request("/video/v1"))
    hier.register("/top/us/ny", RegistrationRequest(ALICE, ALICE))
    assert hier.verify_consistency() == []
    cn = hier.domain("/top/cn")
    ident = Identifier.content("/video/v1")
    cn.offchain[ident] = dataclasses.replace(cn.offchain[ident], tx_id=12345)
    problems = hier.verify_consistency()
    assert any("transaction missing" in p for p in problems)


def test_request_and_resolution_json_schema():
    req = RegistrationRequest(
        Identifier.ip("10.0.0.8"), ALICE,
        binds_to=ContentName.parse("/video/v1"))
    assert request_from_dict(request_to_dict(req)) == req
    req2 = content_request("/a/b", face=9)
    assert request_from_dict(request_to_dict(req2)) == req2

    hier = Hierarchy.default()
    rec = hier.register("/top/cn", content_request("/video/v1"))
    assert record_from_dict(record_to_dict(rec)) == rec
    res = hier.resolve("/top/us", Identifier.content("/video/v1"))
    blob = resolution_to_dict(res)
    assert blob["outcome"] == "resolved"
    assert blob["hops"][0] == "/top/us"
    assert blob["record"]["identifier"] == "content:/video/v1"
    assert blob["forwarding"]["face_id"] == 7
