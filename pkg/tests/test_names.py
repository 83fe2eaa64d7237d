import ipaddress

import pytest
from hypothesis import given, strategies as st

from minet.names import (
    ContentName,
    ForwardingInfo,
    IdKind,
    Identifier,
    ParseError,
    parse_identifier,
)


def test_content_name_parse_format():
    name = ContentName.parse("/videos/movie-7/chunk/0")
    assert name.components == ("videos", "movie-7", "chunk", "0")
    assert name.text == "/videos/movie-7/chunk/0"
    assert len(name) == 4


def test_content_name_prefixes():
    name = ContentName.parse("/a/b/c")
    assert name.prefix(1).text == "/a"
    assert name.prefix(3) == name
    assert name.prefix_texts() == ["/a", "/a/b", "/a/b/c"]
    assert name.prefix(1).is_prefix_of(name)
    assert not name.is_prefix_of(name.prefix(2))
    with pytest.raises(ValueError):
        name.prefix(0)
    with pytest.raises(ValueError):
        name.prefix(4)


@pytest.mark.parametrize("bad", ["", "a/b", "/", "/a//b", "//"])
def test_content_name_rejects(bad):
    with pytest.raises(ParseError):
        ContentName.parse(bad)


def test_identifier_parse_variants():
    cid = parse_identifier("content:/a/b")
    assert cid.kind is IdKind.CONTENT and cid.value == ContentName.parse("/a/b")
    iid = parse_identifier("id:alice")
    assert iid.kind is IdKind.IDENTITY and iid.value == "alice"
    gid = parse_identifier("geo:cn.gd.sz")
    assert gid.kind is IdKind.GEO
    ip4 = parse_identifier("ip:10.0.0.1")
    assert ip4.value == ipaddress.ip_address("10.0.0.1")
    ip6 = parse_identifier("ip:2001:db8::1")
    assert ip6.value == ipaddress.ip_address("2001:db8::1")


@pytest.mark.parametrize("bad", ["foo:/a", "alice", "ip:999.0.0.1", "id:", "content:a"])
def test_identifier_rejects(bad):
    with pytest.raises(ParseError):
        parse_identifier(bad)


@given(st.lists(st.text(alphabet=st.characters(blacklist_characters="/",
                                               blacklist_categories=("Cs",)),
                        min_size=1, max_size=8),
                min_size=1, max_size=6))
def test_content_name_round_trip(comps):
    name = ContentName(tuple(comps))
    assert ContentName.parse(name.text) == name


@given(st.sampled_from(["id", "geo"]),
       st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")),
               min_size=1, max_size=12))
def test_identifier_round_trip(scheme, body):
    text = f"{scheme}:{body}"
    parsed = parse_identifier(text)
    assert parse_identifier(parsed.text) == parsed


def test_identifier_hashable_and_str():
    a = Identifier.ip("10.0.0.1")
    b = parse_identifier("ip:10.0.0.1")
    assert a == b and hash(a) == hash(b)
    assert str(a) == "ip:10.0.0.1"
    assert str(Identifier.content("/x/y")) == "content:/x/y"


def test_forwarding_info_validation():
    assert ForwardingInfo(3).face_id == 3
    with pytest.raises(ValueError):
        ForwardingInfo(-1)
