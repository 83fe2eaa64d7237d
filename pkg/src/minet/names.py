"""Content names and the identifier variants that share the network layer.

Canonical text forms carry a scheme prefix so files and CLI flags stay
unambiguous: ``content:/a/b``, ``id:alice``, ``geo:cn.gd.sz``,
``ip:10.0.0.1``.  Content-name components are opaque text that may not
be empty or contain ``/``; parse and format round-trip exactly.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from enum import Enum
from typing import Union

IpAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]


class ParseError(ValueError):
    """Malformed identifier or content-name text."""


@dataclass(frozen=True)
class ContentName:
    """Hierarchical name ``/c1/c2/.../cN``, N >= 1."""

    components: tuple[str, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.components, tuple):
            object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ParseError("content name needs at least one component")
        for comp in self.components:
            if not isinstance(comp, str) or not comp:
                raise ParseError("empty name component")
            if "/" in comp:
                raise ParseError(f"component contains separator: {comp!r}")

    @classmethod
    def parse(cls, text: str) -> "ContentName":
        if not text.startswith("/"):
            raise ParseError(f"content name must start with '/': {text!r}")
        return cls(tuple(text[1:].split("/")))

    @property
    def text(self) -> str:
        return "/" + "/".join(self.components)

    def prefix(self, k: int) -> "ContentName":
        """The length-k prefix, 1 <= k <= len(self)."""
        if not 1 <= k <= len(self.components):
            raise ValueError(f"prefix length {k} out of range 1..{len(self.components)}")
        return ContentName(self.components[:k])

    def prefix_texts(self) -> list[str]:
        """Canonical text of every prefix, shortest first."""
        out = []
        buf = ""
        for comp in self.components:
            buf = buf + "/" + comp
            out.append(buf)
        return out

    def is_prefix_of(self, other: "ContentName") -> bool:
        return self.components == other.components[: len(self.components)]

    def child(self, comp: str) -> "ContentName":
        return ContentName(self.components + (comp,))

    def __len__(self) -> int:
        return len(self.components)

    def __str__(self) -> str:
        return self.text


class IdKind(Enum):
    IDENTITY = "id"
    CONTENT = "content"
    GEO = "geo"
    IP = "ip"


@dataclass(frozen=True)
class Identifier:
    """One of the four identifier families, tagged by kind."""

    kind: IdKind
    value: Union[str, ContentName, IpAddress]

    @classmethod
    def identity(cls, name: str) -> "Identifier":
        if not name:
            raise ParseError("empty identity")
        return cls(IdKind.IDENTITY, name)

    @classmethod
    def content(cls, name: Union[str, ContentName]) -> "Identifier":
        if isinstance(name, str):
            name = ContentName.parse(name)
        return cls(IdKind.CONTENT, name)

    @classmethod
    def geo(cls, code: str) -> "Identifier":
        if not code:
            raise ParseError("empty geographic code")
        return cls(IdKind.GEO, code)

    @classmethod
    def ip(cls, addr: Union[str, IpAddress]) -> "Identifier":
        if isinstance(addr, str):
            try:
                addr = ipaddress.ip_address(addr)
            except ValueError as exc:
                raise ParseError(f"malformed IP address: {addr!r}") from exc
        return cls(IdKind.IP, addr)

    @classmethod
    def parse(cls, text: str) -> "Identifier":
        scheme, sep, rest = text.partition(":")
        if not sep:
            raise ParseError(f"missing scheme prefix: {text!r}")
        if scheme == "content":
            return cls.content(rest)
        if scheme == "id":
            return cls.identity(rest)
        if scheme == "geo":
            return cls.geo(rest)
        if scheme == "ip":
            return cls.ip(rest)
        raise ParseError(f"unknown scheme: {scheme!r}")

    @property
    def text(self) -> str:
        if self.kind is IdKind.CONTENT:
            return f"content:{self.value.text}"
        return f"{self.kind.value}:{self.value}"

    def __str__(self) -> str:
        return self.text


def parse_identifier(text: str) -> Identifier:
    """Parse any scheme-prefixed identifier text."""
    return Identifier.parse(text)


@dataclass(frozen=True)
class ForwardingInfo:
    """Next-hop choice attached to a real forwarding entry."""

    face_id: int
    metric: int = 0

    def __post_init__(self) -> None:
        if self.face_id < 0:
            raise ValueError("face_id must be non-negative")
