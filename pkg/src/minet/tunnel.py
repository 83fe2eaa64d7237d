"""IP-over-CCN tunnel gateways.

Conversion gateways sit between IP segments and content-centric (CCN)
segments.  Transport control signaling (SYN / SYN+ACK / ACK, FIN / ACK)
is carried verbatim inside Interest packets on every CCN segment it
crosses: connection establishment is a three-flight exchange, teardown a
four-flight exchange, in all four chain shapes

    ip-ccn-ip    endpoint A -ip- gateway -ccn- gateway -ip- endpoint B
    ip-ccn       endpoint A -ip- gateway -ccn- endpoint B
    ccn-ip       endpoint A -ccn- gateway -ip- endpoint B
    ccn-ip-ccn   endpoint A -ccn- gateway -ip- gateway -ccn- endpoint B

The data phase pushes payload segments (default 4 KiB) toward the peer
as payload-bearing Interests on CCN segments, one acknowledgment flight
per segment in the reverse direction (stop-and-wait), since the
underlying fabric offers no reliability of its own.

Everything runs in-process over a simulated chain; a node marked down
surfaces as a Timeout and the connection folds back to Closed.
"""

from __future__ import annotations

import hashlib
import ipaddress
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .names import ContentName

FLAG_SYN = 1
FLAG_ACK = 2
FLAG_FIN = 4
FLAG_RST = 8

_FLAG_NAMES = ((FLAG_SYN, "SYN"), (FLAG_ACK, "ACK"),
               (FLAG_FIN, "FIN"), (FLAG_RST, "RST"))

# one byte of flags, 32-bit seq and ack, two IPv4 addresses, two ports
_SIGNAL_STRUCT = struct.Struct("!BIIIIHH")
SIGNAL_WIRE_SIZE = _SIGNAL_STRUCT.size
assert SIGNAL_WIRE_SIZE == 21

SEGMENT_SIZE = 4096


class TunnelError(Exception):
    pass


class UnknownMir(TunnelError):
    pass


class Timeout(TunnelError):
    pass


class InvalidState(TunnelError):
    pass


def flag_names(flags: int) -> str:
    names = [n for bit, n in _FLAG_NAMES if flags & bit]
    return "+".join(names) if names else "DATA"


@dataclass(frozen=True)
class SignalingHeader:
    flags: int
    seq: int
    ack: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int

    def __post_init__(self) -> None:
        if not 0 <= self.flags <= 0xFF:
            raise ValueError("flags out of range")
        for f in (self.seq, self.ack):
            if not 0 <= f < 2**32:
                raise ValueError("seq/ack out of range")
        for p in (self.src_port, self.dst_port):
            if not 0 <= p < 2**16:
                raise ValueError("port out of range")
        ipaddress.IPv4Address(self.src_ip)
        ipaddress.IPv4Address(self.dst_ip)

    def encode(self) -> bytes:
        return _SIGNAL_STRUCT.pack(
            self.flags, self.seq, self.ack,
            int(ipaddress.IPv4Address(self.src_ip)),
            int(ipaddress.IPv4Address(self.dst_ip)),
            self.src_port, self.dst_port)

    @staticmethod
    def decode(data: bytes) -> "SignalingHeader":
        flags, seq, ack, src, dst, sp, dp = _SIGNAL_STRUCT.unpack(data)
        return SignalingHeader(flags, seq, ack,
                               str(ipaddress.IPv4Address(src)),
                               str(ipaddress.IPv4Address(dst)), sp, dp)


@dataclass(frozen=True)
class MirName:
    """A conversion gateway's name, mapped one-to-one to its address."""
    ccn_prefix: ContentName
    ip: str

    def __post_init__(self) -> None:
        ipaddress.IPv4Address(self.ip)


class MirRegistry:
    """Bijective prefix <-> address directory of conversion gateways."""

    def __init__(self) -> None:
        self._by_prefix: dict[ContentName, MirName] = {}
        self._by_ip: dict[str, MirName] = {}

    def register(self, mir: MirName) -> None:
        existing = self._by_prefix.get(mir.ccn_prefix)
        if existing is not None and existing != mir:
            raise ValueError(f"prefix {mir.ccn_prefix} already mapped")
        existing = self._by_ip.get(mir.ip)
        if existing is not None and existing != mir:
            raise ValueError(f"address {mir.ip} already mapped")
        self._by_prefix[mir.ccn_prefix] = mir
        self._by_ip[mir.ip] = mir

    def by_prefix(self, prefix: ContentName) -> MirName:
        try:
            return self._by_prefix[prefix]
        except KeyError:
            raise UnknownMir(f"no gateway with prefix {prefix}") from None

    def by_ip(self, ip: str) -> MirName:
        try:
            return self._by_ip[ip]
        except KeyError:
            raise UnknownMir(f"no gateway at {ip}") from None

    def __contains__(self, mir: MirName) -> bool:
        return self._by_prefix.get(mir.ccn_prefix) == mir


@dataclass(frozen=True)
class InterestPacket:
    name: ContentName
    signaling: Optional[SignalingHeader] = None
    payload: Optional[bytes] = None

    def encode(self) -> bytes:
        name_text = self.name.text.encode()
        presence = (1 if self.signaling is not None else 0) \
            | (2 if self.payload is not None else 0)
        parts = [struct.pack("!H", len(name_text)), name_text,
                 struct.pack("!B", presence)]
        if self.signaling is not None:
            parts.append(self.signaling.encode())
        if self.payload is not None:
            parts.append(struct.pack("!I", len(self.payload)))
            parts.append(self.payload)
        return b"".join(parts)

    @staticmethod
    def decode(data: bytes) -> "InterestPacket":
        (name_len,) = struct.unpack_from("!H", data, 0)
        pos = 2
        name = ContentName.parse(data[pos:pos + name_len].decode())
        pos += name_len
        presence = data[pos]
        pos += 1
        signaling = None
        if presence & 1:
            signaling = SignalingHeader.decode(data[pos:pos + SIGNAL_WIRE_SIZE])
            pos += SIGNAL_WIRE_SIZE
        payload = None
        if presence & 2:
            (n,) = struct.unpack_from("!I", data, pos)
            pos += 4
            payload = data[pos:pos + n]
            pos += n
        if pos != len(data):
            raise ValueError("trailing bytes in interest record")
        return InterestPacket(name, signaling, payload)


def write_interest_log(path, packets: Iterable[InterestPacket]) -> None:
    with open(path, "wb") as fh:
        for p in packets:
            enc = p.encode()
            fh.write(struct.pack("!I", len(enc)))
            fh.write(enc)


def read_interest_log(path) -> list[InterestPacket]:
    out = []
    with open(path, "rb") as fh:
        buf = fh.read()
    pos = 0
    while pos < len(buf):
        (n,) = struct.unpack_from("!I", buf, pos)
        pos += 4
        out.append(InterestPacket.decode(buf[pos:pos + n]))
        pos += n
    return out


def encapsulate_signal(seg: SignalingHeader, target: MirName,
                       conn_id: str, registry: MirRegistry,
                       payload: Optional[bytes] = None) -> InterestPacket:
    """Wrap one signaling header into an Interest aimed at `target`."""
    if target not in registry:
        raise UnknownMir(f"gateway {target.ccn_prefix} not registered")
    return InterestPacket(target.ccn_prefix.child(conn_id), seg, payload)


def decapsulate_signal(pkt: InterestPacket) -> SignalingHeader:
    if pkt.signaling is None:
        raise ValueError("interest carries no signaling header")
    return pkt.signaling


# -- chain topology ---------------------------------------------------------------

class TunnelMode(Enum):
    IP_CCN_IP = "ip-ccn-ip"
    IP_CCN = "ip-ccn"
    CCN_IP = "ccn-ip"
    CCN_IP_CCN = "ccn-ip-ccn"

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(self.value.split("-"))


class TunnelState(Enum):
    CLOSED = "Closed"
    SYN_SENT = "SynSent"
    SYN_RECEIVED = "SynReceived"
    ESTABLISHED = "Established"
    FIN_WAIT = "FinWait"


@dataclass
class ChainNode:
    label: str
    kind: str                     # "endpoint" or "mir"
    ip: str
    prefix: Optional[ContentName] = None
    down: bool = False
    received: bytearray = field(default_factory=bytearray)


@dataclass(frozen=True)
class ExchangeRecord:
    flags: str
    direction: str                # "fwd" (A->B) or "rev"
    interests: int                # Interests used on CCN segments


@dataclass(frozen=True)
class TransferReport:
    mode: str
    bytes_delivered: int
    digest_sent: str
    digest_received: str
    interests_total: int
    establish_exchanges: int
    terminate_exchanges: int
    data_segments: int

    @property
    def matched(self) -> bool:
        return self.digest_sent == self.digest_received


def build_chain(mode: TunnelMode,
                registry: Optional[MirRegistry] = None
                ) -> tuple[list[ChainNode], tuple[str, ...], MirRegistry]:
    """Endpoints at the ends, one gateway per segment boundary."""
    registry = registry if registry is not None else MirRegistry()
    kinds = mode.segments
    nodes = [ChainNode("A", "endpoint", "10.0.0.1")]
    for i in range(len(kinds) - 1):
        ip = f"10.0.1.{i + 1}"
        prefix = ContentName.parse(f"/mir{i + 1}")
        registry.register(MirName(prefix, ip))
        nodes.append(ChainNode(f"mir{i + 1}", "mir", ip, prefix))
    nodes.append(ChainNode("B", "endpoint", "10.0.0.2"))
    # endpoints on a CCN segment are named nodes themselves
    if kinds[0] == "ccn":
        nodes[0].prefix = ContentName.parse("/host/a")
    if kinds[-1] == "ccn":
        nodes[-1].prefix = ContentName.parse("/host/b")
    return nodes, kinds, registry


class TunnelConnection:
    """One tunneled transport connection across a gateway chain."""

    def __init__(self, mode: TunnelMode,
                 nodes: Optional[list[ChainNode]] = None,
                 kinds: Optional[tuple[str, ...]] = None,
                 registry: Optional[MirRegistry] = None,
                 src_port: int = 40001, dst_port: int = 80,
                 segment_size: int = SEGMENT_SIZE):
        if nodes is None:
            nodes, kinds, registry = build_chain(mode)
        self.mode = mode
        self.nodes = nodes
        self.kinds = kinds
        self.registry = registry
        self.src_port = src_port
        self.dst_port = dst_port
        self.segment_size = segment_size
        self.state = TunnelState.CLOSED
        self.interests_sent = 0
        self.bytes_delivered = 0
        self.seq_fwd = 0
        self.seq_rev = 0
        self.interest_log: list[InterestPacket] = []
        four_tuple = (f"{nodes[0].ip}:{src_port}->{nodes[-1].ip}:{dst_port}")
        self.conn_id = hashlib.sha256(four_tuple.encode()).hexdigest()[:12]

    # -- flights -----------------------------------------------------------

    def _header(self, flags: int, forward: bool, seq: int, ack: int
                ) -> SignalingHeader:
        a, b = self.nodes[0], self.nodes[-1]
        src, dst = (a, b) if forward else (b, a)
        sp, dp = ((self.src_port, self.dst_port) if forward
                  else (self.dst_port, self.src_port))
        return SignalingHeader(flags, seq, ack, src.ip, dst.ip, sp, dp)

    def _flight(self, flags: int, forward: bool,
                payload: Optional[bytes] = None) -> ExchangeRecord:
        """Move one signaling flight end to end, hop by hop."""
        seq = self.seq_fwd if forward else self.seq_rev
        ack = self.seq_rev if forward else self.seq_fwd
        header = self._header(flags, forward, seq, ack)
        hops = (list(range(len(self.nodes))) if forward
                else list(range(len(self.nodes) - 1, -1, -1)))
        kinds = self.kinds if forward else tuple(reversed(self.kinds))
        interests = 0
        for i in range(len(hops) - 1):
            nxt = self.nodes[hops[i + 1]]
            if nxt.down:
                self.state = TunnelState.CLOSED
                raise Timeout(f"node {nxt.label} is unreachable")
            if kinds[i] == "ccn":
                if nxt.kind == "mir":
                    target = self.registry.by_prefix(nxt.prefix)
                    pkt = encapsulate_signal(header, target, self.conn_id,
                                             self.registry, payload)
                else:
                    pkt = InterestPacket(nxt.prefix.child(self.conn_id),
                                         header, payload)
                assert decapsulate_signal(pkt) == header
                self.interest_log.append(pkt)
                interests += 1
        self.interests_sent += interests
        if payload is not None:
            receiver = self.nodes[-1] if forward else self.nodes[0]
            receiver.received.extend(payload)
            self.bytes_delivered += len(payload)
        return ExchangeRecord(flag_names(flags), "fwd" if forward else "rev",
                              interests)

    # -- lifecycle ------------------------------------------------------------

    def establish(self) -> list[ExchangeRecord]:
        if self.state is not TunnelState.CLOSED:
            raise InvalidState(f"establish from {self.state.value}")
        trace = []
        trace.append(self._flight(FLAG_SYN, forward=True))
        self.state = TunnelState.SYN_SENT
        self.seq_fwd += 1
        trace.append(self._flight(FLAG_SYN | FLAG_ACK, forward=False))
        self.state = TunnelState.SYN_RECEIVED
        self.seq_rev += 1
        trace.append(self._flight(FLAG_ACK, forward=True))
        self.state = TunnelState.ESTABLISHED
        return trace

    def send(self, payload: bytes) -> int:
        """Stop-and-wait payload push; returns data segments used."""
        if self.state is not TunnelState.ESTABLISHED:
            raise InvalidState(f"send from {self.state.value}")
        segments = 0
        view = memoryview(payload)
        for off in range(0, len(payload), self.segment_size):
            chunk = bytes(view[off:off + self.segment_size])
            self._flight(0, forward=True, payload=chunk)
            self.seq_fwd += len(chunk)
            self._flight(FLAG_ACK, forward=False)
            segments += 1
        return segments

    def terminate(self) -> list[ExchangeRecord]:
        if self.state is not TunnelState.ESTABLISHED:
            raise InvalidState(f"terminate from {self.state.value}")
        trace = []
        trace.append(self._flight(FLAG_FIN, forward=True))
        self.state = TunnelState.FIN_WAIT
        self.seq_fwd += 1
        trace.append(self._flight(FLAG_ACK, forward=False))
        trace.append(self._flight(FLAG_FIN, forward=False))
        self.seq_rev += 1
        trace.append(self._flight(FLAG_ACK, forward=True))
        self.state = TunnelState.CLOSED
        return trace

    def receiver_digest(self) -> str:
        return hashlib.sha256(bytes(self.nodes[-1].received)).hexdigest()


def run_scenario(mode: TunnelMode, payload: bytes,
                 down_nodes: Iterable[str] = (),
                 segment_size: int = SEGMENT_SIZE) -> TransferReport:
    """Establish, transfer, terminate; report fidelity and packet counts."""
    nodes, kinds, registry = build_chain(mode)
    for node in nodes:
        if node.label in down_nodes:
            node.down = True
    conn = TunnelConnection(mode, nodes, kinds, registry,
                            segment_size=segment_size)
    est = conn.establish()
    segments = conn.send(payload)
    fin = conn.terminate()
    return TransferReport(
        mode=mode.value,
        bytes_delivered=conn.bytes_delivered,
        digest_sent=hashlib.sha256(payload).hexdigest(),
        digest_received=conn.receiver_digest(),
        interests_total=conn.interests_sent,
        establish_exchanges=len(est),
        terminate_exchanges=len(fin),
        data_segments=segments,
    )
