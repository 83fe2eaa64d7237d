"""Hierarchical identifier registration and resolution.

The network is divided into a tree of administrative domains.  Each
domain runs its own vote-based chain (see `minet.apov`): registering an
identifier means passing a compliance review, committing a registration
transaction through one consensus round among the domain's supervisor
nodes, landing the record in the domain's off-chain store, and — for
content identifiers — installing a forwarding entry in the domain's
lookup table (with optional bindings attaching other identifier kinds
to an existing content entry).

Resolution walks the tree:

1. locally: forwarding table and off-chain store first (authoritative),
   then the bounded result cache; bare IP identifiers stop here — when
   unknown locally they are handed to an IP proxy rather than recursed;
2. upward: each ancestor in turn, up to the top-level domain;
3. downward: directed descent when the identifier carries a domain path
   as its name prefix, otherwise breadth-first over the remaining
   domains; a visited set guarantees no domain is checked twice.

The hop list always starts at the querying domain.  Committed records
are replicated synchronously into a hierarchy-wide duplicate index
(modeling frequently-synchronized registry databases), so duplicates
are rejected no matter which domain receives the request.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

from .apov import (
    Chain,
    ChainError,
    ConsensusConfig,
    IncompleteVotes,
    Transaction,
    assemble_group,
    cast_validation_votes,
    default_validity,
    make_block,
    tally_and_seal,
)
from .hpt import Hpt, NotBound, UnknownContent
from .names import ContentName, ForwardingInfo, IdKind, Identifier

CACHE_LIMIT = 256


class RegistryError(Exception):
    pass


class Duplicate(RegistryError):
    pass


class ComplianceRejected(RegistryError):
    pass


class ConsensusFailed(RegistryError):
    pass


@dataclass(frozen=True)
class RegistrationRequest:
    identifier: Identifier
    owner: Identifier
    forwarding: Optional[ForwardingInfo] = None
    binds_to: Optional[ContentName] = None


@dataclass(frozen=True)
class RegistrationRecord:
    identifier: Identifier
    owner: Identifier
    domain: ContentName
    height: int
    status: str                   # "committed" | "rejected"
    tx_id: int


class ResolutionOutcome(Enum):
    RESOLVED = "resolved"
    PROXIED_TO_IP = "proxied-to-ip"
    NOT_FOUND = "not-found"


@dataclass(frozen=True)
class ResolutionResult:
    outcome: ResolutionOutcome
    hops: tuple[ContentName, ...]
    record: Optional[RegistrationRecord] = None
    forwarding: Optional[ForwardingInfo] = None
    message: str = ""


class Domain:
    def __init__(self, name: ContentName, parent: Optional["Domain"] = None,
                 supervisors: tuple[int, ...] = (0, 1, 2, 3)):
        if len(supervisors) < 2:
            raise RegistryError("a domain needs at least two supervisors")
        self.name = name
        self.parent = parent
        self.children: list[Domain] = []
        self.supervisors = tuple(supervisors)
        self.down_supervisors: set[int] = set()
        self.chain = Chain(first_leader=supervisors[0])
        self.offchain: dict[Identifier, RegistrationRecord] = {}
        self.fib = Hpt()
        self.cache: dict[Identifier, RegistrationRecord] = {}

    def add_child(self, label: str,
                  supervisors: Optional[tuple[int, ...]] = None) -> "Domain":
        child = Domain(self.name.child(label), parent=self,
                       supervisors=supervisors or self.supervisors)
        self.children.append(child)
        return child

    def __repr__(self) -> str:
        return f"Domain({self.name.text})"


CompliancePredicate = Callable[["Hierarchy", Domain, RegistrationRequest],
                               Optional[str]]


def default_compliance(hier: "Hierarchy", domain: Domain,
                       request: RegistrationRequest) -> Optional[str]:
    """Syntactic validity of the request, beyond what the types enforce."""
    if request.owner.kind is not IdKind.IDENTITY:
        return "owner must be an identity identifier"
    if request.identifier.kind is IdKind.CONTENT and request.forwarding is None:
        return "content registration needs forwarding information"
    if request.identifier.kind is not IdKind.CONTENT and request.forwarding is not None:
        return "only content registrations carry forwarding information"
    if request.binds_to is not None:
        if request.identifier.kind is IdKind.CONTENT:
            return "a content identifier cannot bind to another content entry"
        target = Identifier.content(request.binds_to)
        rec = domain.offchain.get(target)
        if rec is None or rec.status != "committed":
            return f"binds_to target {request.binds_to.text} not committed here"
    return None


class Hierarchy:
    """A domain tree plus the registry operations running over it."""

    def __init__(self, root: Domain, store_path=None,
                 compliance: CompliancePredicate = default_compliance):
        self.root = root
        self.store_path = store_path
        self.compliance = compliance
        self.committed: dict[Identifier, ContentName] = {}
        self._index: dict[ContentName, Domain] = {}
        stack = [root]
        while stack:
            d = stack.pop()
            if d.name in self._index:
                raise RegistryError(f"duplicate domain name {d.name.text}")
            self._index[d.name] = d
            stack.extend(d.children)

    @staticmethod
    def default(store_path=None) -> "Hierarchy":
        """Three administrative levels: one top domain, three regions,
        two or three districts each."""
        top = Domain(ContentName.parse("/top"))
        for region, districts in (("cn", ("gd", "bj")),
                                  ("us", ("ca", "ny")),
                                  ("eu", ("de", "fr", "es"))):
            r = top.add_child(region)
            for d in districts:
                r.add_child(d)
        return Hierarchy(top, store_path=store_path)

    def domains(self) -> Iterable[Domain]:
        return self._index.values()

    def domain(self, name: ContentName | str) -> Domain:
        key = ContentName.parse(name) if isinstance(name, str) else name
        try:
            return self._index[key]
        except KeyError:
            raise RegistryError(f"no domain named "
                                f"{key.text}") from None

    # -- registration -------------------------------------------------------

    def register(self, domain: Domain | ContentName | str,
                 request: RegistrationRequest) -> RegistrationRecord:
        if not isinstance(domain, Domain):
            domain = self.domain(domain)
        if request.identifier in self.committed:
            where = self.committed[request.identifier].text
            raise Duplicate(f"{request.identifier.text} already committed "
                            f"in {where}")
        reason = self.compliance(self, domain, request)
        if reason is not None:
            raise ComplianceRejected(reason)
        tx = _registration_tx(request, domain)
        height = self._commit_round(domain, [tx])
        record = RegistrationRecord(request.identifier, request.owner,
                                    domain.name, height, "committed", tx.id)
        domain.offchain[request.identifier] = record
        self.committed[request.identifier] = domain.name
        if request.identifier.kind is IdKind.CONTENT:
            domain.fib.insert(request.identifier.value, request.forwarding)
        if request.binds_to is not None:
            domain.fib.bind_identifier(request.binds_to, request.identifier)
        self._store(record)
        return record

    def _commit_round(self, domain: Domain, txs: list[Transaction]) -> int:
        """One consensus round among the domain's supervisors: the round
        leader packs the registration block, every supervisor votes."""
        cfg = ConsensusConfig(n_b=1, n_c=len(domain.supervisors), n_bc=1,
                              max_txs=max(64, len(txs)))
        height = domain.chain.height + 1
        prev = domain.chain.tip_digest
        leader = domain.chain.next_leader
        block = make_block(leader, txs, prev, timestamp=height, config=cfg)
        policy = default_validity(prev, cfg)
        votes = [cast_validation_votes(v, [block], policy)
                 for v in domain.supervisors
                 if v not in domain.down_supervisors]
        seed = _round_seed(domain.name, height)
        try:
            header = tally_and_seal(leader, votes, [block], height, seed,
                                    cfg, eligible=domain.supervisors)
        except IncompleteVotes as exc:
            raise ConsensusFailed(f"round stalled in {domain.name.text}: "
                                  f"{exc}") from exc
        group = assemble_group(header, [block])
        if not group.body:
            raise ConsensusFailed(f"registration block voted down in "
                                  f"{domain.name.text}")
        try:
            domain.chain.append(group, cfg)
        except ChainError as exc:
            raise ConsensusFailed(str(exc)) from exc
        return height

    def _store(self, record: RegistrationRecord) -> None:
        if self.store_path is None:
            return
        with open(self.store_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")

    # -- resolution -----------------------------------------------------------

    def resolve(self, origin: Domain | ContentName | str,
                ident: Identifier) -> ResolutionResult:
        if not isinstance(origin, Domain):
            origin = self.domain(origin)
        hops: list[ContentName] = [origin.name]
        found = self._check_domain(origin, ident)
        if found is not None:
            return _resolved(found, hops)
        if ident.kind is IdKind.IP:
            return ResolutionResult(
                ResolutionOutcome.PROXIED_TO_IP, tuple(hops),
                message=f"{ident.text} unknown locally; "
                        f"handing off to the IP proxy")
        cached = origin.cache.get(ident)
        if cached is not None:
            return ResolutionResult(ResolutionOutcome.RESOLVED, tuple(hops),
                                    record=cached,
                                    message="served from cache")
        visited = {origin.name}
        node = origin.parent
        while node is not None:
            hops.append(node.name)
            visited.add(node.name)
            found = self._check_domain(node, ident)
            if found is not None:
                self._cache(origin, found)
                return _resolved(found, hops)
            node = node.parent
        for domain in self._descent_order(ident, visited):
            hops.append(domain.name)
            visited.add(domain.name)
            found = self._check_domain(domain, ident)
            if found is not None:
                self._cache(origin, found)
                return _resolved(found, hops)
        return ResolutionResult(
            ResolutionOutcome.NOT_FOUND, tuple(hops),
            message=f"{ident.text} not found after visiting "
                    f"{len(hops)} domains")

    def _descent_order(self, ident: Identifier,
                       visited: set[ContentName]) -> Iterable[Domain]:
        """Directed descent along a carried domain path first, then
        breadth-first over whatever remains (exhaustive, no revisits)."""
        if ident.kind is IdKind.CONTENT:
            node = self.root
            while True:
                comps = ident.value.components
                depth = len(node.name.components)
                nxt = None
                if len(comps) > depth:
                    for child in node.children:
                        if child.name.components == comps[:depth + 1]:
                            nxt = child
                            break
                if nxt is None:
                    break
                if nxt.name not in visited:
                    yield nxt
                node = nxt
        queue = deque([self.root])
        seen = set(visited)
        while queue:
            d = queue.popleft()
            queue.extend(d.children)
            if d.name in seen or d.name in visited:
                continue
            seen.add(d.name)
            yield d

    def _check_domain(self, domain: Domain, ident: Identifier
                      ) -> Optional[tuple[Optional[RegistrationRecord],
                                          Optional[ForwardingInfo]]]:
        record = domain.offchain.get(ident)
        if record is not None and record.status != "committed":
            record = None
        forwarding = None
        if ident.kind is IdKind.CONTENT:
            hit = domain.fib.lookup_lpm(ident.value)
            if hit.hit:
                forwarding = hit.forwarding
        else:
            try:
                bound = domain.fib.translate(ident)
            except (NotBound, UnknownContent):
                bound = None
            if bound is not None:
                hit = domain.fib.lookup_lpm(bound)
                if hit.hit:
                    forwarding = hit.forwarding
        if record is None and forwarding is None:
            return None
        return record, forwarding

    def _cache(self, origin: Domain,
               found: tuple[Optional[RegistrationRecord],
                            Optional[ForwardingInfo]]) -> None:
        record = found[0]
        if record is None:
            return
        if len(origin.cache) >= CACHE_LIMIT:
            origin.cache.pop(next(iter(origin.cache)))
        origin.cache[record.identifier] = record

    # -- consistency ------------------------------------------------------------

    def verify_consistency(self) -> list[str]:
        """Off-chain records and on-chain transactions must correspond
        one to one; the duplicate index must mirror the stores."""
        problems = []
        seen: dict[Identifier, ContentName] = {}
        for domain in self.domains():
            for ident, record in domain.offchain.items():
                if record.status != "committed":
                    continue
                if ident in seen:
                    problems.append(f"{ident.text} committed twice")
                seen[ident] = domain.name
                if record.height > domain.chain.height:
                    problems.append(f"{ident.text} height beyond chain tip")
                    continue
                group = domain.chain.groups[record.height]
                ids = {t.id for b in group.body for t in b.txs}
                if record.tx_id not in ids:
                    problems.append(
                        f"{ident.text} transaction missing at height "
                        f"{record.height} in {domain.name.text}")
        if seen != self.committed:
            problems.append("duplicate index out of sync with stores")
        return problems


def _resolved(found: tuple[Optional[RegistrationRecord],
                           Optional[ForwardingInfo]],
              hops: list[ContentName]) -> ResolutionResult:
    record, forwarding = found
    return ResolutionResult(ResolutionOutcome.RESOLVED, tuple(hops),
                            record=record, forwarding=forwarding)


def _registration_tx(request: RegistrationRequest, domain: Domain
                     ) -> Transaction:
    payload = json.dumps(request_to_dict(request), sort_keys=True).encode()
    digest = hashlib.sha256(
        f"{domain.name.text}|{request.identifier.text}".encode()).digest()
    tx_id = int.from_bytes(digest[:8], "big") >> 1
    return Transaction(tx_id, payload, nominal_size=len(payload))


def _round_seed(domain_name: ContentName, height: int) -> int:
    digest = hashlib.sha256(f"{domain_name.text}:{height}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# -- wire schema -------------------------------------------------------------

def request_to_dict(request: RegistrationRequest) -> dict:
    return {
        "identifier": request.identifier.text,
        "owner": request.owner.text,
        "forwarding": None if request.forwarding is None else {
            "face_id": request.forwarding.face_id,
            "metric": request.forwarding.metric,
        },
        "binds_to": None if request.binds_to is None else request.binds_to.text,
    }


def request_from_dict(data: dict) -> RegistrationRequest:
    fwd = data.get("forwarding")
    binds = data.get("binds_to")
    return RegistrationRequest(
        identifier=Identifier.parse(data["identifier"]),
        owner=Identifier.parse(data["owner"]),
        forwarding=None if fwd is None else ForwardingInfo(
            face_id=fwd["face_id"], metric=fwd.get("metric", 0)),
        binds_to=None if binds is None else ContentName.parse(binds),
    )


def record_to_dict(record: RegistrationRecord) -> dict:
    return {
        "identifier": record.identifier.text,
        "owner": record.owner.text,
        "domain": record.domain.text,
        "height": record.height,
        "status": record.status,
        "tx_id": record.tx_id,
    }


def record_from_dict(data: dict) -> RegistrationRecord:
    return RegistrationRecord(
        identifier=Identifier.parse(data["identifier"]),
        owner=Identifier.parse(data["owner"]),
        domain=ContentName.parse(data["domain"]),
        height=int(data["height"]),
        status=data["status"],
        tx_id=int(data["tx_id"]),
    )


def resolution_to_dict(result: ResolutionResult) -> dict:
    return {
        "outcome": result.outcome.value,
        "hops": [h.text for h in result.hops],
        "record": None if result.record is None else record_to_dict(result.record),
        "forwarding": None if result.forwarding is None else {
            "face_id": result.forwarding.face_id,
            "metric": result.forwarding.metric,
        },
        "message": result.message,
    }


def read_record_store(path) -> list[RegistrationRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_from_dict(json.loads(line)))
    return out
