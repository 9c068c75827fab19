"""Per-node forwarding plane: PIT, FIB, content store and strategies.

A ForwarderNode is a single-owner state machine. Each handler takes the
arrival face and current simulation time and returns an ordered list of
actions (send this packet on that face); the driver owns all I/O, which
keeps the forwarding logic synchronous and directly testable.

Face 0 is reserved on every node as an internal face: prefetch-created
PIT entries list it as their only downstream so the fetched data lands in
the content store without being forwarded anywhere.
"""

from __future__ import annotations

import random
from collections import OrderedDict
from dataclasses import dataclass

from .errors import UnknownFace
from .names import Name, VersionedChunkName, name_is_prefix_of
from .packets import Data, Interest, Nack, NackReason
from .wire import encoded_size

INTERNAL_FACE = 0


@dataclass(frozen=True)
class SendInterest:
    face: int
    interest: Interest


@dataclass(frozen=True)
class SendData:
    face: int
    data: Data


@dataclass(frozen=True)
class SendNack:
    face: int
    nack: Nack


Action = SendInterest | SendData | SendNack


@dataclass(frozen=True)
class BestRoute:
    pass


@dataclass(frozen=True)
class GatewayPrefetch:
    depth: int = 16


Strategy = BestRoute | GatewayPrefetch


@dataclass
class FibEntry:
    prefix: Name
    next_hops: list[tuple[int, int]]  # (face, cost), costs strictly ascending

    def __post_init__(self) -> None:
        if not self.next_hops:
            raise ValueError("next_hops must be non-empty")
        costs = [c for _, c in self.next_hops]
        if any(a >= b for a, b in zip(costs, costs[1:])):
            raise ValueError("next hop costs must be strictly ascending")


@dataclass
class PitEntry:
    name: Name
    downstream: set[int]
    seen_nonces: set[int]
    expiry: float
    upstream_sent_at: float


@dataclass
class _CsEntry:
    data: Data
    size: int
    last_access: float
    inserted: float


class ContentStore:
    """Byte-capacity LRU cache of data packets keyed by full name."""

    def __init__(self, capacity_bytes: int):
        self.capacity_bytes = capacity_bytes
        self.entries: OrderedDict[Name, _CsEntry] = OrderedDict()
        self.used_bytes = 0

    def __len__(self) -> int:
        return len(self.entries)

    def _stale(self, entry: _CsEntry, now: float) -> bool:
        return (now - entry.inserted) * 1000.0 > entry.data.freshness_ms

    def _drop(self, full_name: Name) -> None:
        entry = self.entries.pop(full_name)
        self.used_bytes -= entry.size

    def contains_fresh(self, full_name: Name, now: float) -> bool:
        entry = self.entries.get(full_name)
        return entry is not None and not self._stale(entry, now)

    def lookup(self, interest: Interest, now: float) -> Data | None:
        """Exact match, or best (highest version, lowest chunk) under a prefix."""
        if not interest.can_be_prefix:
            entry = self.entries.get(interest.name)
            if entry is None:
                return None
            if self._stale(entry, now):
                self._drop(interest.name)
                return None
            entry.last_access = now
            self.entries.move_to_end(interest.name)
            return entry.data
        best_name: Name | None = None
        best_key: tuple[int, int] | None = None
        stale: list[Name] = []
        for full_name, entry in self.entries.items():
            if not name_is_prefix_of(interest.name, full_name):
                continue
            if self._stale(entry, now):
                stale.append(full_name)
                continue
            vc = entry.data.name
            key = (-vc.version, vc.chunk)
            if best_key is None or key < best_key:
                best_key = key
                best_name = full_name
        for full_name in stale:
            self._drop(full_name)
        if best_name is None:
            return None
        entry = self.entries[best_name]
        entry.last_access = now
        self.entries.move_to_end(best_name)
        return entry.data

    def insert(self, data: Data, now: float) -> list[Name]:
        """Store a packet, evicting least-recently-accessed entries as needed.

        A packet larger than the whole store is not cached (no-op). Returns
        the full names evicted to make room.
        """
        size = encoded_size(data)
        if size > self.capacity_bytes:
            return []
        full_name = data.name.full()
        if full_name in self.entries:
            self._drop(full_name)
        self.entries[full_name] = _CsEntry(data, size, now, now)
        self.used_bytes += size
        evicted: list[Name] = []
        while self.used_bytes > self.capacity_bytes:
            victim, entry = self.entries.popitem(last=False)
            self.used_bytes -= entry.size
            evicted.append(victim)
        return evicted


@dataclass
class NodeStats:
    interests_in: int = 0
    interests_out: int = 0
    data_in: int = 0
    data_out: int = 0
    nacks_in: int = 0
    nacks_out: int = 0
    cs_hits: int = 0
    cs_misses: int = 0
    prefetch_sent: int = 0


class ForwarderNode:
    """NDN forwarder with PIT aggregation, LPM forwarding and opportunistic caching."""

    def __init__(
        self,
        node_id: str,
        cs_capacity_bytes: int = 0,
        strategy: Strategy = BestRoute(),
        nonce_rng: random.Random | None = None,
        aggregate_interests: bool = True,
    ):
        self.node_id = node_id
        self.faces: set[int] = {INTERNAL_FACE}
        self.pit: dict[Name, PitEntry] = {}
        self.fib: dict[Name, FibEntry] = {}
        self.cs = ContentStore(cs_capacity_bytes)
        self.strategy = strategy
        self.stats = NodeStats()
        self.aggregate_interests = aggregate_interests
        self._rng = nonce_rng or random.Random(0)

    def add_face(self, face: int) -> None:
        if face == INTERNAL_FACE:
            raise ValueError("face 0 is reserved")
        self.faces.add(face)

    def add_route(self, prefix: Name, face: int, cost: int = 1) -> None:
        entry = self.fib.get(prefix)
        if entry is None:
            self.fib[prefix] = FibEntry(prefix, [(face, cost)])
        else:
            hops = sorted(entry.next_hops + [(face, cost)], key=lambda fc: fc[1])
            self.fib[prefix] = FibEntry(prefix, hops)

    def fib_longest_prefix_match(self, name: Name) -> FibEntry | None:
        best: FibEntry | None = None
        for prefix, entry in self.fib.items():
            if name_is_prefix_of(prefix, name):
                if best is None or len(prefix) > len(best.prefix):
                    best = entry
        return best

    def _check_face(self, face: int) -> None:
        if face not in self.faces:
            raise UnknownFace(f"{self.node_id}: no face {face}")

    def _next_hop(self, name: Name, exclude: int) -> int | None:
        entry = self.fib_longest_prefix_match(name)
        if entry is None:
            return None
        for face, _cost in entry.next_hops:
            if face != exclude:
                return face
        return None

    def on_interest(self, from_face: int, interest: Interest, now: float) -> list[Action]:
        self._check_face(from_face)
        self.stats.interests_in += 1
        existing = self.pit.get(interest.name)
        if existing is not None and interest.nonce in existing.seen_nonces:
            return []  # looped interest

        actions: list[Action] = []
        cached = self.cs.lookup(interest, now)
        if cached is not None:
            self.stats.cs_hits += 1
            actions.append(SendData(from_face, cached))
            self.stats.data_out += 1
            if isinstance(self.strategy, GatewayPrefetch):
                actions.extend(self._prefetch(cached, now))
            return actions
        self.stats.cs_misses += 1

        if existing is not None:
            existing.downstream.add(from_face)
            existing.seen_nonces.add(interest.nonce)
            if self.aggregate_interests:
                return []
            upstream = self._next_hop(interest.name, exclude=from_face)
            if upstream is None:
                return []
            existing.upstream_sent_at = now
            self.stats.interests_out += 1
            return [SendInterest(upstream, interest)]

        upstream = self._next_hop(interest.name, exclude=from_face)
        if upstream is None:
            self.stats.nacks_out += 1
            return [SendNack(from_face, Nack(interest.name, NackReason.NO_ROUTE))]
        self.pit[interest.name] = PitEntry(
            name=interest.name,
            downstream={from_face},
            seen_nonces={interest.nonce},
            expiry=now + interest.lifetime_ms / 1000.0,
            upstream_sent_at=now,
        )
        self.stats.interests_out += 1
        return [SendInterest(upstream, interest)]

    def on_data(self, from_face: int, data: Data, now: float) -> list[Action]:
        self._check_face(from_face)
        self.stats.data_in += 1
        full_name = data.name.full()
        matched = [n for n, e in self.pit.items() if name_is_prefix_of(n, full_name)]
        if not matched:
            return []  # unsolicited
        faces: set[int] = set()
        for pit_name in matched:
            faces.update(self.pit.pop(pit_name).downstream)
        actions: list[Action] = []
        for face in sorted(faces):
            if face == INTERNAL_FACE:
                continue
            actions.append(SendData(face, data))
            self.stats.data_out += 1
        self.cs.insert(data, now)
        if isinstance(self.strategy, GatewayPrefetch):
            actions.extend(self._prefetch(data, now))
        return actions

    def on_nack(self, from_face: int, nack: Nack, now: float) -> list[Action]:
        self._check_face(from_face)
        self.stats.nacks_in += 1
        entry = self.pit.pop(nack.interest_name, None)
        if entry is None:
            return []
        actions: list[Action] = []
        for face in sorted(entry.downstream):
            if face == INTERNAL_FACE:
                continue
            actions.append(SendNack(face, nack))
            self.stats.nacks_out += 1
        return actions

    def prefetch_plan(self, trigger: Data, now: float) -> list[Interest]:
        """Interests for the next chunks of the trigger's file, skipping
        anything already cached or pending."""
        if not isinstance(self.strategy, GatewayPrefetch):
            return []
        vc = trigger.name
        plan: list[Interest] = []
        last = min(vc.chunk + self.strategy.depth, trigger.final_chunk)
        for chunk in range(vc.chunk + 1, last + 1):
            full = VersionedChunkName(vc.base, vc.version, chunk).full()
            if self.cs.contains_fresh(full, now) or full in self.pit:
                continue
            plan.append(Interest(name=full, can_be_prefix=False, nonce=self._rng.getrandbits(32)))
        return plan

    def _prefetch(self, trigger: Data, now: float) -> list[Action]:
        actions: list[Action] = []
        for interest in self.prefetch_plan(trigger, now):
            upstream = self._next_hop(interest.name, exclude=INTERNAL_FACE)
            if upstream is None:
                continue
            self.pit[interest.name] = PitEntry(
                name=interest.name,
                downstream={INTERNAL_FACE},
                seen_nonces={interest.nonce},
                expiry=now + interest.lifetime_ms / 1000.0,
                upstream_sent_at=now,
            )
            self.stats.interests_out += 1
            self.stats.prefetch_sent += 1
            actions.append(SendInterest(upstream, interest))
        return actions

    def pit_expire(self, now: float) -> list[Name]:
        """Drop entries whose expiry is at or before ``now``; return their names."""
        expired = [n for n, e in self.pit.items() if e.expiry <= now]
        for name in expired:
            del self.pit[name]
        return expired
