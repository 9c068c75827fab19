"""Hosts, faces and packet delivery over links.

Node ids map to one of three host kinds: forwarders run the NDN
forwarding plane, producers answer interests from a repository after a
configurable processing delay, and consumers run player sessions. Each
link endpoint gets a face id on its host; face 0 stays reserved for the
forwarder-internal prefetch downstream.

Deliveries carry a producer-origin flag so consumers can record, as
simulation ground truth, whether a chunk was served from a cache.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Callable

from ..consumer import PlayerSession
from ..errors import AllProbesFailed, InvalidTopology, UnknownConsumer
from ..forwarding import (
    ForwarderNode,
    SendData,
    SendInterest,
    SendNack,
    Strategy,
)
from ..names import Name, name_is_prefix_of
from ..packets import Data, Interest, Nack, Packet
from ..producer import Repository
from ..wire import encoded_size
from .engine import EventEngine
from .link import Dropped, Link

PIT_SWEEP_INTERVAL_S = 1.0


def derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.blake2b(f"{seed}|{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class FchDirectory:
    """Static closest-hub table: consumer id to candidate gateway ids."""

    def __init__(self):
        self.candidates: dict[str, list[str]] = {}

    def add(self, consumer_id: str, gateways: list[str]) -> None:
        self.candidates[consumer_id] = list(gateways)

    def lookup(self, consumer_id: str) -> list[str]:
        if consumer_id not in self.candidates:
            raise UnknownConsumer(consumer_id)
        return list(self.candidates[consumer_id])


@dataclass
class _Probe:
    gateway: str
    face: int
    sent_at: float
    rtt_ms: float | None = None


class ForwarderHost:
    kind = "forwarder"

    def __init__(self, sim: "NetworkSim", node: ForwarderNode):
        self.sim = sim
        self.node = node
        self.face_link: dict[int, tuple[Link, str]] = {}
        self.peer_face: dict[str, int] = {}
        self._next_face = 1

    @property
    def node_id(self) -> str:
        return self.node.node_id

    def attach_link(self, link: Link, peer: str) -> int:
        face = self._next_face
        self._next_face += 1
        self.node.add_face(face)
        self.face_link[face] = (link, peer)
        self.peer_face[peer] = face
        return face

    def receive(self, from_face: int, packet: Packet, from_producer: bool) -> None:
        now = self.sim.engine.now
        if isinstance(packet, Interest):
            actions = self.node.on_interest(from_face, packet, now)
            incoming_origin = False
        elif isinstance(packet, Data):
            actions = self.node.on_data(from_face, packet, now)
            incoming_origin = from_producer
        else:
            actions = self.node.on_nack(from_face, packet, now)
            incoming_origin = False
        for action in actions:
            if isinstance(action, SendInterest):
                self.sim.send(self.node_id, action.face, action.interest, False)
            elif isinstance(action, SendData):
                # Data emitted while handling an interest comes from the
                # content store; forwarded data keeps its upstream origin.
                origin = incoming_origin if isinstance(packet, Data) else False
                self.sim.send(self.node_id, action.face, action.data, origin)
            elif isinstance(action, SendNack):
                self.sim.send(self.node_id, action.face, action.nack, False)


class ProducerHost:
    kind = "producer"

    def __init__(self, sim: "NetworkSim", node_id: str, repo: Repository):
        self.sim = sim
        self.node_id = node_id
        self.repo = repo
        self.face_link: dict[int, tuple[Link, str]] = {}
        self.peer_face: dict[str, int] = {}
        self.announced: list[Name] = []
        self._next_face = 1

    def attach_link(self, link: Link, peer: str) -> int:
        face = self._next_face
        self._next_face += 1
        self.face_link[face] = (link, peer)
        self.peer_face[peer] = face
        return face

    def announce(self, prefix: Name) -> None:
        self.announced.append(prefix)

    def serves(self, prefix: Name) -> bool:
        return any(
            name_is_prefix_of(a, prefix) or name_is_prefix_of(prefix, a)
            for a in self.announced
        )

    def receive(self, from_face: int, packet: Packet, from_producer: bool) -> None:
        if not isinstance(packet, Interest):
            return  # producers only consume interests
        response = self.repo.resolve(packet)
        delay = self.repo.processing_delay_ms / 1000.0
        self.sim.engine.schedule_in(
            delay, lambda: self.sim.send(self.node_id, from_face, response, True)
        )


class ConsumerHost:
    """Endpoint running player sessions; doubles as their transport."""

    kind = "consumer"

    def __init__(self, sim: "NetworkSim", node_id: str, rng: random.Random):
        self.sim = sim
        self.node_id = node_id
        self.rng = rng
        self.face_link: dict[int, tuple[Link, str]] = {}
        self.peer_face: dict[str, int] = {}
        self.sessions: list[PlayerSession] = []
        self.gateway_face: int | None = None
        self.probe_results: dict[str, float] = {}
        self.chosen_gateway: str | None = None
        self._probes: list[_Probe] = []
        self._probe_name: Name | None = None
        self._on_attached: Callable[[], None] | None = None
        self._next_face = 1

    def attach_link(self, link: Link, peer: str) -> int:
        face = self._next_face
        self._next_face += 1
        self.face_link[face] = (link, peer)
        self.peer_face[peer] = face
        return face

    # -- transport protocol for sessions ---------------------------------

    def now(self) -> float:
        return self.sim.engine.now

    def schedule(self, at: float, fn: Callable[[], None]) -> None:
        self.sim.engine.schedule(at, fn)

    def send_interest(self, interest: Interest) -> None:
        if self.gateway_face is None:
            raise InvalidTopology(f"{self.node_id} has no attached gateway")
        self.sim.send(self.node_id, self.gateway_face, interest, False)

    # -- gateway selection -------------------------------------------------

    def attach_direct(self) -> None:
        if len(self.face_link) != 1:
            raise InvalidTopology(
                f"{self.node_id}: direct attach needs exactly one link"
            )
        self.gateway_face = next(iter(self.face_link))
        self.chosen_gateway = self.face_link[self.gateway_face][1]

    def probe_gateways(
        self,
        candidates: list[str],
        probe_name: Name,
        on_attached: Callable[[], None],
        timeout_s: float = 4.0,
    ) -> None:
        """Send one probe per candidate, attach to the fastest responder."""
        if not candidates:
            raise AllProbesFailed(f"{self.node_id}: empty candidate list")
        self._probe_name = probe_name
        self._on_attached = on_attached
        now = self.sim.engine.now
        for gateway in candidates:
            face = self.peer_face.get(gateway)
            if face is None:
                raise InvalidTopology(f"{self.node_id} has no link to {gateway}")
            probe = _Probe(gateway, face, now)
            self._probes.append(probe)
            interest = Interest(probe_name, can_be_prefix=True, nonce=self.rng.getrandbits(32))
            self.sim.send(self.node_id, face, interest, False)
        self.sim.engine.schedule_in(timeout_s, self._conclude_probing)

    def _conclude_probing(self) -> None:
        if self.gateway_face is not None:
            return
        answered = [p for p in self._probes if p.rtt_ms is not None]
        if not answered:
            raise AllProbesFailed(f"{self.node_id}: all gateway probes timed out")
        self._finish_probing()

    def _finish_probing(self) -> None:
        best = min(
            (p for p in self._probes if p.rtt_ms is not None),
            key=lambda p: p.rtt_ms,
        )
        self.chosen_gateway = best.gateway
        self.gateway_face = best.face
        self.probe_results = {
            p.gateway: p.rtt_ms for p in self._probes if p.rtt_ms is not None
        }
        if self._on_attached is not None:
            self._on_attached()
            self._on_attached = None

    def _handle_probe_data(self, from_face: int, data: Data) -> bool:
        if self._probe_name is None or self.gateway_face is not None:
            return False
        hit = False
        for probe in self._probes:
            if probe.face == from_face and probe.rtt_ms is None:
                probe.rtt_ms = (self.sim.engine.now - probe.sent_at) * 1000.0
                hit = True
                break
        if hit and all(p.rtt_ms is not None for p in self._probes):
            self._finish_probing()
        return hit

    # -- incoming ----------------------------------------------------------

    def receive(self, from_face: int, packet: Packet, from_producer: bool) -> None:
        if isinstance(packet, Data):
            if self._handle_probe_data(from_face, packet):
                return
            full = packet.name.full()
            for session in self.sessions:
                fetch = session.active_fetch
                if fetch is not None and name_is_prefix_of(fetch.base, full):
                    session.handle_data(packet, not from_producer)
                    return
        elif isinstance(packet, Nack):
            for session in self.sessions:
                fetch = session.active_fetch
                if fetch is not None and name_is_prefix_of(fetch.base, packet.interest_name):
                    session.handle_nack(packet)
                    return


Host = ForwarderHost | ProducerHost | ConsumerHost


class NetworkSim:
    """Owns the engine, links and hosts of one scenario run."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.engine = EventEngine()
        self.hosts: dict[str, Host] = {}
        self.links: list[Link] = []
        self.fch = FchDirectory()
        self.data_tap: Callable[[Data, str, str], Data] | None = None
        self._sweeping = False

    # -- construction ------------------------------------------------------

    def add_forwarder(
        self,
        node_id: str,
        cs_capacity_bytes: int = 0,
        strategy: Strategy | None = None,
        aggregate_interests: bool = True,
    ) -> ForwarderHost:
        from ..forwarding import BestRoute

        node = ForwarderNode(
            node_id,
            cs_capacity_bytes=cs_capacity_bytes,
            strategy=strategy or BestRoute(),
            nonce_rng=random.Random(derive_seed(self.seed, f"fw:{node_id}")),
            aggregate_interests=aggregate_interests,
        )
        host = ForwarderHost(self, node)
        self._register(node_id, host)
        return host

    def add_producer(self, node_id: str, repo: Repository) -> ProducerHost:
        host = ProducerHost(self, node_id, repo)
        self._register(node_id, host)
        return host

    def add_consumer(self, node_id: str) -> ConsumerHost:
        rng = random.Random(derive_seed(self.seed, f"consumer:{node_id}"))
        host = ConsumerHost(self, node_id, rng)
        self._register(node_id, host)
        return host

    def _register(self, node_id: str, host: Host) -> None:
        if node_id in self.hosts:
            raise InvalidTopology(f"duplicate node id {node_id}")
        self.hosts[node_id] = host

    def add_link(
        self,
        a: str,
        b: str,
        propagation_ms: float = 0.0,
        bandwidth_bps: float | None = None,
        queue_limit_bytes: int | None = None,
    ) -> Link:
        for node_id in (a, b):
            if node_id not in self.hosts:
                raise InvalidTopology(f"link references unknown node {node_id}")
        link = Link(a, b, propagation_ms, bandwidth_bps, queue_limit_bytes)
        self.links.append(link)
        self.hosts[a].attach_link(link, b)
        self.hosts[b].attach_link(link, a)
        return link

    def link_between(self, a: str, b: str) -> Link:
        for link in self.links:
            if {link.a, link.b} == {a, b}:
                return link
        raise InvalidTopology(f"no link between {a} and {b}")

    def add_route(self, node_id: str, prefix: Name, via: str, cost: int = 1) -> None:
        host = self.hosts[node_id]
        if not isinstance(host, ForwarderHost):
            raise InvalidTopology(f"routes only apply to forwarders, not {node_id}")
        face = host.peer_face.get(via)
        if face is None:
            raise InvalidTopology(f"{node_id} has no link to {via}")
        host.node.add_route(prefix, face, cost)

    # -- validation ---------------------------------------------------------

    def validate_reachability(self, prefixes: list[Name]) -> None:
        """Every consumer must reach a producer serving each prefix through
        each of its candidate gateways."""
        for host in self.hosts.values():
            if not isinstance(host, ConsumerHost):
                continue
            gateways = self.fch.candidates.get(
                host.node_id, [peer for _, peer in host.face_link.values()]
            )
            for prefix in prefixes:
                for gateway in gateways:
                    if not self._walk(gateway, prefix):
                        raise InvalidTopology(
                            f"{host.node_id} cannot reach {prefix} via {gateway}"
                        )

    def _walk(self, start: str, prefix: Name) -> bool:
        current = start
        visited = set()
        while current not in visited:
            visited.add(current)
            host = self.hosts[current]
            if isinstance(host, ProducerHost):
                return host.serves(prefix)
            if isinstance(host, ConsumerHost):
                return False
            entry = host.node.fib_longest_prefix_match(prefix)
            if entry is None:
                return False
            face = entry.next_hops[0][0]
            current = host.face_link[face][1]
        return False

    # -- traffic -------------------------------------------------------------

    def send(self, src: str, face: int, packet: Packet, from_producer: bool) -> None:
        host = self.hosts[src]
        link, peer = host.face_link[face]
        if isinstance(packet, Data) and self.data_tap is not None:
            packet = self.data_tap(packet, src, peer)
        arrival = link.transmit(src, peer, encoded_size(packet), self.engine.now)
        if isinstance(arrival, Dropped):
            return
        peer_host = self.hosts[peer]
        from_face = peer_host.peer_face[src]
        self.engine.schedule(
            arrival, lambda: peer_host.receive(from_face, packet, from_producer)
        )

    # -- housekeeping ----------------------------------------------------------

    def start_pit_sweeper(self, active: Callable[[], bool]) -> None:
        if self._sweeping:
            return
        self._sweeping = True

        def sweep() -> None:
            for host in self.hosts.values():
                if isinstance(host, ForwarderHost):
                    host.node.pit_expire(self.engine.now)
            if active():
                self.engine.schedule_in(PIT_SWEEP_INTERVAL_S, sweep)
            else:
                self._sweeping = False

        self.engine.schedule_in(PIT_SWEEP_INTERVAL_S, sweep)

    def drop_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for link in self.links:
            for key, value in link.drop_counts().items():
                if value:
                    counts[key] = value
        return counts


class _FetchAdapter:
    """Routes one stand-alone file fetch through a consumer host."""

    def __init__(self):
        self.active_fetch = None

    def handle_data(self, data, from_cache):
        self.active_fetch.handle_data(data, from_cache)

    def handle_nack(self, nack):
        self.active_fetch.handle_nack(nack)


def fetch_file_via(
    sim: NetworkSim,
    consumer_id: str,
    base: Name,
    key,
    engine_cfg=None,
    rng: random.Random | None = None,
):
    """Fetch one file through the simulated network and run it to completion.

    Returns (payload, chunk timings). This is the resource-request seam:
    callers address content by name and get the reassembled bytes back.
    """
    from ..consumer import FetchEngine, FileFetch

    host = sim.hosts[consumer_id]
    if not isinstance(host, ConsumerHost):
        raise InvalidTopology(f"{consumer_id} is not a consumer")
    if host.gateway_face is None:
        host.attach_direct()
    adapter = _FetchAdapter()
    result: dict = {}
    fetch = FileFetch(
        host,
        engine_cfg or FetchEngine(),
        base,
        key,
        rng or random.Random(derive_seed(sim.seed, f"fetch:{base}")),
        lambda payload, timings: result.update(payload=payload, timings=timings),
        lambda exc: result.update(error=exc),
    )
    adapter.active_fetch = fetch
    host.sessions.append(adapter)
    try:
        fetch.start()
        sim.engine.run()
    finally:
        host.sessions.remove(adapter)
    if "error" in result:
        raise result["error"]
    return result["payload"], result["timings"]
