"""Scenario files: parsing, validation and execution.

A scenario is a line-oriented text file with bracketed sections. Unknown
sections or keys are configuration errors, not warnings. Example::

    scenario demo
    seed 7
    horizon 600

    [nodes]
    consumer c1
    forwarder gw cs=64MB strategy=best-route
    producer srv delay-ms=1

    [links]
    c1 gw prop-ms=5 bw=50Mbps
    gw srv prop-ms=25 bw=50Mbps

    [routes]
    gw /ndn/web/video srv cost=1

    [videos]
    video foo server=srv prefix=/ndn/web/video duration-s=40 segment-s=2
    tier foo 720p height=720 min-bw=3.3Mbps

    [sessions]
    session s1 consumer=c1 videos=foo start-s=0 window=8

Optional sections: [fch], [prewarm], [throttles], [metrics].
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field

from ..consumer import FetchEngine, PlayerSession, SessionConfig, SessionState
from ..errors import CapacityExceeded, InvalidConfig, InvalidTopology
from ..forwarding import BestRoute, GatewayPrefetch, Strategy
from ..metrics import CacheStats, MetricsReport, ServerSummary, SessionMetrics
from ..names import Name, name_parse
from ..packets import KeyMaterial
from ..producer import (
    Representation,
    Repository,
    VideoCatalog,
    package_video,
    publish,
    representation_files,
)
from .link import ThrottleSchedule
from .topology import ConsumerHost, ForwarderHost, NetworkSim, ProducerHost, derive_seed

DEFAULT_HORIZON_S = 3600.0


@dataclass
class NodeSpec:
    node_id: str
    kind: str  # consumer | forwarder | producer
    cs_bytes: int = 0
    strategy: Strategy = field(default_factory=BestRoute)
    aggregate: bool = True
    delay_ms: float = 1.0


@dataclass
class LinkSpec:
    a: str
    b: str
    prop_ms: float = 0.0
    bw_bps: float | None = None
    queue_bytes: int | None = None


@dataclass
class RouteSpec:
    node: str
    prefix: str
    via: str
    cost: int = 1


@dataclass
class VideoSpec:
    video_id: str
    server: str
    prefix: str
    duration_s: float
    segment_s: float = 2.0
    chunk_bytes: int = 8000
    freshness_ms: int = 3_600_000
    tiers: list[Representation] = field(default_factory=list)


@dataclass
class SessionSpec:
    session_id: str
    consumer: str
    videos: list[str]
    start_s: float = 0.0
    window: int = 8
    rto_ms: float = 1000.0
    max_retx: int = 3
    safety: float = 0.95
    est_fast_s: float = 2.0
    est_slow_s: float = 6.0
    startup_s: float = 2.0
    capacity_s: float = 30.0


@dataclass
class PrewarmSpec:
    node: str
    video: str
    tier: str
    fraction: float


@dataclass
class ThrottleSpec:
    src: str
    dst: str
    at_s: float
    bw_bps: float | None


@dataclass
class Scenario:
    scenario_id: str = "scenario"
    seed: int = 0
    horizon_s: float = DEFAULT_HORIZON_S
    nodes: list[NodeSpec] = field(default_factory=list)
    links: list[LinkSpec] = field(default_factory=list)
    routes: list[RouteSpec] = field(default_factory=list)
    videos: list[VideoSpec] = field(default_factory=list)
    sessions: list[SessionSpec] = field(default_factory=list)
    fch: dict[str, list[str]] = field(default_factory=dict)
    prewarm: list[PrewarmSpec] = field(default_factory=list)
    throttles: list[ThrottleSpec] = field(default_factory=list)
    jitter_mode: str = "mad"


_BW_RE = re.compile(r"^(\d+(?:\.\d+)?)([kKmMgG]?)(?:bps)?$")
_SIZE_RE = re.compile(r"^(\d+(?:\.\d+)?)([kKmMgG]?)B?$")
_SCALE = {"": 1.0, "k": 1e3, "m": 1e6, "g": 1e9}


def parse_bandwidth(text: str) -> float | None:
    if text == "unlimited":
        return None
    m = _BW_RE.match(text)
    if not m:
        raise InvalidConfig(f"bad bandwidth {text!r}")
    return float(m.group(1)) * _SCALE[m.group(2).lower()]


def parse_size(text: str) -> int | None:
    if text == "unlimited":
        return None
    m = _SIZE_RE.match(text)
    if not m:
        raise InvalidConfig(f"bad size {text!r}")
    return int(float(m.group(1)) * _SCALE[m.group(2).lower()])


def _parse_strategy(text: str) -> Strategy:
    if text == "best-route":
        return BestRoute()
    if text.startswith("prefetch"):
        depth = 16
        if ":" in text:
            depth = int(text.split(":", 1)[1])
        return GatewayPrefetch(depth)
    raise InvalidConfig(f"unknown strategy {text!r}")


def _kv(tokens: list[str], allowed: dict[str, str], where: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for token in tokens:
        if "=" not in token:
            raise InvalidConfig(f"{where}: expected key=value, got {token!r}")
        key, _, value = token.partition("=")
        if key not in allowed:
            raise InvalidConfig(f"{where}: unknown key {key!r}")
        values[key] = value
    return values


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    section: str | None = None
    known_sections = {
        "nodes",
        "links",
        "routes",
        "videos",
        "sessions",
        "fch",
        "prewarm",
        "throttles",
        "metrics",
    }
    videos: dict[str, VideoSpec] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("["):
            name = line.strip("[]")
            if name not in known_sections:
                raise InvalidConfig(f"{where}: unknown section {name!r}")
            section = name
            continue
        tokens = line.split()
        if section is None:
            if tokens[0] == "scenario" and len(tokens) == 2:
                scenario.scenario_id = tokens[1]
            elif tokens[0] == "seed" and len(tokens) == 2:
                scenario.seed = int(tokens[1])
            elif tokens[0] == "horizon" and len(tokens) == 2:
                scenario.horizon_s = float(tokens[1])
            else:
                raise InvalidConfig(f"{where}: unknown directive {tokens[0]!r}")
        elif section == "nodes":
            kind = tokens[0]
            if kind not in ("consumer", "forwarder", "producer"):
                raise InvalidConfig(f"{where}: unknown node kind {kind!r}")
            if len(tokens) < 2:
                raise InvalidConfig(f"{where}: node needs an id")
            spec = NodeSpec(tokens[1], kind)
            if kind == "forwarder":
                kv = _kv(tokens[2:], {"cs": "", "strategy": "", "aggregate": ""}, where)
                if "cs" in kv:
                    spec.cs_bytes = parse_size(kv["cs"]) or 0
                if "strategy" in kv:
                    spec.strategy = _parse_strategy(kv["strategy"])
                if "aggregate" in kv:
                    spec.aggregate = kv["aggregate"] == "on"
            elif kind == "producer":
                kv = _kv(tokens[2:], {"delay-ms": ""}, where)
                if "delay-ms" in kv:
                    spec.delay_ms = float(kv["delay-ms"])
            else:
                _kv(tokens[2:], {}, where)
            scenario.nodes.append(spec)
        elif section == "links":
            if len(tokens) < 2:
                raise InvalidConfig(f"{where}: link needs two endpoints")
            kv = _kv(tokens[2:], {"prop-ms": "", "bw": "", "queue": ""}, where)
            scenario.links.append(
                LinkSpec(
                    tokens[0],
                    tokens[1],
                    prop_ms=float(kv.get("prop-ms", "0")),
                    bw_bps=parse_bandwidth(kv["bw"]) if "bw" in kv else None,
                    queue_bytes=parse_size(kv["queue"]) if "queue" in kv else None,
                )
            )
        elif section == "routes":
            if len(tokens) < 3:
                raise InvalidConfig(f"{where}: route needs node, prefix, via")
            kv = _kv(tokens[3:], {"cost": ""}, where)
            scenario.routes.append(
                RouteSpec(tokens[0], tokens[1], tokens[2], cost=int(kv.get("cost", "1")))
            )
        elif section == "videos":
            if tokens[0] == "video":
                kv = _kv(
                    tokens[2:],
                    {
                        "server": "",
                        "prefix": "",
                        "duration-s": "",
                        "segment-s": "",
                        "chunk-bytes": "",
                        "freshness-ms": "",
                    },
                    where,
                )
                for required in ("server", "prefix", "duration-s"):
                    if required not in kv:
                        raise InvalidConfig(f"{where}: video needs {required}")
                spec = VideoSpec(
                    video_id=tokens[1],
                    server=kv["server"],
                    prefix=kv["prefix"],
                    duration_s=float(kv["duration-s"]),
                    segment_s=float(kv.get("segment-s", "2")),
                    chunk_bytes=int(kv.get("chunk-bytes", "8000")),
                    freshness_ms=int(kv.get("freshness-ms", "3600000")),
                )
                videos[spec.video_id] = spec
                scenario.videos.append(spec)
            elif tokens[0] == "tier":
                if len(tokens) < 3 or tokens[1] not in videos:
                    raise InvalidConfig(f"{where}: tier needs a declared video id")
                kv = _kv(tokens[3:], {"height": "", "min-bw": "", "media": ""}, where)
                if "min-bw" not in kv:
                    raise InvalidConfig(f"{where}: tier needs min-bw")
                min_bw = int(parse_bandwidth(kv["min-bw"]) or 0)
                media = int(parse_bandwidth(kv["media"]) or 0) if "media" in kv else min_bw
                videos[tokens[1]].tiers.append(
                    Representation(
                        label=tokens[2],
                        height=int(kv.get("height", "0")) or 1,
                        min_bandwidth_bps=min_bw,
                        media_bitrate_bps=media,
                    )
                )
            else:
                raise InvalidConfig(f"{where}: unknown videos entry {tokens[0]!r}")
        elif section == "sessions":
            if tokens[0] != "session" or len(tokens) < 2:
                raise InvalidConfig(f"{where}: expected 'session <id> ...'")
            kv = _kv(
                tokens[2:],
                {
                    "consumer": "",
                    "videos": "",
                    "start-s": "",
                    "window": "",
                    "rto-ms": "",
                    "max-retx": "",
                    "safety": "",
                    "est-fast-s": "",
                    "est-slow-s": "",
                    "startup-s": "",
                    "capacity-s": "",
                },
                where,
            )
            for required in ("consumer", "videos"):
                if required not in kv:
                    raise InvalidConfig(f"{where}: session needs {required}")
            scenario.sessions.append(
                SessionSpec(
                    session_id=tokens[1],
                    consumer=kv["consumer"],
                    videos=kv["videos"].split(","),
                    start_s=float(kv.get("start-s", "0")),
                    window=int(kv.get("window", "8")),
                    rto_ms=float(kv.get("rto-ms", "1000")),
                    max_retx=int(kv.get("max-retx", "3")),
                    safety=float(kv.get("safety", "0.95")),
                    est_fast_s=float(kv.get("est-fast-s", "2")),
                    est_slow_s=float(kv.get("est-slow-s", "6")),
                    startup_s=float(kv.get("startup-s", "2")),
                    capacity_s=float(kv.get("capacity-s", "30")),
                )
            )
        elif section == "fch":
            scenario.fch[tokens[0]] = tokens[1:]
        elif section == "prewarm":
            if len(tokens) != 4:
                raise InvalidConfig(f"{where}: prewarm needs node video tier fraction")
            scenario.prewarm.append(
                PrewarmSpec(tokens[0], tokens[1], tokens[2], float(tokens[3]))
            )
        elif section == "throttles":
            if len(tokens) < 2:
                raise InvalidConfig(f"{where}: throttle needs src dst")
            kv = _kv(tokens[2:], {"at-s": "", "bw": ""}, where)
            if "at-s" not in kv or "bw" not in kv:
                raise InvalidConfig(f"{where}: throttle needs at-s and bw")
            scenario.throttles.append(
                ThrottleSpec(tokens[0], tokens[1], float(kv["at-s"]), parse_bandwidth(kv["bw"]))
            )
        elif section == "metrics":
            if tokens[0] == "jitter" and len(tokens) == 2 and tokens[1] in ("mad", "var"):
                scenario.jitter_mode = tokens[1]
            else:
                raise InvalidConfig(f"{where}: unknown metrics entry {line!r}")
    _validate(scenario)
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _validate(scenario: Scenario) -> None:
    ids = [n.node_id for n in scenario.nodes]
    if len(set(ids)) != len(ids):
        raise InvalidConfig("duplicate node id")
    known = set(ids)
    kinds = {n.node_id: n.kind for n in scenario.nodes}
    for link in scenario.links:
        for end in (link.a, link.b):
            if end not in known:
                raise InvalidConfig(f"link references unknown node {end!r}")
    for route in scenario.routes:
        if route.node not in known or route.via not in known:
            raise InvalidConfig(f"route {route.node}->{route.via} references unknown node")
        if kinds[route.node] != "forwarder":
            raise InvalidConfig(f"route node {route.node!r} is not a forwarder")
    video_ids = set()
    for video in scenario.videos:
        if video.video_id in video_ids:
            raise InvalidConfig(f"duplicate video {video.video_id!r}")
        video_ids.add(video.video_id)
        if video.server not in known or kinds[video.server] != "producer":
            raise InvalidConfig(f"video {video.video_id!r} needs a producer server")
        if not video.tiers:
            raise InvalidConfig(f"video {video.video_id!r} has no tiers")
        name_parse(video.prefix)
    for session in scenario.sessions:
        if session.consumer not in known or kinds[session.consumer] != "consumer":
            raise InvalidConfig(f"session {session.session_id!r} needs a consumer")
        if not session.videos:
            raise InvalidConfig(f"session {session.session_id!r} lists no videos")
        prefixes = set()
        for vid in session.videos:
            if vid not in video_ids:
                raise InvalidConfig(f"session references unknown video {vid!r}")
            spec = next(v for v in scenario.videos if v.video_id == vid)
            prefixes.add(spec.prefix)
        if len(prefixes) != 1:
            raise InvalidConfig("a session's videos must share one prefix")
    for consumer, gateways in scenario.fch.items():
        if consumer not in known or kinds[consumer] != "consumer":
            raise InvalidConfig(f"fch entry for non-consumer {consumer!r}")
        for gw in gateways:
            if gw not in known:
                raise InvalidConfig(f"fch references unknown node {gw!r}")
    for pw in scenario.prewarm:
        if pw.node not in known or kinds[pw.node] != "forwarder":
            raise InvalidConfig(f"prewarm node {pw.node!r} is not a forwarder")
        if pw.video not in video_ids:
            raise InvalidConfig(f"prewarm references unknown video {pw.video!r}")
        if not 0 <= pw.fraction <= 1:
            raise InvalidConfig("prewarm fraction must be within [0, 1]")
    by_direction: dict[tuple[str, str], list[tuple[float, float | None]]] = {}
    for throttle in scenario.throttles:
        if throttle.src not in known or throttle.dst not in known:
            raise InvalidConfig("throttle references unknown node")
        by_direction.setdefault((throttle.src, throttle.dst), []).append(
            (throttle.at_s, throttle.bw_bps)
        )
    for (src, dst), points in by_direction.items():
        try:
            ThrottleSchedule(points)
        except ValueError as exc:
            raise InvalidConfig(f"throttle {src}->{dst}: {exc}") from exc


def prewarm_cache(
    sim: NetworkSim,
    node_id: str,
    repo: Repository,
    prefix: Name,
    catalog: VideoCatalog,
    label: str,
    fraction: float,
) -> int:
    """Pre-load a forwarder's content store with the leading share of each
    of a representation's files (playlist first, then segments in playback
    order). Raises CapacityExceeded if anything gets evicted while loading.
    """
    host = sim.hosts[node_id]
    if not isinstance(host, ForwarderHost):
        raise InvalidTopology(f"{node_id} has no content store")
    cs = host.node.cs
    inserted = 0
    now = sim.engine.now
    for base in representation_files(prefix, catalog, label):
        chunk_names = repo.file_chunk_names(base)
        keep = math.ceil(fraction * len(chunk_names))
        for full_name in chunk_names[:keep]:
            evicted = cs.insert(repo.store[full_name], now)
            if evicted:
                raise CapacityExceeded(
                    f"{node_id}: content store too small for prewarm set"
                )
            inserted += 1
    return inserted


class ScenarioRun:
    """A built scenario: the simulator plus everything needed for reporting."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.sim = NetworkSim(scenario.seed)
        self.sessions: list[PlayerSession] = []
        self._session_hosts: dict[str, ConsumerHost] = {}
        self.catalogs: dict[str, VideoCatalog] = {}
        self.repos: dict[str, Repository] = {}
        self._build()

    def _build(self) -> None:
        scenario = self.scenario
        sim = self.sim
        for node in scenario.nodes:
            if node.kind == "forwarder":
                sim.add_forwarder(
                    node.node_id,
                    cs_capacity_bytes=node.cs_bytes,
                    strategy=node.strategy,
                    aggregate_interests=node.aggregate,
                )
            elif node.kind == "producer":
                key = KeyMaterial(
                    key_id=f"{node.node_id}-key",
                    secret=derive_seed(scenario.seed, f"key:{node.node_id}").to_bytes(8, "big"),
                )
                repo = Repository(key, processing_delay_ms=node.delay_ms)
                self.repos[node.node_id] = repo
                sim.add_producer(node.node_id, repo)
            else:
                sim.add_consumer(node.node_id)
        for link in scenario.links:
            sim.add_link(
                link.a,
                link.b,
                propagation_ms=link.prop_ms,
                bandwidth_bps=link.bw_bps,
                queue_limit_bytes=link.queue_bytes,
            )
        for route in scenario.routes:
            sim.add_route(route.node, name_parse(route.prefix), route.via, route.cost)
        for consumer, gateways in scenario.fch.items():
            sim.fch.add(consumer, gateways)

        for video in scenario.videos:
            catalog = package_video(
                video.video_id, video.duration_s, video.segment_s, video.tiers
            )
            self.catalogs[video.video_id] = catalog
            repo = self.repos[video.server]
            publish(
                repo,
                catalog,
                video.prefix,
                chunk_size=video.chunk_bytes,
                freshness_ms=video.freshness_ms,
            )
            producer_host = sim.hosts[video.server]
            assert isinstance(producer_host, ProducerHost)
            producer_host.announce(name_parse(video.prefix))

        prefixes = [name_parse(v.prefix) for v in scenario.videos]
        sim.validate_reachability(prefixes)

        for pw in scenario.prewarm:
            video = next(v for v in scenario.videos if v.video_id == pw.video)
            prewarm_cache(
                sim,
                pw.node,
                self.repos[video.server],
                name_parse(video.prefix),
                self.catalogs[pw.video],
                pw.tier,
                pw.fraction,
            )

        for throttle in scenario.throttles:
            link = sim.link_between(throttle.src, throttle.dst)

            def apply(link=link, t=throttle) -> None:
                link.set_bandwidth(t.src, t.dst, t.bw_bps)

            if throttle.at_s <= 0:
                apply()
            else:
                sim.engine.schedule(throttle.at_s, apply)

        for spec in scenario.sessions:
            self._setup_session(spec)

    def _setup_session(self, spec: SessionSpec) -> None:
        scenario = self.scenario
        sim = self.sim
        host = sim.hosts[spec.consumer]
        assert isinstance(host, ConsumerHost)
        video_spec = next(v for v in scenario.videos if v.video_id == spec.videos[0])
        prefix = name_parse(video_spec.prefix)
        key = self.repos[video_spec.server].key
        config = SessionConfig(
            engine=FetchEngine(spec.window, spec.rto_ms, spec.max_retx),
            safety_factor=spec.safety,
            half_life_fast_s=spec.est_fast_s,
            half_life_slow_s=spec.est_slow_s,
            startup_threshold_s=spec.startup_s,
            buffer_capacity_s=spec.capacity_s,
        )
        session = PlayerSession(
            session_id=spec.session_id,
            transport=host,
            prefix=prefix,
            video_ids=spec.videos,
            key=key,
            rng=random.Random(derive_seed(scenario.seed, f"session:{spec.session_id}")),
            config=config,
        )
        host.sessions.append(session)
        self.sessions.append(session)
        self._session_hosts[spec.session_id] = host

        def begin() -> None:
            if host.gateway_face is not None:
                session.start()
                return
            if spec.consumer in scenario.fch:
                probe_base = prefix.append(spec.videos[0], "playlist.m3u8")
                host.probe_gateways(
                    sim.fch.lookup(spec.consumer), probe_base, session.start
                )
            else:
                host.attach_direct()
                session.start()

        sim.engine.schedule(spec.start_s, begin)

    def resource_request(self, consumer_id: str, path: str) -> bytes:
        """Resolve one resource path through the network, outside any session.

        The path maps under the scenario's video prefix; the returned bytes
        are the reassembled file content.
        """
        from ..consumer import resource_name
        from .topology import fetch_file_via

        video = self.scenario.videos[0]
        base = resource_name(name_parse(video.prefix), path)
        key = self.repos[video.server].key
        payload, _timings = fetch_file_via(self.sim, consumer_id, base, key)
        return payload

    def all_sessions_done(self) -> bool:
        return all(s.state is SessionState.ENDED for s in self.sessions)

    def run(self) -> MetricsReport:
        sim = self.sim
        sim.start_pit_sweeper(lambda: not self.all_sessions_done())
        while sim.engine.pending() and not self.all_sessions_done():
            if sim.engine.now > self.scenario.horizon_s:
                break
            sim.engine.advance()
        return self.report()

    def report(self) -> MetricsReport:
        sim = self.sim
        cache: dict[str, CacheStats] = {}
        counters: dict[str, dict[str, int]] = {}
        server: dict[str, ServerSummary] = {}
        for node_id, host in sim.hosts.items():
            if isinstance(host, ForwarderHost):
                stats = host.node.stats
                cache[node_id] = CacheStats(stats.cs_hits, stats.cs_misses)
                counters[node_id] = {
                    "interests_in": stats.interests_in,
                    "interests_out": stats.interests_out,
                    "data_in": stats.data_in,
                    "data_out": stats.data_out,
                    "nacks_in": stats.nacks_in,
                    "nacks_out": stats.nacks_out,
                    "prefetch_sent": stats.prefetch_sent,
                }
            elif isinstance(host, ProducerHost):
                delays = host.repo.stats.response_delays_ms
                server[node_id] = ServerSummary(
                    interests=len(delays),
                    mean_ms=sum(delays) / len(delays) if delays else 0.0,
                    max_ms=max(delays) if delays else 0.0,
                    within_5ms=host.repo.stats.fraction_within(5.0),
                )
        session_metrics = []
        for session in self.sessions:
            host = self._session_hosts[session.session_id]
            session_metrics.append(
                SessionMetrics.from_session(
                    session,
                    host.node_id,
                    host.chosen_gateway,
                    host.probe_results,
                    jitter_mode=self.scenario.jitter_mode,
                )
            )
        return MetricsReport(
            scenario_id=self.scenario.scenario_id,
            seed=self.scenario.seed,
            sessions=session_metrics,
            cache=cache,
            node_counters=counters,
            server=server,
            link_drops=sim.drop_counts(),
        )


def run_scenario(scenario: Scenario) -> MetricsReport:
    """Build and execute a scenario; identical inputs give identical reports."""
    return ScenarioRun(scenario).run()
