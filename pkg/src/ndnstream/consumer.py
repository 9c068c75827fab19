"""Player-side stack: pipelined fetching, bandwidth estimation, ABR and playback.

The pieces are transport-agnostic: anything offering ``now()``,
``send_interest()`` and ``schedule(at, fn)`` can drive them, which is how
the emulator (and the unit tests, with a scripted fake) plug in.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

from .errors import (
    ContentMissing,
    FetchError,
    FetchTimeout,
    IntegrityFailure,
    InvalidRequest,
)
from .names import Name, name_parse
from .packets import Data, Interest, KeyMaterial, Nack, NackReason, verify_data
from .producer import Representation


class Transport(Protocol):
    def now(self) -> float: ...

    def send_interest(self, interest: Interest) -> None: ...

    def schedule(self, at: float, fn: Callable[[], None]) -> None: ...


@dataclass
class FetchEngine:
    """Pipelining parameters for file retrieval."""

    window: int = 8
    rto_ms: float = 1000.0
    max_retx: int = 3

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.rto_ms <= 0:
            raise ValueError("rto_ms must be positive")


@dataclass
class ChunkTiming:
    chunk: int
    first_sent: float
    last_sent: float
    received: float | None = None
    retx_count: int = 0
    from_cache_hint: bool = False

    @property
    def rtt_ms(self) -> float | None:
        if self.received is None:
            return None
        return (self.received - self.last_sent) * 1000.0


class BandwidthEstimator:
    """Dual half-life EWMA over byte-rate samples, weighted by duration.

    The reported figure is min(fast, slow) after correcting each
    accumulator's startup bias, so a single sample reports its own rate
    exactly and drops react faster than recoveries.
    """

    def __init__(self, half_life_fast_s: float = 2.0, half_life_slow_s: float = 6.0):
        if half_life_fast_s <= 0 or half_life_slow_s <= 0:
            raise ValueError("half-lives must be positive")
        self.half_lives = (half_life_fast_s, half_life_slow_s)
        self._acc = [0.0, 0.0]
        self.total_weight = 0.0

    @property
    def has_estimate(self) -> bool:
        return self.total_weight > 0.0

    def record_sample(self, nbytes: int, duration_s: float) -> float:
        if duration_s <= 0:
            raise ValueError("duration must be positive")
        rate = 8.0 * nbytes / duration_s
        for i, hl in enumerate(self.half_lives):
            alpha = 0.5 ** (duration_s / hl)
            self._acc[i] = alpha * self._acc[i] + (1.0 - alpha) * rate
        self.total_weight += duration_s
        return self.estimate_bps()

    def estimate_bps(self) -> float:
        if not self.has_estimate:
            raise ValueError("no samples recorded")
        corrected = []
        for acc, hl in zip(self._acc, self.half_lives):
            zero_factor = 1.0 - 0.5 ** (self.total_weight / hl)
            corrected.append(acc / zero_factor)
        return min(corrected)


class AbrController:
    """Throughput-rule tier picker: highest tier under a safety margin."""

    def __init__(self, tiers: list[Representation], safety_factor: float = 0.95):
        if not tiers:
            raise ValueError("tier list must be non-empty")
        if not 0 < safety_factor <= 1:
            raise ValueError("safety factor must be in (0, 1]")
        self.tiers = sorted(tiers, key=lambda r: r.min_bandwidth_bps)
        self.safety_factor = safety_factor
        self.current = 0

    def select(self, estimate_bps: float) -> Representation:
        budget = self.safety_factor * estimate_bps
        chosen = 0
        for i, rep in enumerate(self.tiers):
            if rep.min_bandwidth_bps <= budget:
                chosen = i
        self.current = chosen
        return self.tiers[chosen]


@dataclass
class PlaybackBuffer:
    startup_threshold_s: float = 2.0
    capacity_s: float = 30.0
    level_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.startup_threshold_s <= self.capacity_s:
            raise ValueError("startup threshold must be in (0, capacity]")


class FileFetch:
    """Retrieves one file: version discovery, then window-pipelined chunks.

    Every chunk timeout triggers a retransmission with a fresh nonce, up
    to ``max_retx``; the chunk's RTT is measured from the latest send.
    """

    def __init__(
        self,
        transport: Transport,
        engine: FetchEngine,
        base: Name,
        key: KeyMaterial,
        rng: random.Random,
        on_complete: Callable[[bytes, list[ChunkTiming]], None],
        on_error: Callable[[FetchError], None],
    ):
        self.transport = transport
        self.engine = engine
        self.base = base
        self.key = key
        self.rng = rng
        self.on_complete = on_complete
        self.on_error = on_error

        self.started_at: float = 0.0
        self.version: int | None = None
        self.final_chunk: int | None = None
        self.timings: dict[int, ChunkTiming] = {}
        self.contents: dict[int, bytes] = {}
        self._outstanding: dict[int, int] = {}  # chunk -> send serial
        self._discovery_serial = 0
        self._discovery_retx = 0
        self._next_chunk = 0
        self._done = False
        self.max_in_flight = 0

    # -- sending ---------------------------------------------------------

    def start(self) -> None:
        self.started_at = self.transport.now()
        self._send_discovery()

    def _send_discovery(self) -> None:
        now = self.transport.now()
        self._discovery_serial += 1
        serial = self._discovery_serial
        interest = Interest(self.base, can_be_prefix=True, nonce=self.rng.getrandbits(32))
        self.transport.send_interest(interest)
        self.transport.schedule(
            now + self.engine.rto_ms / 1000.0, lambda: self._discovery_timeout(serial)
        )

    def _discovery_timeout(self, serial: int) -> None:
        if self._done or self.version is not None or serial != self._discovery_serial:
            return
        if self._discovery_retx >= self.engine.max_retx:
            self._fail(FetchTimeout(f"discovery of {self.base} timed out"))
            return
        self._discovery_retx += 1
        self._send_discovery()

    def _chunk_name(self, chunk: int) -> Name:
        return self.base.append(f"v={self.version}", f"c={chunk}")

    def _send_chunk(self, chunk: int, retx: bool) -> None:
        now = self.transport.now()
        serial = self._outstanding.get(chunk, 0) + 1
        self._outstanding[chunk] = serial
        interest = Interest(self._chunk_name(chunk), nonce=self.rng.getrandbits(32))
        timing = self.timings.get(chunk)
        if timing is None:
            self.timings[chunk] = ChunkTiming(chunk, first_sent=now, last_sent=now)
        else:
            timing.last_sent = now
            if retx:
                timing.retx_count += 1
        self.transport.send_interest(interest)
        self.transport.schedule(
            now + self.engine.rto_ms / 1000.0, lambda: self._chunk_timeout(chunk, serial)
        )
        self.max_in_flight = max(self.max_in_flight, len(self._outstanding))

    def _chunk_timeout(self, chunk: int, serial: int) -> None:
        if self._done or self._outstanding.get(chunk) != serial:
            return
        timing = self.timings[chunk]
        if timing.retx_count >= self.engine.max_retx:
            self._fail(FetchTimeout(f"chunk {chunk} of {self.base} timed out"))
            return
        self._send_chunk(chunk, retx=True)

    def _fill_window(self) -> None:
        assert self.final_chunk is not None
        while len(self._outstanding) < self.engine.window and self._next_chunk <= self.final_chunk:
            chunk = self._next_chunk
            self._next_chunk += 1
            if chunk in self.contents:
                continue
            self._send_chunk(chunk, retx=False)

    # -- receiving -------------------------------------------------------

    def handle_data(self, data: Data, from_cache: bool) -> None:
        if self._done:
            return
        now = self.transport.now()
        if not verify_data(data, self.key):
            self._fail(IntegrityFailure(f"bad tag on {data.name}"))
            return
        if self.version is None:
            # Discovery response: learn the version and total size.
            if data.name.base != self.base:
                return
            self.version = data.name.version
            self.final_chunk = data.final_chunk
            chunk = data.name.chunk
            timing = ChunkTiming(chunk, first_sent=self.started_at, last_sent=self._last_discovery_send())
            timing.retx_count = self._discovery_retx
            timing.received = now
            timing.from_cache_hint = from_cache
            self.timings[chunk] = timing
            self.contents[chunk] = data.content
            self._next_chunk = 0
            self._fill_window()
            self._maybe_finish()
            return
        if data.name.base != self.base or data.name.version != self.version:
            return
        chunk = data.name.chunk
        if chunk not in self._outstanding:
            return
        del self._outstanding[chunk]
        timing = self.timings[chunk]
        timing.received = now
        timing.from_cache_hint = from_cache
        self.contents[chunk] = data.content
        self._fill_window()
        self._maybe_finish()

    def _last_discovery_send(self) -> float:
        # Discovery re-sends happen exactly one rto apart.
        return self.started_at + self._discovery_retx * self.engine.rto_ms / 1000.0

    def handle_nack(self, nack: Nack) -> None:
        if self._done:
            return
        if nack.reason is NackReason.NO_CONTENT:
            self._fail(ContentMissing(f"no content for {nack.interest_name}"))
        else:
            self._fail(FetchError(f"no route for {nack.interest_name}"))

    def _maybe_finish(self) -> None:
        assert self.final_chunk is not None
        if len(self.contents) < self.final_chunk + 1:
            return
        self._done = True
        payload = b"".join(self.contents[i] for i in range(self.final_chunk + 1))
        timings = [self.timings[i] for i in sorted(self.timings)]
        self.on_complete(payload, timings)

    def _fail(self, exc: FetchError) -> None:
        if self._done:
            return
        self._done = True
        self.on_error(exc)


class SessionState(Enum):
    STARTUP = "startup"
    PLAYING = "playing"
    REBUFFERING = "rebuffering"
    ENDED = "ended"


@dataclass
class FileRecord:
    """One completed (or aborted) file retrieval with its chunk timings."""

    name: str
    role: str  # master-playlist | media-playlist | segment | probe
    video_id: str
    tier: str | None
    segment_index: int | None
    started: float
    finished: float
    content_bytes: int
    timings: list[ChunkTiming]


@dataclass
class SessionConfig:
    engine: FetchEngine = field(default_factory=FetchEngine)
    safety_factor: float = 0.95
    half_life_fast_s: float = 2.0
    half_life_slow_s: float = 6.0
    startup_threshold_s: float = 2.0
    buffer_capacity_s: float = 30.0


def resource_name(prefix: Name, path: str) -> Name:
    """Map a URI path under the service prefix to a base name."""
    if not path or path.startswith("/") or any(p == "" for p in path.split("/")):
        raise InvalidRequest(f"bad resource path: {path!r}")
    return name_parse(str(prefix).rstrip("/") + "/" + path)


def parse_master_playlist(text: str) -> list[tuple[str, int, int, str]]:
    """Variant entries as (label, min_bandwidth_bps, height, uri)."""
    entries: list[tuple[str, int, int, str]] = []
    pending: tuple[str, int, int] | None = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#EXT-X-STREAM-INF:"):
            attrs = line.split(":", 1)[1]
            bandwidth = height = 0
            label = ""
            for part in attrs.split(","):
                key, _, value = part.partition("=")
                if key == "BANDWIDTH":
                    bandwidth = int(value)
                elif key == "RESOLUTION":
                    height = int(value)
                elif key == "NAME":
                    label = value.strip('"')
            pending = (label, bandwidth, height)
        elif pending is not None and line and not line.startswith("#"):
            entries.append((*pending, line))
            pending = None
    return entries


def parse_media_playlist(text: str) -> list[tuple[float, str]]:
    """Segment entries as (duration_s, uri)."""
    segments: list[tuple[float, str]] = []
    pending: float | None = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#EXTINF:"):
            pending = float(line.split(":", 1)[1].rstrip(","))
        elif pending is not None and line and not line.startswith("#"):
            segments.append((pending, line))
            pending = None
    return segments


class PlayerSession:
    """Plays a list of videos: fetches playlists and segments, adapts the
    tier from bandwidth estimates and tracks playback quality-of-experience.

    Playback drains one second of media per simulated second once the
    buffer first reaches the startup threshold; the buffer emptying before
    the video ends opens a rebuffer interval.
    """

    def __init__(
        self,
        session_id: str,
        transport: Transport,
        prefix: Name,
        video_ids: list[str],
        key: KeyMaterial,
        rng: random.Random,
        config: SessionConfig | None = None,
        on_finished: Callable[[], None] | None = None,
    ):
        self.session_id = session_id
        self.transport = transport
        self.prefix = prefix
        self.video_ids = list(video_ids)
        self.key = key
        self.rng = rng
        self.config = config or SessionConfig()
        self.on_finished = on_finished

        self.estimator = BandwidthEstimator(
            self.config.half_life_fast_s, self.config.half_life_slow_s
        )
        self.buffer = PlaybackBuffer(
            self.config.startup_threshold_s, self.config.buffer_capacity_s
        )
        self.abr: AbrController | None = None

        self.state = SessionState.STARTUP
        self.quality_timeline: list[tuple[float, str]] = []
        self.rebuffer_events: list[tuple[float, float]] = []
        self.estimator_trace: list[tuple[float, float]] = []
        self.files: list[FileRecord] = []
        self.startup_delay_s: float | None = None
        self.aborted: str | None = None

        self.started_at: float = 0.0
        self.ended_at: float | None = None
        self.media_downloaded_s = 0.0
        self.media_played_s = 0.0

        self._video_index = -1
        self._segments: list[tuple[float, str]] = []
        self._segment_index = 0
        self._media_playlists: dict[str, list[tuple[float, str]]] = {}
        self._tier_label: str | None = None
        self._rebuffer_start: float | None = None
        self._playing = False
        self._last_sync = 0.0
        self._drain_epoch = 0
        self.active_fetch: FileFetch | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self.started_at = self.transport.now()
        self._last_sync = self.started_at
        self._next_video()

    def _next_video(self) -> None:
        self._video_index += 1
        if self._video_index >= len(self.video_ids):
            self._end_session()
            return
        self.state = SessionState.STARTUP
        self._playing = False
        self._segments = []
        self._segment_index = 0
        self._media_playlists = {}
        video = self.video_ids[self._video_index]
        self._fetch(f"{video}/playlist.m3u8", "master-playlist", self._on_master)

    def _end_session(self) -> None:
        self.state = SessionState.ENDED
        self.ended_at = self.transport.now()
        if self.on_finished is not None:
            self.on_finished()

    def _abort(self, exc: FetchError) -> None:
        self.aborted = f"{type(exc).__name__}: {exc}"
        self._end_session()

    @property
    def current_video(self) -> str:
        return self.video_ids[self._video_index]

    # -- fetching ----------------------------------------------------------

    def _fetch(self, path: str, role: str, done: Callable[[bytes], None]) -> None:
        base = resource_name(self.prefix, path)
        started = self.transport.now()
        record_tier = self._tier_label if role == "segment" else None
        seg_index = self._segment_index if role == "segment" else None

        def on_complete(payload: bytes, timings: list[ChunkTiming]) -> None:
            finished = self.transport.now()
            self.files.append(
                FileRecord(
                    name=str(base),
                    role=role,
                    video_id=self.current_video,
                    tier=record_tier,
                    segment_index=seg_index,
                    started=started,
                    finished=finished,
                    content_bytes=len(payload),
                    timings=timings,
                )
            )
            if role == "segment":
                duration = max(finished - started, 1e-9)
                estimate = self.estimator.record_sample(len(payload), duration)
                self.estimator_trace.append((finished, estimate))
            done(payload)

        fetch = FileFetch(
            self.transport,
            self.config.engine,
            base,
            self.key,
            self.rng,
            on_complete,
            self._abort,
        )
        self.active_fetch = fetch
        fetch.start()

    # -- playlist handling ---------------------------------------------------

    def _on_master(self, payload: bytes) -> None:
        entries = parse_master_playlist(payload.decode())
        if not entries:
            self._abort(FetchError("master playlist has no variants"))
            return
        tiers = [
            Representation(label, height or 1, bandwidth, bandwidth)
            for label, bandwidth, height, _uri in entries
        ]
        if self.abr is None:
            self.abr = AbrController(tiers, self.config.safety_factor)
        lowest = self.abr.tiers[0].label
        self._tier_label = lowest
        self._fetch_media_playlist(lowest, self._start_segments)

    def _fetch_media_playlist(self, label: str, then: Callable[[], None]) -> None:
        def on_playlist(payload: bytes) -> None:
            self._media_playlists[label] = parse_media_playlist(payload.decode())
            then()

        self._fetch(f"{self.current_video}/{label}/playlist.m3u8", "media-playlist", on_playlist)

    def _start_segments(self) -> None:
        self._segments = self._media_playlists[self._tier_label]
        self._segment_index = 0
        self._fetch_next_segment()

    # -- segment loop --------------------------------------------------------

    def _fetch_next_segment(self) -> None:
        if self.state is SessionState.ENDED:
            return
        if self._segment_index >= len(self._segments):
            return  # remaining playback drains; video advances on empty
        self._sync_playback()
        seg_duration = self._segments[self._segment_index][0]
        if self._playing:
            headroom = self.buffer.capacity_s - seg_duration
            if self.buffer.level_s > headroom + 1e-9:
                # wait for playback to drain enough room; the floor keeps
                # float residue from rescheduling the same instant forever
                wait = max(self.buffer.level_s - headroom, 1e-6)
                self.transport.schedule(self.transport.now() + wait, self._fetch_next_segment)
                return
        label = self._tier_label
        if self.abr is not None and self.estimator.has_estimate:
            label = self.abr.select(self.estimator.estimate_bps()).label
        if label != self._tier_label or not self.quality_timeline:
            self.quality_timeline.append((self.transport.now(), label))
        self._tier_label = label
        if label not in self._media_playlists:
            self._fetch_media_playlist(label, self._fetch_current_segment)
        else:
            self._fetch_current_segment()

    def _fetch_current_segment(self) -> None:
        k = self._segment_index
        _duration, uri = self._media_playlists[self._tier_label][k]
        path = f"{self.current_video}/{self._tier_label}/{uri}"
        self._fetch(path, "segment", self._on_segment)

    def _on_segment(self, payload: bytes) -> None:
        duration = self._media_playlists[self._tier_label][self._segment_index][0]
        self._segment_index += 1
        self._sync_playback()
        self.buffer.level_s += duration
        self.media_downloaded_s += duration
        self._after_buffer_grew()
        self._fetch_next_segment()

    def _after_buffer_grew(self) -> None:
        now = self.transport.now()
        if not self._playing:
            threshold_met = self.buffer.level_s >= self.buffer.startup_threshold_s
            downloaded_all = bool(self._segments) and self._segment_index >= len(self._segments)
            if threshold_met or downloaded_all:
                if self.startup_delay_s is None:
                    self.startup_delay_s = now - self.started_at
                if self._rebuffer_start is not None:
                    self.rebuffer_events.append((self._rebuffer_start, now))
                    self._rebuffer_start = None
                self._playing = True
                self.state = SessionState.PLAYING
        if self._playing:
            self._schedule_empty_check()

    # -- playback clock --------------------------------------------------------

    def _sync_playback(self) -> None:
        now = self.transport.now()
        if self._playing:
            dt = now - self._last_sync
            played = min(dt, self.buffer.level_s)
            self.buffer.level_s -= played
            self.media_played_s += played
        self._last_sync = now

    def _schedule_empty_check(self) -> None:
        self._drain_epoch += 1
        epoch = self._drain_epoch
        at = self.transport.now() + self.buffer.level_s
        self.transport.schedule(at, lambda: self._on_empty_check(epoch))

    def _on_empty_check(self, epoch: int) -> None:
        if epoch != self._drain_epoch or not self._playing or self.state is SessionState.ENDED:
            return
        self._sync_playback()
        if self.buffer.level_s > 1e-9:
            self._schedule_empty_check()
            return
        self.buffer.level_s = 0.0
        self._playing = False
        if self._segments and self._segment_index >= len(self._segments):
            self._next_video()
            return
        self.state = SessionState.REBUFFERING
        self._rebuffer_start = self.transport.now()

    # -- incoming packets -------------------------------------------------------

    def handle_data(self, data: Data, from_cache: bool) -> None:
        if self.active_fetch is not None:
            self.active_fetch.handle_data(data, from_cache)

    def handle_nack(self, nack: Nack) -> None:
        if self.active_fetch is not None:
            self.active_fetch.handle_nack(nack)
