"""Video packaging and the chunk repository behind the file server.

Videos are packaged into quality tiers, each tier into a playlist plus
fixed-duration segments. Segment payloads are deterministic pseudo-random
bytes sized by the tier's media bitrate; the experiments only depend on
sizes and timing, never on real media. Published files are chunked,
signed and kept in an in-memory map; an optional flat-file dump uses the
same TLV records as the wire.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, UnknownRepresentation, VersionRegression
from .names import Name, VersionedChunkName, name_parse
from .packets import Data, Interest, KeyMaterial, Nack, NackReason, sign_data, verify_data
from .wire import decode_packet, encode_packet

DEFAULT_CHUNK_SIZE = 8000
DEFAULT_FRESHNESS_MS = 3_600_000


@dataclass(frozen=True)
class Representation:
    """One quality tier: resolution plus the bandwidth it needs."""

    label: str
    height: int
    min_bandwidth_bps: int
    media_bitrate_bps: int

    def __post_init__(self) -> None:
        if self.media_bitrate_bps <= 0:
            raise InvalidConfig("media bitrate must be positive")
        if self.min_bandwidth_bps < self.media_bitrate_bps:
            raise InvalidConfig("min bandwidth below media bitrate")


@dataclass
class VideoCatalog:
    video_id: str
    duration_s: float
    segment_duration_s: float
    representations: list[Representation]
    segment_sizes: dict[str, list[int]] = field(default_factory=dict)

    @property
    def segment_count(self) -> int:
        return math.ceil(self.duration_s / self.segment_duration_s)

    def segment_durations(self) -> list[float]:
        n = self.segment_count
        durations = [self.segment_duration_s] * n
        remainder = self.duration_s - (n - 1) * self.segment_duration_s
        durations[-1] = remainder
        return durations

    def representation(self, label: str) -> Representation:
        for rep in self.representations:
            if rep.label == label:
                return rep
        raise UnknownRepresentation(label)


def _payload_rng(video_id: str, label: str, index: int) -> np.random.Generator:
    digest = hashlib.blake2b(
        f"{video_id}|{label}|{index}".encode(), digest_size=16
    ).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def segment_payload(catalog: VideoCatalog, label: str, index: int) -> bytes:
    """Deterministic pseudo-random bytes for one segment of one tier."""
    size = catalog.segment_sizes[label][index]
    return _payload_rng(catalog.video_id, label, index).bytes(size)


def package_video(
    video_id: str,
    duration_s: float,
    segment_duration_s: float,
    representations: list[Representation],
) -> VideoCatalog:
    """Split a video into equal-length segments across every tier.

    Full segments carry media_bitrate * segment_duration / 8 bytes; the
    final segment scales with its remaining duration.
    """
    if duration_s <= 0 or segment_duration_s <= 0:
        raise InvalidConfig("durations must be positive")
    if not representations:
        raise InvalidConfig("at least one representation required")
    catalog = VideoCatalog(video_id, duration_s, segment_duration_s, list(representations))
    durations = catalog.segment_durations()
    for rep in representations:
        catalog.segment_sizes[rep.label] = [
            round(rep.media_bitrate_bps * d / 8) for d in durations
        ]
    return catalog


def generate_master_playlist(catalog: VideoCatalog) -> str:
    """Variant list referencing each tier's media playlist, ascending bandwidth."""
    lines = ["#EXTM3U", "#EXT-X-VERSION:3"]
    for rep in sorted(catalog.representations, key=lambda r: r.min_bandwidth_bps):
        lines.append(
            f"#EXT-X-STREAM-INF:BANDWIDTH={rep.min_bandwidth_bps},"
            f'RESOLUTION={rep.height},NAME="{rep.label}"'
        )
        lines.append(f"{rep.label}/playlist.m3u8")
    return "\n".join(lines) + "\n"


def generate_media_playlist(catalog: VideoCatalog, representation: Representation) -> str:
    if representation not in catalog.representations:
        raise UnknownRepresentation(representation.label)
    lines = [
        "#EXTM3U",
        "#EXT-X-VERSION:3",
        f"#EXT-X-TARGETDURATION:{math.ceil(catalog.segment_duration_s)}",
    ]
    for k, duration in enumerate(catalog.segment_durations()):
        lines.append(f"#EXTINF:{duration:.3f},")
        lines.append(f"seg{k}.m4s")
    lines.append("#EXT-X-ENDLIST")
    return "\n".join(lines) + "\n"


def chunk_payload(payload: bytes, chunk_size: int) -> list[bytes]:
    """Slice a payload into chunk_size pieces; an empty payload still yields
    one empty chunk so every file has a chunk 0."""
    if chunk_size <= 0:
        raise InvalidConfig("chunk_size must be positive")
    if len(payload) == 0:
        return [b""]
    return [payload[i : i + chunk_size] for i in range(0, len(payload), chunk_size)]


@dataclass
class ServerStats:
    response_delays_ms: list[float] = field(default_factory=list)

    def record(self, delay_ms: float) -> None:
        self.response_delays_ms.append(delay_ms)

    def fraction_within(self, threshold_ms: float) -> float:
        if not self.response_delays_ms:
            return 0.0
        hits = sum(1 for d in self.response_delays_ms if d <= threshold_ms)
        return hits / len(self.response_delays_ms)


class Repository:
    """Stores signed chunks by full name and tracks the latest version per file."""

    def __init__(self, key: KeyMaterial, processing_delay_ms: float = 1.0):
        self.key = key
        self.processing_delay_ms = processing_delay_ms
        self.store: dict[Name, Data] = {}
        self.latest: dict[Name, int] = {}
        self.stats = ServerStats()

    def publish_file(
        self,
        base: Name,
        payload: bytes,
        version: int,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        freshness_ms: int = DEFAULT_FRESHNESS_MS,
    ) -> int:
        """Chunk, sign and store one file under the versioned naming scheme."""
        current = self.latest.get(base)
        if current is not None and version <= current:
            raise VersionRegression(f"{base}: version {version} <= stored {current}")
        chunks = chunk_payload(payload, chunk_size)
        final = len(chunks) - 1
        for k, piece in enumerate(chunks):
            data = Data(
                name=VersionedChunkName(base, version, k),
                content=piece,
                final_chunk=final,
                freshness_ms=freshness_ms,
            )
            signed = sign_data(data, self.key)
            self.store[signed.name.full()] = signed
        self.latest[base] = version
        return len(chunks)

    def file_chunk_names(self, base: Name, version: int | None = None) -> list[Name]:
        """Full names of a file's chunks, in chunk order."""
        v = self.latest[base] if version is None else version
        first = self.store.get(VersionedChunkName(base, v, 0).full())
        if first is None:
            return []
        return [
            VersionedChunkName(base, v, k).full() for k in range(first.final_chunk + 1)
        ]

    def resolve(self, interest: Interest) -> Data | Nack:
        """Answer an interest: exact chunk, or version discovery for a base name."""
        self.stats.record(self.processing_delay_ms)
        if not interest.can_be_prefix:
            data = self.store.get(interest.name)
            if data is None:
                return Nack(interest.name, NackReason.NO_CONTENT)
            return data
        version = self.latest.get(interest.name)
        if version is None:
            data = self.store.get(interest.name)
            if data is not None:
                return data
            return Nack(interest.name, NackReason.NO_CONTENT)
        full = VersionedChunkName(interest.name, version, 0).full()
        return self.store[full]

    def dump(self, path) -> int:
        """Write every stored chunk as a length-prefixed wire record."""
        count = 0
        with open(path, "wb") as fh:
            for data in self.store.values():
                raw = encode_packet(data)
                fh.write(len(raw).to_bytes(4, "big"))
                fh.write(raw)
                count += 1
        return count

    def load(self, path) -> int:
        """Read a dump file back; verifies every record under the repo key."""
        count = 0
        with open(path, "rb") as fh:
            while True:
                head = fh.read(4)
                if not head:
                    break
                raw = fh.read(int.from_bytes(head, "big"))
                packet = decode_packet(raw)
                if not isinstance(packet, Data) or not verify_data(packet, self.key):
                    raise InvalidConfig("dump record failed verification")
                self.store[packet.name.full()] = packet
                base, version = packet.name.base, packet.name.version
                if self.latest.get(base, -1) < version:
                    self.latest[base] = version
                count += 1
        return count


def video_file_names(prefix: Name, catalog: VideoCatalog) -> dict[str, Name]:
    """Base names of every file a catalog publishes, keyed by a short role tag."""
    root = prefix.append(catalog.video_id)
    names: dict[str, Name] = {"master": root.append("playlist.m3u8")}
    for rep in catalog.representations:
        names[f"{rep.label}/playlist"] = root.append(rep.label, "playlist.m3u8")
        for k in range(catalog.segment_count):
            names[f"{rep.label}/seg{k}"] = root.append(rep.label, f"seg{k}.m4s")
    return names


def representation_files(prefix: Name, catalog: VideoCatalog, label: str) -> list[Name]:
    """One tier's files in playback order: media playlist, then segments."""
    catalog.representation(label)
    root = prefix.append(catalog.video_id, label)
    files = [root.append("playlist.m3u8")]
    files.extend(root.append(f"seg{k}.m4s") for k in range(catalog.segment_count))
    return files


def publish(
    repo: Repository,
    catalog: VideoCatalog,
    prefix: Name | str,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    version: int = 1,
    freshness_ms: int = DEFAULT_FRESHNESS_MS,
) -> int:
    """Publish a catalog's playlists and segments; returns chunks stored."""
    if isinstance(prefix, str):
        prefix = name_parse(prefix)
    root = prefix.append(catalog.video_id)
    stored = repo.publish_file(
        root.append("playlist.m3u8"),
        generate_master_playlist(catalog).encode(),
        version,
        chunk_size,
        freshness_ms,
    )
    for rep in catalog.representations:
        stored += repo.publish_file(
            root.append(rep.label, "playlist.m3u8"),
            generate_media_playlist(catalog, rep).encode(),
            version,
            chunk_size,
            freshness_ms,
        )
        for k in range(catalog.segment_count):
            stored += repo.publish_file(
                root.append(rep.label, f"seg{k}.m4s"),
                segment_payload(catalog, rep.label, k),
                version,
                chunk_size,
                freshness_ms,
            )
    return stored
