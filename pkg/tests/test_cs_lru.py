"""Content-store equivalence against a brute-force LRU shadow model."""

import random

from ndnstream.forwarding import ContentStore
from ndnstream.packets import Interest
from ndnstream.wire import encoded_size

from conftest import make_data


class ShadowLru:
    """Reference model: dict of name -> (size, last-touch serial); evicts by
    minimum touch serial until under capacity."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.entries = {}  # name -> [size, serial, data]
        self.serial = 0

    def touch(self, name):
        self.serial += 1
        self.entries[name][1] = self.serial

    def lookup(self, name):
        if name in self.entries:
            self.touch(name)
            return self.entries[name][2]
        return None

    def insert(self, name, size, data):
        if size > self.capacity:
            return []
        self.serial += 1
        self.entries[name] = [size, self.serial, data]
        evicted = []
        while sum(e[0] for e in self.entries.values()) > self.capacity:
            victim = min(self.entries, key=lambda n: self.entries[n][1])
            del self.entries[victim]
            evicted.append(victim)
        return evicted


def run_equivalence(seed, ops, capacity, name_space, payload_max, key):
    rng = random.Random(seed)
    cs = ContentStore(capacity)
    shadow = ShadowLru(capacity)
    now = 0.0
    for _ in range(ops):
        now += 0.001
        name_id = rng.randrange(name_space)
        if rng.random() < 0.5:
            data = make_data(
                f"/s/{name_id}", content=bytes(rng.randrange(payload_max)), key=key
            )
            full = data.name.full()
            evicted = cs.insert(data, now)
            shadow_evicted = shadow.insert(full, encoded_size(data), data)
            assert evicted == shadow_evicted, f"eviction mismatch at op on {full}"
        else:
            full = make_data(f"/s/{name_id}", key=key).name.full()
            got = cs.lookup(Interest(full), now)
            expected = shadow.lookup(full)
            assert (got is None) == (expected is None)
            if got is not None:
                assert got == expected
        assert cs.used_bytes <= capacity
        assert set(cs.entries) == set(shadow.entries)


def test_lru_matches_shadow_model(key):
    run_equivalence(seed=42, ops=2000, capacity=4000, name_space=25, payload_max=150, key=key)


def test_lru_matches_shadow_model_tight_capacity(key):
    run_equivalence(seed=7, ops=2000, capacity=800, name_space=10, payload_max=120, key=key)
