import random
from fractions import Fraction

import pytest

from dpcache.oracle import (
    ReferenceCache,
    ReferenceMultiCache,
    exhaustive_check,
    has_metric_tie,
)


def replay(cache, keys):
    return [cache.fetch(key) for key in keys]


def random_trace(seed, length, universe):
    rng = random.Random(seed)
    return [rng.randint(1, universe) for _ in range(length)]


class TestReferencePolicies:
    def test_full_lru_example(self):
        cache = ReferenceCache.full("lru", 2)
        assert replay(cache, [1, 2, 1, 3])[-1] == (False, 2)

    def test_kway_placement_contention(self):
        cache = ReferenceCache("lru", k=2, d=2)
        # keys 1 and 3 share set 1; key 2 lives alone in set 0
        replay(cache, [1, 3, 2])
        assert cache.sets[1].keys() >= {1, 3}
        assert list(cache.sets[0]) == [2]

    def test_full_lfu_recency_tiebreak(self):
        cache = ReferenceCache.full("lfu", 2)
        assert replay(cache, [1, 1, 2, 3])[-1] == (False, 2)
        assert cache.tie_seen is False  # freq 1 vs freq 2: unique minimum

    def test_lfu_tie_latches(self):
        cache = ReferenceCache.full("lfu", 2)
        replay(cache, [1, 2, 3])
        assert cache.tie_seen is True

    def test_fifo_ignores_hits(self):
        cache = ReferenceCache.full("fifo", 2)
        assert replay(cache, [1, 2, 1, 3]) == [
            (False, None), (False, None), (True, None), (False, 1)]

    def test_hyperbolic_exact_priorities(self):
        cache = ReferenceCache.full("hyperbolic", 2)
        results = replay(cache, [1, 1, 1, 2, 3])
        # at the eviction p(1) = 3/4 and p(2) = 1/1: key 1 goes
        assert results[-1] == (False, 1)
        assert Fraction(3, 4) < Fraction(1, 1)

    def test_hyperbolic_tie_latches(self):
        cache = ReferenceCache.full("hyperbolic", 2)
        # at the next fetch (tick 6): p(8) = 1/(6-4) = 2/(6-2) = p(9)
        cache.seq = 5
        cache.sets[0] = {8: [1, 4], 9: [2, 2]}
        cache.fetch(10)
        assert cache.tie_seen is True

    @pytest.mark.parametrize("policy", ["fifo", "lru", "lfu", "hyperbolic"])
    def test_full_equals_kway_capacity_by_one_set(self, policy):
        full = ReferenceCache.full(policy, 6)
        kway = ReferenceCache(policy, k=6, d=1)
        keys = random_trace(21, 2500, universe=25)
        assert replay(full, keys) == replay(kway, keys)

    def test_lru_inclusion_property(self):
        # classic stack property: every hit at capacity C is a hit at C' > C
        keys = random_trace(31, 4000, universe=60)
        streams = {}
        for capacity in [4, 8, 16, 32]:
            cache = ReferenceCache.full("lru", capacity)
            streams[capacity] = [cache.fetch(key)[0] for key in keys]
        for small, big in [(4, 8), (8, 16), (16, 32)]:
            assert all(not a or b for a, b in zip(streams[small], streams[big]))

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ReferenceCache("lru", 2, 1).fetch(0)
        with pytest.raises(ValueError):
            ReferenceCache("mru", 2, 1)

    def test_hyperbolic_victim_matches_fraction_minimum(self):
        # the cross-multiplied scan must pick the same victim as a Fraction
        # ranking with first-inserted tie-break
        rng = random.Random(77)
        for _ in range(200):
            now = rng.randint(10, 60)
            cache = ReferenceCache.full("hyperbolic", 5)
            cache.seq = now
            state = {}
            for key in range(1, 6):
                state[key] = [rng.randint(1, 9), rng.randint(1, now - 1)]
            cache.sets[0] = dict(state)
            got = cache.victim(0)
            ranked = min(state, key=lambda x: Fraction(state[x][0], now - state[x][1]))
            assert Fraction(state[got][0], now - state[got][1]) == \
                Fraction(state[ranked][0], now - state[ranked][1])


class TestReferenceMulti:
    def test_batch_halving(self):
        cache = ReferenceMultiCache("fifo", "lru", 1, 1, 1, 1,
                                    key_universe=50, aging_window=10)
        for _ in range(9):
            cache.fetch(7)
        assert cache.counters[7] == 9
        cache.fetch(7)  # 10th access triggers the halve-all
        assert cache.counters[7] == 5

    def test_live_keys_disjoint_regions(self):
        cache = ReferenceMultiCache("fifo", "lru", 2, 2, 2, 2, key_universe=60)
        for key in random_trace(17, 2000, 59):
            cache.fetch(key)
            assert not cache.window.live_keys() & cache.main.live_keys()


class TestExhaustiveCheck:
    @pytest.mark.parametrize("policy", ["fifo", "lru"])
    def test_exact_policies_never_diverge(self, policy):
        report = exhaustive_check(policy, k=2, d=1, alphabet_size=3, max_len=6)
        assert report.divergent_sequences == 0
        assert report.passed
        assert report.sequences_checked == sum(3**j for j in range(1, 7))

    @pytest.mark.parametrize("policy", ["lfu", "hyperbolic"])
    def test_approximate_policies_diverge_only_on_ties(self, policy):
        report = exhaustive_check(policy, k=2, d=1, alphabet_size=3, max_len=6)
        assert report.untagged_divergences == 0
        assert report.passed

    def test_divergence_reporting_fields(self):
        report = exhaustive_check("lfu", k=2, d=1, alphabet_size=4, max_len=6)
        if report.divergent_sequences:
            assert report.first_divergence is not None
            assert "engine set" in report.first_divergence_dump
        assert "lfu" in report.summary()

    def test_enumeration_size_guard(self):
        with pytest.raises(ValueError):
            exhaustive_check("lru", alphabet_size=50, max_len=8)

    def test_classifier_flags_plain_tie(self):
        # three cold keys into a 2-way set: eviction among equal counts
        assert has_metric_tie("lfu", 2, 1, (1, 2, 3))
