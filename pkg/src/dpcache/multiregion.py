"""Two-region cache (window + main) with an optional counting admission filter.

New keys enter the window region; the window's eviction victim contends for a
slot in the main region.  Without a filter the main region's own victim is
evicted unconditionally.  With the filter, the candidate admitted at main way
0 is compared against the main fold's victim by recent access frequency, and
the main victim is restored (overwriting the newcomer) if it has the strictly
higher count — so a rejected window victim is the element that actually leaves.

The filter keeps one explicit counter per key in the universe, aged in a
de-amortized fashion: every ``n`` accesses a fixed-size slice of the counter
array is halved in cyclic order, so that a full halving pass completes once
per ``W`` accesses without ever pausing a packet for a full sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MISS, CacheElement, LayoutConfig, OpCounter, StorageError
from .policies import Backing, FetchResult, PolicyEngine, identity_backing, make_engine

FILTER_NONE = "none"
FILTER_TINYLFU = "tinylfu"

DEFAULT_COUNTER_CAP = (1 << 15) - 1


@dataclass(frozen=True)
class RegionSpec:
    policy: str
    k: int
    d: int

    @property
    def capacity(self) -> int:
        return self.k * self.d


@dataclass(frozen=True)
class MultiRegionConfig:
    """Geometry and policy of both regions plus filter/aging knobs.

    ``aging_window`` (W) is the access count per full halving epoch and
    defaults to 16x the total capacity; ``aging_stride`` (n) is the access
    count between partial halving steps.
    """

    window: RegionSpec
    main: RegionSpec
    key_universe: int
    filter: str = FILTER_TINYLFU
    aging_window: int | None = None
    aging_stride: int = 16
    counter_cap: int = DEFAULT_COUNTER_CAP
    refresh_scn_on_admission: bool = True
    key_bits: int = 32
    value_bits: int = 32
    scn_bits: int = 32
    integer_factor: object = 100

    def __post_init__(self) -> None:
        if self.filter not in (FILTER_NONE, FILTER_TINYLFU):
            raise ValueError(f"unknown filter {self.filter!r}")
        if self.key_universe < 2:
            raise ValueError("key_universe must cover at least one live key")
        w = self.resolved_aging_window()
        if not self.aging_stride < w:
            raise ValueError("aging_stride must be smaller than aging_window")

    def resolved_aging_window(self) -> int:
        if self.aging_window is not None:
            return self.aging_window
        return 16 * (self.window.capacity + self.main.capacity)


class CountingFilter:
    """Explicit per-key frequency counters with de-amortized halving."""

    def __init__(
        self,
        key_universe: int,
        aging_window: int,
        aging_stride: int,
        counter_cap: int = DEFAULT_COUNTER_CAP,
        counter: OpCounter | None = None,
    ) -> None:
        if not 0 < aging_stride < aging_window:
            raise ValueError("need 0 < aging_stride < aging_window")
        if not 0 < counter_cap < (1 << 32):
            raise ValueError("counter_cap must fit 32 bits")
        self.key_universe = key_universe
        self.aging_window = aging_window
        self.aging_stride = aging_stride
        self.counter_cap = counter_cap
        self.counters = np.zeros(key_universe, dtype=np.uint32)
        self.access_counter = 0
        self.cursor = 0
        # counters halved per aging step
        self.step_size = -(-key_universe * aging_stride // aging_window)
        self.ops = counter if counter is not None else OpCounter()

    def record_access(self, key: int) -> None:
        counters = self.counters
        if counters[key] < self.counter_cap:
            counters[key] += 1
        self.ops.extra_reads += 1
        self.ops.extra_writes += 1
        self.access_counter += 1
        if self.access_counter % self.aging_stride == 0:
            self.age_step()

    def age_step(self) -> None:
        """Halve the next slice of counters in cyclic order."""
        n, size = self.key_universe, self.step_size
        start = self.cursor
        end = start + size
        if end <= n:
            self.counters[start:end] >>= 1
        else:
            self.counters[start:] >>= 1
            self.counters[: end - n] >>= 1
        self.cursor = end % n
        self.ops.extra_reads += size
        self.ops.extra_writes += size

    def count(self, key: int) -> int:
        self.ops.extra_reads += 1
        return int(self.counters[key])

    def clone(self) -> "CountingFilter":
        other = CountingFilter(
            self.key_universe, self.aging_window, self.aging_stride,
            self.counter_cap, OpCounter(),
        )
        other.counters = self.counters.copy()
        other.access_counter = self.access_counter
        other.cursor = self.cursor
        return other


class MultiRegionCache:
    """Window and main engines composed behind two ternary tables."""

    def __init__(
        self,
        config: MultiRegionConfig,
        backing: Backing | None = None,
        counter: OpCounter | None = None,
        check_invariants: bool = False,
    ) -> None:
        self.config = config
        self.counter = counter if counter is not None else OpCounter()
        self.backing: Backing = backing or identity_backing(config.value_bits)

        def layout(spec: RegionSpec) -> LayoutConfig:
            return LayoutConfig(
                key_bits=config.key_bits,
                value_bits=config.value_bits,
                scn_bits=config.scn_bits,
                scn_words=2,
                k=spec.k,
                d=spec.d,
            )

        self.window: PolicyEngine = make_engine(
            config.window.policy, layout(config.window),
            backing=self.backing, counter=self.counter, scn_index=0,
            check_invariants=check_invariants, integer_factor=config.integer_factor,
        )
        self.main: PolicyEngine = make_engine(
            config.main.policy, layout(config.main),
            backing=self.backing, counter=self.counter, scn_index=1,
            check_invariants=check_invariants, integer_factor=config.integer_factor,
        )
        if config.filter == FILTER_TINYLFU:
            self.filter: CountingFilter | None = CountingFilter(
                config.key_universe,
                config.resolved_aging_window(),
                config.aging_stride,
                config.counter_cap,
                counter=self.counter,
            )
        else:
            self.filter = None

    def fetch(self, key: int) -> FetchResult:
        if not 1 <= key < self.config.key_universe:
            raise StorageError(f"key {key} outside universe [1, {self.config.key_universe})")
        flt = self.filter
        if flt is not None:
            flt.record_access(key)

        h_main = key % self.main.layout.d
        h_window = key % self.window.layout.d
        way_main = self.main.store.ternary_lookup(h_main, key)
        way_window = self.window.store.ternary_lookup(h_window, key)
        if way_main != MISS:
            return self.main.serve_hit(h_main, way_main)
        if way_window != MISS:
            return self.window.serve_hit(h_window, way_window)

        value = self.backing(key)
        window_victim, pending = self.window.insert_pending_raw(
            h_window, self.window.new_raw(key, value)
        )
        self.window.store.write_set_raw(h_window, pending)
        key_mask = (1 << self.config.key_bits) - 1
        victim_key = window_victim & key_mask
        if not victim_key:
            return FetchResult(False, value, None)

        if self.config.refresh_scn_on_admission:
            admitted = self.main.refresh_admitted_raw(window_victim)
        else:
            # carry the window-region metric into the main-region word
            scn0 = self.window._raw_scn(window_victim)
            admitted = self.main._with_scn(window_victim, scn0)

        h2 = victim_key % self.main.layout.d
        main_victim, pending = self.main.insert_pending_raw(h2, admitted)
        main_victim_key = main_victim & key_mask
        if not main_victim_key:
            self.main.store.write_set_raw(h2, pending)
            return FetchResult(False, value, None)

        if flt is not None and flt.count(main_victim_key) > flt.count(victim_key):
            # admission denied: the fold's victim keeps its slot at way 0 and
            # the window victim is the element that leaves the cache
            pending[0] = main_victim
            self.main.store.write_set_raw(h2, pending)
            return FetchResult(False, value, self.main.store.unpack_element(window_victim))
        self.main.store.write_set_raw(h2, pending)
        return FetchResult(False, value, self.main.store.unpack_element(main_victim))

    def keys_in_window(self) -> set[int]:
        return self.window.live_keys()

    def keys_in_main(self) -> set[int]:
        return self.main.live_keys()

    def clone(self) -> "MultiRegionCache":
        other = MultiRegionCache.__new__(MultiRegionCache)
        other.config = self.config
        other.counter = OpCounter()
        other.backing = self.backing
        other.window = self.window.clone()
        other.main = self.main.clone()
        other.window.store.counter = other.counter
        other.main.store.counter = other.counter
        other.filter = self.filter.clone() if self.filter is not None else None
        if other.filter is not None:
            other.filter.ops = other.counter
        return other
