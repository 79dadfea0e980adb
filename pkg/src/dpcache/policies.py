"""Single-region cache engines built from the insert-at-way-0 + fold pattern.

Every policy shares the same restricted shape: membership is decided by one
ternary comparison, a hit updates at most the hit element's metadata word, and
a miss inserts the new element at way 0 and threads the displaced element
through the remaining ways as a "candidate" with a fixed, unrolled sequence of
compare-and-swap steps.  The element carried out of the last way is the
victim; an all-zero victim means an empty way absorbed the insertion.

Engines work on raw encoded element slices internally (one int per way) and
expose decoded ``CacheElement`` values at their boundaries.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from .core import (
    MISS,
    CacheElement,
    LayoutConfig,
    OpCounter,
    RegisterStore,
    StorageError,
    hash_to_set,
)

Backing = Callable[[int], int]


class FetchResult(NamedTuple):
    """Outcome of one keyed access.

    ``evicted`` is the element that fully left the cache this step, if any;
    it is always None on a hit, and None on a miss that an empty way absorbed.
    """

    hit: bool
    value: int
    evicted: CacheElement | None


def identity_backing(value_bits: int) -> Backing:
    """Default backing store: the key itself, truncated to the value width."""
    mask = (1 << value_bits) - 1

    def fetch(key: int) -> int:
        return key & mask

    return fetch


class TableBacking:
    """Deterministic key->value mapping with an identity fallback."""

    def __init__(self, table: dict[int, int], value_bits: int = 32) -> None:
        self.table = dict(table)
        self._fallback = identity_backing(value_bits)

    def __call__(self, key: int) -> int:
        return self.table.get(key, self._fallback(key))


def fetch_value(backing: Backing, key: int) -> int:
    """Fetch a missing key's value from the backing store."""
    return backing(key)


class PolicyEngine:
    """Base engine: storage wiring, the fetch skeleton and the fold driver.

    Subclasses define how metadata is initialised, refreshed on a hit, and
    compared during the eviction fold.  ``scn_index`` selects which SCN word
    belongs to this engine (multi-region elements carry one word per region).

    ``fold_observer``, when set, receives the two metric values of every fold
    comparison; it exists for divergence analysis and costs one branch per
    fold step otherwise.
    """

    name = "base"

    def __init__(
        self,
        layout: LayoutConfig,
        backing: Backing | None = None,
        counter: OpCounter | None = None,
        scn_index: int = 0,
        check_invariants: bool = False,
    ) -> None:
        if scn_index >= layout.scn_words:
            raise StorageError("scn_index out of range for this layout")
        self.layout = layout
        self.scn_index = scn_index
        self.store = RegisterStore(layout, counter, check_invariants)
        self.backing: Backing = backing or identity_backing(layout.value_bits)
        self.fold_observer: Callable[[int, int], None] | None = None
        # this engine's scn word as a slice of the raw element
        self._scn_off = layout.key_bits + layout.value_bits + scn_index * layout.scn_bits
        self._scn_mask = (1 << layout.scn_bits) - 1
        self._scn_clear = ~(self._scn_mask << self._scn_off)
        self._key_mask = (1 << layout.key_bits) - 1

    # -- policy hooks --------------------------------------------------------

    def _initial_scn(self) -> int:
        raise NotImplementedError

    def serve_hit(self, h: int, way: int) -> FetchResult:
        raise NotImplementedError

    def _fold(self, raws: list[int]) -> int:
        """Thread the displaced way-0 element through ways 1..k-1."""
        raise NotImplementedError

    # -- raw element helpers --------------------------------------------------

    def _raw_scn(self, raw: int) -> int:
        return (raw >> self._scn_off) & self._scn_mask

    def _with_scn(self, raw: int, scn: int) -> int:
        return (raw & self._scn_clear) | (scn << self._scn_off)

    def new_raw(self, key: int, value: int) -> int:
        return (
            key
            | (value << self.layout.key_bits)
            | (self._initial_scn() << self._scn_off)
        )

    def new_element(self, key: int, value: int) -> CacheElement:
        """Build a freshly inserted element with this policy's initial SCN."""
        return self.store.unpack_element(self.new_raw(key, value))

    def refresh_admitted_raw(self, raw: int) -> int:
        """Re-stamp an element admitted from another region.

        Only this engine's SCN word is refreshed; the other region's word is
        carried along untouched.
        """
        return self._with_scn(raw, self._initial_scn())

    def refresh_admitted(self, element: CacheElement) -> CacheElement:
        raw = self.refresh_admitted_raw(self.store.pack_element(*element))
        return self.store.unpack_element(raw)

    # -- shared machinery ----------------------------------------------------

    def fetch(self, key: int) -> FetchResult:
        h = hash_to_set(key, self.layout.d)
        way = self.store.ternary_lookup(h, key)
        if way != MISS:
            return self.serve_hit(h, way)
        value = self.backing(key)
        victim, raws = self.insert_pending_raw(h, self.new_raw(key, value))
        self.store.write_set_raw(h, raws)
        if victim & self._key_mask:
            return FetchResult(False, value, self.store.unpack_element(victim))
        return FetchResult(False, value, None)

    def insert_pending_raw(self, h: int, raw: int) -> tuple[int, list[int]]:
        """Insert at way 0 and run the eviction fold; the set is not written.

        Returns (victim, pending slices).  The caller commits the pending list
        with ``write_set_raw`` — split out so an admission filter can overrule
        the fold before the single end-of-pipeline set write.  Each of the k
        fold/insert steps reads and writes auxiliary registers (candidate and
        keys registers), which is accounted here.
        """
        k = self.layout.k
        counter = self.store.counter
        counter.register_reads += 2 * k
        counter.register_writes += 2 * k
        raws = self.store.read_set_raw(h)
        raws.insert(0, raw)
        if k > 1:
            return self._fold(raws), raws
        return raws.pop(), raws

    def insert(self, h: int, element: CacheElement) -> CacheElement:
        victim, raws = self.insert_pending_raw(h, self.store.pack_element(*element))
        self.store.write_set_raw(h, raws)
        return self.store.unpack_element(victim)

    def dump(self) -> list[list[CacheElement]]:
        """Decoded contents of every set; bypasses operation accounting."""
        return [self.store.decode_set(w) for w in self.store.sets]

    def live_keys(self) -> set[int]:
        return {e.key for row in self.dump() for e in row if e.key}

    def clone(self):
        other = self.__class__.__new__(self.__class__)
        other.__dict__.update(self.__dict__)
        other.store = self.store.clone()
        return other


class FifoEngine(PolicyEngine):
    """First-in-first-out: hits are read-only, the fold shifts unconditionally."""

    name = "fifo"

    def _initial_scn(self) -> int:
        return 0

    def serve_hit(self, h: int, way: int) -> FetchResult:
        element = self.store.read_way(h, way)
        self.store.writeback(h)
        return FetchResult(True, element.value, None)

    def _fold(self, raws: list[int]) -> int:
        # unconditional swaps leave a pure shift: last slice exits
        return raws.pop()


class _ScnFoldEngine(PolicyEngine):
    """Shared fold for policies that carry out the minimum-SCN element."""

    def _fold(self, raws: list[int]) -> int:
        off, mask = self._scn_off, self._scn_mask
        candidate = raws.pop(1)  # displaced way-0 occupant
        c_scn = (candidate >> off) & mask
        observer = self.fold_observer
        for i in range(1, len(raws)):
            e = raws[i]
            e_scn = (e >> off) & mask
            if observer is not None:
                observer(e_scn, c_scn)
            if e_scn < c_scn:
                raws[i] = candidate
                candidate = e
                c_scn = e_scn
        return candidate


class LruEngine(_ScnFoldEngine):
    """Least-recently-used via a strictly increasing per-engine SCN clock.

    Every fetch consumes exactly one clock tick; the fold carries out the
    minimum-SCN element, which with unique timestamps is exactly the least
    recently used one.  When the clock nears the SCN field limit, all stored
    timestamps are compressed to dense per-set ranks (order-preserving) and
    the clock restarts just above them.
    """

    name = "lru"

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        if self.layout.max_scn() <= self.layout.k + 2:
            raise StorageError("scn_bits too small to rescale an LRU clock")
        self.clock = 0

    def _initial_scn(self) -> int:
        return self._next_scn()

    def _next_scn(self) -> int:
        nxt = self.clock + 1
        if nxt >= self.layout.max_scn():
            self._rescale()
            nxt = self.clock + 1
        self.clock = nxt
        return nxt

    def _rescale(self) -> None:
        store = self.store
        idx = self.scn_index
        top = 0
        for h in range(self.layout.d):
            elements = store.decode_set(store.sets[h])
            live = sorted({e.scn[idx] for e in elements if e.key})
            if not live:
                continue
            rank = {s: r for r, s in enumerate(live, start=1)}
            rewritten = []
            for e in elements:
                if e.key:
                    scn = list(e.scn)
                    scn[idx] = rank[e.scn[idx]]
                    e = CacheElement(e.key, e.value, tuple(scn))
                rewritten.append(e)
            word, keys_word = store.encode_set(rewritten)
            store.sets[h] = word
            store.keys_register[h] = keys_word
            top = max(top, len(live))
        # maintenance sweep, not part of the per-packet cost model
        store.counter.extra_reads += self.layout.d
        store.counter.extra_writes += self.layout.d
        self.clock = top

    def serve_hit(self, h: int, way: int) -> FetchResult:
        scn = self._next_scn()
        element = self.store.read_way(h, way)
        self.store.write_way_scn(h, way, self.scn_index, scn)
        return FetchResult(True, element.value, None)


class LfuEngine(_ScnFoldEngine):
    """Least-frequently-used with in-place aging.

    The SCN word holds a saturating access count.  A hit increments only the
    hit element's count (the hit path has the same shape as LRU's).  When an
    insertion touches a set, every pre-existing live element's count is
    decremented by 1 (floored at 1) as part of the whole-set rewrite, so the
    count tracks recent rather than lifetime frequency.  The fold carries out
    the minimum-count element; ties resolve positionally through the strict
    comparison.
    """

    name = "lfu"

    def _initial_scn(self) -> int:
        return 1

    def _age_raws(self, raws: list[int]) -> None:
        """Decrement every live element's count by 1, floored at 1."""
        off, mask, kmask = self._scn_off, self._scn_mask, self._key_mask
        one = 1 << off
        for i, raw in enumerate(raws):
            if raw & kmask and (raw >> off) & mask > 1:
                raws[i] = raw - one

    def serve_hit(self, h: int, way: int) -> FetchResult:
        element = self.store.read_way(h, way)
        scn = element.scn[self.scn_index]
        if scn < self._scn_mask:
            self.store.write_way_scn(h, way, self.scn_index, scn + 1)
        else:
            self.store.writeback(h)
        return FetchResult(True, element.value, None)

    def insert_pending_raw(self, h: int, raw: int) -> tuple[int, list[int]]:
        k = self.layout.k
        counter = self.store.counter
        counter.register_reads += 2 * k
        counter.register_writes += 2 * k
        raws = self.store.read_set_raw(h)
        self._age_raws(raws)
        raws.insert(0, raw)
        if k > 1:
            return self._fold(raws), raws
        return raws.pop(), raws


def make_engine(
    policy: str,
    layout: LayoutConfig,
    backing: Backing | None = None,
    counter: OpCounter | None = None,
    scn_index: int = 0,
    check_invariants: bool = False,
    **policy_kwargs,
) -> PolicyEngine:
    """Build an engine by policy name ("fifo", "lru", "lfu", "hyperbolic")."""
    # imported here so the hyperbolic module can build on this one
    from .hyperbolic import HyperbolicEngine

    classes: dict[str, type[PolicyEngine]] = {
        "fifo": FifoEngine,
        "lru": LruEngine,
        "lfu": LfuEngine,
        "hyperbolic": HyperbolicEngine,
    }
    try:
        cls = classes[policy.lower()]
    except KeyError:
        raise ValueError(f"unknown policy {policy!r}") from None
    if cls is not HyperbolicEngine:
        policy_kwargs.pop("integer_factor", None)
        policy_kwargs.pop("max_scn", None)
    return cls(
        layout,
        backing=backing,
        counter=counter,
        scn_index=scn_index,
        check_invariants=check_invariants,
        **policy_kwargs,
    )
