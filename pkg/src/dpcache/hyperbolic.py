"""Hyperbolic caching under integer-only arithmetic.

The exact policy ranks elements by access count divided by time in cache and
evicts the minimum.  Division and floating point are unavailable in the
restricted model, so the ratio comparison is rewritten as a subtraction of
base-2 logarithms, read from a lookup table built at deployment time:

    score = table[freq] - table[lifetime],  table[x] = floor(log2(x) * F)

where F is a fixed-point scale (the "integer factor") trading table width for
comparison precision.  Scores quantise each log to one scaled unit, so score
gaps of 2 or more always order the same way as the exact ratios.

On a switch the table register is loaded at deployment by control packets,
one (key=x, value=floor(log2(x)*F)) entry per packet, before traffic starts.
The simulator models that whole protocol as the LogTable constructor: the
table is immutable once built and freely shareable between engines.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .core import CacheElement, StorageError
from .policies import FetchResult, PolicyEngine

DEFAULT_INTEGER_FACTOR = Fraction(100)
DEFAULT_MAX_SCN = 2048


def as_fraction(value: int | float | str | Fraction) -> Fraction:
    """Parse an integer-factor value exactly (floats go through their repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def fixed_point(value: int | float | str | Fraction, factor: int | Fraction) -> int:
    """Scale a real number by ``factor`` and floor it into an integer."""
    return math.floor(as_fraction(value) * as_fraction(factor))


def log2_fixed(x: int, factor: Fraction) -> int:
    """floor(log2(x) * factor), computed exactly.

    A float estimate is corrected by integer comparisons of 2**(m*q) against
    x**p (factor = p/q), so the result is platform-independent even for
    non-integer factors.
    """
    if x < 1:
        raise ValueError("log2_fixed requires x >= 1")
    p, q = factor.numerator, factor.denominator
    m = math.floor(math.log2(x) * p / q)
    target = x**p
    while (1 << ((m + 1) * q)) <= target:
        m += 1
    while m > 0 and (1 << (m * q)) > target:
        m -= 1
    return m


class LogTable:
    """Immutable fixed-point log2 lookup table.

    ``entries[x] = floor(log2(x) * integer_factor)`` for 1 <= x < max_scn.
    Index 0 is defined as 0 (live frequencies are >= 1 and lifetimes are
    clamped >= 1, so it is only reached by empty ways, whose score must sit at
    the bottom).  Lookups at or beyond ``max_scn`` saturate to the last entry.
    """

    def __init__(self, max_scn: int = DEFAULT_MAX_SCN,
                 integer_factor: int | float | str | Fraction = DEFAULT_INTEGER_FACTOR) -> None:
        if max_scn < 2:
            raise ValueError("max_scn must be >= 2")
        factor = as_fraction(integer_factor)
        if factor <= 0:
            raise ValueError("integer_factor must be positive")
        self.max_scn = max_scn
        self.integer_factor = factor
        self.entries = _build_entries(max_scn, factor)

    def lookup(self, x: int) -> int:
        if x >= self.max_scn:
            return self.entries[-1]
        return self.entries[x]

    def memory_bits(self, index_bits: int | None = None) -> int:
        """Storage cost model: (value width + index width) per entry."""
        if index_bits is None:
            index_bits = max(1, (self.max_scn - 1).bit_length())
        value_bits = max(1, self.entries[-1].bit_length())
        return (value_bits + index_bits) * self.max_scn


@lru_cache(maxsize=16)
def _build_entries(max_scn: int, factor: Fraction) -> tuple[int, ...]:
    return (0, 0) + tuple(log2_fixed(x, factor) for x in range(2, max_scn))


def build_log_table(max_scn: int = DEFAULT_MAX_SCN,
                    integer_factor: int | float | str | Fraction = DEFAULT_INTEGER_FACTOR) -> LogTable:
    return LogTable(max_scn, integer_factor)


def priority_score(freq: int, insert_time: int, tick: int, table: LogTable) -> int:
    """Integer stand-in for the exact priority freq / (tick - insert_time)."""
    lifetime = tick - insert_time
    if lifetime < 1:
        lifetime = 1
    return table.lookup(freq) - table.lookup(lifetime)


class HyperbolicEngine(PolicyEngine):
    """Hyperbolic policy over a split SCN word.

    The element's SCN word is divided into a frequency half (low bits,
    saturating) and an insert-time half (high bits).  A global tick advances
    once per touch; when it reaches ``max_scn - 1`` the tick and every stored
    insert time are halved by right shift, which preserves lifetime order.
    """

    name = "hyperbolic"

    def __init__(self, *args, integer_factor: int | float | str | Fraction = DEFAULT_INTEGER_FACTOR,
                 max_scn: int = DEFAULT_MAX_SCN, log_table: LogTable | None = None, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        lay = self.layout
        if lay.scn_bits < 2:
            raise StorageError("hyperbolic needs at least 2 scn bits to split")
        self.freq_bits = lay.scn_bits // 2
        self.time_bits = lay.scn_bits - self.freq_bits
        self.log_table = log_table if log_table is not None else LogTable(max_scn, integer_factor)
        if self.log_table.max_scn > (1 << self.time_bits):
            raise StorageError("max_scn does not fit the insert-time field")
        self.freq_max = (1 << self.freq_bits) - 1
        self.tick = 0

    # freq in the low half of the scn word, insert time in the high half
    def _pack(self, freq: int, insert_time: int) -> int:
        return freq | (insert_time << self.freq_bits)

    def _unpack(self, scn_word: int) -> tuple[int, int]:
        return scn_word & self.freq_max, scn_word >> self.freq_bits

    def _advance_tick(self) -> None:
        self.tick += 1
        if self.tick >= self.log_table.max_scn - 1:
            self._halve_times()

    def _halve_times(self) -> None:
        """Right-shift the tick and every stored insert time by one."""
        store = self.store
        idx = self.scn_index
        self.tick >>= 1
        for h in range(self.layout.d):
            elements = store.decode_set(store.sets[h])
            changed = False
            for i, e in enumerate(elements):
                if not e.key:
                    continue
                freq, t = self._unpack(e.scn[idx])
                if t:
                    scn = list(e.scn)
                    scn[idx] = self._pack(freq, t >> 1)
                    elements[i] = CacheElement(e.key, e.value, tuple(scn))
                    changed = True
            if changed:
                word, keys_word = store.encode_set(elements)
                store.sets[h] = word
                store.keys_register[h] = keys_word
        counter = store.counter
        counter.extra_reads += self.layout.d
        counter.extra_writes += self.layout.d

    def _initial_scn(self) -> int:
        self._advance_tick()
        return self._pack(1, self.tick)

    def serve_hit(self, h: int, way: int) -> FetchResult:
        self._advance_tick()
        element = self.store.read_way(h, way)
        idx = self.scn_index
        freq, t = self._unpack(element.scn[idx])
        if freq < self.freq_max:
            self.store.write_way_scn(h, way, idx, self._pack(freq + 1, t))
        else:
            self.store.writeback(h)
        return FetchResult(True, element.value, None)

    def _score(self, scn_word: int) -> int:
        freq, t = self._unpack(scn_word)
        lifetime = self.tick - t
        if lifetime < 1:
            lifetime = 1
        table = self.log_table
        # two lookups into the log register per scored element
        self.store.counter.extra_reads += 2
        return table.lookup(freq) - table.lookup(lifetime)

    def _fold(self, raws: list[int]) -> int:
        off, mask = self._scn_off, self._scn_mask
        candidate = raws.pop(1)
        p_candidate = self._score((candidate >> off) & mask)
        observer = self.fold_observer
        for i in range(1, len(raws)):
            e = raws[i]
            p_element = self._score((e >> off) & mask)
            if observer is not None:
                observer(p_element, p_candidate)
            if p_element < p_candidate:
                raws[i] = candidate
                candidate = e
                p_candidate = p_element
        return candidate
