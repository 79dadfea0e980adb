"""Register storage and bit-level primitives shared by every cache policy.

A cache region is one fixed array of ``d`` encoded sets.  Each set is a single
bit-string holding ``k`` elements (ways); each element packs a key, a value and
one or two SCN (sequence change number) metadata words.  A parallel keys-only
register mirrors just the key fields so that membership can be tested with a
single ternary (TCAM-style) comparison instead of a loop.

Bit order is little-endian by way: way 0 occupies the lowest-order slice of the
set word, and within an element the key sits in the lowest bits, then the
value, then the SCN word(s).  Key 0 is reserved as the empty-way marker; live
keys are always >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

MISS = -1

# Longest ternary mask supported by the match stage; caps k * key_bits.
TCAM_MASK_BITS = 2048


class CacheElement(NamedTuple):
    """One way's payload: key, value and SCN metadata words."""

    key: int
    value: int
    scn: tuple[int, ...]


class LayoutError(ValueError):
    """Raised for layout parameters that cannot be realised."""


class StorageError(ValueError):
    """Raised for out-of-range indices or field-width violations."""


@dataclass(frozen=True)
class LayoutConfig:
    """Field widths and geometry of one cache region.

    ``scn_words`` is 1 for single-region elements and 2 for multi-region
    elements that carry one metadata word per region.
    """

    key_bits: int = 32
    value_bits: int = 32
    scn_bits: int = 32
    scn_words: int = 1
    k: int = 4
    d: int = 16

    def __post_init__(self) -> None:
        if min(self.key_bits, self.value_bits, self.scn_bits) < 1:
            raise LayoutError("all field widths must be >= 1")
        if self.scn_words not in (1, 2):
            raise LayoutError("scn_words must be 1 or 2")
        if self.k < 1 or self.d < 1:
            raise LayoutError("k and d must be >= 1")
        if self.k * self.key_bits > TCAM_MASK_BITS:
            raise LayoutError(
                f"k*key_bits = {self.k * self.key_bits} exceeds the "
                f"{TCAM_MASK_BITS}-bit ternary mask limit"
            )

    @property
    def element_width(self) -> int:
        return self.key_bits + self.value_bits + self.scn_words * self.scn_bits

    @property
    def set_width(self) -> int:
        return self.k * self.element_width

    def empty_element(self) -> CacheElement:
        return CacheElement(0, 0, (0,) * self.scn_words)

    def max_key(self) -> int:
        return (1 << self.key_bits) - 1

    def max_value(self) -> int:
        return (1 << self.value_bits) - 1

    def max_scn(self) -> int:
        return (1 << self.scn_bits) - 1


@dataclass
class OpCounter:
    """Per-packet operation accountant.

    ``tcam_matches``, ``register_reads`` and ``register_writes`` track the
    core match/set operations.  ``extra_reads``/``extra_writes`` track
    policy-specific auxiliary structures (log lookup table, admission-filter
    counters, maintenance sweeps) which sit outside the per-packet set-access
    cost model.
    """

    tcam_matches: int = 0
    register_reads: int = 0
    register_writes: int = 0
    extra_reads: int = 0
    extra_writes: int = 0

    def reset(self) -> None:
        self.tcam_matches = 0
        self.register_reads = 0
        self.register_writes = 0
        self.extra_reads = 0
        self.extra_writes = 0


def hash_to_set(key: int, d: int) -> int:
    """Map a live key to its set index by modulo."""
    if key < 1:
        raise StorageError("key 0 is the reserved empty marker")
    if d < 1:
        raise StorageError("d must be >= 1")
    return key % d


def ternary_match(keys_word: int, key: int, k: int, key_bits: int) -> int:
    """Locate ``key`` inside a keys-register word with one XOR comparison.

    The key is concatenated ``k`` times, XORed against the stored word, and
    the way whose key-wide slice comes out all-zero is the match.  Returns the
    way index, or ``MISS``.
    """
    if key < 1:
        raise StorageError("key 0 would falsely match empty ways")
    rep = 0
    for i in range(k):
        rep |= key << (i * key_bits)
    x = keys_word ^ rep
    mask = (1 << key_bits) - 1
    for way in range(k):
        if x & mask == 0:
            return way
        x >>= key_bits
    return MISS


class RegisterStore:
    """Fixed array of ``d`` encoded sets plus the parallel keys register.

    ``read_set``/``write_set`` model whole-set register accesses and are the
    unit of the operation accounting.  Targeted single-field accessors are
    provided for hot paths; they carry the same one-read/one-write cost as the
    whole-set operation they stand in for.
    """

    def __init__(
        self,
        layout: LayoutConfig,
        counter: OpCounter | None = None,
        check_invariants: bool = False,
    ) -> None:
        self.layout = layout
        self.counter = counter if counter is not None else OpCounter()
        self.check_invariants = check_invariants
        self.sets: list[int] = [0] * layout.d
        self.keys_register: list[int] = [0] * layout.d

        lay = layout
        self._ew = lay.element_width
        self._key_mask = (1 << lay.key_bits) - 1
        self._val_mask = (1 << lay.value_bits) - 1
        self._scn_mask = (1 << lay.scn_bits) - 1
        self._elem_mask = (1 << self._ew) - 1
        # key replicated k times, scaled by the key value at lookup time
        self._rep = sum(1 << (i * lay.key_bits) for i in range(lay.k))
        self._kv_bits = lay.key_bits + lay.value_bits

    # -- encoding ----------------------------------------------------------

    def encode_set(self, elements: list[CacheElement]) -> tuple[int, int]:
        """Pack elements into (set_word, keys_word); validates widths."""
        lay = self.layout
        if len(elements) != lay.k:
            raise StorageError(f"expected {lay.k} elements, got {len(elements)}")
        word = 0
        keys_word = 0
        seen: set[int] = set()
        for i, e in enumerate(elements):
            if not 0 <= e.key <= self._key_mask:
                raise StorageError(f"key {e.key} exceeds {lay.key_bits} bits")
            if not 0 <= e.value <= self._val_mask:
                raise StorageError(f"value {e.value} exceeds {lay.value_bits} bits")
            if len(e.scn) != lay.scn_words:
                raise StorageError(f"expected {lay.scn_words} scn words")
            if e.key:
                if e.key in seen:
                    raise StorageError(f"duplicate key {e.key} within one set")
                seen.add(e.key)
            enc = e.key | (e.value << lay.key_bits)
            for w, s in enumerate(e.scn):
                if not 0 <= s <= self._scn_mask:
                    raise StorageError(f"scn {s} exceeds {lay.scn_bits} bits")
                enc |= s << (self._kv_bits + w * lay.scn_bits)
            word |= enc << (i * self._ew)
            keys_word |= e.key << (i * lay.key_bits)
        return word, keys_word

    def decode_set(self, word: int) -> list[CacheElement]:
        """Unpack a set word into its k elements."""
        lay = self.layout
        out: list[CacheElement] = []
        km, vm, sm = self._key_mask, self._val_mask, self._scn_mask
        kb, kv, sb = lay.key_bits, self._kv_bits, lay.scn_bits
        if lay.scn_words == 1:
            for _ in range(lay.k):
                out.append(
                    CacheElement(word & km, (word >> kb) & vm, ((word >> kv) & sm,))
                )
                word >>= self._ew
        else:
            for _ in range(lay.k):
                out.append(
                    CacheElement(
                        word & km,
                        (word >> kb) & vm,
                        ((word >> kv) & sm, (word >> (kv + sb)) & sm),
                    )
                )
                word >>= self._ew
        return out

    # -- whole-set access ---------------------------------------------------

    def read_set(self, h: int) -> list[CacheElement]:
        if not 0 <= h < self.layout.d:
            raise StorageError(f"set index {h} out of range")
        self.counter.register_reads += 1
        return self.decode_set(self.sets[h])

    def write_set(self, h: int, elements: list[CacheElement]) -> None:
        if not 0 <= h < self.layout.d:
            raise StorageError(f"set index {h} out of range")
        word, keys_word = self.encode_set(elements)
        self.counter.register_writes += 1
        self.sets[h] = word
        self.keys_register[h] = keys_word
        if self.check_invariants:
            self._check_sync(h)

    # -- raw element access (hot path; same accounting, same semantics) ------

    def pack_element(self, key: int, value: int, scn: tuple[int, ...]) -> int:
        enc = key | (value << self.layout.key_bits)
        for w, s in enumerate(scn):
            enc |= s << (self._kv_bits + w * self.layout.scn_bits)
        return enc

    def unpack_element(self, raw: int) -> CacheElement:
        lay = self.layout
        if lay.scn_words == 1:
            scn: tuple[int, ...] = ((raw >> self._kv_bits) & self._scn_mask,)
        else:
            scn = (
                (raw >> self._kv_bits) & self._scn_mask,
                (raw >> (self._kv_bits + lay.scn_bits)) & self._scn_mask,
            )
        return CacheElement(
            raw & self._key_mask, (raw >> lay.key_bits) & self._val_mask, scn
        )

    def read_set_raw(self, h: int) -> list[int]:
        """Whole-set read returning the k encoded element slices."""
        self.counter.register_reads += 1
        word = self.sets[h]
        ew, em = self._ew, self._elem_mask
        raws = []
        append = raws.append
        for _ in range(self.layout.k):
            append(word & em)
            word >>= ew
        return raws

    def write_set_raw(self, h: int, raws: list[int]) -> None:
        """Whole-set write from encoded element slices; syncs the keys register.

        Trusts the caller to preserve element invariants (the typed write_set
        validates); with ``check_invariants`` the set is fully re-validated.
        """
        self.counter.register_writes += 1
        ew, kb, km = self._ew, self.layout.key_bits, self._key_mask
        word = 0
        keys_word = 0
        for raw in reversed(raws):
            word = (word << ew) | raw
            keys_word = (keys_word << kb) | (raw & km)
        self.sets[h] = word
        self.keys_register[h] = keys_word
        if self.check_invariants:
            self.encode_set(self.decode_set(word))
            self._check_sync(h)

    # -- ternary lookup -----------------------------------------------------

    def ternary_lookup(self, h: int, key: int) -> int:
        """One TCAM comparison against the keys register of set ``h``."""
        if key < 1:
            raise StorageError("key 0 would falsely match empty ways")
        self.counter.tcam_matches += 1
        x = self.keys_register[h] ^ (key * self._rep)
        mask = self._key_mask
        kb = self.layout.key_bits
        for way in range(self.layout.k):
            if x & mask == 0:
                return way
            x >>= kb
        return MISS

    # -- targeted hot-path access (same accounting unit as whole-set ops) ----

    def read_way(self, h: int, way: int) -> CacheElement:
        """Read one way; counts as the whole-set register read."""
        self.counter.register_reads += 1
        lay = self.layout
        enc = (self.sets[h] >> (way * self._ew)) & self._elem_mask
        if lay.scn_words == 1:
            scn: tuple[int, ...] = ((enc >> self._kv_bits) & self._scn_mask,)
        else:
            scn = (
                (enc >> self._kv_bits) & self._scn_mask,
                (enc >> (self._kv_bits + lay.scn_bits)) & self._scn_mask,
            )
        return CacheElement(
            enc & self._key_mask, (enc >> lay.key_bits) & self._val_mask, scn
        )

    def write_way_field(self, h: int, way: int, bit_offset: int, width: int, value: int) -> None:
        """Patch one field of one way; counts as the whole-set register write.

        ``bit_offset`` is relative to the element start.  Key fields must not
        be patched this way (the keys register would go stale); use write_set.
        """
        if bit_offset < self.layout.key_bits:
            raise StorageError("key field updates must go through write_set")
        if not 0 <= value < (1 << width):
            raise StorageError(f"value {value} exceeds {width} bits")
        self.counter.register_writes += 1
        pos = way * self._ew + bit_offset
        mask = ((1 << width) - 1) << pos
        self.sets[h] = (self.sets[h] & ~mask) | (value << pos)
        if self.check_invariants:
            self._check_sync(h)

    def write_way_scn(self, h: int, way: int, scn_index: int, value: int) -> None:
        self.write_way_field(
            h, way, self._kv_bits + scn_index * self.layout.scn_bits,
            self.layout.scn_bits, value,
        )

    def writeback(self, h: int) -> None:
        """Unconditional set write-back with unchanged content."""
        self.counter.register_writes += 1

    # -- maintenance --------------------------------------------------------

    def sweep_sets(self) -> list[int]:
        """Raw set words for maintenance sweeps; accounting is the caller's."""
        return self.sets

    def clone(self) -> "RegisterStore":
        other = RegisterStore(self.layout, OpCounter(), self.check_invariants)
        other.sets = list(self.sets)
        other.keys_register = list(self.keys_register)
        return other

    def _check_sync(self, h: int) -> None:
        derived = 0
        for i, e in enumerate(self.decode_set(self.sets[h])):
            derived |= e.key << (i * self.layout.key_bits)
        if derived != self.keys_register[h]:
            raise AssertionError(f"keys register out of sync for set {h}")
