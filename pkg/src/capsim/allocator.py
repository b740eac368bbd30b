"""Heap allocator issuing tightly-bounded capabilities.

Freed regions go into quarantine instead of back onto the free list;
an explicit revocation sweep clears the tag of every stored capability
whose bounds intersect a quarantined region, after which the regions
become reusable.  realloc follows capability semantics: the returned
capability is always a fresh derivation and the caller's old capability
keeps its old bounds.
"""
from __future__ import annotations

from .capability import Capability, set_address, set_bounds
from .memory import GRANULE, TaggedMemory

ALIGN = GRANULE  # allocation granularity


class AllocError(Exception):
    pass


class OutOfMemory(AllocError):
    pass


def _round_up(n: int) -> int:
    return (n + ALIGN - 1) // ALIGN * ALIGN


def _overlaps(base: int, length: int, lo: int, hi: int) -> bool:
    return max(base, lo) < min(base + length, hi)


class CapAllocator:
    def __init__(self, mem: TaggedMemory, arena: Capability):
        self.mem = mem
        self.arena = arena
        self.live: dict[int, int] = {}
        self.free_list: list[tuple[int, int]] = [(arena.base, arena.length)]
        self.quarantine: list[tuple[int, int]] = []
        self.epoch = 0

    # -- internal free-list management --------------------------------

    def _take(self, size: int) -> int:
        """First-fit: carve `size` bytes out of the free list."""
        for i, (base, length) in enumerate(self.free_list):
            if length >= size:
                if length == size:
                    del self.free_list[i]
                else:
                    self.free_list[i] = (base + size, length - size)
                return base
        raise OutOfMemory(f"no free region of {size} bytes")

    def _release(self, base: int, length: int) -> None:
        self.free_list.append((base, length))
        self.free_list.sort()
        # coalesce adjacent regions
        merged: list[tuple[int, int]] = []
        for b, l in self.free_list:
            if merged and merged[-1][0] + merged[-1][1] == b:
                pb, pl = merged[-1]
                merged[-1] = (pb, pl + l)
            else:
                merged.append((b, l))
        self.free_list = merged

    # -- public surface ------------------------------------------------

    def malloc(self, n: int) -> Capability:
        if n < 1:
            raise AllocError("allocation size must be >= 1")
        size = _round_up(n)
        base = self._take(size)
        self.live[base] = size
        return set_bounds(self.arena, base, size)

    def free(self, cap: Capability) -> None:
        size = self.live.pop(cap.base, None)
        if size is None:
            raise AllocError(f"free of unknown or already-freed base {cap.base:#x}")
        self.quarantine.append((cap.base, size))

    def revoke(self) -> int:
        """Sweep memory: clear the tag of every stored capability whose
        bounds intersect quarantine, then recycle the regions."""
        cleared = 0
        for addr, cap in list(self.mem.iter_tagged()):
            for qbase, qlen in self.quarantine:
                if _overlaps(qbase, qlen, cap.base, cap.top):
                    self.mem.clear_granule_tag(addr)
                    cleared += 1
                    break
        for qbase, qlen in self.quarantine:
            self._release(qbase, qlen)
        self.quarantine = []
        self.epoch += 1
        return cleared

    def realloc(self, old: Capability, n: int) -> Capability:
        old_size = self.live.get(old.base)
        if old_size is None:
            raise AllocError(f"realloc of unknown base {old.base:#x}")
        size = _round_up(n)
        if size == old_size:
            return set_address(set_bounds(self.arena, old.base, size), old.address)
        if size < old_size:
            self.live[old.base] = size
            self._release(old.base + size, old_size - size)
            return set_address(set_bounds(self.arena, old.base, size), old.address)
        # growth: try in place first
        extra = size - old_size
        tail = old.base + old_size
        for i, (base, length) in enumerate(self.free_list):
            if base == tail and length >= extra:
                if length == extra:
                    del self.free_list[i]
                else:
                    self.free_list[i] = (base + extra, length - extra)
                self.live[old.base] = size
                return set_address(set_bounds(self.arena, old.base, size), old.address)
        # move: new region, copy contents, quarantine the old one
        new_base = self._take(size)
        self.live[new_base] = size
        payload = self.mem.load_bytes(self.arena, old.base, old_size)
        self.mem.store_bytes(self.arena, new_base, payload)
        del self.live[old.base]
        self.quarantine.append((old.base, old_size))
        return set_bounds(self.arena, new_base, size)
