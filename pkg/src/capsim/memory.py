"""Byte-addressable memory with per-granule validity tags.

Every 16-byte aligned granule carries one tag bit.  A granule holding a
valid capability keeps the full metadata on the side; any plain byte
write into the granule clears its tag.  Pages have their own permission
table and an mprotect-style protection call that models tag stripping on
access restoration.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Iterator

from .capability import (
    MASK64,
    CapFault,
    Capability,
    FaultKind,
    Perm,
    PERM_NONE,
    PERM_ALL,
    SealState,
    check_access,
)

GRANULE = 16
PAGE = 4096


@dataclass(frozen=True)
class PageProtRequest:
    start: int
    length: int
    perms: Perm
    prot_cap: bool = False


class TaggedMemory:
    def __init__(self, size: int):
        if size <= 0 or size % PAGE != 0:
            raise ValueError("size must be a positive multiple of the page size")
        self.size = size
        self.data = bytearray(size)
        self.tags = [False] * (size // GRANULE)
        self.granule_caps: dict[int, Capability] = {}
        self.page_perms = [PERM_ALL] * (size // PAGE)
        # set while a page has neither LOAD nor STORE; consulted when
        # access is restored to decide whether its tags survive
        self._strip_pending = [False] * (size // PAGE)

    # -- capability-checked access ------------------------------------

    def _check(self, authority: Capability, addr: int, kind: Perm, size: int) -> None:
        check_access(replace(authority, address=addr), kind, size)
        for page in range(addr // PAGE, (addr + size - 1) // PAGE + 1):
            if kind not in self.page_perms[page]:
                raise CapFault(
                    FaultKind.PERMISSION,
                    f"page {page:#x} denies {kind.name}",
                )

    def store_cap(self, authority: Capability, addr: int, value: Capability) -> None:
        if addr % GRANULE != 0:
            raise CapFault(FaultKind.ALIGNMENT, f"capability store at {addr:#x}")
        self._check(authority, addr, Perm.STORE, GRANULE)
        g = addr // GRANULE
        self.data[addr:addr + GRANULE] = value.encode()
        self.tags[g] = value.tag
        self.granule_caps[g] = value

    def load_cap(self, authority: Capability, addr: int) -> Capability:
        if addr % GRANULE != 0:
            raise CapFault(FaultKind.ALIGNMENT, f"capability load at {addr:#x}")
        self._check(authority, addr, Perm.LOAD, GRANULE)
        g = addr // GRANULE
        if self.tags[g]:
            return self.granule_caps[g]
        # untagged granule: the low 64 bits load as a pointer-like integer
        low = struct.unpack_from("<Q", self.data, addr)[0]
        return Capability(tag=False, address=low, base=0, top=0, perms=PERM_NONE)

    def store_bytes(self, authority: Capability, addr: int, payload: bytes) -> None:
        self._check(authority, addr, Perm.STORE, len(payload))
        self.data[addr:addr + len(payload)] = payload
        for g in range(addr // GRANULE, (addr + len(payload) - 1) // GRANULE + 1):
            self.tags[g] = False

    def load_bytes(self, authority: Capability, addr: int, n: int) -> bytes:
        self._check(authority, addr, Perm.LOAD, n)
        return bytes(self.data[addr:addr + n])

    # -- page protection ----------------------------------------------

    def mprotect(self, req: PageProtRequest) -> None:
        if req.start % PAGE != 0 or req.length % PAGE != 0:
            raise ValueError("mprotect range must be page aligned")
        if req.start < 0 or req.start + req.length > self.size:
            raise ValueError("mprotect range outside memory")
        access = Perm.LOAD | Perm.STORE
        for page in range(req.start // PAGE, (req.start + req.length) // PAGE):
            restoring = self._strip_pending[page] and bool(req.perms & access)
            if restoring:
                if not req.prot_cap:
                    base = page * PAGE
                    for g in range(base // GRANULE, (base + PAGE) // GRANULE):
                        self.tags[g] = False
                self._strip_pending[page] = False
            self.page_perms[page] = req.perms
            if not req.perms & access:
                self._strip_pending[page] = True

    # -- raw inspection (runtime sweeps and test oracles) --------------

    def iter_tagged(self) -> Iterator[tuple[int, Capability]]:
        """Yield (granule base address, capability) for every tagged granule."""
        for g, tagged in enumerate(self.tags):
            if tagged:
                yield g * GRANULE, self.granule_caps[g]

    def clear_granule_tag(self, addr: int) -> None:
        self.tags[addr // GRANULE] = False

    def granule_tag(self, addr: int) -> bool:
        return self.tags[addr // GRANULE]
