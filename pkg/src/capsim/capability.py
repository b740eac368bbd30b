"""Capability values and their derivation rules.

A capability is a fat pointer: a 64-bit address plus bounds, permissions,
a seal state, and a 1-bit validity tag.  Derivation is monotonic (bounds
and permissions can only shrink), sealing makes a capability immutable
and non-dereferenceable, and arithmetic on capability-typed integers
inherits metadata from the capability operand.
"""
from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, replace

MASK64 = (1 << 64) - 1

# Usable value bits of a capability-typed integer; the upper storage half
# is padding (metadata), never value bits.
VALUE_WIDTH = 64


class Perm(enum.Flag):
    LOAD = enum.auto()
    STORE = enum.auto()
    EXECUTE = enum.auto()


PERM_NONE = Perm(0)
PERM_ALL = Perm.LOAD | Perm.STORE | Perm.EXECUTE


class SealState(enum.Enum):
    UNSEALED = "unsealed"
    SEALED_ENTRY = "sealed_entry"


class SealMode(enum.Enum):
    """What happens when the address of a sealed capability is modified.

    Older hardware semantics raise a seal fault; newer semantics clear
    the validity tag instead.  Fixed per simulator instance.
    """

    FAULT_ON_MODIFY = "fault"
    INVALIDATE_ON_MODIFY = "invalidate"


class FaultKind(enum.Enum):
    TAG = "tag"
    SEAL = "seal"
    PERMISSION = "permission"
    BOUNDS = "bounds"
    ALIGNMENT = "alignment"


class CapFault(Exception):
    """A failed memory access or illegal capability manipulation."""

    def __init__(self, kind: FaultKind, detail: str = ""):
        super().__init__(f"{kind.value} fault: {detail}" if detail else f"{kind.value} fault")
        self.kind = kind
        self.detail = detail


class WordModel(enum.Enum):
    """Storage model for a word of a capability-typed integer array.

    PADDED_CAP: 16 bytes of storage but only 64 value bits (the buggy
    assumption is that all 128 storage bits are usable).
    EXACT64: 8 bytes of storage, 64 value bits, no padding.
    """

    PADDED_CAP = 16
    EXACT64 = 8

    @property
    def storage_bytes(self) -> int:
        return self.value

    @property
    def storage_bits(self) -> int:
        return self.value * 8


@dataclass(frozen=True)
class Capability:
    """Tagged fat value: address, bounds [base, top), perms, seal, tag.

    Instances are immutable; every operation returns a new value.  An
    untagged capability is just bits and carries no authority.
    """

    tag: bool
    address: int
    base: int
    top: int  # exclusive, may be 2**64
    perms: Perm
    seal: SealState = SealState.UNSEALED

    @property
    def length(self) -> int:
        return self.top - self.base

    def untagged(self, **changes) -> "Capability":
        return replace(self, tag=False, **changes)

    def encode(self) -> bytes:
        """The 16-byte in-memory pattern: low 8 = address, high 8 = metadata."""
        meta = hashlib.blake2b(
            struct.pack("<QQQB B", self.base & MASK64, self.top & MASK64,
                        self.top >> 64, self.perms.value, 1 if self.seal is SealState.SEALED_ENTRY else 0),
            digest_size=8,
        ).digest()
        return struct.pack("<Q", self.address & MASK64) + meta


# A capability used in integer context (pointer-sized integer) is the
# same value; the alias marks intent at call sites.
CapInt = Capability


def make_root(base: int, length: int, perms: Perm) -> Capability:
    """Construct a fresh tagged capability covering [base, base+length).

    This is the only source of authority; everything else derives from a
    root monotonically.
    """
    if base < 0 or length < 0 or base > MASK64:
        raise ValueError("base/length out of range")
    if base + length > 1 << 64:
        raise ValueError("bounds overflow the address space")
    return Capability(tag=True, address=base, base=base, top=base + length, perms=perms)


def _sealed_modify(cap: Capability, mode: SealMode, what: str, **changes) -> Capability:
    if mode is SealMode.FAULT_ON_MODIFY:
        raise CapFault(FaultKind.SEAL, f"{what} on sealed capability")
    return cap.untagged(**changes)


def set_bounds(cap: Capability, new_base: int, new_length: int,
               mode: SealMode = SealMode.FAULT_ON_MODIFY) -> Capability:
    """Narrow bounds to [new_base, new_base+new_length); address = new_base.

    A non-monotonic request (or an untagged input) yields the requested
    capability with the tag cleared.  Sealed tagged input follows the
    seal-semantics mode.
    """
    new_top = new_base + new_length
    if cap.tag and cap.seal is not SealState.UNSEALED:
        return _sealed_modify(cap, mode, "set_bounds",
                              address=new_base, base=new_base, top=new_top)
    ok = cap.tag and cap.base <= new_base and new_top <= cap.top
    return replace(cap, tag=ok, address=new_base, base=new_base, top=new_top)


def restrict_perms(cap: Capability, perms: Perm,
                   mode: SealMode = SealMode.FAULT_ON_MODIFY) -> Capability:
    """Drop permissions; widening (or untagged input) clears the tag."""
    if cap.tag and cap.seal is not SealState.UNSEALED:
        return _sealed_modify(cap, mode, "restrict_perms", perms=perms)
    ok = cap.tag and (perms & cap.perms) == perms
    return replace(cap, tag=ok, perms=perms)


def set_address(cap: Capability, addr: int,
                mode: SealMode = SealMode.FAULT_ON_MODIFY) -> Capability:
    """Move the address.  Out-of-bounds addresses keep the tag; bounds are
    enforced only at access time."""
    addr &= MASK64
    if cap.tag and cap.seal is not SealState.UNSEALED:
        return _sealed_modify(cap, mode, "set_address", address=addr)
    return replace(cap, address=addr)


def seal_entry(cap: Capability) -> Capability:
    """Seal an executable capability.  Inputs without tag or EXECUTE yield
    an untagged result; a tag is never conjured."""
    ok = cap.tag and cap.seal is SealState.UNSEALED and Perm.EXECUTE in cap.perms
    return replace(cap, tag=ok, seal=SealState.SEALED_ENTRY)


def check_access(cap: Capability, kind: Perm, size: int) -> None:
    """Validate an access of `size` bytes at cap.address.

    Check order is fixed: tag, seal, permission, bounds.  Raises CapFault
    on the first failing check.
    """
    if size < 1:
        raise ValueError("access size must be >= 1")
    if not cap.tag:
        raise CapFault(FaultKind.TAG, f"untagged capability @{cap.address:#x}")
    if cap.seal is not SealState.UNSEALED:
        raise CapFault(FaultKind.SEAL, f"sealed capability @{cap.address:#x}")
    if kind not in cap.perms:
        raise CapFault(FaultKind.PERMISSION, f"{kind.name} not permitted")
    if not (cap.base <= cap.address and cap.address + size <= cap.top):
        raise CapFault(
            FaultKind.BOUNDS,
            f"[{cap.address:#x},{cap.address + size:#x}) outside [{cap.base:#x},{cap.top:#x})",
        )


_BINOPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
}


def _operand_value(v) -> int:
    return v.address if isinstance(v, Capability) else int(v) & MASK64


def capint_binop(lhs, rhs, op: str,
                 mode: SealMode = SealMode.FAULT_ON_MODIFY,
                 advisories: list | None = None) -> CapInt:
    """Binary operation on capability-typed integers.

    At least one operand must be a capability; the result inherits that
    operand's metadata (the left one when both are capabilities, which
    also records an "ambiguous-provenance" advisory).  Producing the
    result modifies the address of the inherited capability, so a sealed
    source follows the seal-semantics mode.

    Shifts by 64 or more yield the deterministic sentinel value 0.
    """
    lcap = isinstance(lhs, Capability)
    rcap = isinstance(rhs, Capability)
    if not (lcap or rcap):
        raise TypeError("at least one operand must be a capability-typed integer")
    source = lhs if lcap else rhs
    if lcap and rcap and advisories is not None:
        advisories.append("ambiguous-provenance")

    a = _operand_value(lhs)
    b = _operand_value(rhs)
    if op in ("shl", "shr"):
        if b >= VALUE_WIDTH:
            value = 0  # sentinel for shift amount >= value width
        elif op == "shl":
            value = (a << b) & MASK64
        else:
            value = a >> b
    elif op in _BINOPS:
        value = _BINOPS[op](a, b) & MASK64
    else:
        raise ValueError(f"unknown operation {op!r}")

    if source.tag and source.seal is not SealState.UNSEALED:
        return _sealed_modify(source, mode, f"binop {op}", address=value)
    return replace(source, address=value)


def capint_to_int64(v: CapInt) -> int:
    """Extract the 64-bit address.  Works on sealed and untagged inputs
    and never creates or modifies a capability."""
    return v.address & MASK64


def int64_to_capint(n: int) -> CapInt:
    """An integer becomes an untagged capability: empty bounds, no perms.
    Any later dereference raises a tag fault."""
    return Capability(tag=False, address=n & MASK64, base=0, top=0, perms=PERM_NONE)
