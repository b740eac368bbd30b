"""Pitfall scenarios, each in a buggy and a fixed variant.

Every scenario runs on a fresh simulator instance and reports one of
three outcomes: Ok (the fixed idiom succeeded and an independent oracle
agreed), Fault (an architectural fault fired), or Corrupt (the buggy
idiom silently produced a wrong value, reported as expected vs actual).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .capability import (
    MASK64,
    CapFault,
    Capability,
    FaultKind,
    Perm,
    SealMode,
    WordModel,
    capint_binop,
    capint_to_int64,
    int64_to_capint,
    set_address,
    set_bounds,
)
from .memory import PAGE, PageProtRequest
from .vm import (
    CODE_BASE,
    HEAP_PAGE_BYTES,
    MiniVm,
    OBJECT_SLOT,
    SHAPE_ID_NUM_BITS,
    STACK_SLOT,
    SymbolEntry,
    MarkBitmap,
    count_utf8_lead_bytes,
    insn_hash_capint,
    insn_hash_int,
    pad_utf8,
    utf8_lead_oracle,
)

SCENARIO_IDS = [f"S{i}" for i in range(1, 13)]
SEAL_SENSITIVE = {"S7", "S8", "S9"}
OPT_SENSITIVE = {"S9"}


class OutcomeKind(Enum):
    OK = "ok"
    FAULT = "fault"
    CORRUPT = "corrupt"


@dataclass(frozen=True)
class ScenarioConfig:
    seal_mode: SealMode = SealMode.FAULT_ON_MODIFY
    opt_level: str = "O0"
    seed: int = 0


@dataclass(frozen=True)
class ScenarioOutcome:
    scenario: str
    mode: str
    seal_mode: Optional[str]
    opt_level: Optional[str]
    kind: OutcomeKind
    fault: Optional[FaultKind] = None
    expected: Optional[str] = None
    actual: Optional[str] = None
    detail: str = ""


def _outcome(sid: str, mode: str, cfg: ScenarioConfig, kind: OutcomeKind, *,
             fault: FaultKind | None = None, expected=None, actual=None,
             detail: str = "") -> ScenarioOutcome:
    return ScenarioOutcome(
        scenario=sid,
        mode=mode,
        seal_mode=cfg.seal_mode.value if sid in SEAL_SENSITIVE else None,
        opt_level=cfg.opt_level if sid in OPT_SENSITIVE else None,
        kind=kind,
        fault=fault,
        expected=None if expected is None else str(expected),
        actual=None if actual is None else str(actual),
        detail=detail,
    )


def _check(sid, mode, cfg, expected, actual, detail_ok=""):
    if expected != actual:
        return _outcome(sid, mode, cfg, OutcomeKind.CORRUPT,
                        expected=expected, actual=actual)
    return _outcome(sid, mode, cfg, OutcomeKind.OK, detail=detail_ok)


# -- S1: stack scan through a narrowly-bounded derived pointer ----------

def _s1(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    refs = [0, 3, 7]
    entries = [("ref", r) for r in refs] + [("imm", 0x15), ("int", 0x1234)]
    vm.rng.shuffle(entries)
    top = vm.lay_out_stack(entries)

    if mode == "buggy":
        # take the scan pointer from the address of a single stack slot:
        # its bounds cover only that slot
        scan = set_bounds(vm.stack_cap, top, STACK_SLOT)
        for i in range(len(entries)):
            try:
                v = vm.mem.load_cap(scan, scan.address)
            except CapFault as f:
                return _outcome("S1", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                                detail=f"iteration {i + 1}")
            vm.gc_mark(v, "fixed")
            scan = set_address(scan, scan.address + STACK_SLOT, cfg.seal_mode)
        return _outcome("S1", mode, cfg, OutcomeKind.CORRUPT,
                        expected="bounds fault", actual="completed")

    # fixed: derive the scan pointer from the stack super capability
    scan = set_address(vm.stack_cap, top, cfg.seal_mode)
    while scan.address < vm.stack_bottom:
        v = vm.mem.load_cap(scan, scan.address)
        vm.gc_mark(v, "fixed")
        scan = set_address(scan, scan.address + STACK_SLOT, cfg.seal_mode)
    return _check("S1", mode, cfg, sorted(refs), sorted(vm.marked_objects()),
                  detail_ok=f"marked {len(refs)} objects")


# -- S2: dereferencing an ambiguous pointer -----------------------------

def _s2(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    dead = 5  # object reachable only via a pointer-like integer
    live = [1, 4]
    entries = [("ref", r) for r in live] + [("int", vm.object_addr(dead))]
    top = vm.lay_out_stack(entries)

    variant = "buggy" if mode == "buggy" else "fixed"
    scan = set_address(vm.stack_cap, top, cfg.seal_mode)
    while scan.address < vm.stack_bottom:
        v = vm.mem.load_cap(scan, scan.address)
        try:
            vm.gc_mark(v, variant)
        except CapFault as f:
            return _outcome("S2", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                            detail=f"marking value @{v.address:#x}")
        scan = set_address(scan, scan.address + STACK_SLOT, cfg.seal_mode)
    return _check("S2", mode, cfg, sorted(live), sorted(vm.marked_objects()),
                  detail_ok="dead object left unmarked")


# -- S3: in-place reallocation keeps the stale narrow capability --------

def _s3(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    old_size, new_size = 64, 128
    chunk = vm.alloc.malloc(old_size)
    first = bytes(vm.rng.randrange(256) for _ in range(old_size))
    vm.mem.store_bytes(chunk, chunk.base, first)

    grown = vm.alloc.realloc(chunk, new_size)
    second = bytes(vm.rng.randrange(256) for _ in range(new_size - old_size))

    writer = chunk if mode == "buggy" else grown
    try:
        vm.mem.store_bytes(set_address(writer, chunk.base + old_size, cfg.seal_mode),
                           chunk.base + old_size, second)
    except CapFault as f:
        return _outcome("S3", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                        detail="write into the grown area via the old capability")
    got = vm.mem.load_bytes(grown, grown.base, new_size)
    return _check("S3", mode, cfg, (first + second).hex(), got.hex(),
                  detail_ok="grown chunk readable end to end")


# -- S4: mark bitmap indexed by storage size, not value width -----------

DEFAULT_MARK_SET = {3, 70, 127}


def _s4(mode: str, cfg: ScenarioConfig, payload=None) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    if payload is not None:
        marks = set(payload)
    else:
        marks = set(DEFAULT_MARK_SET)
        marks |= set(vm.rng.sample(range(HEAP_PAGE_BYTES // OBJECT_SLOT), 8))
    model = WordModel.PADDED_CAP if mode == "buggy" else WordModel.EXACT64
    bitmap = MarkBitmap(HEAP_PAGE_BYTES // OBJECT_SLOT, model)
    for i in sorted(marks):
        bitmap.set(i)
    return _check("S4", mode, cfg, sorted(marks), sorted(bitmap.bits()),
                  detail_ok=f"{len(marks)} bits set and read back")


# -- S5: shape id shifted past the value width --------------------------

def _s5(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    shape_id = vm.rng.randrange(1, 1 << SHAPE_ID_NUM_BITS)
    storage_bits = (WordModel.PADDED_CAP if mode == "buggy" else WordModel.EXACT64).storage_bits
    shift = storage_bits - SHAPE_ID_NUM_BITS

    header = vm.object_addr(0)
    flags = 0x19  # pre-existing low flag bits
    vm.mem.store_bytes(vm.heap_page, header, struct.pack("<Q", flags))

    # install: flags |= shape_id << shift, through capability arithmetic
    word = struct.unpack("<Q", vm.mem.load_bytes(vm.heap_page, header, 8))[0]
    mask = vm.binop(int64_to_capint(shape_id), shift, "shl")
    word = (word | mask.address) & MASK64
    vm.mem.store_bytes(vm.heap_page, header, struct.pack("<Q", word))

    # read back
    word = struct.unpack("<Q", vm.mem.load_bytes(vm.heap_page, header, 8))[0]
    got = vm.binop(int64_to_capint(word), shift, "shr").address & ((1 << SHAPE_ID_NUM_BITS) - 1)
    return _check("S5", mode, cfg, shape_id, got,
                  detail_ok=f"shape id {shape_id:#x} round-tripped")


# -- S6: word-parallel UTF-8 lead-byte count over padded words ----------

DEFAULT_S6_TEXT = "héllo wörld, naïve café, héllo wörld!"


def _s6(mode: str, cfg: ScenarioConfig, payload=None) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    if payload is None:
        raw = DEFAULT_S6_TEXT.encode()
    elif isinstance(payload, str):
        raw = payload.encode()
    else:
        raw = bytes(payload)
    model = WordModel.PADDED_CAP if mode == "buggy" else WordModel.EXACT64
    buf = pad_utf8(raw, model.storage_bytes)
    chunk = vm.alloc.malloc(len(buf))
    vm.mem.store_bytes(chunk, chunk.base, buf)
    stored = vm.mem.load_bytes(chunk, chunk.base, len(buf))
    got = count_utf8_lead_bytes(stored, model)
    return _check("S6", mode, cfg, utf8_lead_oracle(buf), got,
                  detail_ok=f"counted {got} lead bytes")


# -- S7: symbol search subtracts from a sealed return address -----------

SYMBOL_TABLE = (
    SymbolEntry("init", 0x100, 0x80),
    SymbolEntry("eval", 0x180, 0x200),
    SymbolEntry("parse", 0x380, 0x40),
)


def _find_symbol_oracle(addr: int) -> str | None:
    for sym in SYMBOL_TABLE:
        start = CODE_BASE + sym.st_value
        if start <= addr < start + sym.st_size:
            return sym.name
    return None


def _s7(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    trace_addr = vm.return_address(CODE_BASE + 0x1A0)
    found = None
    for sym in SYMBOL_TABLE:
        saddr = (CODE_BASE + sym.st_value) & MASK64
        if mode == "buggy":
            try:
                d = vm.binop(trace_addr, saddr, "sub")
            except CapFault as f:
                return _outcome("S7", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                                detail=f"distance computation for {sym.name}")
            dist = d.address
        else:
            dist = (capint_to_int64(trace_addr) - saddr) & MASK64
        if dist < sym.st_size:
            found = sym.name
            break
    return _check("S7", mode, cfg, _find_symbol_oracle(trace_addr.address), found,
                  detail_ok=f"symbol {found}")


# -- S8: hashing a sealed dispatch-table capability ---------------------

def _s8(mode: str, cfg: ScenarioConfig, payload=None) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    addr = payload if payload is not None else CODE_BASE + 0x40
    dispatch = vm.return_address(addr)  # sealed entry, like any code pointer
    oracle = insn_hash_int(addr & MASK64)
    if mode == "buggy":
        try:
            h = insn_hash_capint(dispatch, cfg.seal_mode, vm.advisories)
        except CapFault as f:
            return _outcome("S8", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                            detail="hash of sealed dispatch capability")
        got = h.address
    else:
        got = insn_hash_int(capint_to_int64(dispatch))
    return _check("S8", mode, cfg, f"{oracle:#x}", f"{got:#x}",
                  detail_ok=f"hash {got:#x}")


# -- S9: immediate test on a sealed return address ----------------------

def _s9(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    refs = [2, 6]
    entries = [("ref", r) for r in refs] + [("ret", CODE_BASE + 0x180), ("imm", 0x2B)]
    vm.rng.shuffle(entries)
    top = vm.lay_out_stack(entries)

    variant = "buggy" if mode == "buggy" else "fixed"
    scan = set_address(vm.stack_cap, top, cfg.seal_mode)
    while scan.address < vm.stack_bottom:
        v = vm.mem.load_cap(scan, scan.address)
        try:
            if not vm.vm_immediate_p(v, variant, cfg.opt_level):
                vm.gc_mark(v, "fixed")
        except CapFault as f:
            return _outcome("S9", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                            detail="immediate test created a sealed temporary")
        scan = set_address(scan, scan.address + STACK_SLOT, cfg.seal_mode)
    return _check("S9", mode, cfg, sorted(refs), sorted(vm.marked_objects()),
                  detail_ok="return address skipped, references marked")


# -- S10: container downcast through a plain integer type ---------------

def _s10(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    member_offset = 24  # fixed record-layout constant
    rec = vm.alloc.malloc(64)
    planted = vm.rng.getrandbits(64)
    vm.mem.store_bytes(rec, rec.base, struct.pack("<Q", planted))
    w = set_address(rec, rec.base + member_offset, cfg.seal_mode)

    if mode == "buggy":
        # pointer arithmetic on a non-capability integer: the cast back
        # yields an invalid capability
        n = (capint_to_int64(w) - member_offset) & MASK64
        container = int64_to_capint(n)
    else:
        container = vm.binop(w, member_offset, "sub")
    try:
        got = struct.unpack("<Q", vm.mem.load_bytes(container, container.address, 8))[0]
    except CapFault as f:
        return _outcome("S10", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                        detail="field load through the recovered container pointer")
    return _check("S10", mode, cfg, f"{planted:#x}", f"{got:#x}",
                  detail_ok="container field recovered")


# -- S11: page protection strips validity tags --------------------------

def _s11(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    slot = vm.heap_page.base  # page-aligned granule inside the heap page
    stored = vm.object_ref(3)
    vm.mem.store_cap(vm.heap_page, slot, stored)

    vm.mem.mprotect(PageProtRequest(vm.heap_page.base, PAGE, Perm(0)))
    vm.mem.mprotect(PageProtRequest(vm.heap_page.base, PAGE,
                                    Perm.LOAD | Perm.STORE,
                                    prot_cap=(mode == "fixed")))
    loaded = vm.mem.load_cap(vm.heap_page, slot)
    try:
        vm.mem.load_bytes(loaded, loaded.address, 8)
    except CapFault as f:
        return _outcome("S11", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                        detail="dereference of the reloaded capability")
    return _check("S11", mode, cfg, True, loaded == stored,
                  detail_ok="capability survived the protection cycle")


# -- S12: context creation truncates capability arguments ---------------

def _s12(mode: str, cfg: ScenarioConfig) -> ScenarioOutcome:
    vm = MiniVm(cfg.seal_mode, cfg.seed)
    ctx = vm.alloc.malloc(64)
    arg = vm.object_ref(9)
    header = vm.rng.getrandbits(64)
    vm.mem.store_bytes(vm.heap_page, arg.address, struct.pack("<Q", header))

    if mode == "buggy":
        # the argument is copied into the context as a 64-bit integer
        vm.mem.store_bytes(ctx, ctx.base, struct.pack("<Q", arg.address))
    else:
        vm.mem.store_cap(ctx, ctx.base, arg)

    # the callee later picks the argument up from the context
    received = vm.mem.load_cap(ctx, ctx.base)
    try:
        got = struct.unpack("<Q", vm.mem.load_bytes(received, received.address, 8))[0]
    except CapFault as f:
        return _outcome("S12", mode, cfg, OutcomeKind.FAULT, fault=f.kind,
                        detail="callee dereference of the copied argument")
    return _check("S12", mode, cfg, f"{header:#x}", f"{got:#x}",
                  detail_ok="argument survived the context copy")


# -- catalogue ----------------------------------------------------------

@dataclass(frozen=True)
class ScenarioInfo:
    sid: str
    name: str
    title: str
    category: str
    buggy_expectation: str


CATALOGUE = {
    "S1": ScenarioInfo("S1", "stack_scan_bounds", "invalid derived stack-scan pointer",
                       "derived pointer", "BoundsFault (iteration 2)"),
    "S2": ScenarioInfo("S2", "ambiguous_pointer", "dereferencing an ambiguous pointer",
                       "ambiguous pointer", "TagFault"),
    "S3": ScenarioInfo("S3", "inplace_realloc", "stale capability after in-place realloc",
                       "reallocation", "BoundsFault"),
    "S4": ScenarioInfo("S4", "bitmap_padding", "mark bitmap indexed over padding bits",
                       "integer padding", "Corrupt (dropped bits)"),
    "S5": ScenarioInfo("S5", "shape_id", "shape id shifted past the value width",
                       "integer padding", "Corrupt (shape reads back 0)"),
    "S6": ScenarioInfo("S6", "utf8_count", "word-parallel UTF-8 count over padded words",
                       "integer padding", "Corrupt (undercount)"),
    "S7": ScenarioInfo("S7", "backtrace_symbols", "symbol search on sealed return address",
                       "sealed capability", "SealFault (fault mode) / Ok (invalidate mode)"),
    "S8": ScenarioInfo("S8", "insn_hash", "hashing a sealed dispatch capability",
                       "sealed capability", "SealFault (fault mode) / Ok (invalidate mode)"),
    "S9": ScenarioInfo("S9", "immediate_test_sealed", "immediate test on a sealed return address",
                       "sealed capability", "SealFault (O0 + fault mode) / Ok otherwise"),
    "S10": ScenarioInfo("S10", "downcast_sizet", "container downcast via a plain integer",
                        "integer cast", "TagFault"),
    "S11": ScenarioInfo("S11", "mprotect_tags", "page protection invalidates stored tags",
                        "page protection", "TagFault"),
    "S12": ScenarioInfo("S12", "makecontext_args", "context copy truncates capability arguments",
                        "context arguments", "TagFault"),
}

_RUNNERS: dict[str, Callable] = {
    "S1": _s1, "S2": _s2, "S3": _s3, "S4": _s4, "S5": _s5, "S6": _s6,
    "S7": _s7, "S8": _s8, "S9": _s9, "S10": _s10, "S11": _s11, "S12": _s12,
}

_PAYLOAD_AWARE = {"S4", "S6", "S8"}


def run_scenario(sid: str, mode: str,
                 config: ScenarioConfig | None = None,
                 payload=None) -> ScenarioOutcome:
    """Run one scenario variant on a fresh simulator instance."""
    if sid not in _RUNNERS:
        raise ValueError(f"unknown scenario id {sid!r}")
    if mode not in ("buggy", "fixed"):
        raise ValueError(f"mode must be 'buggy' or 'fixed', not {mode!r}")
    cfg = config or ScenarioConfig()
    runner = _RUNNERS[sid]
    if sid in _PAYLOAD_AWARE:
        return runner(mode, cfg, payload)
    return runner(mode, cfg)


def expected_outcome(sid: str, mode: str, cfg: ScenarioConfig) -> tuple:
    """The catalogued expectation for one (scenario, mode, config) cell.

    Returns ("ok",), ("fault", FaultKind) or ("corrupt",).
    """
    if mode == "fixed":
        return ("ok",)
    if sid == "S1" or sid == "S3":
        return ("fault", FaultKind.BOUNDS)
    if sid in ("S2", "S10", "S11", "S12"):
        return ("fault", FaultKind.TAG)
    if sid in ("S4", "S5", "S6"):
        return ("corrupt",)
    if sid in ("S7", "S8"):
        if cfg.seal_mode is SealMode.FAULT_ON_MODIFY:
            return ("fault", FaultKind.SEAL)
        return ("ok",)
    if sid == "S9":
        if cfg.opt_level == "O0" and cfg.seal_mode is SealMode.FAULT_ON_MODIFY:
            return ("fault", FaultKind.SEAL)
        return ("ok",)
    raise ValueError(sid)


def outcome_matches(outcome: ScenarioOutcome, expectation: tuple) -> bool:
    if expectation[0] == "ok":
        return outcome.kind is OutcomeKind.OK
    if expectation[0] == "fault":
        return outcome.kind is OutcomeKind.FAULT and outcome.fault is expectation[1]
    return outcome.kind is OutcomeKind.CORRUPT
