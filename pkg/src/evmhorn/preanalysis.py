"""Control-flow reconstruction over a value-set constant domain.

A forward fixpoint from (pc 0, empty stack) runs a simplified abstract
semantics where every stack cell carries either a finite set of word
constants (capped at K, collapse to TOP beyond) or TOP. Jump targets are
resolved per constant element; a TOP target aborts the analysis with
UnreconstructableControlFlow instead of guessing. States are kept per
(pc, stack height) so shared code reached at several heights (internal
function calls) stays precise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .disasm import BlockSkeleton, InstructionStream, split_basic_blocks
from .errors import Diagnostic, HeightOverflow, UnreconstructableControlFlow
from .opcodes import HALTING, MAX_STACK, WORD_MOD

DEFAULT_K = 32
DEFAULT_H_MAX = 16
TRACKED_CELL_CAP = 64


class _Top:
    __slots__ = ()

    def __repr__(self) -> str:
        return "TOP"


TOP = _Top()

# A ValueSet is either TOP or a non-empty frozenset of words.
ValueSet = frozenset | _Top


def is_top(vs: ValueSet) -> bool:
    return vs is TOP


def vs_const(c: int) -> ValueSet:
    return frozenset((c,))


def vs_join(a: ValueSet, b: ValueSet, k: int = DEFAULT_K) -> ValueSet:
    if a is TOP or b is TOP:
        return TOP
    u = a | b
    return TOP if len(u) > k else u


def singleton(vs: ValueSet) -> int | None:
    if vs is not TOP and len(vs) == 1:
        return next(iter(vs))
    return None


def _signed(x: int) -> int:
    return x - WORD_MOD if x >= WORD_MOD // 2 else x


def _word_binop(mnemonic: str, a: int, b: int) -> int:
    # Operand order follows the stack: a is the top cell, b the one below.
    if mnemonic == "ADD":
        return (a + b) % WORD_MOD
    if mnemonic == "SUB":
        return (a - b) % WORD_MOD
    if mnemonic == "MUL":
        return (a * b) % WORD_MOD
    if mnemonic == "DIV":
        return 0 if b == 0 else a // b
    if mnemonic == "MOD":
        return 0 if b == 0 else a % b
    if mnemonic == "EXP":
        return pow(a, b, WORD_MOD)
    if mnemonic == "LT":
        return 1 if a < b else 0
    if mnemonic == "GT":
        return 1 if a > b else 0
    if mnemonic == "SLT":
        return 1 if _signed(a) < _signed(b) else 0
    if mnemonic == "SGT":
        return 1 if _signed(a) > _signed(b) else 0
    if mnemonic == "EQ":
        return 1 if a == b else 0
    if mnemonic == "AND":
        return a & b
    if mnemonic == "OR":
        return a | b
    if mnemonic == "XOR":
        return a ^ b
    if mnemonic == "SHL":
        return 0 if a >= 256 else (b << a) % WORD_MOD
    if mnemonic == "SHR":
        return 0 if a >= 256 else b >> a
    raise AssertionError(mnemonic)


POINTWISE_BINARY = frozenset(
    {"ADD", "SUB", "MUL", "DIV", "MOD", "EXP", "LT", "GT", "SLT", "SGT", "EQ",
     "AND", "OR", "XOR", "SHL", "SHR"}
)
POINTWISE_UNARY = frozenset({"ISZERO", "NOT"})


def vs_binop(mnemonic: str, a: ValueSet, b: ValueSet, k: int = DEFAULT_K) -> ValueSet:
    if a is TOP or b is TOP:
        return TOP
    out = frozenset(_word_binop(mnemonic, x, y) for x in a for y in b)
    return TOP if len(out) > k else out


def vs_unop(mnemonic: str, a: ValueSet, k: int = DEFAULT_K) -> ValueSet:
    if a is TOP:
        return TOP
    if mnemonic == "ISZERO":
        out = frozenset(1 if x == 0 else 0 for x in a)
    else:  # NOT
        out = frozenset(x ^ (WORD_MOD - 1) for x in a)
    return TOP if len(out) > k else out


Stack = tuple  # tuple of ValueSet, top first


@dataclass
class Cfg:
    stream: InstructionStream
    skeleton: BlockSkeleton
    k: int
    h_max: int
    # (pc, height) -> abstract stack at the fixpoint (top first)
    stack_states: dict[tuple[int, int], Stack] = field(default_factory=dict)
    heights: dict[int, tuple[int, ...]] = field(default_factory=dict)
    jump_edges: dict[int, tuple[int, ...]] = field(default_factory=dict)
    # (from pc, to pc) sequential/branch-not-taken flows observed at block ends
    fallthrough_edges: frozenset = frozenset()
    diagnostics: list[Diagnostic] = field(default_factory=list)
    # filled by propagate_constants
    const_map: dict[tuple[int, int], Stack] | None = None
    # filled by catalog_tracked_cells
    tracked_storage_keys: tuple[int, ...] = ()
    tracked_memory_offsets: tuple[int, ...] = ()

    def reachable(self, pc: int) -> bool:
        return pc in self.heights

    def constants_at(self, pc: int) -> dict[int, ValueSet]:
        """Per-slot join over all heights reaching pc (slots from stack top)."""
        assert self.const_map is not None
        joined: dict[int, ValueSet] = {}
        for (p, _h), stack in self.const_map.items():
            if p != pc:
                continue
            for slot, vs in enumerate(stack):
                joined[slot] = vs_join(joined[slot], vs, self.k) if slot in joined else vs
        return joined


def _successors(
    instr, stack: Stack, cfg: Cfg, k: int
) -> list[tuple[int, Stack]]:
    """Abstract transfer for one instruction; empty list means the path halts."""
    m = instr.mnemonic
    pc = instr.pc
    nxt = pc + instr.size

    if m in HALTING:
        return []
    if m == "JUMPDEST":
        return [(nxt, stack)]
    if m.startswith("PUSH"):
        return [(nxt, (vs_const(instr.immediate_value()),) + stack)]
    if m.startswith("DUP"):
        n = int(m[3:])
        return [(nxt, (stack[n - 1],) + stack)]
    if m.startswith("SWAP"):
        n = int(m[4:])
        ls = list(stack)
        ls[0], ls[n] = ls[n], ls[0]
        return [(nxt, tuple(ls))]
    if m == "POP":
        return [(nxt, stack[1:])]
    if m == "PC":
        return [(nxt, (vs_const(pc),) + stack)]
    if m == "CODESIZE":
        return [(nxt, (vs_const(len(cfg.stream.code)),) + stack)]
    if m in POINTWISE_BINARY:
        return [(nxt, (vs_binop(m, stack[0], stack[1], k),) + stack[2:])]
    if m in POINTWISE_UNARY:
        return [(nxt, (vs_unop(m, stack[0], k),) + stack[1:])]

    if m == "JUMP":
        return _jump_successors(instr, stack[0], stack[1:], cfg, conditional=False)
    if m == "JUMPI":
        target, cond, rest = stack[0], stack[1], stack[2:]
        may_nonzero = is_top(cond) or any(x != 0 for x in cond)
        may_zero = is_top(cond) or 0 in cond
        succs: list[tuple[int, Stack]] = []
        if may_nonzero:
            succs.extend(_jump_successors(instr, target, rest, cfg, conditional=True))
        if may_zero:
            succs.append((nxt, rest))
            cfg.fallthrough_edges |= {(pc, nxt)}
        return succs

    # Everything else: generic pops/pushes with TOP results.
    from .opcodes import table_for

    info = table_for(cfg.stream.version)[instr.byte]
    new_stack = (TOP,) * info.pushes + stack[info.pops :]
    return [(nxt, new_stack)]


def _jump_successors(instr, target: ValueSet, rest: Stack, cfg: Cfg, conditional: bool):
    if is_top(target):
        raise UnreconstructableControlFlow(instr.pc)
    succs = []
    taken = set(cfg.jump_edges.get(instr.pc, ()))
    for t in sorted(target):
        if t in cfg.stream.jumpdests:
            taken.add(t)
            succs.append((t, rest))
        else:
            diag = Diagnostic(
                "invalid-jump-target",
                instr.pc,
                f"constant jump target {t} is not a JUMPDEST; treated as exceptional halt",
            )
            if diag not in cfg.diagnostics:
                cfg.diagnostics.append(diag)
    if taken:
        cfg.jump_edges[instr.pc] = tuple(sorted(taken))
    return succs


def reconstruct_cfg(
    stream: InstructionStream, *, k: int = DEFAULT_K, h_max: int = DEFAULT_H_MAX
) -> Cfg:
    """Least fixpoint of the value-set semantics from (pc 0, empty stack)."""
    cfg = Cfg(stream=stream, skeleton=split_basic_blocks(stream), k=k, h_max=h_max)
    if not stream.instructions:
        return cfg

    # pcs of block-ending instructions that flow into the next block without a jump
    block_end_flow: dict[int, int] = {}
    for a, b in cfg.skeleton.fallthrough:
        last = cfg.skeleton.blocks[a].last
        if last.mnemonic != "JUMPI":
            block_end_flow[last.pc] = cfg.skeleton.blocks[b].entry

    states = cfg.stack_states
    heights_by_pc: dict[int, set[int]] = {}
    worklist: deque[tuple[int, int]] = deque()

    def join_state(pc: int, stack: Stack) -> None:
        h = len(stack)
        if h > MAX_STACK:
            _diag_once(cfg, "stack-overflow", pc, "stack grows past 1024; path halts")
            return
        key = (pc, h)
        seen = heights_by_pc.setdefault(pc, set())
        if h not in seen:
            if len(seen) >= cfg.h_max:
                raise HeightOverflow(pc, cfg.h_max)
            seen.add(h)
        old = states.get(key)
        if old is None:
            states[key] = stack
            worklist.append(key)
            return
        new = tuple(vs_join(a, b, k) for a, b in zip(old, stack))
        if new != old:
            states[key] = new
            worklist.append(key)

    join_state(0, ())
    while worklist:
        pc, h = worklist.popleft()
        instr = stream.at(pc)
        if instr is None:
            continue  # running off the end of code halts like STOP
        stack = states[(pc, h)]
        from .opcodes import table_for

        info = table_for(stream.version)[instr.byte]
        if h < info.pops:
            _diag_once(cfg, "stack-underflow", pc, "not enough operands; path halts")
            continue
        for succ_pc, succ_stack in _successors(instr, stack, cfg, k):
            if succ_pc == pc + instr.size and instr.pc in block_end_flow:
                cfg.fallthrough_edges |= {(pc, succ_pc)}
            join_state(succ_pc, succ_stack)

    cfg.heights = {
        pc: tuple(sorted(hs)) for pc, hs in sorted(heights_by_pc.items())
    }
    return cfg


def _diag_once(cfg: Cfg, kind: str, pc: int, message: str) -> None:
    diag = Diagnostic(kind, pc, message)
    if diag not in cfg.diagnostics:
        cfg.diagnostics.append(diag)


def propagate_constants(cfg: Cfg) -> Cfg:
    """Materialize the per-(pc, height, slot) constant map from the fixpoint."""
    cfg.const_map = dict(sorted(cfg.stack_states.items()))
    return cfg


def catalog_tracked_cells(cfg: Cfg) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Collect syntactically constant storage keys and aligned memory offsets.

    Both catalogs are capped at TRACKED_CELL_CAP (ascending order wins);
    accesses beyond the catalog fall back to the summary cell.
    """
    assert cfg.const_map is not None, "run propagate_constants first"
    keys: set[int] = set()
    offsets: set[int] = set()
    for (pc, _h), stack in cfg.const_map.items():
        instr = cfg.stream.at(pc)
        if instr is None or not stack:
            continue
        m = instr.mnemonic
        c = singleton(stack[0])
        if c is None:
            continue
        if m in ("SSTORE", "SLOAD"):
            keys.add(c)
        elif m in ("MSTORE", "MLOAD") and c % 32 == 0:
            offsets.add(c)
    cfg.tracked_storage_keys = tuple(sorted(keys)[:TRACKED_CELL_CAP])
    cfg.tracked_memory_offsets = tuple(sorted(offsets)[:TRACKED_CELL_CAP])
    return cfg.tracked_storage_keys, cfg.tracked_memory_offsets


def analyze_stream(
    stream: InstructionStream, *, k: int = DEFAULT_K, h_max: int = DEFAULT_H_MAX
) -> Cfg:
    """Full preanalysis: reconstruction, constants, tracked-cell catalog."""
    cfg = reconstruct_cfg(stream, k=k, h_max=h_max)
    propagate_constants(cfg)
    catalog_tracked_cells(cfg)
    return cfg


def export_cfg_dot(cfg: Cfg) -> str:
    """Deterministic DOT rendering of the reachable blocks and edges."""
    lines = ["digraph cfg {", '  node [shape=box fontname="monospace"];']
    reachable = [
        b for b in cfg.skeleton.blocks if any(i.pc in cfg.heights for i in b.instructions)
    ]
    for b in reachable:
        label = "\\l".join(i.text() for i in b.instructions) + "\\l"
        lines.append(f'  b{b.entry} [label="{label}"];')
    block_of = {}
    for b in reachable:
        for i in b.instructions:
            block_of[i.pc] = b.entry
    edges = []
    for pc in sorted(cfg.jump_edges):
        for t in cfg.jump_edges[pc]:
            if pc in block_of and t in block_of:
                edges.append((block_of[pc], block_of[t], "jump"))
    for pc, nxt in sorted(cfg.fallthrough_edges):
        if pc in block_of and nxt in block_of:
            edges.append((block_of[pc], block_of[nxt], "fall"))
    for src, dst, kind in sorted(set(edges)):
        lines.append(f'  b{src} -> b{dst} [label="{kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
