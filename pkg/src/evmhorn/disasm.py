"""Decode raw EVM runtime bytecode into instructions and basic blocks.

Decoding tiles the whole input: unknown opcode bytes become INVALID-class
terminators and a push immediate truncated by the end of code is zero-padded
to its declared width (re-encoding clamps back to the original length).
No code/data splitting heuristic is applied; metadata trailers decode to dead
INVALID-terminated blocks and are pruned later by reachability.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .errors import DecodeError
from .opcodes import OpInfo, TERMINATORS, is_push, table_for

_HEX_DIGITS = set("0123456789abcdefABCDEF")


@dataclass(frozen=True)
class Instruction:
    pc: int
    byte: int
    mnemonic: str
    immediate: bytes = b""

    @property
    def size(self) -> int:
        return 1 + len(self.immediate)

    @property
    def is_push(self) -> bool:
        return is_push(self.mnemonic)

    def immediate_value(self) -> int:
        return int.from_bytes(self.immediate, "big")

    def text(self) -> str:
        if self.mnemonic == "INVALID":
            return f"{self.pc}: INVALID(0x{self.byte:02x})"
        if self.immediate:
            return f"{self.pc}: {self.mnemonic} 0x{self.immediate.hex()}"
        return f"{self.pc}: {self.mnemonic}"


@dataclass(frozen=True)
class InstructionStream:
    code: bytes
    instructions: tuple[Instruction, ...]
    jumpdests: frozenset[int]
    version: str

    def __len__(self) -> int:
        return len(self.instructions)

    def at(self, pc: int) -> Instruction | None:
        return self._by_pc.get(pc)

    @cached_property
    def _by_pc(self) -> dict[int, Instruction]:
        return {i.pc: i for i in self.instructions}


@dataclass(frozen=True)
class Block:
    index: int
    entry: int
    instructions: tuple[Instruction, ...]

    @property
    def last(self) -> Instruction:
        return self.instructions[-1]


@dataclass(frozen=True)
class BlockSkeleton:
    blocks: tuple[Block, ...]
    # (from block index, to block index) pairs; only from JUMPI blocks and
    # blocks ended by a following JUMPDEST.
    fallthrough: tuple[tuple[int, int], ...]

    def block_of(self, pc: int) -> Block | None:
        for b in self.blocks:
            if b.instructions and b.entry <= pc <= b.last.pc:
                return b
        return None


def parse_hex(text: str) -> bytes:
    """Parse hex text, '0x' prefix optional, whitespace tolerated.

    Raises DecodeError naming the character offset of the first problem.
    """
    digits: list[str] = []
    positions: list[int] = []
    i = 0
    if text[:2] in ("0x", "0X"):
        i = 2
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c not in _HEX_DIGITS:
            raise DecodeError(f"invalid hex character {c!r}", i)
        digits.append(c)
        positions.append(i)
        i += 1
    if len(digits) % 2 != 0:
        raise DecodeError("odd number of hex digits", positions[-1])
    return bytes(int(digits[k] + digits[k + 1], 16) for k in range(0, len(digits), 2))


def decode_bytecode(source: bytes | str, version: str = "constantinople") -> InstructionStream:
    """Decode bytes or hex text into a fully tiled instruction stream."""
    code = parse_hex(source) if isinstance(source, str) else bytes(source)
    table = table_for(version)
    instructions: list[Instruction] = []
    pc = 0
    while pc < len(code):
        byte = code[pc]
        info: OpInfo | None = table.get(byte)
        if info is None:
            instructions.append(Instruction(pc, byte, "INVALID"))
            pc += 1
            continue
        width = info.push_width
        if width:
            raw = code[pc + 1 : pc + 1 + width]
            imm = raw + b"\x00" * (width - len(raw))
            instructions.append(Instruction(pc, byte, info.mnemonic, imm))
            pc += 1 + width
        else:
            instructions.append(Instruction(pc, byte, info.mnemonic))
            pc += 1
    return InstructionStream(
        code=code,
        instructions=tuple(instructions),
        jumpdests=frozenset(valid_jumpdests_of(code, instructions)),
        version=version,
    )


def valid_jumpdests_of(code: bytes, instructions: list[Instruction]) -> set[int]:
    # pc is a valid destination iff the byte there is JUMPDEST and the decoder
    # reached it as an opcode (i.e. it is not inside a push immediate).
    return {i.pc for i in instructions if i.byte == 0x5B and code[i.pc] == 0x5B}


def valid_jumpdests(stream: InstructionStream) -> frozenset[int]:
    return stream.jumpdests


def encode(stream: InstructionStream) -> bytes:
    """Inverse of decode: opcode byte + immediate, clamped to the code length."""
    out = b"".join(bytes([i.byte]) + i.immediate for i in stream.instructions)
    return out[: len(stream.code)]


def split_basic_blocks(stream: InstructionStream) -> BlockSkeleton:
    blocks: list[Block] = []
    current: list[Instruction] = []

    def flush() -> None:
        if current:
            blocks.append(Block(len(blocks), current[0].pc, tuple(current)))
            current.clear()

    for instr in stream.instructions:
        if instr.mnemonic == "JUMPDEST" and current:
            flush()
        current.append(instr)
        if instr.mnemonic in TERMINATORS:
            flush()
    flush()

    fallthrough: list[tuple[int, int]] = []
    for b, nxt in zip(blocks, blocks[1:]):
        last = b.last.mnemonic
        if last == "JUMPI" or last not in TERMINATORS:
            fallthrough.append((b.index, nxt.index))
    return BlockSkeleton(tuple(blocks), tuple(fallthrough))


def disassemble_text(stream: InstructionStream) -> str:
    """One line per instruction; empty stream yields empty text."""
    if not stream.instructions:
        return ""
    return "\n".join(i.text() for i in stream.instructions) + "\n"


def parse_listing(text: str, version: str = "constantinople") -> InstructionStream:
    """Re-parse a disassemble_text listing back into a stream."""
    chunks: list[bytes] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            _, rest = line.split(":", 1)
            parts = rest.split()
            mnemonic = parts[0]
            if mnemonic.startswith("INVALID(0x"):
                chunks.append(bytes([int(mnemonic[8:-1], 16)]))
            elif len(parts) == 2:
                from .opcodes import by_mnemonic

                chunks.append(bytes([by_mnemonic(mnemonic).byte]) + bytes.fromhex(parts[1][2:]))
            else:
                from .opcodes import by_mnemonic

                chunks.append(bytes([by_mnemonic(mnemonic).byte]))
        except (ValueError, KeyError) as exc:
            raise DecodeError(f"unparsable listing line {lineno}: {exc}", lineno)
    return decode_bytecode(b"".join(chunks), version)
