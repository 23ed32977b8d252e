"""EVM opcode tables, selectable by fork version.

The default table is the Constantinople set. Earlier tables are obtained by
filtering on the fork that introduced each opcode; any byte not in the active
table decodes as an INVALID-class terminator.
"""

from __future__ import annotations

from dataclasses import dataclass

WORD_BITS = 256
WORD_MOD = 1 << WORD_BITS
MAX_STACK = 1024

# Fork ordering used for "introduced in" filtering.
VERSIONS = ("homestead", "byzantium", "constantinople")

_HOMESTEAD = "homestead"
_BYZANTIUM = "byzantium"
_CONSTANTINOPLE = "constantinople"


@dataclass(frozen=True)
class OpInfo:
    byte: int
    mnemonic: str
    pops: int
    pushes: int
    since: str = _HOMESTEAD

    @property
    def push_width(self) -> int:
        if 0x60 <= self.byte <= 0x7F:
            return self.byte - 0x5F
        return 0


def _base_table() -> dict[int, OpInfo]:
    t: dict[int, OpInfo] = {}

    def op(byte: int, mnemonic: str, pops: int, pushes: int, since: str = _HOMESTEAD) -> None:
        t[byte] = OpInfo(byte, mnemonic, pops, pushes, since)

    op(0x00, "STOP", 0, 0)
    op(0x01, "ADD", 2, 1)
    op(0x02, "MUL", 2, 1)
    op(0x03, "SUB", 2, 1)
    op(0x04, "DIV", 2, 1)
    op(0x05, "SDIV", 2, 1)
    op(0x06, "MOD", 2, 1)
    op(0x07, "SMOD", 2, 1)
    op(0x08, "ADDMOD", 3, 1)
    op(0x09, "MULMOD", 3, 1)
    op(0x0A, "EXP", 2, 1)
    op(0x0B, "SIGNEXTEND", 2, 1)
    op(0x10, "LT", 2, 1)
    op(0x11, "GT", 2, 1)
    op(0x12, "SLT", 2, 1)
    op(0x13, "SGT", 2, 1)
    op(0x14, "EQ", 2, 1)
    op(0x15, "ISZERO", 1, 1)
    op(0x16, "AND", 2, 1)
    op(0x17, "OR", 2, 1)
    op(0x18, "XOR", 2, 1)
    op(0x19, "NOT", 1, 1)
    op(0x1A, "BYTE", 2, 1)
    op(0x1B, "SHL", 2, 1, _CONSTANTINOPLE)
    op(0x1C, "SHR", 2, 1, _CONSTANTINOPLE)
    op(0x1D, "SAR", 2, 1, _CONSTANTINOPLE)
    op(0x20, "SHA3", 2, 1)
    op(0x30, "ADDRESS", 0, 1)
    op(0x31, "BALANCE", 1, 1)
    op(0x32, "ORIGIN", 0, 1)
    op(0x33, "CALLER", 0, 1)
    op(0x34, "CALLVALUE", 0, 1)
    op(0x35, "CALLDATALOAD", 1, 1)
    op(0x36, "CALLDATASIZE", 0, 1)
    op(0x37, "CALLDATACOPY", 3, 0)
    op(0x38, "CODESIZE", 0, 1)
    op(0x39, "CODECOPY", 3, 0)
    op(0x3A, "GASPRICE", 0, 1)
    op(0x3B, "EXTCODESIZE", 1, 1)
    op(0x3C, "EXTCODECOPY", 4, 0)
    op(0x3D, "RETURNDATASIZE", 0, 1, _BYZANTIUM)
    op(0x3E, "RETURNDATACOPY", 3, 0, _BYZANTIUM)
    op(0x3F, "EXTCODEHASH", 1, 1, _CONSTANTINOPLE)
    op(0x40, "BLOCKHASH", 1, 1)
    op(0x41, "COINBASE", 0, 1)
    op(0x42, "TIMESTAMP", 0, 1)
    op(0x43, "NUMBER", 0, 1)
    op(0x44, "DIFFICULTY", 0, 1)
    op(0x45, "GASLIMIT", 0, 1)
    op(0x50, "POP", 1, 0)
    op(0x51, "MLOAD", 1, 1)
    op(0x52, "MSTORE", 2, 0)
    op(0x53, "MSTORE8", 2, 0)
    op(0x54, "SLOAD", 1, 1)
    op(0x55, "SSTORE", 2, 0)
    op(0x56, "JUMP", 1, 0)
    op(0x57, "JUMPI", 2, 0)
    op(0x58, "PC", 0, 1)
    op(0x59, "MSIZE", 0, 1)
    op(0x5A, "GAS", 0, 1)
    op(0x5B, "JUMPDEST", 0, 0)
    for i in range(32):
        op(0x60 + i, f"PUSH{i + 1}", 0, 1)
    for i in range(16):
        op(0x80 + i, f"DUP{i + 1}", i + 1, i + 2)
    for i in range(16):
        op(0x90 + i, f"SWAP{i + 1}", i + 2, i + 2)
    for i in range(5):
        op(0xA0 + i, f"LOG{i}", 2 + i, 0)
    op(0xF0, "CREATE", 3, 1)
    op(0xF1, "CALL", 7, 1)
    op(0xF2, "CALLCODE", 7, 1)
    op(0xF3, "RETURN", 2, 0)
    op(0xF4, "DELEGATECALL", 6, 1)
    op(0xF5, "CREATE2", 4, 1, _CONSTANTINOPLE)
    op(0xFA, "STATICCALL", 6, 1, _BYZANTIUM)
    op(0xFD, "REVERT", 2, 0, _BYZANTIUM)
    op(0xFE, "INVALID", 0, 0)
    op(0xFF, "SELFDESTRUCT", 1, 0)
    return t


_FULL_TABLE = _base_table()
_BY_MNEMONIC = {info.mnemonic: info for info in _FULL_TABLE.values()}


def table_for(version: str) -> dict[int, OpInfo]:
    if version not in VERSIONS:
        raise ValueError(f"unknown opcode table version {version!r}")
    cutoff = VERSIONS.index(version)
    return {b: i for b, i in _FULL_TABLE.items() if VERSIONS.index(i.since) <= cutoff}


def by_mnemonic(mnemonic: str) -> OpInfo:
    return _BY_MNEMONIC[mnemonic]


# Instructions that end a basic block. JUMPI and non-terminated block ends
# additionally fall through.
TERMINATORS = frozenset(
    {"JUMP", "JUMPI", "STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"}
)

# Halting instructions (no successor state).
HALTING = frozenset({"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"})

# Halts that commit storage effects; REVERT/INVALID roll them back.
COMMITTING_HALTS = frozenset({"STOP", "RETURN", "SELFDESTRUCT"})

# Instructions that hand control to other code and may trigger a reentering
# execution of the analyzed contract.
CALL_CLASS = frozenset(
    {"CALL", "CALLCODE", "DELEGATECALL", "STATICCALL", "CREATE", "CREATE2"}
)

# Call variants that execute foreign code with write access to our storage.
DELEGATING_CALLS = frozenset({"DELEGATECALL", "CALLCODE"})


def is_push(mnemonic: str) -> bool:
    return mnemonic.startswith("PUSH")


def is_invalid(mnemonic: str) -> bool:
    return mnemonic == "INVALID"
