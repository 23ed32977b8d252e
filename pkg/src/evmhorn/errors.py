"""Exception types and diagnostics shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass


class EvmHornError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(EvmHornError):
    """Malformed bytecode input (bad hex); `offset` is the offending character."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ConfigError(EvmHornError):
    """Invalid analysis configuration or CLI usage."""


class AnalysisError(EvmHornError):
    """Pipeline failure that must be reported, never silently dropped."""

    kind = "analysis-error"

    def diagnostic(self) -> "Diagnostic":
        return Diagnostic(self.kind, getattr(self, "pc", None), str(self))


class UnreconstructableControlFlow(AnalysisError):
    """JUMP/JUMPI whose target abstracts to Top: the CFG cannot be recovered."""

    kind = "unreconstructable-control-flow"

    def __init__(self, pc: int):
        super().__init__(f"jump target at pc {pc} depends on unknown values")
        self.pc = pc


class HeightOverflow(AnalysisError):
    """More distinct stack heights at one pc than the configured bound."""

    kind = "height-overflow"

    def __init__(self, pc: int, limit: int):
        super().__init__(f"more than {limit} distinct stack heights reach pc {pc}")
        self.pc = pc
        self.limit = limit


class HornParseError(EvmHornError):
    """Syntax error in the textual Horn IR."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class QueryNotFound(EvmHornError):
    """Requested query name is not declared in the Horn system."""


class UnsupportedOpcode(EvmHornError):
    """Concrete interpreter hit an opcode outside the supported subset."""

    def __init__(self, pc: int, mnemonic: str):
        super().__init__(f"unsupported opcode {mnemonic} at pc {pc}")
        self.pc = pc
        self.mnemonic = mnemonic


@dataclass(frozen=True)
class Diagnostic:
    """Non-fatal finding surfaced in reports (e.g. a constant jump to a non-JUMPDEST)."""

    kind: str
    pc: int | None
    message: str

    def as_dict(self) -> dict:
        return {"kind": self.kind, "pc": self.pc, "message": self.message}
