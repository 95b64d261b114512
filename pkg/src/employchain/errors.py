"""Exception types shared across the package.

Every error carries a short machine-readable ``signal`` so that callers
(and block receipts) can distinguish failure classes without parsing text.
"""

from __future__ import annotations


class EmploychainError(Exception):
    signal = "error"

    def __init__(self, message: str = "", signal: str | None = None):
        if signal is not None:
            self.signal = signal
        super().__init__(message or self.signal)

    @property
    def reason(self) -> str:
        return f"{self.signal}: {self}"


class LedgerError(EmploychainError):
    signal = "ledger"


class IdentityError(LedgerError):
    signal = "identity"


class DuplicateAccountError(LedgerError):
    signal = "duplicate-account"


class PreconditionError(LedgerError):
    signal = "precondition"


class ChainFormatError(LedgerError):
    signal = "chain-format"

    def __init__(self, message: str, height: int | None = None):
        super().__init__(message)
        self.height = height


class ContractError(EmploychainError):
    """Raised inside contract execution; the enclosing transaction is reverted."""

    signal = "contract"


class NetError(EmploychainError):
    signal = "net"


class ShapeError(NetError):
    signal = "shape"


class FiringError(NetError):
    signal = "firing-rule"


class BoundednessError(NetError):
    signal = "boundedness"


class ScenarioError(EmploychainError):
    signal = "scenario"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
