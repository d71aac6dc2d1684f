"""
Error hierarchy shared by every qridge module.

Each class carries the exit code the CLI maps it to:
0 success, 2 input error, 3 contract or degeneracy error, 4 resource budget.
"""

from __future__ import annotations


class QridgeError(Exception):
    exit_code = 1


class InputError(QridgeError, ValueError):
    """Bad user data: non-finite entries, wrong shapes, out-of-range arguments."""

    exit_code = 2


class ReportIOError(InputError):
    def __init__(self, path, reason: str):
        super().__init__(f"cannot write report to {path}: {reason}")
        self.path = path


class ContractError(QridgeError):
    """A numerical precondition of an operation does not hold."""

    exit_code = 3


class DegeneracyError(ContractError):
    pass


class AliasingError(ContractError):
    pass


class ImpossibleOutcomeError(ContractError):
    pass


class ResourceError(QridgeError):
    exit_code = 4
