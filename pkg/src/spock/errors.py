"""Exception hierarchy shared by every module.

Each error carries a short machine-greppable token and the process exit
code the CLI maps it to:

    0   success
    1   generic / engine / environment failure
    2   usage (argparse)
    3   not found (unknown node, entity, bundle)
    4   integrity or signature failure
    5   policy denial (rebuild, purged content, untrusted signer, bad parent)
    10  run / admission denied
"""

from __future__ import annotations


class SpockError(Exception):
    token = "ERROR"
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class NotFoundError(SpockError):
    token = "NOT_FOUND"
    exit_code = 3


class AmbiguousNodeError(NotFoundError):
    token = "AMBIGUOUS"


class IntegrityError(SpockError):
    """Referential-integrity violation inside the ledger."""

    token = "INTEGRITY"
    exit_code = 4


class DuplicateEntityError(IntegrityError):
    token = "DUPLICATE_ENTITY"


class AlreadyRegisteredError(IntegrityError):
    """A recipe with this content hash is already recorded."""

    token = "ALREADY_REGISTERED"


class SignatureInvalidError(SpockError):
    token = "SIGNATURE_INVALID"
    exit_code = 4


class TamperError(SpockError):
    """Stored bytes no longer match their recorded digest."""

    token = "TAMPER"
    exit_code = 4


class LedgerExistsError(SpockError):
    token = "LEDGER_EXISTS"
    exit_code = 1


class PolicyError(SpockError):
    token = "POLICY"
    exit_code = 5


class RebuildDeniedError(PolicyError):
    """A live image already exists for this recipe."""

    token = "REBUILD_DENIED"


class PurgedError(PolicyError):
    """The content hash was revoked; it can never be reused."""

    token = "PURGED"


class UntrustedSignerError(PolicyError):
    token = "UNTRUSTED_SIGNER"


class ParentRejectedError(PolicyError):
    """A child recipe references an image that is missing or not trusted."""

    token = "PARENT_REJECTED"


class AlreadyDistrustedError(PolicyError):
    token = "ALREADY_DISTRUSTED"


class ParseError(SpockError):
    """Recipe text could not be interpreted."""

    token = "PARSE"
    exit_code = 5


class EngineError(SpockError):
    token = "ENGINE_FAILURE"
    exit_code = 1


class SpawnError(SpockError):
    token = "SPAWN_FAILURE"
    exit_code = 1


class RunDeniedError(SpockError):
    token = "RUN_DENIED"
    exit_code = 10
