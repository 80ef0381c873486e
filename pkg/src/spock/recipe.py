"""Recipe parsing, classification, and signed registration.

A recipe is plain text. Only the single FROM line is interpreted:

    FROM alpine:3.18                         -> root (external base)
    FROM trusted:<timestamp>-<recipe-hash>   -> child (internal image)

Everything else is an opaque build step, preserved verbatim. Roots pull
from outside the trust domain; children extend an image this ledger
already vouches for, and may only be registered while that image and its
whole ancestry are live, signed, and trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import clock, crypto
from .crypto import PrivateKey
from .errors import (
    AlreadyRegisteredError,
    ParentRejectedError,
    ParseError,
    PurgedError,
    UntrustedSignerError,
)
from .ledger import Ledger
from .records import KIND_CHILD, KIND_ROOT, RecipeRecord, STATUS_LIVE, STATUS_TRUSTED

INTERNAL_PREFIX = "trusted:"


@dataclass(frozen=True)
class Recipe:
    """Parsed recipe: its FROM reference, its other lines, and the
    original text. ``from_ref`` keeps the ``trusted:`` prefix for
    children; ``base_ref`` strips it."""

    from_ref: str
    kind: str
    steps: tuple[str, ...]
    text: str

    @property
    def content(self) -> bytes:
        return self.text.encode("utf-8")

    @property
    def base_ref(self) -> str:
        if self.kind == KIND_CHILD:
            return self.from_ref[len(INTERNAL_PREFIX):]
        return self.from_ref

    @property
    def parent_image_id(self) -> str | None:
        return self.base_ref if self.kind == KIND_CHILD else None


def parse(text: str) -> Recipe:
    """Parse recipe text and classify it as root or child.

    Comments and blank lines are preserved as steps but never affect
    classification. Exactly one FROM line is required.
    """
    if not text.strip():
        raise ParseError("empty recipe")
    from_ref: str | None = None
    steps: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        tokens = stripped.split()
        if tokens and tokens[0].upper() == "FROM":
            if from_ref is not None:
                raise ParseError("multiple FROM lines; recipes have a single parent")
            if len(tokens) < 2:
                raise ParseError("FROM line has no reference")
            from_ref = tokens[1]
            continue
        steps.append(line)
    if from_ref is None:
        raise ParseError("recipe has no FROM line")
    kind = KIND_CHILD if from_ref.startswith(INTERNAL_PREFIX) else KIND_ROOT
    return Recipe(from_ref=from_ref, kind=kind, steps=tuple(steps), text=text)


def _require_trusted(ledger: Ledger, signer: str) -> None:
    entity = ledger.entities.get(signer)
    if entity is None or entity.status != STATUS_TRUSTED:
        raise UntrustedSignerError(f"signer is not a trusted entity: {signer}")


def _check_hash_admissible(ledger: Ledger, recipe_hash: str) -> None:
    existing = ledger.recipes.get(recipe_hash)
    if existing is None:
        return
    if existing.status == STATUS_LIVE:
        raise AlreadyRegisteredError(f"recipe already registered: {recipe_hash}")
    raise PurgedError(f"recipe content was revoked and is barred forever: {recipe_hash}")


def register_root(
    ledger: Ledger, text: str, signer: str, private_key: PrivateKey
) -> RecipeRecord:
    parsed = parse(text)
    if parsed.kind != KIND_ROOT:
        raise ParseError(
            "recipe references an internal image; register it with the child command"
        )
    with ledger.exclusive():
        _require_trusted(ledger, signer)
        recipe_hash = crypto.digest(parsed.content)
        _check_hash_admissible(ledger, recipe_hash)
        record = RecipeRecord(
            recipe_hash=recipe_hash,
            kind=KIND_ROOT,
            content=parsed.content,
            signature=crypto.sign(parsed.content, private_key, signer),
            signer_id=signer,
            parent_image_id=None,
            registered_at=clock.now_utc(),
        )
        return ledger.put_recipe(record)


def register_child(
    ledger: Ledger, text: str, signer: str, private_key: PrivateKey
) -> RecipeRecord:
    parsed = parse(text)
    if parsed.kind != KIND_CHILD:
        raise ParseError(
            "recipe references an external source; register it with the root command"
        )
    with ledger.exclusive():
        _require_trusted(ledger, signer)
        recipe_hash = crypto.digest(parsed.content)
        _check_hash_admissible(ledger, recipe_hash)
        parent_id = parsed.parent_image_id
        assert parent_id is not None
        parent = ledger.images.get(parent_id)
        if parent is None:
            raise ParentRejectedError(f"referenced image does not exist: {parent_id}")
        if parent.status != STATUS_LIVE:
            raise ParentRejectedError(f"referenced image was purged: {parent_id}")
        from .provenance import lineage_problems  # local import to avoid a cycle

        problems = lineage_problems(ledger, parent)
        if problems:
            raise ParentRejectedError(
                f"referenced image fails lineage verification: {'; '.join(problems)}"
            )
        record = RecipeRecord(
            recipe_hash=recipe_hash,
            kind=KIND_CHILD,
            content=parsed.content,
            signature=crypto.sign(parsed.content, private_key, signer),
            signer_id=signer,
            parent_image_id=parent_id,
            registered_at=clock.now_utc(),
        )
        return ledger.put_recipe(record)
