"""Persistent single source of truth for entities, recipes, images, and events.

Layout of a ledger directory:

    ledger.log   append-only record log (authoritative)
    keys/        trusted public keys as PEM files (distribution copies)
    archive/     forensic bundles written by revocations
    index/       rebuildable summary, never read back (not authoritative)
    .lock        advisory lock file

Each log line is ``<record-digest> <record-type> <base64(canonical-json)>``.
The digest is SHA-256 over the canonical JSON bytes, so every line is
self-verifying. Records are immutable once written; status changes are
new appended event records, and the in-memory state is a replay of the
whole log.

Concurrency: one writer at a time, enforced with an exclusive flock on
``.lock`` for the duration of a mutating operation; readers take a shared
flock while they catch up on newly appended lines. A crash can only tear
the final line; an incomplete final line is discarded on replay and
truncated away by the next writer.
"""

from __future__ import annotations

import fcntl
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import clock, crypto
from .crypto import PublicKey
from .errors import (
    AlreadyRegisteredError,
    DuplicateEntityError,
    IntegrityError,
    LedgerExistsError,
    NotFoundError,
    AmbiguousNodeError,
    RebuildDeniedError,
    SpockError,
)
from .records import (
    ImageId,
    ImageRecord,
    LedgerEvent,
    MetaRecord,
    RecipeRecord,
    SCHEMA_VERSION,
    canonical_json,
    STATUS_DISTRUSTED,
    STATUS_LIVE,
    STATUS_PURGED,
    TrustedEntity,
    load_record,
    record_bytes,
    record_type,
)

LOG_NAME = "ledger.log"
KEYS_DIR = "keys"
ARCHIVE_DIR = "archive"
INDEX_DIR = "index"
LOCK_NAME = ".lock"


@dataclass
class ValidationEntry:
    ref: str
    check: str
    ok: bool
    detail: str = ""


@dataclass
class ValidationReport:
    entries: list[ValidationEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self) -> list[ValidationEntry]:
        return [e for e in self.entries if not e.ok]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked": len(self.entries),
            "failures": len(self.failures()),
            "entries": [
                {"ref": e.ref, "check": e.check, "ok": e.ok, "detail": e.detail}
                for e in self.entries
            ],
        }


@dataclass
class LoadIssue:
    ref: str
    check: str
    detail: str


def format_log_line(rec_digest: str, rtype: str, payload: bytes) -> bytes:
    return f"{rec_digest} {rtype} {crypto.encode_text(payload)}\n".encode("ascii")


class Ledger:
    """Handle on a ledger directory. Use :meth:`init` or :meth:`open`."""

    def __init__(self, root: Path, sync: bool = True):
        self.root = Path(root)
        self.sync = sync
        self.entities: dict[str, TrustedEntity] = {}
        self.recipes: dict[str, RecipeRecord] = {}
        self.images: dict[str, ImageRecord] = {}
        self.events: list[LedgerEvent] = []
        self.archives: dict[str, dict] = {}
        self.meta: MetaRecord | None = None
        self.issues: list[LoadIssue] = []
        self._images_by_recipe: dict[str, list[str]] = {}
        self._children_by_image: dict[str, list[str]] = {}
        self._record_lines: dict[str, int] = {}
        self._offset = 0
        self._line_no = 0
        self._torn_tail = False
        self._lock_fd: int | None = None
        self._lock_depth = 0
        self._lock_mode: str | None = None

    # ------------------------------------------------------------------
    # lifecycle

    @classmethod
    def init(cls, path: str | Path, sync: bool = True) -> "Ledger":
        root = Path(path)
        if root.exists() and any(root.iterdir()):
            raise LedgerExistsError(f"path exists and is not empty: {root}")
        root.mkdir(parents=True, exist_ok=True)
        (root / KEYS_DIR).mkdir()
        (root / ARCHIVE_DIR).mkdir()
        (root / INDEX_DIR).mkdir()
        (root / LOG_NAME).touch()
        (root / LOCK_NAME).touch()
        ledger = cls(root, sync=sync)
        meta = MetaRecord(schema_version=SCHEMA_VERSION, created_at=clock.now_utc())
        with ledger.exclusive():
            ledger.append(meta)
        return ledger

    @classmethod
    def open(cls, path: str | Path, sync: bool = True) -> "Ledger":
        root = Path(path)
        if not (root / LOG_NAME).is_file():
            raise NotFoundError(f"no ledger at {root}")
        ledger = cls(root, sync=sync)
        ledger.refresh()
        if ledger.meta is None:
            # tolerate a tampered schema line (validation will flag it),
            # but refuse files that never were ledgers
            if not ledger.issues:
                raise IntegrityError(f"ledger at {root} has no schema record")
        elif ledger.meta.schema_version != SCHEMA_VERSION:
            raise IntegrityError(
                f"unsupported schema version {ledger.meta.schema_version}"
            )
        return ledger

    def close(self) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            self._lock_fd = None

    @property
    def log_path(self) -> Path:
        return self.root / LOG_NAME

    @property
    def archive_root(self) -> Path:
        return self.root / ARCHIVE_DIR

    @property
    def keys_root(self) -> Path:
        return self.root / KEYS_DIR

    # ------------------------------------------------------------------
    # locking and replay

    def _lockfile(self) -> int:
        if self._lock_fd is None:
            self._lock_fd = os.open(self.root / LOCK_NAME, os.O_RDWR | os.O_CREAT, 0o644)
        return self._lock_fd

    @contextmanager
    def shared(self):
        fd = self._lockfile()
        if self._lock_depth == 0:
            fcntl.flock(fd, fcntl.LOCK_SH)
            self._lock_mode = "shared"
        self._lock_depth += 1
        try:
            yield self
        finally:
            self._lock_depth -= 1
            if self._lock_depth == 0:
                fcntl.flock(fd, fcntl.LOCK_UN)
                self._lock_mode = None

    @contextmanager
    def exclusive(self):
        """Writer lock for the duration of a mutating operation."""
        fd = self._lockfile()
        if self._lock_depth == 0:
            fcntl.flock(fd, fcntl.LOCK_EX)
            self._lock_mode = "exclusive"
        elif self._lock_mode != "exclusive":
            # upgrading SH to EX mid-operation can deadlock two upgraders
            raise SpockError("cannot take the writer lock inside a read lock")
        self._lock_depth += 1
        try:
            self._catch_up()
            self._repair_torn_tail()
            yield self
        finally:
            self._lock_depth -= 1
            if self._lock_depth == 0:
                fcntl.flock(fd, fcntl.LOCK_UN)
                self._lock_mode = None

    def refresh(self) -> None:
        """Catch up on records appended by other processes."""
        with self.shared():
            self._catch_up()

    def _catch_up(self) -> None:
        size = self.log_path.stat().st_size
        if size < self._offset:
            # log shrank (external truncation): replay from scratch
            self._reset_state()
        if size == self._offset:
            return
        with open(self.log_path, "rb") as fh:
            fh.seek(self._offset)
            data = fh.read()
        self._consume(data)

    def _reset_state(self) -> None:
        self.entities = {}
        self.recipes = {}
        self.images = {}
        self.events = []
        self.archives = {}
        self.meta = None
        self.issues = []
        self._images_by_recipe = {}
        self._children_by_image = {}
        self._record_lines = {}
        self._offset = 0
        self._line_no = 0
        self._torn_tail = False

    def _consume(self, data: bytes) -> None:
        pos = 0
        self._torn_tail = False
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl < 0:
                # incomplete final line: crash artifact, not part of the ledger
                self._torn_tail = True
                break
            line = data[pos:nl]
            pos = nl + 1
            self._offset += len(line) + 1
            self._line_no += 1
            self._replay_line(line, self._line_no)

    def _repair_torn_tail(self) -> None:
        if not self._torn_tail:
            return
        with open(self.log_path, "r+b") as fh:
            fh.truncate(self._offset)
            if self.sync:
                os.fsync(fh.fileno())
        self._torn_tail = False

    def _replay_line(self, line: bytes, line_no: int) -> None:
        ref = f"line:{line_no}"
        try:
            text = line.decode("ascii")
            stored_digest, rtype, payload_b64 = text.split(" ")
            payload = crypto.decode_text(payload_b64)
            data = json.loads(payload)
            if data.get("record") != rtype:
                raise SpockError("record type token mismatch")
            record = load_record(rtype, data)
        except Exception as exc:
            self.issues.append(LoadIssue(ref, "parse", f"corrupt log line: {exc}"))
            return
        if crypto.encode_text(payload) != payload_b64:
            # decodes, but not to the exact bytes we would have written:
            # the line was altered into a non-canonical encoding
            self.issues.append(
                LoadIssue(ref, "record-digest", "non-canonical record encoding")
            )
        if crypto.digest(payload) != stored_digest:
            self.issues.append(
                LoadIssue(
                    ref,
                    "record-digest",
                    f"stored digest does not match record bytes ({self._ref_for(record)})",
                )
            )
        self._apply(record, line_no)

    @staticmethod
    def _ref_for(record) -> str:
        if isinstance(record, TrustedEntity):
            return f"entity:{record.entity_id}"
        if isinstance(record, RecipeRecord):
            return f"recipe:{record.recipe_hash}"
        if isinstance(record, ImageRecord):
            return f"image:{record.image_id}"
        if isinstance(record, LedgerEvent):
            return f"event:{record.event}"
        return "meta"

    def _apply(self, record, line_no: int) -> None:
        if isinstance(record, MetaRecord):
            if self.meta is None:
                self.meta = record
            else:
                self.issues.append(LoadIssue("meta", "duplicate", "duplicate schema record"))
        elif isinstance(record, TrustedEntity):
            if record.entity_id in self.entities:
                self.issues.append(
                    LoadIssue(f"entity:{record.entity_id}", "duplicate", "duplicate entity id")
                )
                return
            self.entities[record.entity_id] = record
            self._record_lines[f"entity:{record.entity_id}"] = line_no
        elif isinstance(record, RecipeRecord):
            if record.recipe_hash in self.recipes:
                self.issues.append(
                    LoadIssue(f"recipe:{record.recipe_hash}", "duplicate", "duplicate recipe hash")
                )
                return
            self.recipes[record.recipe_hash] = record
            self._record_lines[f"recipe:{record.recipe_hash}"] = line_no
            if record.parent_image_id is not None:
                self._children_by_image.setdefault(record.parent_image_id, []).append(
                    record.recipe_hash
                )
        elif isinstance(record, ImageRecord):
            if record.image_id in self.images:
                self.issues.append(
                    LoadIssue(f"image:{record.image_id}", "duplicate", "duplicate image id")
                )
                return
            self.images[record.image_id] = record
            self._record_lines[f"image:{record.image_id}"] = line_no
            self._images_by_recipe.setdefault(record.recipe_hash, []).append(record.image_id)
        elif isinstance(record, LedgerEvent):
            self.events.append(record)
            self._record_lines[f"event-line:{line_no}"] = line_no
            if record.event in ("remove", "distrust"):
                self._apply_purge_event(record)

    def _apply_purge_event(self, event: LedgerEvent) -> None:
        for recipe_hash in event.data.get("purged_recipes", []):
            rec = self.recipes.get(recipe_hash)
            if rec is not None:
                rec.status = STATUS_PURGED
            else:
                self.issues.append(
                    LoadIssue(f"event:{event.event}", "referential", f"purge of unknown recipe {recipe_hash}")
                )
        for image_id in event.data.get("purged_images", []):
            img = self.images.get(image_id)
            if img is not None:
                img.status = STATUS_PURGED
            else:
                self.issues.append(
                    LoadIssue(f"event:{event.event}", "referential", f"purge of unknown image {image_id}")
                )
        if event.event == "distrust":
            entity = self.entities.get(event.data.get("entity_id", ""))
            if entity is not None:
                entity.status = STATUS_DISTRUSTED
        bundle_id = event.data.get("bundle_id")
        if bundle_id:
            self.archives[bundle_id] = {
                "bundle_id": bundle_id,
                "created_at": clock.iso(event.at),
                "reason": event.data.get("reason", ""),
                "event": event.event,
                "recipes": len(event.data.get("purged_recipes", [])),
                "images": len(event.data.get("purged_images", [])),
            }

    # ------------------------------------------------------------------
    # appending

    def append(self, record) -> str:
        """Append one record under the held writer lock and apply it."""
        if self._lock_mode != "exclusive":
            raise SpockError("append requires the writer lock")
        payload = record_bytes(record)
        rec_digest = crypto.digest(payload)
        line = format_log_line(rec_digest, record_type(record), payload)
        with open(self.log_path, "ab") as fh:
            fh.write(line)
            fh.flush()
            if self.sync:
                os.fsync(fh.fileno())
        self._offset += len(line)
        self._line_no += 1
        self._apply(record, self._line_no)
        self._write_index_summary()
        return rec_digest

    def _write_index_summary(self) -> None:
        # Best-effort rebuildable cache; never read back as authority,
        # and skipped entirely in no-sync (throwaway) mode.
        if not self.sync:
            return
        summary = {
            "log_lines": self._line_no,
            "entities": len(self.entities),
            "recipes": {
                "live": sum(1 for r in self.recipes.values() if r.status == STATUS_LIVE),
                "purged": sum(1 for r in self.recipes.values() if r.status == STATUS_PURGED),
            },
            "images": {
                "live": sum(1 for i in self.images.values() if i.status == STATUS_LIVE),
                "purged": sum(1 for i in self.images.values() if i.status == STATUS_PURGED),
            },
            "archives": len(self.archives),
        }
        try:
            (self.root / INDEX_DIR / "summary.json").write_text(
                json.dumps(summary, indent=2, sort_keys=True) + "\n"
            )
        except OSError:
            pass

    # ------------------------------------------------------------------
    # spec operations

    def add_entity(self, entity_id: str, public_key: PublicKey) -> TrustedEntity:
        if not entity_id or " " in entity_id or "/" in entity_id:
            raise SpockError(f"invalid entity id: {entity_id!r}")
        with self.exclusive():
            if entity_id in self.entities:
                raise DuplicateEntityError(f"entity already exists: {entity_id}")
            entity = TrustedEntity(
                entity_id=entity_id, public_key=public_key, added_at=clock.now_utc()
            )
            self.append(entity)
            (self.keys_root / f"{entity_id}.pem").write_text(public_key.to_pem())
        return entity

    def put_recipe(self, record: RecipeRecord) -> RecipeRecord:
        with self.exclusive():
            if record.signer_id not in self.entities:
                raise IntegrityError(f"unknown signer: {record.signer_id}")
            if record.recipe_hash in self.recipes:
                raise AlreadyRegisteredError(
                    f"recipe already recorded: {record.recipe_hash}"
                )
            if record.parent_image_id is not None and record.parent_image_id not in self.images:
                raise IntegrityError(f"unknown parent image: {record.parent_image_id}")
            if (record.kind == "child") != (record.parent_image_id is not None):
                raise IntegrityError("child recipes and only child recipes have a parent image")
            self.append(record)
        return record

    def put_image(self, record: ImageRecord) -> ImageRecord:
        with self.exclusive():
            if record.signer_id not in self.entities:
                raise IntegrityError(f"unknown signer: {record.signer_id}")
            recipe = self.recipes.get(record.recipe_hash)
            if recipe is None:
                raise IntegrityError(f"unknown recipe: {record.recipe_hash}")
            if record.parent_image_id != recipe.parent_image_id:
                raise IntegrityError("image parent does not mirror its recipe's parent")
            if record.image_id in self.images:
                raise IntegrityError(f"duplicate image id: {record.image_id}")
            live = self.live_image_for(record.recipe_hash)
            if live is not None:
                raise RebuildDeniedError(
                    f"a live image already exists for recipe {record.recipe_hash}: {live.image_id}"
                )
            self.append(record)
        return record

    # ------------------------------------------------------------------
    # queries

    def get_entity(self, entity_id: str) -> TrustedEntity:
        entity = self.entities.get(entity_id)
        if entity is None:
            raise NotFoundError(f"unknown entity: {entity_id}")
        return entity

    def get_recipe(self, recipe_hash: str) -> RecipeRecord:
        rec = self.recipes.get(recipe_hash)
        if rec is None:
            raise NotFoundError(f"unknown recipe: {recipe_hash}")
        return rec

    def get_image(self, image_id: str) -> ImageRecord:
        img = self.images.get(image_id)
        if img is None:
            raise NotFoundError(f"unknown image: {image_id}")
        return img

    def resolve(self, token: str) -> tuple[str, object]:
        """Resolve a recipe hash, image id, or unique prefix of either.

        Exact matches win; otherwise recipe-hash prefixes are tried before
        image-id prefixes, so the short labels printed by lineage and tree
        output always resolve.
        """
        if token in self.recipes:
            return "recipe", self.recipes[token]
        if token in self.images:
            return "image", self.images[token]
        recipe_matches = [h for h in self.recipes if h.startswith(token)]
        if len(recipe_matches) == 1:
            return "recipe", self.recipes[recipe_matches[0]]
        if len(recipe_matches) > 1:
            raise AmbiguousNodeError(
                f"ambiguous node {token!r}: matches {len(recipe_matches)} recipes"
            )
        image_matches = [i for i in self.images if i.startswith(token)]
        if len(image_matches) == 1:
            return "image", self.images[image_matches[0]]
        if len(image_matches) > 1:
            raise AmbiguousNodeError(
                f"ambiguous node {token!r}: matches {len(image_matches)} images"
            )
        raise NotFoundError(f"unknown node: {token}")

    def list_entities(self) -> list[TrustedEntity]:
        return sorted(self.entities.values(), key=lambda e: e.entity_id)

    def list_recipes(
        self,
        kind: str | None = None,
        status: str | None = None,
        signer: str | None = None,
    ) -> list[RecipeRecord]:
        out = []
        for rec in self.recipes.values():
            if kind is not None and rec.kind != kind:
                continue
            if status is not None and rec.status != status:
                continue
            if signer is not None and rec.signer_id != signer:
                continue
            out.append(rec)
        return out

    def list_images(
        self, status: str | None = None, signer: str | None = None
    ) -> list[ImageRecord]:
        out = []
        for img in self.images.values():
            if status is not None and img.status != status:
                continue
            if signer is not None and img.signer_id != signer:
                continue
            out.append(img)
        return out

    def images_of(self, recipe_hash: str) -> list[ImageRecord]:
        ids = self._images_by_recipe.get(recipe_hash, [])
        return [self.images[i] for i in ids]

    def live_image_for(self, recipe_hash: str) -> ImageRecord | None:
        for img in self.images_of(recipe_hash):
            if img.status == STATUS_LIVE:
                return img
        return None

    def child_recipes_of_image(self, image_id: str) -> list[RecipeRecord]:
        hashes = self._children_by_image.get(image_id, [])
        recs = [self.recipes[h] for h in hashes]
        recs.sort(key=lambda r: (r.registered_at, r.recipe_hash))
        return recs

    def allocate_image_id(self, recipe_hash: str, parent: ImageRecord | None) -> ImageId:
        """Pick a build timestamp that keeps image ids unique and children
        strictly later than their parents, bumping by whole seconds when
        the wall clock is not enough."""
        t = clock.now_utc()
        if parent is not None:
            earliest = parent.built_at + clock.SECOND
            if t < earliest:
                t = earliest
        while ImageId(t, recipe_hash).render() in self.images:
            t = t + clock.SECOND
        return ImageId(built_at=t, recipe_hash=recipe_hash)

    @property
    def tampered(self) -> bool:
        """True when replay found any corrupt or digest-mismatched line."""
        return any(i.check in ("parse", "record-digest", "duplicate") for i in self.issues)

    # ------------------------------------------------------------------
    # validation

    def validate_all(self, check_signatures: bool = True) -> ValidationReport:
        report = ValidationReport()
        add = report.entries.append
        for issue in self.issues:
            add(ValidationEntry(issue.ref, issue.check, False, issue.detail))

        flagged = {i.ref for i in self.issues}

        for entity in self.entities.values():
            ref = f"entity:{entity.entity_id}"
            key_ok = len(entity.public_key.raw) == 32
            add(ValidationEntry(ref, "key-material", key_ok, "" if key_ok else "bad key length"))
            if ref not in flagged:
                add(ValidationEntry(ref, "record-digest", True))

        for rec in self.recipes.values():
            ref = f"recipe:{rec.recipe_hash}"
            if ref not in flagged:
                add(ValidationEntry(ref, "record-digest", True))
            content_ok = crypto.digest(rec.content) == rec.recipe_hash
            add(
                ValidationEntry(
                    ref, "content-hash", content_ok,
                    "" if content_ok else "recipe hash does not match content",
                )
            )
            kind_ok = (rec.kind == "child") == (rec.parent_image_id is not None)
            add(ValidationEntry(ref, "kind-parent", kind_ok))
            signer = self.entities.get(rec.signer_id)
            if signer is None:
                add(ValidationEntry(ref, "signer-known", False, f"unknown signer {rec.signer_id}"))
            else:
                add(ValidationEntry(ref, "signer-known", True))
                if check_signatures:
                    sig_ok = (
                        rec.signature.signer_id == rec.signer_id
                        and crypto.verify(rec.content, rec.signature, signer.public_key)
                    )
                    add(
                        ValidationEntry(
                            ref, "signature", sig_ok,
                            "" if sig_ok else "signature does not verify",
                        )
                    )
                if rec.status == STATUS_LIVE and signer.status == STATUS_DISTRUSTED:
                    add(
                        ValidationEntry(
                            ref, "signer-trusted", False,
                            f"live recipe signed by distrusted entity {rec.signer_id}",
                        )
                    )
            if rec.parent_image_id is not None:
                parent_ok = rec.parent_image_id in self.images
                add(
                    ValidationEntry(
                        ref, "parent-known", parent_ok,
                        "" if parent_ok else f"unknown parent image {rec.parent_image_id}",
                    )
                )

        live_count: dict[str, int] = {}
        for img in self.images.values():
            ref = f"image:{img.image_id}"
            if ref not in flagged:
                add(ValidationEntry(ref, "record-digest", True))
            try:
                parsed = ImageId.parse(img.image_id)
                id_ok = parsed.recipe_hash == img.recipe_hash
            except SpockError:
                id_ok = False
            add(ValidationEntry(ref, "id-format", id_ok))
            recipe = self.recipes.get(img.recipe_hash)
            if recipe is None:
                add(ValidationEntry(ref, "recipe-known", False, f"unknown recipe {img.recipe_hash}"))
            else:
                add(ValidationEntry(ref, "recipe-known", True))
                mirror_ok = img.parent_image_id == recipe.parent_image_id
                add(ValidationEntry(ref, "parent-mirrors-recipe", mirror_ok))
            signer = self.entities.get(img.signer_id)
            if signer is None:
                add(ValidationEntry(ref, "signer-known", False, f"unknown signer {img.signer_id}"))
            else:
                add(ValidationEntry(ref, "signer-known", True))
                if check_signatures:
                    sig_ok = (
                        img.signature.signer_id == img.signer_id
                        and crypto.verify(img.signed_bytes(), img.signature, signer.public_key)
                    )
                    add(
                        ValidationEntry(
                            ref, "signature", sig_ok,
                            "" if sig_ok else "signature does not verify",
                        )
                    )
                if img.status == STATUS_LIVE and signer.status == STATUS_DISTRUSTED:
                    add(
                        ValidationEntry(
                            ref, "signer-trusted", False,
                            f"live image signed by distrusted entity {img.signer_id}",
                        )
                    )
            if img.parent_image_id is not None:
                parent = self.images.get(img.parent_image_id)
                if parent is None:
                    add(ValidationEntry(ref, "parent-known", False))
                else:
                    order_ok = img.built_at > parent.built_at
                    add(
                        ValidationEntry(
                            ref, "parent-earlier", order_ok,
                            "" if order_ok else "parent image is not strictly earlier",
                        )
                    )
            if img.status == STATUS_LIVE:
                live_count[img.recipe_hash] = live_count.get(img.recipe_hash, 0) + 1

        for recipe_hash, n in live_count.items():
            if n > 1:
                add(
                    ValidationEntry(
                        "ledger", "single-live-image", False,
                        f"{n} live images for recipe {recipe_hash}",
                    )
                )

        for i, event in enumerate(self.events):
            if event.event not in ("remove", "distrust"):
                continue
            ref = f"event:{event.event}:{i}"
            bundle_id = event.data.get("bundle_id", "")
            manifest_path = self.archive_root / bundle_id / "manifest.json"
            if not manifest_path.is_file():
                add(ValidationEntry(ref, "bundle-present", False, f"missing bundle {bundle_id}"))
                continue
            add(ValidationEntry(ref, "bundle-present", True))
            try:
                manifest = json.loads(manifest_path.read_text())
                body = {k: v for k, v in manifest.items() if k != "bundle_id"}
                recomputed = crypto.digest(canonical_json(body))
                bundle_ok = recomputed == bundle_id == manifest.get("bundle_id")
            except (OSError, ValueError):
                bundle_ok = False
            add(
                ValidationEntry(
                    ref, "bundle-manifest", bundle_ok,
                    "" if bundle_ok else f"manifest digest mismatch for bundle {bundle_id}",
                )
            )

        add(ValidationEntry("ledger", "parent-forest", not self._has_cycle()))
        return report

    def _has_cycle(self) -> bool:
        # Parent links point at earlier builds, so a cycle can only come
        # from a hand-crafted log; walk each chain defensively.
        for img in self.images.values():
            seen = set()
            cur: ImageRecord | None = img
            while cur is not None:
                if cur.image_id in seen:
                    return True
                seen.add(cur.image_id)
                cur = self.images.get(cur.parent_image_id) if cur.parent_image_id else None
        return False

    def check_integrity(self) -> list[str]:
        """Cheap structural check (no signature verification). Returns a
        list of violation descriptions, empty when consistent."""
        problems = [f"{i.ref}: {i.detail}" for i in self.issues]
        for rec in self.recipes.values():
            if rec.signer_id not in self.entities:
                problems.append(f"recipe:{rec.recipe_hash}: unknown signer")
            if rec.parent_image_id is not None and rec.parent_image_id not in self.images:
                problems.append(f"recipe:{rec.recipe_hash}: unknown parent image")
            if (rec.kind == "child") != (rec.parent_image_id is not None):
                problems.append(f"recipe:{rec.recipe_hash}: kind/parent mismatch")
        live: dict[str, list[str]] = {}
        for img in self.images.values():
            if img.recipe_hash not in self.recipes:
                problems.append(f"image:{img.image_id}: unknown recipe")
            if img.signer_id not in self.entities:
                problems.append(f"image:{img.image_id}: unknown signer")
            if img.status == STATUS_LIVE:
                live.setdefault(img.recipe_hash, []).append(img.image_id)
            if img.parent_image_id is not None:
                parent = self.images.get(img.parent_image_id)
                if parent is None:
                    problems.append(f"image:{img.image_id}: unknown parent image")
                elif img.built_at <= parent.built_at:
                    problems.append(f"image:{img.image_id}: not strictly later than parent")
        for recipe_hash, ids in live.items():
            if len(ids) > 1:
                problems.append(f"recipe:{recipe_hash}: {len(ids)} live images")
        if self._has_cycle():
            problems.append("ledger: parent cycle")
        return problems
