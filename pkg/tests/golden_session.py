"""Scripted end-to-end CLI session used by the acceptance suite.

Runs init -> trust -> root -> build -> child -> build -> remove ->
validate in a scratch directory with a frozen clock and the checked-in
fixture signing key, so the transcript is byte-for-byte reproducible.
"""

from __future__ import annotations

import shutil
from pathlib import Path

from spock import cli

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden" / "session.txt"

BASE_RECIPE = "FROM alpine:3.18\nRUN apk add --no-cache curl\nRUN adduser -D svc\n"
CHILD_STEP = "RUN echo service >> /etc/motd\n"


def session_commands(workdir: Path) -> list[list[str]]:
    """The fixed command list; child recipe content is derived from the
    deterministic image id produced by the frozen clock."""
    import spock.crypto as crypto

    root_hash = crypto.digest(BASE_RECIPE.encode())
    root_image_id = f"20260102T030405Z-{root_hash}"
    child_text = f"FROM trusted:{root_image_id}\n{CHILD_STEP}"
    child_hash = crypto.digest(child_text.encode())
    (workdir / "base.recipe").write_text(BASE_RECIPE)
    (workdir / "child.recipe").write_text(child_text)
    return [
        ["init"],
        ["trust", "add", "alice", "alice.pub"],
        ["root", "base.recipe"],
        ["build", root_hash],
        ["child", "child.recipe"],
        ["build", child_hash],
        ["remove", root_hash, "--reason", "compromised base image"],
        ["validate"],
    ]


def run_session(workdir: Path, capsys, json_mode: bool = False) -> list[tuple[list[str], str, int]]:
    """Execute the scripted session; returns (argv, stdout, exit_code)
    per command. Caller must have isolated env vars, chdir'd into
    ``workdir``, and frozen the clock."""
    shutil.copy(FIXTURES / "golden_signer.key.pub", workdir / "alice.pub")
    results = []
    for argv in session_commands(workdir):
        full = argv + ["--json"] if json_mode else argv
        capsys.readouterr()
        code = cli.main(full)
        out = capsys.readouterr().out
        results.append((argv, out, code))
    return results


def transcript(results: list[tuple[list[str], str, int]]) -> str:
    parts = []
    for argv, out, code in results:
        parts.append("$ spock " + " ".join(argv) + "\n")
        parts.append(out)
    return "".join(parts)


# JSON schemas for the --json outputs of the session commands, in
# session order. Documented in the README under "JSON output".
SIGNATURE_SCHEMA = {
    "type": "object",
    "required": ["algorithm", "signer_id", "value"],
    "properties": {
        "algorithm": {"type": "string"},
        "signer_id": {"type": "string"},
        "value": {"type": "string"},
    },
}

RECIPE_SCHEMA = {
    "type": "object",
    "required": [
        "record", "recipe_hash", "kind", "content", "signature",
        "signer_id", "parent_image_id", "registered_at", "status",
    ],
    "properties": {
        "record": {"const": "recipe"},
        "recipe_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "kind": {"enum": ["root", "child"]},
        "content": {"type": "string"},
        "signature": SIGNATURE_SCHEMA,
        "signer_id": {"type": "string"},
        "parent_image_id": {"type": ["string", "null"]},
        "registered_at": {"type": "string"},
        "status": {"enum": ["live", "purged"]},
    },
}

IMAGE_SCHEMA = {
    "type": "object",
    "required": [
        "record", "image_id", "recipe_hash", "parent_image_id",
        "image_digest", "step_digests", "signature", "signer_id", "status",
    ],
    "properties": {
        "record": {"const": "image"},
        "image_id": {"type": "string"},
        "recipe_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "parent_image_id": {"type": ["string", "null"]},
        "image_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "step_digests": {"type": "array", "items": {"type": "string"}},
        "signature": SIGNATURE_SCHEMA,
        "signer_id": {"type": "string"},
        "status": {"enum": ["live", "purged"]},
    },
}

REMOVE_SCHEMA = {
    "type": "object",
    "required": ["bundle_id", "reason", "purged_recipes", "purged_images"],
    "properties": {
        "bundle_id": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "reason": {"type": "string"},
        "purged_recipes": {"type": "array", "items": {"type": "string"}},
        "purged_images": {"type": "array", "items": {"type": "string"}},
    },
}

VALIDATE_SCHEMA = {
    "type": "object",
    "required": ["ok", "checked", "failures", "entries"],
    "properties": {
        "ok": {"type": "boolean"},
        "checked": {"type": "integer"},
        "failures": {"type": "integer"},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["ref", "check", "ok", "detail"],
            },
        },
    },
}

INIT_SCHEMA = {"type": "object", "required": ["ledger"]}

TRUST_ADD_SCHEMA = {
    "type": "object",
    "required": ["entity_id", "status"],
    "properties": {"status": {"const": "trusted"}},
}

SESSION_SCHEMAS = [
    INIT_SCHEMA,
    TRUST_ADD_SCHEMA,
    RECIPE_SCHEMA,
    IMAGE_SCHEMA,
    RECIPE_SCHEMA,
    IMAGE_SCHEMA,
    REMOVE_SCHEMA,
    VALIDATE_SCHEMA,
]
