from __future__ import annotations

import hashlib
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

import spock.clock
from spock import Ledger, MockEngine, builder, crypto, recipe

FIXTURES = Path(__file__).parent / "fixtures"

ROOT_TEXT = "FROM alpine:3.18\nRUN echo hello\nRUN echo world\n"


class FakeClock:
    """Steppable UTC clock for deterministic builds and golden output."""

    def __init__(self, start: str = "2026-01-02T03:04:05Z"):
        self.now = datetime.strptime(start, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        return self.now

    def tick(self, seconds: int = 1) -> None:
        self.now += timedelta(seconds=seconds)


@pytest.fixture
def fake_clock(monkeypatch) -> FakeClock:
    fake = FakeClock()
    monkeypatch.setattr(spock.clock, "now_utc", fake)
    return fake


@pytest.fixture(scope="session")
def keypair():
    return crypto.keygen()


@pytest.fixture(scope="session")
def second_keypair():
    return crypto.keygen()


@pytest.fixture
def fresh_ledger(tmp_path) -> Ledger:
    return Ledger.init(tmp_path / "ledger", sync=False)


@pytest.fixture
def trusted_ledger(fresh_ledger, keypair):
    """Ledger with one trusted entity 'alice'; yields (ledger, signer, key)."""
    public, private = keypair
    fresh_ledger.add_entity("alice", public)
    return fresh_ledger, "alice", private


def craft_text(base: str, want_prefix: str, taken_first_chars: set[str]) -> str:
    """Append a nonce comment until the content hash starts with
    ``want_prefix`` and its first character collides with nothing in
    ``taken_first_chars``."""
    n = 0
    while True:
        text = f"{base}# nonce {n}\n"
        h = hashlib.sha256(text.encode()).hexdigest()
        if h.startswith(want_prefix) and h[0] not in taken_first_chars:
            return text
        n += 1


@pytest.fixture
def fig_tree(trusted_ledger):
    """Three-node chain whose short labels are 5 -> 3 -> 1.

    Recipe contents are nonce-tuned so the root hash starts with '5',
    its child with '3', and the grandchild with '1', making the one
    character prefixes unique labels.
    """
    ledger, signer, private = trusted_ledger
    engine = MockEngine(seed="fig")

    taken: set[str] = set()
    root_text = craft_text("FROM alpine:3.18\nRUN echo base\n", "5", taken)
    root = recipe.register_root(ledger, root_text, signer, private)
    taken.add(root.recipe_hash[0])
    root_image = builder.build(ledger, root.recipe_hash, engine, signer, private)

    mid_text = craft_text(
        f"FROM trusted:{root_image.image_id}\nRUN echo middle\n", "3", taken
    )
    mid = recipe.register_child(ledger, mid_text, signer, private)
    taken.add(mid.recipe_hash[0])
    mid_image = builder.build(ledger, mid.recipe_hash, engine, signer, private)

    leaf_text = craft_text(
        f"FROM trusted:{mid_image.image_id}\nRUN echo leaf\n", "1", taken
    )
    leaf = recipe.register_child(ledger, leaf_text, signer, private)
    leaf_image = builder.build(ledger, leaf.recipe_hash, engine, signer, private)

    return {
        "ledger": ledger,
        "signer": signer,
        "private": private,
        "engine": engine,
        "root": root,
        "root_image": root_image,
        "mid": mid,
        "mid_image": mid_image,
        "leaf": leaf,
        "leaf_image": leaf_image,
    }


def register_and_build(ledger, text, signer, private, seed="0"):
    rec = recipe.register_root(ledger, text, signer, private)
    image = builder.build(ledger, rec.recipe_hash, MockEngine(seed=seed), signer, private)
    return rec, image
