"""UTC time source and the two timestamp renderings used on disk.

All ledger timestamps have second resolution. Call sites go through this
module's :func:`now_utc` attribute so a fake clock can be swapped in.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

SECOND = timedelta(seconds=1)


def now_utc() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def iso(dt: datetime) -> str:
    """Extended ISO-8601, e.g. 2026-08-10T12:00:00Z."""
    return dt.astimezone(timezone.utc).replace(microsecond=0).strftime("%Y-%m-%dT%H:%M:%SZ")


def iso_basic(dt: datetime) -> str:
    """Basic ISO-8601, filesystem-safe, e.g. 20260810T120000Z."""
    return dt.astimezone(timezone.utc).replace(microsecond=0).strftime("%Y%m%dT%H%M%SZ")


def parse_iso(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def parse_iso_basic(text: str) -> datetime:
    return datetime.strptime(text, "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
