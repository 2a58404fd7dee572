"""
Utilities Module

Helper functions for hashing, timestamp parsing, and JSON encoding of run data.
"""

import hashlib
import json
from datetime import date, datetime, time, timezone
from pathlib import Path

# Classic Twitter API created_at, e.g. "Wed Mar 08 14:03:00 +0000 2020"
_TWITTER_TS_FORMAT = "%a %b %d %H:%M:%S %z %Y"


def sha256_file(filepath: Path, buf_size: int = 4 * 1024 * 1024) -> str:
    """Calculates the SHA-256 hash of a file efficiently using a reusable buffer."""
    sha256_hash = hashlib.sha256()
    with Path(filepath).open("rb", buffering=0) as f:
        buf = bytearray(buf_size)
        mv = memoryview(buf)
        while True:
            n = f.readinto(mv)
            if not n:
                break
            sha256_hash.update(mv[:n])
    return sha256_hash.hexdigest()


def parse_timestamp(value: str) -> datetime:
    """
    Parse an RFC 3339 or classic Twitter timestamp into an aware UTC datetime.

    Naive values are taken as UTC. Raises ValueError on anything else.
    """
    s = value.strip()
    if not s:
        raise ValueError("empty timestamp")
    if s[0].isdigit():
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        dt = datetime.fromisoformat(s)
    else:
        dt = datetime.strptime(s, _TWITTER_TS_FORMAT)
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def parse_range_bound(value: str, end_of_day: bool = False) -> datetime:
    """Parse a --from/--to value; a bare date for the upper bound covers the whole day."""
    s = value.strip()
    if len(s) == 10:
        d = date.fromisoformat(s)
        t = time.max if end_of_day else time.min
        return datetime.combine(d, t, tzinfo=timezone.utc)
    return parse_timestamp(s)


def fmt_utc(dt) -> str:
    """Return 'YYYY-mm-ddTHH:MM:SSZ' (or None)."""
    if dt is None:
        return None
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class RunEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, Path):
            return str(obj)
        if isinstance(obj, datetime):
            return fmt_utc(obj)
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        # numpy scalars
        if hasattr(obj, "item") and callable(obj.item):
            return obj.item()
        return super().default(obj)
