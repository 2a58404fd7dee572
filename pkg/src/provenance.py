"""
Run Provenance Log Module

Append-only log recording, for one run directory, the hashes of ingested inputs,
every artifact written, stage completions and the final status. Each entry
carries a hash chain (entry_hash) so any later modification of the log or of a
recorded artifact can be detected. Entries hold no wall-clock time, so identical
runs produce identical logs.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from .utils import sha256_file

PROVENANCE_FILENAME = "provenance.jsonl"

# Genesis hash for first entry in chain
_PROVENANCE_GENESIS = hashlib.sha256(b"MentionNet provenance log v1").hexdigest()

# Actions that can be recorded
ACTION_INGEST = "INGEST"
ACTION_ARTIFACT = "ARTIFACT"
ACTION_STAGE = "STAGE"
ACTION_RUN_COMPLETE = "RUN_COMPLETE"
ACTION_RUN_FAILED = "RUN_FAILED"


def _canonical_entry(entry: dict) -> str:
    """Canonical JSON for hashing (exclude entry_hash, sort keys)."""
    out = {k: v for k, v in entry.items() if k != "entry_hash"}
    return json.dumps(out, sort_keys=True, ensure_ascii=False)


class ProvenanceLog:
    """Hash-chained JSONL log bound to one run directory."""

    def __init__(self, run_dir: Path, filename: str = PROVENANCE_FILENAME):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / filename
        self._seq = 0
        self._prev_hash = _PROVENANCE_GENESIS

    def reset(self) -> None:
        """Start a fresh log (a rerun into the same directory replaces the old one)."""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self._seq = 0
        self._prev_hash = _PROVENANCE_GENESIS

    def append(self, action: str, item: Optional[str] = None, file_hash: Optional[str] = None,
               details: Optional[dict] = None) -> dict:
        self._seq += 1
        entry = {
            "seq": self._seq,
            "action": action,
            "item": item,
            "sha256": file_hash,
            "details": details or {},
        }
        entry["entry_hash"] = hashlib.sha256(
            (self._prev_hash + _canonical_entry(entry)).encode("utf-8")
        ).hexdigest()
        self._prev_hash = entry["entry_hash"]
        with open(self.path, "a", encoding="utf-8", newline="") as f:
            f.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
        logging.debug(f"Provenance: {action} {item or ''}")
        return entry

    def log_input(self, path: Path) -> None:
        """Inputs are recorded by name and content hash, not by absolute path."""
        path = Path(path)
        self.append(ACTION_INGEST, item=path.name, file_hash=sha256_file(path))

    def log_artifact(self, path: Path, stage: str) -> None:
        path = Path(path)
        self.append(
            ACTION_ARTIFACT,
            item=path.relative_to(self.run_dir).as_posix() if path.is_relative_to(self.run_dir) else path.name,
            file_hash=sha256_file(path),
            details={"stage": stage},
        )

    def log_stage(self, stage: str, details: Optional[dict] = None) -> None:
        self.append(ACTION_STAGE, item=stage, details=details)


def read_and_verify_provenance(log_path: Path) -> Tuple[List[dict], bool, Optional[int], str]:
    """
    Read a provenance log and verify its hash chain and the recorded artifact hashes.

    Returns:
        (entries, valid, first_bad_line, message)
    """
    log_path = Path(log_path)
    if not log_path.exists():
        return [], True, None, "No provenance log found."
    try:
        lines = [ln for ln in log_path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as e:
        return [], False, None, f"Could not read log: {e}"
    entries = []
    prev_hash = _PROVENANCE_GENESIS
    for i, line in enumerate(lines, start=1):
        try:
            entry = json.loads(line)
        except json.JSONDecodeError:
            return entries, False, i, f"Tampering or corruption at line {i} (invalid JSON)."
        expected = hashlib.sha256((prev_hash + _canonical_entry(entry)).encode("utf-8")).hexdigest()
        if entry.get("entry_hash") != expected:
            return entries, False, i, f"Tampering detected at line {i}. Log integrity compromised."
        if entry.get("action") == ACTION_ARTIFACT:
            artifact = log_path.parent / entry["item"]
            if not artifact.exists() or sha256_file(artifact) != entry.get("sha256"):
                return entries, False, i, f"Artifact {entry['item']} changed after it was recorded (line {i})."
        prev_hash = expected
        entries.append(entry)
    if not entries:
        return [], True, None, "Log file is empty."
    return entries, True, None, "Integrity verified. Hash chain intact."
