"""Content hashing helpers for configs, manifests and binary payloads."""

import hashlib
import json
from pathlib import Path
from typing import Any


def calculate_content_hash(content: bytes | str) -> str:
    """
    Calculate SHA-256 hash of content.

    Args:
        content: Text or raw bytes

    Returns:
        Hex digest of SHA-256 hash
    """
    if isinstance(content, str):
        content = content.encode("utf-8")
    return hashlib.sha256(content).hexdigest()


def canonical_json(payload: Any) -> str:
    """Serialize with sorted keys and no insignificant whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def hash_json(payload: Any) -> str:
    return calculate_content_hash(canonical_json(payload))


def hash_file(path: Path, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(chunk_size), b""):
            digest.update(block)
    return digest.hexdigest()
