"""
Binary block containers with a JSON sidecar.

The payload is the concatenation of every block as little-endian raw bytes.
``<file>.json`` records each block's name, dtype, shape, offset and byte
length, the SHA-256 of the payload and any header fields (config hash, seed).
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from dcpkit.models.schemas import SCHEMA_VERSION
from dcpkit.utils.file_handlers.base import ArtifactHandler, ArtifactIntegrityError, BlockContainer
from dcpkit.utils.hashing import calculate_content_hash
from dcpkit.utils.logger import get_logger

logger = get_logger(__name__)


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_blocks(container: BlockContainer, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries: List[Dict[str, Any]] = []
    chunks: List[bytes] = []
    offset = 0
    for name, array in container.blocks.items():
        arr = np.ascontiguousarray(array)
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)

    payload = b"".join(chunks)
    path.write_bytes(payload)
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "blocks": entries,
        "sha256": calculate_content_hash(payload),
        "size": len(payload),
        **container.header,
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8")
    logger.debug(f"Wrote {len(entries)} block(s), {len(payload)} bytes to {path}")
    return path


def read_blocks(path: Path) -> BlockContainer:
    """
    Read a block container and verify it against its sidecar.

    Raises:
        ArtifactIntegrityError: On a missing sidecar, size or hash mismatch
    """
    path = Path(path)
    try:
        sidecar = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
        payload = path.read_bytes()
    except FileNotFoundError as e:
        raise ArtifactIntegrityError(f"Missing artifact or sidecar for {path}") from e
    except json.JSONDecodeError as e:
        raise ArtifactIntegrityError(f"Unreadable sidecar for {path}: {e}") from e

    intact = len(payload) == sidecar.get("size")
    if not intact or calculate_content_hash(payload) != sidecar.get("sha256"):
        raise ArtifactIntegrityError(f"Payload of {path} does not match its sidecar hash")

    blocks: Dict[str, np.ndarray] = {}
    for entry in sidecar["blocks"]:
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        values = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
        blocks[entry["name"]] = values.reshape(entry["shape"]).copy()

    reserved = ("blocks", "sha256", "size", "schema_version")
    header = {k: v for k, v in sidecar.items() if k not in reserved}
    return BlockContainer(blocks=blocks, header=header)


class BlockFileHandler(ArtifactHandler):
    """Feature containers: ``.feat`` for descriptor features, ``.mdml`` for MDML vectors."""

    suffixes = (".feat", ".mdml")

    def load(self, path: Path) -> BlockContainer:
        return read_blocks(path)

    def save(self, obj: BlockContainer, path: Path, **meta: Any) -> Path:
        return write_blocks(BlockContainer(obj.blocks, {**obj.header, **meta}), path)
