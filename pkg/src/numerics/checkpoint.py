"""
Parameter checkpoints.

Binary layout: magic b"DDCK", u32 version, u32 tensor count, then for every
tensor u32 ndim followed by ndim u32 dims, then all tensors' float64 data
little-endian in declaration order. Names and model metadata live in a JSON
manifest next to the binary file (same stem, .json suffix).
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import structlog

from src.errors import CheckpointError

logger = structlog.get_logger()

MAGIC = b"DDCK"
VERSION = 1


def manifest_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix('.json')


def encode_params(arrays: List[np.ndarray]) -> bytes:
    header = [MAGIC, struct.pack('<II', VERSION, len(arrays))]
    for array in arrays:
        header.append(struct.pack('<I', array.ndim))
        header.append(struct.pack(f'<{array.ndim}I', *array.shape))
    body = [np.ascontiguousarray(a, dtype='<f8').tobytes() for a in arrays]
    return b"".join(header + body)


def decode_params(blob: bytes) -> List[np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError("Not a parameter checkpoint (bad magic)")
    try:
        version, count = struct.unpack_from('<II', blob, 4)
        if version != VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version}")
        offset = 12
        shapes: List[Tuple[int, ...]] = []
        for _ in range(count):
            (ndim,) = struct.unpack_from('<I', blob, offset)
            offset += 4
            shapes.append(struct.unpack_from(f'<{ndim}I', blob, offset))
            offset += 4 * ndim
        arrays = []
        for shape in shapes:
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(blob, dtype='<f8', count=size, offset=offset)
            arrays.append(data.astype(np.float64).reshape(shape))
            offset += 8 * size
    except (struct.error, ValueError) as e:
        raise CheckpointError(f"Truncated or corrupt checkpoint: {e}") from e
    if offset != len(blob):
        raise CheckpointError(f"Checkpoint has {len(blob) - offset} trailing bytes")
    return arrays


def save_checkpoint(path: Union[str, Path], params: Mapping[str, np.ndarray],
                    manifest: Optional[Dict[str, Any]] = None) -> Path:
    """Write the binary parameters plus the manifest; returns the binary path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(params.keys())
    path.write_bytes(encode_params([np.asarray(params[n]) for n in names]))
    document = dict(manifest or {})
    document['names'] = names
    with open(manifest_path(path), 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True)
    logger.info("Checkpoint saved", path=str(path), tensors=len(names))
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read (params by name, manifest)"""
    path = Path(path)
    try:
        blob = path.read_bytes()
        with open(manifest_path(path), 'r') as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    arrays = decode_params(blob)
    names = manifest.get('names', [])
    if len(names) != len(arrays):
        raise CheckpointError(f"Manifest names {len(names)} tensors, checkpoint holds {len(arrays)}")
    return dict(zip(names, arrays)), manifest
