"""FeatureBundle container and its on-disk format.

Layout::

    uint64 little-endian   manifest byte length
    manifest               UTF-8 text, one line per record
    zero padding           up to the next multiple of 8 bytes
    payload                little-endian float32 tensors, each 8-byte aligned

Manifest lines are either ``#key value`` metadata (``#format crnkit-bundle 1``
comes first, ``#task <kind>`` names the task) or tensor entries
``name dtype dim0,dim1,... offset`` with ``dtype`` always ``f32`` and
``offset`` counted from the payload start.
"""
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

import numpy as np

from ..errors import BundleFormatError

MAGIC = "crnkit-bundle 1"
DTYPE = "f32"
_LE_F32 = np.dtype("<f4")


def _align(n, to=8):
    return (n + to - 1) // to * to


@dataclass
class FeatureBundle:
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)
    task: str = ""
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def labels(self):
        return self.tensors["labels"]

    def __len__(self):
        return int(self.tensors["labels"].shape[0]) if "labels" in self.tensors else 0

    def __getitem__(self, name):
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def manifest(self):
        """List of (name, dtype, shape, offset) in payload order."""
        entries = []
        offset = 0
        for name, arr in self.tensors.items():
            entries.append((name, DTYPE, tuple(arr.shape), offset))
            offset = _align(offset + arr.size * 4)
        return entries


def _check_name(name):
    if not name or any(ch.isspace() for ch in name) or name.startswith("#"):
        raise BundleFormatError("tensor names must be non-empty, unspaced and not start with '#'", name)


def save_feature_bundle(bundle, path):
    lines = [f"#format {MAGIC}"]
    if bundle.task:
        lines.append(f"#task {bundle.task}")
    for key, value in bundle.meta.items():
        if any(ch.isspace() for ch in str(key)) or "\n" in str(value):
            raise BundleFormatError("metadata keys must be unspaced and values single-line", key)
        lines.append(f"#{key} {value}")
    entries = bundle.manifest()
    for name, dtype, shape, offset in entries:
        _check_name(name)
        if len(shape) == 0:
            raise BundleFormatError("scalar tensors are not supported", name)
        dims = ",".join(str(s) for s in shape)
        lines.append(f"{name} {dtype} {dims} {offset}")
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    header_len = 8 + len(manifest)
    pad = _align(header_len) - header_len
    chunks = [struct.pack("<Q", len(manifest)), manifest, b"\0" * pad]
    written = 0
    for (name, _, _, offset), arr in zip(entries, bundle.tensors.values()):
        if offset > written:
            chunks.append(b"\0" * (offset - written))
            written = offset
        raw = np.ascontiguousarray(arr, dtype=_LE_F32).tobytes()
        chunks.append(raw)
        written += len(raw)
    tail = _align(written) - written
    chunks.append(b"\0" * tail)
    Path(path).write_bytes(b"".join(chunks))


def _parse_manifest(text):
    lines = text.split("\n")
    if not lines or lines[0] != f"#format {MAGIC}":
        raise BundleFormatError(f"missing '#format {MAGIC}' header")
    task, meta, entries, seen = "", {}, [], set()
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            if key == "task":
                task = value
            else:
                meta[key] = value
            continue
        parts = line.split(" ")
        name = parts[0]
        if len(parts) != 4:
            raise BundleFormatError("manifest entry needs 'name dtype dims offset'", name)
        if name in seen:
            raise BundleFormatError("duplicate tensor name", name)
        seen.add(name)
        _, dtype, dims, offset = parts
        if dtype != DTYPE:
            raise BundleFormatError(f"unsupported dtype {dtype!r}", name)
        try:
            shape = tuple(int(s) for s in dims.split(","))
            offset = int(offset)
        except ValueError as exc:
            raise BundleFormatError("malformed shape or offset", name) from exc
        if any(s < 0 for s in shape) or offset < 0 or offset % 8:
            raise BundleFormatError("negative extent or misaligned offset", name)
        entries.append((name, shape, offset))
    return task, meta, entries


def load_feature_bundle(path):
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise BundleFormatError("file shorter than the length prefix")
    (mlen,) = struct.unpack("<Q", blob[:8])
    if 8 + mlen > len(blob):
        raise BundleFormatError("manifest length exceeds file size")
    try:
        text = blob[8 : 8 + mlen].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BundleFormatError("manifest is not UTF-8") from exc
    task, meta, entries = _parse_manifest(text)
    payload = memoryview(blob)[_align(8 + mlen) :]
    tensors = {}
    for name, shape, offset in entries:
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(payload):
            raise BundleFormatError(
                f"payload truncated: needs bytes [{offset}, {end}) of {len(payload)}", name
            )
        arr = np.frombuffer(payload[offset:end], dtype=_LE_F32).reshape(shape)
        tensors[name] = arr.astype(np.float32)
    return FeatureBundle(tensors=tensors, task=task, meta=meta)


def manifest_lines(path):
    """Raw manifest text of a bundle file, one entry per line (for inspection)."""
    blob = Path(path).read_bytes()
    (mlen,) = struct.unpack("<Q", blob[:8])
    return blob[8 : 8 + mlen].decode("utf-8").rstrip("\n").split("\n")
