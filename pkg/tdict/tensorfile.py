"""
On-disk formats: TensorFile, metadata sidecars and PGM frame sequences.

TensorFile layout (little-endian):

    magic  b"TNS1"
    uint32 n1, n2, n3
    uint32 dtype code (1 = float64)
    n1*n2*n3 float64 values, frontal slice after frontal slice, each slice
    column-major (entry (i, j, k) at offset i + n1*j + n1*n2*k)
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from tdict.errors import InvalidTensor, ShapeMismatch, TensorFormatError, UnsupportedFormat

MAGIC = b"TNS1"
DTYPE_FLOAT64 = 1
HEADER_BYTES = len(MAGIC) + 4 * 4
META_SUFFIX = ".meta"


def write_tensor(path: str | Path, A: np.ndarray) -> Path:
    """Write a third-order array as a TensorFile; 2-D input gets n3 = 1."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 2:
        A = A[:, :, None]
    if A.ndim != 3:
        raise InvalidTensor(f"TensorFile holds third-order data, got shape {A.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([*A.shape, DTYPE_FLOAT64], dtype="<u4")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(header.tobytes())
        f.write(A.astype("<f8").ravel(order="F").tobytes())
    return path


def read_tensor(path: str | Path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_BYTES or raw[:4] != MAGIC:
        raise TensorFormatError(f"{path}: not a TensorFile (bad magic)")
    n1, n2, n3, code = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=4, offset=4))
    if code != DTYPE_FLOAT64:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    expected = n1 * n2 * n3 * 8
    payload = raw[HEADER_BYTES:]
    if len(payload) != expected:
        raise TensorFormatError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data.reshape((n1, n2, n3), order="F")


def metadata_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + META_SUFFIX)


def write_metadata(path: str | Path, meta: dict) -> Path:
    """Write `<path>.meta` as sorted key=value lines; None values are omitted."""
    lines = [f"{k}={_format_value(v)}" for k, v in sorted(meta.items()) if v is not None]
    out = metadata_path(path)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def read_metadata(path: str | Path) -> dict[str, str]:
    """Read the sidecar of `path`; values come back as strings."""
    meta_file = metadata_path(path)
    meta: dict[str, str] = {}
    for line in meta_file.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise TensorFormatError(f"{meta_file}: malformed line {line!r}")
        meta[key.strip()] = value.strip()
    return meta


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# PGM frame sequences


def read_pgm(path: str | Path) -> np.ndarray:
    """One binary (P5) 8-bit PGM as an H x W float array."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic != b"P5":
        raise UnsupportedFormat(f"{path}: only binary PGM (P5) is supported")
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise UnsupportedFormat(f"{path}: expected 8-bit grayscale, got mode {img.mode}")
            return np.asarray(img, dtype=np.float64)
    except UnidentifiedImageError as e:
        raise UnsupportedFormat(f"{path}: {e}") from e


def write_pgm(path: str | Path, frame: np.ndarray) -> Path:
    """Write an H x W frame as binary PGM, rounding and clipping to 0..255."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise InvalidTensor(f"PGM frame must be 2-D, got shape {frame.shape}")
    pixels = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PPM")
    return path


def import_volume(source: str | Path) -> np.ndarray:
    """Stack a directory of PGM frames (sorted by file name) into H x W x B."""
    source = Path(source)
    paths = sorted(p for p in source.iterdir() if p.suffix.lower() == ".pgm")
    if not paths:
        raise UnsupportedFormat(f"No .pgm files in {source}")
    frames = [read_pgm(p) for p in paths]
    shape = frames[0].shape
    for p, frame in zip(paths, frames):
        if frame.shape != shape:
            raise ShapeMismatch(f"{p.name} is {frame.shape}, expected {shape}")
    return np.stack(frames, axis=2)


def export_volume(V: np.ndarray, target: str | Path, prefix: str = "frame") -> list[Path]:
    """Write each band of V as `<prefix>_NNNN.pgm` under target."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 3:
        raise InvalidTensor(f"Volume must be H x W x B, got shape {V.shape}")
    target = Path(target)
    width = max(4, len(str(V.shape[2] - 1)))
    return [
        write_pgm(target / f"{prefix}_{b:0{width}d}.pgm", V[:, :, b])
        for b in range(V.shape[2])
    ]
