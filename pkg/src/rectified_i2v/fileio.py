"""On-disk formats: VLT1 latent tensors, binary PGM frames, atomic writes.

VLT1 layout::

    VLT1 L D C H W\\n
    <L*D little-endian float32, frame-major>
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .schedule import VideoLatent

VLT1_MAGIC = "VLT1"


def atomic_write_bytes(path, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def vlt1_bytes(video: VideoLatent) -> bytes:
    C, H, W = video.dims
    header = f"{VLT1_MAGIC} {video.L} {video.D} {C} {H} {W}\n".encode("ascii")
    return header + video.data.astype("<f4").tobytes(order="C")


def write_vlt1(path, video: VideoLatent) -> Path:
    return atomic_write_bytes(path, vlt1_bytes(video))


def parse_vlt1(payload: bytes) -> VideoLatent:
    newline = payload.find(b"\n")
    if newline < 0:
        raise FormatError("VLT1: missing header line")
    try:
        fields = payload[:newline].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FormatError("VLT1: header is not ASCII") from exc
    if len(fields) != 6 or fields[0] != VLT1_MAGIC:
        raise FormatError(f"VLT1: bad header {payload[:newline]!r}")
    try:
        L, D, C, H, W = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise FormatError(f"VLT1: non-integer header field in {fields}") from exc
    if min(L, D, C, H, W) < 1 or C * H * W != D:
        raise FormatError(f"VLT1: inconsistent header L={L} D={D} dims={(C, H, W)}")
    body = payload[newline + 1:]
    if len(body) != 4 * L * D:
        raise FormatError(f"VLT1: expected {4 * L * D} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(L, D)
    return VideoLatent(data, (C, H, W))


def read_vlt1(path) -> VideoLatent:
    return parse_vlt1(Path(path).read_bytes())


def sha256_hex(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def pgm_bytes(image: np.ndarray) -> bytes:
    """Binary (P5) 8-bit PGM for a 2-D uint8 array."""
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ShapeError("PGM export needs a 2-D uint8 array")
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + image.tobytes(order="C")


def read_pgm(path) -> np.ndarray:
    payload = Path(path).read_bytes()
    parts = payload.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5" or parts[3] != b"255":
        raise FormatError(f"{path}: not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    pixels = np.frombuffer(parts[4], dtype=np.uint8)
    if pixels.size != w * h:
        raise FormatError(f"{path}: truncated pixel data")
    return pixels.reshape(h, w)


def video_to_pgm_frames(video: VideoLatent, scale: int = 1) -> list[bytes]:
    """Quantize a single-channel video to 8-bit frames.

    Normalization is min-max over the whole video so that frame-to-frame
    brightness changes reflect the latents rather than per-frame rescaling.
    """
    C, H, W = video.dims
    if C != 1:
        raise ShapeError(f"PGM export supports single-channel latents only, got C={C}")
    if scale < 1:
        raise ShapeError(f"scale must be >= 1, got {scale}")
    lo, hi = float(video.data.min()), float(video.data.max())
    span = hi - lo
    if span > 0:
        norm = (video.data - lo) / span
    else:
        norm = np.zeros_like(video.data)
    pixels = np.rint(norm * 255.0).astype(np.uint8).reshape(video.L, H, W)
    frames = []
    for img in pixels:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
        frames.append(pgm_bytes(img))
    return frames


def write_pgm_frames(video: VideoLatent, out_dir, scale: int = 1) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for i, payload in enumerate(video_to_pgm_frames(video, scale)):
        paths.append(atomic_write_bytes(out_dir / f"frame_{i:03d}.pgm", payload))
    return paths
