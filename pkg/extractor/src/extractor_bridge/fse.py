"""FSE1 frame-file writing and independent verification.

Layout (little-endian): magic ``FSE1``, u32 version=1, u32 num_clips,
u32 dims, u8 source code (1 vggish, 2 openl3, 3 passt, 4 synthetic,
5 other followed by a u32-length-prefixed UTF-8 name), then per clip:
u32 id length, UTF-8 id, u32 num_frames, num_frames x dims float32
row-major. The verifier parses the bytes on its own, so it catches writer
bugs instead of mirroring them.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import VerificationError

VERSION = 1
SOURCE_CODES = {"vggish": 1, "openl3": 2, "passt": 3, "synthetic": 4}
CODE_SOURCES = {v: k for k, v in SOURCE_CODES.items()}
OTHER_CODE = 5


def _u32(v: int) -> bytes:
    return struct.pack("<I", v)


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _u32(len(raw)) + raw


def write_fse(path, source: str, dims: int, clips: list[tuple[str, np.ndarray]]) -> Path:
    """Write clip frame matrices in manifest order; atomic replace."""
    path = Path(path)
    buf = bytearray(b"FSE1")
    buf += _u32(VERSION)
    buf += _u32(len(clips))
    buf += _u32(dims)
    code = SOURCE_CODES.get(source)
    if code is None:
        buf += bytes([OTHER_CODE]) + _string(source)
    else:
        buf += bytes([code])
    for clip_id, frames in clips:
        frames = np.ascontiguousarray(frames, dtype="<f4")
        if frames.ndim != 2 or frames.shape[1] != dims or frames.shape[0] < 1:
            raise ValueError(f"clip {clip_id!r}: frames shape {frames.shape} invalid")
        buf += _string(clip_id)
        buf += _u32(frames.shape[0])
        buf += frames.tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(buf))
    os.replace(tmp, path)
    return path


class _Cursor:
    def __init__(self, data: bytes, name: str):
        self.data = data
        self.name = name
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise VerificationError(f"{self.name}: truncated", offset=self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def verify_fse(path) -> dict:
    """Re-read an FSE1 file and check magic, counts, dims and finiteness.

    Returns a report dict; raises VerificationError (with the first
    offending byte offset) on any violation.
    """
    path = Path(path)
    c = _Cursor(path.read_bytes(), str(path))
    if c.take(4) != b"FSE1":
        raise VerificationError(f"{path}: bad magic", offset=0)
    version = c.u32()
    if version != VERSION:
        raise VerificationError(f"{path}: unsupported version {version}", offset=4)
    num_clips = c.u32()
    at = c.pos
    dims = c.u32()
    if dims == 0:
        raise VerificationError(f"{path}: dims=0", offset=at)
    at = c.pos
    code = c.take(1)[0]
    if code in CODE_SOURCES:
        source = CODE_SOURCES[code]
    elif code == OTHER_CODE:
        n = c.u32()
        source = c.take(n).decode("utf-8")
    else:
        raise VerificationError(f"{path}: unknown source code {code}", offset=at)
    total_frames = 0
    clip_ids = []
    for _ in range(num_clips):
        at = c.pos
        id_len = c.u32()
        clip_ids.append(c.take(id_len).decode("utf-8", errors="replace"))
        at = c.pos
        num_frames = c.u32()
        if num_frames == 0:
            raise VerificationError(f"{path}: clip with zero frames", offset=at)
        payload_start = c.pos
        raw = c.take(num_frames * dims * 4)
        values = np.frombuffer(raw, dtype="<f4")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise VerificationError(
                f"{path}: non-finite value", offset=payload_start + int(bad[0]) * 4
            )
        total_frames += num_frames
    if c.pos != len(c.data):
        raise VerificationError(f"{path}: trailing bytes", offset=c.pos)
    return {
        "path": str(path),
        "source": source,
        "num_clips": num_clips,
        "dims": dims,
        "total_frames": total_frames,
        "clip_ids": clip_ids,
    }
