"""Minimal RIFF/WAVE reader and writer.

Supports what the toolkit needs and nothing more: PCM 16-bit, PCM 24-bit
and IEEE float 32-bit, 1-2 channels (reading tolerates up to 5 for the
weighted meter layouts).  Integer PCM maps to real samples by division
by 2^(bits-1).  All writes are 24-bit PCM to preserve rendering headroom.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .loudness import AudioClip


class UnreadableFile(Exception):
    """The file is not a WAV this toolkit can decode."""


def read_wav(path: str | Path) -> AudioClip:
    """Read a WAV file into an AudioClip with samples scaled to +-1.0 full scale."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise UnreadableFile(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or data is None:
        raise UnreadableFile(f"{path}: missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_format == 0xFFFE and len(fmt) >= 26:  # WAVE_FORMAT_EXTENSIBLE
        (audio_format,) = struct.unpack_from("<H", fmt, 24)
    if n_channels < 1 or n_channels > 5:
        raise UnreadableFile(f"{path}: unsupported channel count {n_channels}")

    if audio_format == 1 and bits == 16:
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 1 and bits == 24:
        frames = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
        ints = (
            frames[:, 0].astype(np.int32)
            | (frames[:, 1].astype(np.int32) << 8)
            | (frames[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        flat = ints.astype(np.float64) / float(1 << 23)
    elif audio_format == 3 and bits == 32:
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnreadableFile(f"{path}: unsupported format (fmt={audio_format}, bits={bits})")

    n_frames = flat.size // n_channels
    channels = flat[: n_frames * n_channels].reshape(n_frames, n_channels).T
    return AudioClip(sample_rate=sample_rate, samples=channels)


def write_wav(path: str | Path, clip: AudioClip, *, bits: int = 24) -> None:
    """Write an AudioClip as little-endian PCM (24-bit default, 16 for fixtures)
    or 32-bit float.  Values beyond +-1.0 are clipped by integer formats only."""
    frames = np.ascontiguousarray(clip.samples.T)
    n_frames, n_channels = frames.shape
    if bits == 24:
        ints = np.clip(np.round(frames * float(1 << 23)), -(1 << 23), (1 << 23) - 1).astype(np.int32)
        flat = ints.reshape(-1)
        body = np.empty((flat.size, 3), dtype=np.uint8)
        body[:, 0] = flat & 0xFF
        body[:, 1] = (flat >> 8) & 0xFF
        body[:, 2] = (flat >> 16) & 0xFF
        data = body.tobytes()
        audio_format = 1
    elif bits == 16:
        ints = np.clip(np.round(frames * 32768.0), -32768, 32767).astype("<i2")
        data = ints.tobytes()
        audio_format = 1
    elif bits == 32:
        data = frames.astype("<f4").tobytes()
        audio_format = 3
    else:
        raise ValueError(f"unsupported bit depth {bits}")

    byte_rate = clip.sample_rate * n_channels * bits // 8
    block_align = n_channels * bits // 8
    fmt = struct.pack("<HHIIHH", audio_format, n_channels, clip.sample_rate, byte_rate, block_align, bits)
    riff_size = 4 + 8 + len(fmt) + 8 + len(data)
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", riff_size) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
        fh.write(b"data" + struct.pack("<I", len(data)) + data)
        if len(data) & 1:
            fh.write(b"\x00")
