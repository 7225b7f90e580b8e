"""External file formats: WAV audio, MSK1 mask tensors, key=value run configs.

All readers fail with a typed error naming the byte offset (binary formats)
or line number (config files) instead of propagating parser internals, and
all writers are atomic (temp file plus rename).

MSK1 layout, little-endian throughout:

    bytes 0..3    magic "MSK1"
    bytes 4..5    version, u16, currently 1
    bytes 6..7    rank, u16, 2 or 3
    next rank*4   dims as u32: (F, T) for rank 2, (K, F, T) for rank 3
    rest          float32 payload, row major with K outermost

Payload values must lie in [0, 1]. A rank-3 file is read back as K separate
[F, T] masks (per-channel stacks or per-component sets).
"""

from __future__ import annotations

import math
import os
import struct
import warnings

import numpy as np

from .errors import AudioFormatError, ConfigError, MaskFormatError
from .pipeline import PipelineConfig
from .spectral import AudioBuffer

__all__ = [
    "read_wav",
    "write_wav",
    "read_mask",
    "write_mask",
    "parse_config",
    "load_config",
]

_WAVE_PCM = 0x0001
_WAVE_FLOAT = 0x0003
_WAVE_EXTENSIBLE = 0xFFFE


def _atomic_write(path: str, blob: bytes) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "wb") as handle:
            handle.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float data.

    Integer samples are normalized to [-1, 1] by dividing by 32768; channel
    count and sample rate are preserved.
    """
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < 12:
        raise AudioFormatError("byte 0: file too short for a RIFF header")
    if raw[0:4] != b"RIFF":
        raise AudioFormatError("byte 0: not a RIFF file")
    if raw[8:12] != b"WAVE":
        raise AudioFormatError("byte 8: RIFF form is not WAVE")

    fmt_body = None
    data_offset = None
    data_body = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4 : pos + 8])
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise AudioFormatError(
                f"byte {pos + 8}: chunk {chunk_id!r} claims {size} bytes but "
                f"only {len(body)} remain"
            )
        if chunk_id == b"fmt " and fmt_body is None:
            fmt_body = (pos + 8, body)
        elif chunk_id == b"data" and data_body is None:
            data_offset = pos + 8
            data_body = body
        pos += 8 + size + (size & 1)

    if fmt_body is None:
        raise AudioFormatError("byte 12: no fmt chunk found")
    if data_body is None:
        raise AudioFormatError("byte 12: no data chunk found")

    fmt_offset, fmt = fmt_body
    if len(fmt) < 16:
        raise AudioFormatError(f"byte {fmt_offset}: fmt chunk shorter than 16 bytes")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _WAVE_EXTENSIBLE:
        if len(fmt) < 26:
            raise AudioFormatError(f"byte {fmt_offset}: extensible fmt chunk truncated")
        (tag,) = struct.unpack("<H", fmt[24:26])
    if channels < 1:
        raise AudioFormatError(f"byte {fmt_offset + 2}: channel count must be positive")
    if rate <= 0:
        raise AudioFormatError(f"byte {fmt_offset + 4}: sample rate must be positive")
    if tag == _WAVE_PCM:
        if bits != 16:
            raise AudioFormatError(
                f"byte {fmt_offset + 14}: only 16-bit PCM is supported, got {bits}-bit"
            )
        dtype, scale = "<i2", 32768.0
    elif tag == _WAVE_FLOAT:
        if bits != 32:
            raise AudioFormatError(
                f"byte {fmt_offset + 14}: only 32-bit float is supported, got {bits}-bit"
            )
        dtype, scale = "<f4", 1.0
    else:
        raise AudioFormatError(f"byte {fmt_offset}: unsupported codec tag 0x{tag:04x}")

    frame_bytes = channels * bits // 8
    if block_align not in (0, frame_bytes):
        raise AudioFormatError(
            f"byte {fmt_offset + 12}: block alignment {block_align} does not match "
            f"{frame_bytes}-byte frames"
        )
    if len(data_body) % frame_bytes:
        raise AudioFormatError(
            f"byte {data_offset}: payload of {len(data_body)} bytes is not a whole "
            f"number of {frame_bytes}-byte frames"
        )
    values = np.frombuffer(data_body, dtype=dtype).reshape(-1, channels)
    samples = np.ascontiguousarray(values.T).astype(np.float64) / scale
    return AudioBuffer(samples, int(rate))


def write_wav(path, audio: AudioBuffer, codec: str = "float32") -> None:
    """Write a RIFF/WAVE file readable by :func:`read_wav`.

    Samples outside [-1, 1] are clipped; a warning reports how many.
    """
    if codec not in ("pcm16", "float32"):
        raise ValueError(f"codec must be pcm16 or float32, got {codec!r}")
    samples = audio.samples
    if not np.isfinite(samples).all():
        raise ValueError("cannot write non-finite samples")
    clipped = int(np.count_nonzero((samples > 1.0) | (samples < -1.0)))
    if clipped:
        warnings.warn(f"write_wav: clipped {clipped} samples outside [-1, 1]", stacklevel=2)
        samples = np.clip(samples, -1.0, 1.0)

    interleaved = np.ascontiguousarray(samples.T)
    if codec == "pcm16":
        tag, bits = _WAVE_PCM, 16
        payload = np.clip(np.round(interleaved * 32768.0), -32768, 32767).astype("<i2").tobytes()
    else:
        tag, bits = _WAVE_FLOAT, 32
        payload = interleaved.astype("<f4").tobytes()

    channels = audio.num_channels
    frame_bytes = channels * bits // 8
    fmt = struct.pack(
        "<HHIIHH", tag, channels, audio.sample_rate, audio.sample_rate * frame_bytes,
        frame_bytes, bits,
    )
    chunks = [b"fmt ", struct.pack("<I", len(fmt)), fmt]
    if codec == "float32":
        chunks += [b"fact", struct.pack("<I", 4), struct.pack("<I", audio.num_samples)]
    chunks += [b"data", struct.pack("<I", len(payload)), payload]
    if len(payload) & 1:
        chunks.append(b"\x00")
    body = b"".join(chunks)
    blob = b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body
    _atomic_write(os.fspath(path), blob)


def read_mask(path):
    """Read an MSK1 file: a single [F, T] mask (rank 2) or a list (rank 3)."""
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < 8:
        raise MaskFormatError("byte 0: file too short for an MSK1 header")
    if raw[0:4] != b"MSK1":
        raise MaskFormatError(f"byte 0: bad magic {raw[0:4]!r}, expected b'MSK1'")
    (version,) = struct.unpack("<H", raw[4:6])
    if version != 1:
        raise MaskFormatError(f"byte 4: unsupported version {version}")
    (rank,) = struct.unpack("<H", raw[6:8])
    if rank not in (2, 3):
        raise MaskFormatError(f"byte 6: rank must be 2 or 3, got {rank}")
    header_end = 8 + 4 * rank
    if len(raw) < header_end:
        raise MaskFormatError("byte 8: truncated dimension list")
    dims = struct.unpack(f"<{rank}I", raw[8:header_end])
    for axis, dim in enumerate(dims):
        if dim == 0:
            raise MaskFormatError(f"byte {8 + 4 * axis}: dimension {axis} is zero")
    expected = 4 * math.prod(dims)
    actual = len(raw) - header_end
    if actual != expected:
        raise MaskFormatError(
            f"byte {header_end}: payload is {actual} bytes, expected {expected} "
            f"for dims {dims}"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=header_end).astype(np.float64)
    bad = ~np.isfinite(values) | (values < 0.0) | (values > 1.0)
    if bad.any():
        index = int(np.argmax(bad))
        raise MaskFormatError(
            f"byte {header_end + 4 * index}: value {values[index]!r} outside [0, 1]"
        )
    tensor = values.reshape(dims)
    if rank == 2:
        return tensor
    return [tensor[k] for k in range(dims[0])]


def write_mask(path, masks) -> None:
    """Write an MSK1 file; a single array gives rank 2, a sequence rank 3."""
    if isinstance(masks, np.ndarray):
        stack = np.asarray(masks, dtype=np.float64)
        if stack.ndim != 2:
            raise ValueError("a single mask must be 2-D [bins, frames]")
        rank, dims = 2, stack.shape
    else:
        layers = [np.asarray(m, dtype=np.float64) for m in masks]
        if not layers or any(m.ndim != 2 or m.shape != layers[0].shape for m in layers):
            raise ValueError("mask sequence must hold 2-D arrays of one shape")
        stack = np.stack(layers)
        rank, dims = 3, stack.shape
    if not np.isfinite(stack).all() or stack.min() < 0.0 or stack.max() > 1.0:
        raise ValueError("mask values must be finite and lie in [0, 1]")
    header = b"MSK1" + struct.pack("<HH", 1, rank) + struct.pack(f"<{rank}I", *dims)
    _atomic_write(os.fspath(path), header + stack.astype("<f4").tobytes())


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_later_ss(text: str) -> str:
    aliases = {"input": "input-mask", "post-em": "post-em-mask"}
    value = text.strip()
    return aliases.get(value, value)


_CONFIG_FIELDS = {
    "beamformer": ("beamformer", str.strip),
    "prior": ("prior", _parse_bool),
    "early_se": ("early_se", _parse_bool),
    "early_ss": ("early_ss", _parse_bool),
    "later_ss": ("later_ss", _parse_later_ss),
    "mvdr_mask": ("mvdr_mask", str.strip),
    "block_frames": ("block_frames", int),
    "iterations": ("iterations", int),
    "loading": ("loading", float),
    "reference_channel": ("reference_channel", int),
    "channel_reduce": ("channel_reduce", str.strip),
    "target_mask": ("target_mask", str.strip),
    "interference_mask": ("interference_mask", str.strip),
    "noise_mask": ("noise_mask", str.strip),
    "se_mask": ("se_mask", str.strip),
}


def parse_config(text: str) -> PipelineConfig:
    """Parse key=value lines ('#' comments) without cross-field validation.

    Used by the CLI, which merges flag overrides before validating.
    """
    config = PipelineConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser = _CONFIG_FIELDS[key]
        try:
            setattr(config, attr, parser(value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return config


def load_config(path) -> PipelineConfig:
    """Read and fully validate a run configuration file.

    Every key is optional; an empty file yields the stock configuration
    (512-frame blocks, 10 iterations). Mask roles required by the chosen
    beamformer must have file paths configured.
    """
    with open(path, "r", encoding="utf-8") as handle:
        config = parse_config(handle.read())
    config.validate()
    config.require_masks(set(config.mask_paths()))
    return config
