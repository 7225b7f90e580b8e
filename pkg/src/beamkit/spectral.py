"""STFT analysis/synthesis and block segmentation.

Analysis uses a periodic (DFT-even) Hamming window with the FFT size equal
to the window length; frame t covers samples [t*hop, t*hop + window) and a
trailing partial frame is zero padded. Synthesis is overlap-add normalized
by the summed analysis windows. All in-memory processing is double
precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AudioBuffer",
    "StftConfig",
    "MultichannelSpectrum",
    "stft",
    "istft",
    "block_ranges",
    "split_blocks",
    "concat_blocks",
    "MIN_TAIL_FRAMES",
]

# A final partial block shorter than this is merged into the previous one;
# tiny blocks would give rank-deficient covariance estimates downstream.
MIN_TAIL_FRAMES = 32

_OLA_FLOOR = 1e-8


@dataclass
class AudioBuffer:
    """Multichannel time-domain signal, shaped [channels, samples]."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ValueError("samples must be 1-D or [channels, samples]")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass
class StftConfig:
    """Analysis/synthesis geometry: 32 ms periodic Hamming window, 16 ms hop."""

    window_ms: float = 32.0
    hop_ms: float = 16.0
    sample_rate: int = 16000

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.hop_ms > self.window_ms:
            raise ValueError("hop must not exceed the window length")
        if self.window_samples < 1 or self.hop_samples < 1:
            raise ValueError("window and hop must be at least one sample")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate / 1000.0))

    @property
    def num_bins(self) -> int:
        return self.window_samples // 2 + 1

    def window(self) -> np.ndarray:
        n = self.window_samples
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass
class MultichannelSpectrum:
    """One-sided STFT of an array signal, shaped [channels, bins, frames]."""

    data: np.ndarray
    frame_hop: int
    fft_size: int
    sample_rate: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise ValueError("spectrum data must be [channels, bins, frames]")
        if self.data.shape[1] != self.fft_size // 2 + 1:
            raise ValueError(
                f"{self.data.shape[1]} bins inconsistent with fft_size {self.fft_size}"
            )
        if self.data.shape[2] < 1:
            raise ValueError("spectrum must contain at least one frame")
        if self.frame_hop < 1 or self.sample_rate <= 0:
            raise ValueError("frame_hop and sample_rate must be positive")
        if not np.isfinite(self.data).all():
            raise ValueError("spectrum contains non-finite values")

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_bins(self) -> int:
        return self.data.shape[1]

    @property
    def num_frames(self) -> int:
        return self.data.shape[2]

    def bin_frequencies(self) -> np.ndarray:
        """Physical frequency of each bin in Hz."""
        return np.arange(self.num_bins) * self.sample_rate / self.fft_size


def stft(audio: AudioBuffer, config: StftConfig) -> MultichannelSpectrum:
    """Windowed one-sided STFT of every channel."""
    if audio.num_samples == 0:
        raise ValueError("cannot transform empty audio")
    if audio.sample_rate != config.sample_rate:
        raise ValueError(
            f"audio is {audio.sample_rate} Hz but the config expects {config.sample_rate} Hz"
        )
    win = config.window_samples
    hop = config.hop_samples
    num_frames = -(-audio.num_samples // hop)
    padded = np.zeros((audio.num_channels, (num_frames - 1) * hop + win))
    padded[:, : audio.num_samples] = audio.samples
    starts = np.arange(num_frames) * hop
    frames = padded[:, starts[:, None] + np.arange(win)[None, :]]
    data = np.fft.rfft(frames * config.window(), axis=-1)
    return MultichannelSpectrum(
        np.ascontiguousarray(data.transpose(0, 2, 1)),
        frame_hop=hop,
        fft_size=win,
        sample_rate=audio.sample_rate,
    )


def istft(spec: MultichannelSpectrum, config: StftConfig) -> AudioBuffer:
    """Overlap-add synthesis, normalized by the summed analysis windows.

    Reconstructs the input of :func:`stft` on [0, num_samples); the output
    spans the full frame grid, so callers trim to the original length.
    """
    if (
        spec.fft_size != config.window_samples
        or spec.frame_hop != config.hop_samples
        or spec.sample_rate != config.sample_rate
    ):
        raise ValueError("spectrum geometry does not match the analysis config")
    frames = np.fft.irfft(spec.data, n=spec.fft_size, axis=1)
    window = config.window()
    hop = spec.frame_hop
    out_len = (spec.num_frames - 1) * hop + spec.fft_size
    out = np.zeros((spec.num_channels, out_len))
    norm = np.zeros(out_len)
    for t in range(spec.num_frames):
        sl = slice(t * hop, t * hop + spec.fft_size)
        out[:, sl] += frames[:, :, t]
        norm[sl] += window
    out /= np.maximum(norm, _OLA_FLOOR)
    return AudioBuffer(out, spec.sample_rate)


def block_ranges(num_frames: int, block_frames: int) -> list[tuple[int, int]]:
    """Consecutive [start, stop) frame ranges covering all frames.

    A final partial range shorter than MIN_TAIL_FRAMES is merged into the
    previous one when a previous range exists.
    """
    if block_frames < 1:
        raise ValueError("block_frames must be at least 1")
    if num_frames < 1:
        raise ValueError("need at least one frame")
    ranges = [
        (start, min(start + block_frames, num_frames))
        for start in range(0, num_frames, block_frames)
    ]
    if len(ranges) >= 2 and ranges[-1][1] - ranges[-1][0] < MIN_TAIL_FRAMES:
        last = ranges.pop()
        prev = ranges.pop()
        ranges.append((prev[0], last[1]))
    return ranges


def split_blocks(spec: MultichannelSpectrum, block_frames: int) -> list[MultichannelSpectrum]:
    """Split along the frame axis into non-overlapping blocks."""
    return [
        MultichannelSpectrum(
            spec.data[:, :, start:stop],
            frame_hop=spec.frame_hop,
            fft_size=spec.fft_size,
            sample_rate=spec.sample_rate,
        )
        for start, stop in block_ranges(spec.num_frames, block_frames)
    ]


def concat_blocks(blocks: list[MultichannelSpectrum]) -> MultichannelSpectrum:
    """Frame-axis concatenation; exact inverse of :func:`split_blocks`."""
    if not blocks:
        raise ValueError("no blocks to concatenate")
    first = blocks[0]
    for block in blocks[1:]:
        if (
            block.num_channels != first.num_channels
            or block.num_bins != first.num_bins
            or block.frame_hop != first.frame_hop
            or block.fft_size != first.fft_size
            or block.sample_rate != first.sample_rate
        ):
            raise ValueError("blocks disagree on channel count or geometry")
    return MultichannelSpectrum(
        np.concatenate([b.data for b in blocks], axis=2),
        frame_hop=first.frame_hop,
        fft_size=first.fft_size,
        sample_rate=first.sample_rate,
    )
