"""Synthetic multichannel scenes with known ground truth.

Sources are envelope-gated filtered noise with syllable-scale on/off
structure, steered to a far-field uniform linear array by pure fractional
delays (anechoic, unit gain). Pure delays keep every source's spatial
covariance rank one, so steering-vector recovery is exactly testable;
room reflections would make the ground truth ambiguous.

The oracle masks are power ratios of the source images at the reference
microphone. Generation is fully determined by the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SceneError
from .spectral import AudioBuffer, StftConfig, stft

__all__ = [
    "SPEED_OF_SOUND",
    "SceneConfig",
    "SceneOutput",
    "synthesize_scene",
    "oracle_irm",
    "si_snr",
    "validate_delays",
]

SPEED_OF_SOUND = 340.0

_SI_SNR_CAP = 60.0


@dataclass
class SceneConfig:
    """Uniform linear array along x; azimuths in degrees from broadside.

    ``snr_db`` sets the noise level against the target source's image power
    at the reference microphone; ``inf`` disables noise entirely.
    """

    mics: int = 4
    speakers: int = 2
    mic_spacing: float = 0.05
    azimuths: tuple[float, ...] = (60.0, -60.0)
    snr_db: float = 5.0
    sample_rate: int = 16000
    duration_s: float = 10.0
    seed: int = 0
    noise_kind: str = "diffuse"

    def __post_init__(self):
        if self.mics < 1:
            raise SceneError("need at least one microphone")
        if not 1 <= self.speakers <= 2:
            raise SceneError("speakers must be 1 or 2")
        if len(self.azimuths) < self.speakers:
            raise SceneError("need one azimuth per speaker")
        if self.mic_spacing < 0.0:
            raise SceneError("mic_spacing must be non-negative")
        if self.duration_s <= 0.0 or self.sample_rate <= 0:
            raise SceneError("duration and sample rate must be positive")
        if self.noise_kind not in ("white", "diffuse"):
            raise SceneError(f"unknown noise_kind {self.noise_kind!r}")


@dataclass
class SceneOutput:
    """Mixture plus per-source and noise images (all full multichannel).

    The mixture equals the left-to-right sum of the source images and the
    noise image, sample exact. Evaluation conventionally uses the image at
    the reference channel.
    """

    mixture: AudioBuffer
    source_images: list[AudioBuffer]
    noise_image: AudioBuffer
    mic_positions: np.ndarray
    delays: np.ndarray
    config: SceneConfig


def validate_delays(positions: np.ndarray, delays: np.ndarray) -> None:
    """Reject arrival-time patterns no physical far-field wave can produce.

    For every microphone pair the arrival-time difference may not exceed the
    pair's separation divided by the speed of sound.
    """
    positions = np.asarray(positions, dtype=np.float64).ravel()
    delays = np.asarray(delays, dtype=np.float64).ravel()
    if delays.size != positions.size:
        raise SceneError("need one delay per microphone")
    for a in range(positions.size):
        for b in range(a + 1, positions.size):
            limit = abs(positions[a] - positions[b]) / SPEED_OF_SOUND
            gap = abs(delays[a] - delays[b])
            if gap > limit + 1e-12:
                raise SceneError(
                    f"delay difference {gap:.3e} s between mics {a} and {b} exceeds "
                    f"the supersonic limit {limit:.3e} s"
                )


def _band_shape(freqs: np.ndarray) -> np.ndarray:
    """Speech-ish spectral envelope: 80-7200 Hz band with a downward tilt."""
    tilt = 1.0 / np.sqrt(1.0 + (freqs / 500.0) ** 2)
    low = np.clip((freqs - 60.0) / 60.0, 0.0, 1.0)
    high = np.clip((7200.0 - freqs) / 700.0, 0.0, 1.0)
    ramp = 0.5 - 0.5 * np.cos(np.pi * low)
    roll = 0.5 - 0.5 * np.cos(np.pi * high)
    return tilt * ramp * roll


def _speech_like(rng: np.random.Generator, num_samples: int, sample_rate: int) -> np.ndarray:
    """Band-limited noise gated by a sparse syllable-rate envelope."""
    white = rng.standard_normal(num_samples)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(num_samples, 1.0 / sample_rate)
    carrier = np.fft.irfft(spec * _band_shape(freqs), num_samples)
    # 50 ms control grid; rectification leaves hard silences between bursts.
    grid = max(int(round(0.05 * sample_rate)), 1)
    knots = rng.standard_normal(num_samples // grid + 2)
    positions = np.arange(num_samples) / grid
    envelope = np.interp(positions, np.arange(knots.size), knots)
    envelope = np.maximum(envelope, 0.0) ** 2
    signal = carrier * envelope
    rms = float(np.sqrt(np.mean(signal**2)))
    if rms <= 0.0:
        raise SceneError("generated source is silent; use a different seed")
    return signal * (0.1 / rms)


def _fractional_delay(signal: np.ndarray, delay_s: float, sample_rate: int) -> np.ndarray:
    spec = np.fft.rfft(signal)
    freqs = np.fft.rfftfreq(signal.size, 1.0 / sample_rate)
    return np.fft.irfft(spec * np.exp(-2j * np.pi * freqs * delay_s), signal.size)


def synthesize_scene(config: SceneConfig) -> SceneOutput:
    """Generate mixture, per-source images and the noise image for a scene."""
    rng = np.random.default_rng(config.seed)
    fs = config.sample_rate
    num_samples = int(round(config.duration_s * fs))
    if num_samples < 1:
        raise SceneError("scene too short for one sample")
    positions = np.arange(config.mics) * config.mic_spacing

    delays = np.empty((config.speakers, config.mics))
    for k in range(config.speakers):
        azimuth = math.radians(config.azimuths[k])
        delays[k] = -positions * math.sin(azimuth) / SPEED_OF_SOUND
        validate_delays(positions, delays[k])

    sources = [_speech_like(rng, num_samples, fs) for _ in range(config.speakers)]
    images = []
    for k in range(config.speakers):
        image = np.empty((config.mics, num_samples))
        for m in range(config.mics):
            image[m] = _fractional_delay(sources[k], delays[k, m], fs)
        images.append(image)

    if config.noise_kind == "white":
        noise = rng.standard_normal((config.mics, num_samples))
    else:
        # Decorrelated channels with a shared lowpass-tilted spectrum.
        base = rng.standard_normal((config.mics, num_samples))
        freqs = np.fft.rfftfreq(num_samples, 1.0 / fs)
        profile = 1.0 / np.sqrt(1.0 + (freqs / 800.0) ** 2)
        noise = np.fft.irfft(np.fft.rfft(base, axis=1) * profile, num_samples, axis=1)
    if math.isinf(config.snr_db):
        noise[:] = 0.0
    else:
        target_power = float(np.mean(images[0][0] ** 2))
        noise_power = float(np.mean(noise[0] ** 2))
        if target_power <= 0.0 or noise_power <= 0.0:
            raise SceneError("degenerate scene powers; use a different seed")
        noise *= math.sqrt(target_power / noise_power * 10.0 ** (-config.snr_db / 10.0))

    mixture = np.zeros((config.mics, num_samples))
    for image in images:
        mixture = mixture + image
    mixture = mixture + noise

    return SceneOutput(
        mixture=AudioBuffer(mixture, fs),
        source_images=[AudioBuffer(image, fs) for image in images],
        noise_image=AudioBuffer(noise, fs),
        mic_positions=positions,
        delays=delays,
        config=config,
    )


def oracle_irm(
    scene: SceneOutput,
    stft_config: StftConfig | None = None,
    reference_channel: int = 0,
) -> dict[str, np.ndarray]:
    """Per-component power-ratio masks at the reference microphone.

    Returns a dict keyed by role: ``target``, ``interference`` (two-speaker
    scenes only) and ``noise``. Masks form a per-bin simplex; bins with no
    power at all get uniform masks.
    """
    cfg = stft_config or StftConfig(sample_rate=scene.mixture.sample_rate)
    components = [image.samples[reference_channel] for image in scene.source_images]
    components.append(scene.noise_image.samples[reference_channel])
    roles = (
        ["target", "noise"] if len(components) == 2 else ["target", "interference", "noise"]
    )
    powers = []
    for samples in components:
        spec = stft(AudioBuffer(samples, scene.mixture.sample_rate), cfg)
        powers.append(np.abs(spec.data[0]) ** 2)
    stacked = np.stack(powers)
    total = stacked.sum(axis=0)
    live = total > 1e-12
    masks = np.full_like(stacked, 1.0 / len(powers))
    np.divide(stacked, total, out=masks, where=live)
    return dict(zip(roles, masks))


def _as_mono(audio) -> np.ndarray:
    if isinstance(audio, AudioBuffer):
        if audio.num_channels != 1:
            raise ValueError("expected a single-channel signal")
        return audio.samples[0]
    samples = np.asarray(audio, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError("expected a single-channel signal")
    return samples


def si_snr(reference, estimate) -> float:
    """Scale-invariant SNR in dB, capped at +60.

    Both signals are made zero mean, the estimate is projected onto the
    reference, and the ratio of projection to residual energy is returned.
    """
    ref = _as_mono(reference)
    est = _as_mono(estimate)
    if ref.size != est.size:
        raise ValueError(f"length mismatch: {ref.size} vs {est.size} samples")
    ref = ref - ref.mean()
    est = est - est.mean()
    ref_power = float(np.dot(ref, ref))
    if ref_power == 0.0:
        raise ValueError("reference has zero energy")
    projection = (float(np.dot(est, ref)) / ref_power) * ref
    residual = est - projection
    proj_power = float(np.dot(projection, projection))
    resid_power = float(np.dot(residual, residual))
    if resid_power == 0.0:
        return _SI_SNR_CAP
    if proj_power == 0.0:
        return float("-inf")
    return min(10.0 * math.log10(proj_power / resid_power), _SI_SNR_CAP)
