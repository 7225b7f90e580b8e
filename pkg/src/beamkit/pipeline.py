"""Block-wise enhancement pipeline: masking, beamformer selection, assembly.

A run splits the spectrum into fixed-length frame blocks, processes each
block independently (early masking, optional mixture-model clustering,
beamforming, late masking) and concatenates the results. Block length is a
frames-first parameter: the stock 8208 ms block at a 16 ms hop is exactly
512 frames.

``SYSTEMS`` enumerates the canonical ablation grid: delay-and-sum rows
(A*), plain mask-driven MVDR rows (B*), two-component clustering rows (C*)
and three-component clustering rows (D*).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamform import (
    apply_beamformer,
    delay_and_sum,
    mvdr_weights,
    noisy_covariance,
    steering_vector,
    weighted_covariance,
)
from .cgmm import CgmmConfig, run_em
from .errors import ConfigError
from .linalg import DEFAULT_LOADING
from .spectral import (
    AudioBuffer,
    MultichannelSpectrum,
    StftConfig,
    block_ranges,
    istft,
    stft,
)

__all__ = [
    "PipelineConfig",
    "SYSTEMS",
    "system_config",
    "required_mask_roles",
    "reduce_channels",
    "apply_mask",
    "three_way_masks",
    "process_block",
    "run_pipeline",
    "BEAMFORMERS",
    "LATER_SS_MODES",
    "MASK_ROLES",
]

BEAMFORMERS = ("das", "mvdr", "cgmm2", "cgmm2-noinit", "cgmm3")
LATER_SS_MODES = ("off", "input-mask", "post-em-mask")
MVDR_MASK_SOURCES = ("enhancement", "target")
CHANNEL_REDUCERS = ("mean", "max")
MASK_ROLES = ("target", "interference", "noise", "enhancement")


@dataclass
class PipelineConfig:
    """Everything one enhancement run needs besides audio and mask data.

    The ``*_mask`` fields hold optional mask file paths; in-memory callers
    pass mask tensors directly and leave them unset.
    """

    beamformer: str = "das"
    prior: bool = False
    early_se: bool = False
    early_ss: bool = False
    later_ss: str = "off"
    mvdr_mask: str = "enhancement"
    block_frames: int = 512
    iterations: int = 10
    loading: float = DEFAULT_LOADING
    reference_channel: int = 0
    channel_reduce: str = "mean"
    target_mask: str | None = None
    interference_mask: str | None = None
    noise_mask: str | None = None
    se_mask: str | None = None

    def validate(self) -> None:
        """Check enum fields and cross-field contradictions."""
        if self.beamformer not in BEAMFORMERS:
            raise ConfigError(f"beamformer must be one of {BEAMFORMERS}, got {self.beamformer!r}")
        if self.later_ss not in LATER_SS_MODES:
            raise ConfigError(f"later_ss must be one of {LATER_SS_MODES}, got {self.later_ss!r}")
        if self.mvdr_mask not in MVDR_MASK_SOURCES:
            raise ConfigError(
                f"mvdr_mask must be one of {MVDR_MASK_SOURCES}, got {self.mvdr_mask!r}"
            )
        if self.channel_reduce not in CHANNEL_REDUCERS:
            raise ConfigError(
                f"channel_reduce must be one of {CHANNEL_REDUCERS}, got {self.channel_reduce!r}"
            )
        if self.block_frames < 1:
            raise ConfigError("block_frames must be at least 1")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.loading < 0.0:
            raise ConfigError("loading must be non-negative")
        if self.reference_channel < 0:
            raise ConfigError("reference_channel must be non-negative")
        if self.later_ss == "post-em-mask" and self.beamformer not in (
            "cgmm2",
            "cgmm2-noinit",
            "cgmm3",
        ):
            raise ConfigError("later_ss=post-em-mask requires a cgmm beamformer")
        if self.prior and self.beamformer not in ("cgmm2", "cgmm3"):
            raise ConfigError("prior=true requires a mask-initialized cgmm beamformer")

    def require_masks(self, available: set[str] | frozenset[str]) -> None:
        """Raise when a mask role needed by this configuration is missing."""
        missing = sorted(required_mask_roles(self) - set(available))
        if missing:
            raise ConfigError(f"missing masks for roles: {', '.join(missing)}")

    def mask_paths(self) -> dict[str, str]:
        """Roles with a configured file path."""
        paths = {
            "target": self.target_mask,
            "interference": self.interference_mask,
            "noise": self.noise_mask,
            "enhancement": self.se_mask,
        }
        return {role: path for role, path in paths.items() if path}


def required_mask_roles(config: PipelineConfig) -> set[str]:
    roles: set[str] = set()
    if config.early_se:
        roles.add("enhancement")
    if config.early_ss:
        roles.add("target")
    if config.beamformer == "mvdr":
        roles.add(config.mvdr_mask)
    elif config.beamformer == "cgmm2":
        roles.add("enhancement")
    elif config.beamformer == "cgmm3":
        roles.update(("target", "interference", "noise"))
    if config.later_ss == "input-mask":
        roles.add("target")
    return roles


# Ablation grid: system id -> PipelineConfig overrides.
SYSTEMS: dict[str, dict] = {
    "A0": {"beamformer": "das"},
    "A1": {"beamformer": "das", "early_se": True},
    "A2": {"beamformer": "das", "early_ss": True},
    "A3": {"beamformer": "das", "early_ss": True, "early_se": True},
    "B1": {"beamformer": "mvdr", "mvdr_mask": "enhancement"},
    "B2": {"beamformer": "mvdr", "mvdr_mask": "target"},
    "B3": {"beamformer": "mvdr", "early_ss": True},
    "B4": {"beamformer": "mvdr", "later_ss": "input-mask"},
    "C0": {"beamformer": "cgmm2-noinit"},
    "C1": {"beamformer": "cgmm2"},
    "C2": {"beamformer": "cgmm2", "early_ss": True},
    "C3": {"beamformer": "cgmm2", "later_ss": "input-mask"},
    "C4": {"beamformer": "cgmm2", "prior": True, "later_ss": "input-mask"},
    "D1": {"beamformer": "cgmm3", "later_ss": "input-mask"},
    "D2": {"beamformer": "cgmm3", "prior": True, "later_ss": "input-mask"},
    "D3": {"beamformer": "cgmm3", "prior": True, "later_ss": "post-em-mask"},
}


def system_config(system_id: str, **overrides) -> PipelineConfig:
    """PipelineConfig for one row of the ablation grid."""
    if system_id not in SYSTEMS:
        raise ConfigError(f"unknown system {system_id!r}; choose from {sorted(SYSTEMS)}")
    config = PipelineConfig(**{**SYSTEMS[system_id], **overrides})
    config.validate()
    return config


def reduce_channels(mask: np.ndarray, mode: str = "mean") -> np.ndarray:
    """Collapse a per-channel mask stack [channels, bins, frames] to [bins, frames]."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 3:
        raise ValueError("expected a mask stack [channels, bins, frames]")
    if mode == "mean":
        return mask.mean(axis=0)
    if mode == "max":
        return mask.max(axis=0)
    raise ValueError(f"unknown reduction {mode!r}")


def _check_mask(mask: np.ndarray, num_bins: int, num_frames: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (num_bins, num_frames):
        raise ValueError(
            f"mask shape {mask.shape} does not match the spectrum ({num_bins}, {num_frames})"
        )
    if mask.min() < 0.0 or mask.max() > 1.0:
        raise ValueError("mask values must lie in [0, 1]")
    return mask


def apply_mask(spec: MultichannelSpectrum, mask: np.ndarray) -> MultichannelSpectrum:
    """Scale magnitudes by the mask (phase untouched), broadcast over channels."""
    mask = _check_mask(mask, spec.num_bins, spec.num_frames)
    return MultichannelSpectrum(
        spec.data * mask[None],
        frame_hop=spec.frame_hop,
        fft_size=spec.fft_size,
        sample_rate=spec.sample_rate,
    )


def three_way_masks(
    separation: np.ndarray, speech: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Target/interference/noise masks from a target-separation mask and an
    overall speech mask: noise is the speech-mask complement and the
    interference takes whatever is left."""
    target = np.clip(np.asarray(separation, dtype=np.float64), 0.0, 1.0)
    noise = np.clip(1.0 - np.asarray(speech, dtype=np.float64), 0.0, 1.0)
    interference = np.clip(1.0 - target - noise, 0.0, 1.0)
    return target, interference, noise


def _em_masks(config: PipelineConfig, masks: dict[str, np.ndarray]) -> list[np.ndarray] | None:
    if config.beamformer == "cgmm2":
        speech = masks["enhancement"]
        return [speech, np.clip(1.0 - speech, 0.0, 1.0)]
    if config.beamformer == "cgmm3":
        return [masks["target"], masks["interference"], masks["noise"]]
    return None


def process_block(
    block: MultichannelSpectrum,
    config: PipelineConfig,
    masks: dict[str, np.ndarray] | None = None,
) -> tuple[np.ndarray, dict]:
    """Enhance one block; returns the single-channel spectrum [bins, frames]
    and a diagnostics dict (EM log-likelihood trace, fallback counters)."""
    config.validate()
    masks = {
        role: _check_mask(mask, block.num_bins, block.num_frames)
        for role, mask in (masks or {}).items()
    }
    config.require_masks(set(masks))

    working = block
    if config.early_se:
        working = apply_mask(working, masks["enhancement"])
    if config.early_ss:
        working = apply_mask(working, masks["target"])

    info: dict = {}
    state = None
    if config.beamformer == "das":
        out = delay_and_sum(working, np.zeros(working.num_channels))
    else:
        if config.beamformer == "mvdr":
            target_mask = masks[config.mvdr_mask]
        else:
            state = run_em(
                working,
                _em_masks(config, masks),
                prior=config.prior,
                config=CgmmConfig(iterations=config.iterations, loading=config.loading),
            )
            info["loglik"] = list(state.log_likelihoods)
            target_mask = state.posteriors[0]
        target_cov = weighted_covariance(working, target_mask)
        steering = steering_vector(target_cov, config.reference_channel)
        beamformer = mvdr_weights(
            noisy_covariance(working),
            steering,
            config.loading,
            config.reference_channel,
        )
        info["mvdr_fallback_bins"] = int(beamformer.fallback_bins.sum())
        out = apply_beamformer(working, beamformer)

    if config.later_ss == "input-mask":
        out = out * masks["target"]
    elif config.later_ss == "post-em-mask":
        out = out * state.posteriors[0]
    return out, info


def run_pipeline(
    audio: AudioBuffer,
    config: PipelineConfig,
    masks: dict[str, np.ndarray] | None = None,
    stft_config: StftConfig | None = None,
    on_block=None,
) -> AudioBuffer:
    """Full chain: analysis, block split, per-block enhancement, synthesis.

    ``masks`` maps roles to full-length [bins, frames] tensors; they are
    sliced per block alongside the spectrum. ``on_block`` (if given) receives
    one diagnostics dict per processed block. The output is trimmed to the
    input length.
    """
    config.validate()
    cfg = stft_config or StftConfig(sample_rate=audio.sample_rate)
    spec = stft(audio, cfg)
    masks = {
        role: _check_mask(mask, spec.num_bins, spec.num_frames)
        for role, mask in (masks or {}).items()
    }
    config.require_masks(set(masks))

    outputs = []
    for index, (start, stop) in enumerate(block_ranges(spec.num_frames, config.block_frames)):
        block = MultichannelSpectrum(
            spec.data[:, :, start:stop],
            frame_hop=spec.frame_hop,
            fft_size=spec.fft_size,
            sample_rate=spec.sample_rate,
        )
        sliced = {role: mask[:, start:stop] for role, mask in masks.items()}
        out, info = process_block(block, config, sliced)
        if on_block is not None:
            on_block({"index": index, "start": start, "frames": stop - start, **info})
        outputs.append(out)

    enhanced = MultichannelSpectrum(
        np.concatenate(outputs, axis=1)[None],
        frame_hop=spec.frame_hop,
        fft_size=spec.fft_size,
        sample_rate=spec.sample_rate,
    )
    rebuilt = istft(enhanced, cfg)
    return AudioBuffer(rebuilt.samples[:, : audio.num_samples], audio.sample_rate)
