"""Spatial covariance estimation, steering vectors, MVDR and delay-and-sum.

Steering vectors are normalized so the reference-channel entry equals one,
which anchors the beamformer output to that microphone's image of the
source. The delay-and-sum path is intentionally naive (no delay estimation)
and exists as a comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SingularMatrixError
from .linalg import DEFAULT_LOADING, hermitian_solve, principal_eigenvector, symmetrize
from .spectral import MultichannelSpectrum

__all__ = [
    "SpatialCovarianceSet",
    "BeamformerWeights",
    "noisy_covariance",
    "weighted_covariance",
    "steering_vector",
    "mvdr_weights",
    "apply_beamformer",
    "delay_and_sum",
    "LOW_MASS",
]

# Below this total posterior mass a per-frequency estimate is meaningless;
# the plain average is used instead and the bin is flagged.
LOW_MASS = 1e-8


@dataclass
class SpatialCovarianceSet:
    """Per-frequency Hermitian covariance matrices, shaped [bins, M, M]."""

    matrices: np.ndarray
    frame_count: int
    fallback_bins: np.ndarray

    @property
    def num_bins(self) -> int:
        return self.matrices.shape[0]

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[1]


@dataclass
class BeamformerWeights:
    """Per-frequency filter and steering vectors, shaped [bins, M]."""

    weights: np.ndarray
    steering: np.ndarray
    reference_channel: int
    fallback_bins: np.ndarray


def noisy_covariance(block: MultichannelSpectrum) -> SpatialCovarianceSet:
    """Per-frequency average of outer products over all frames."""
    y = block.data
    mats = _kernels.accumulate_weighted_outer(
        y, np.ones((block.num_bins, block.num_frames))
    )
    mats = symmetrize(mats / block.num_frames)
    return SpatialCovarianceSet(mats, block.num_frames, np.zeros(block.num_bins, dtype=bool))


def weighted_covariance(block: MultichannelSpectrum, mask: np.ndarray) -> SpatialCovarianceSet:
    """Mask-weighted covariance: sum_t m[f,t] y y^H / sum_t m[f,t] per bin.

    Bins whose mask mass falls below LOW_MASS fall back to the plain average
    and are flagged in ``fallback_bins``.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (block.num_bins, block.num_frames):
        raise ValueError(
            f"mask shape {mask.shape} does not match the block "
            f"({block.num_bins}, {block.num_frames})"
        )
    if mask.min() < 0.0 or mask.max() > 1.0:
        raise ValueError("mask values must lie in [0, 1]")
    num = _kernels.accumulate_weighted_outer(block.data, mask)
    mass = mask.sum(axis=1)
    low = mass < LOW_MASS
    safe = np.where(low, 1.0, mass)
    mats = symmetrize(num / safe[:, None, None])
    if low.any():
        mats[low] = noisy_covariance(block).matrices[low]
    return SpatialCovarianceSet(mats, block.num_frames, low)


def steering_vector(covariances: SpatialCovarianceSet, reference: int = 0) -> np.ndarray:
    """Per-frequency principal eigenvector, reference-channel normalized.

    Each eigenvector is divided by its reference-channel entry so that entry
    becomes exactly one; when that entry is tiny the largest-magnitude
    channel anchors instead.
    """
    mats = covariances.matrices
    m = covariances.num_channels
    if not 0 <= reference < m:
        raise ValueError(f"reference channel {reference} out of range for {m} channels")
    out = np.empty((covariances.num_bins, m), dtype=np.complex128)
    for f in range(covariances.num_bins):
        vec = principal_eigenvector(mats[f]).vector
        anchor = vec[reference]
        if abs(anchor) < 1e-8:
            anchor = vec[int(np.argmax(np.abs(vec)))]
        out[f] = vec / anchor
    return out


def mvdr_weights(
    noisy: SpatialCovarianceSet,
    steering: np.ndarray,
    loading: float = DEFAULT_LOADING,
    reference_channel: int = 0,
) -> BeamformerWeights:
    """Minimum-variance distortionless weights w = R^{-1}h / (h^H R^{-1} h).

    Frequencies whose covariance stays singular after loading fall back to
    w = h/||h||^2 (which still satisfies w^H h = 1) and are flagged.
    """
    steering = np.asarray(steering, dtype=np.complex128)
    if steering.shape != (noisy.num_bins, noisy.num_channels):
        raise ValueError("steering shape does not match the covariance set")
    weights = np.empty_like(steering)
    fallback = np.zeros(noisy.num_bins, dtype=bool)
    for f in range(noisy.num_bins):
        h = steering[f]
        try:
            x = hermitian_solve(noisy.matrices[f], h, loading)
            denom = complex(np.vdot(h, x))
            if not np.isfinite(denom) or abs(denom) < np.finfo(np.float64).tiny:
                raise SingularMatrixError("degenerate distortionless denominator")
            weights[f] = x / denom
        except SingularMatrixError:
            weights[f] = h / max(float(np.vdot(h, h).real), np.finfo(np.float64).tiny)
            fallback[f] = True
    return BeamformerWeights(weights, steering.copy(), reference_channel, fallback)


def apply_beamformer(block: MultichannelSpectrum, beamformer: BeamformerWeights) -> np.ndarray:
    """Filter output w^H y per bin and frame, shaped [bins, frames]."""
    w = beamformer.weights
    if w.shape != (block.num_bins, block.num_channels):
        raise ValueError("weights shape does not match the block")
    return np.einsum("fa,aft->ft", np.conj(w), block.data, optimize=True)


def delay_and_sum(block: MultichannelSpectrum, delays: np.ndarray) -> np.ndarray:
    """Average of delay-compensated channels, shaped [bins, frames].

    ``delays`` holds one advance per channel in seconds; compensation is the
    frequency-domain phase exp(+j 2 pi f tau_m).
    """
    delays = np.asarray(delays, dtype=np.float64).ravel()
    if delays.size != block.num_channels:
        raise ValueError("need one delay per channel")
    if not np.isfinite(delays).all():
        raise ValueError("delays must be finite")
    freqs = block.bin_frequencies()
    phases = np.exp(2j * np.pi * freqs[:, None] * delays[None, :])
    return np.einsum("fa,aft->ft", phases, block.data, optimize=True) / block.num_channels
