"""EM clustering of time-frequency bins with per-bin complex Gaussian mixtures.

Component k models the array vector at bin (f, t) as a zero-mean circular
complex Gaussian N_c(0, phi[k,f,t] * R[k,f]): a per-frequency spatial
covariance shared across frames, scaled by a per-bin variance. The
posteriors act as time-frequency masks. Optional per-bin mixture
coefficients (priors) supervise the clustering; they stay fixed across
iterations, a zero prior annihilates the matching posterior exactly, and
without priors every coefficient is one.

Component ordering convention: the target (or speech) component comes
first and the noise component last. The mask-free two-component
initialization gives the noise component an identity covariance and the
speech component the plain signal covariance.

Each E-step runs wholly in the log domain with log-sum-exp: plain density
ratios underflow at low signal-to-noise ratios, exactly the regime where
mask supervision matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .beamform import LOW_MASS, noisy_covariance
from .linalg import DEFAULT_LOADING, PHI_FLOOR, add_loading, symmetrize
from .spectral import MultichannelSpectrum

__all__ = [
    "CgmmConfig",
    "CgmmState",
    "init_cgmm",
    "e_step",
    "m_step",
    "update_variances",
    "update_covariances",
    "log_likelihood",
    "run_em",
    "LAMBDA_INIT_FLOOR",
]

# Initialization floor for posteriors only; priors keep their exact zeros.
LAMBDA_INIT_FLOOR = 1e-6

_LOG_PI = math.log(math.pi)
# Per-bin log-likelihood contribution when every weighted density is zero.
_LL_FLOOR = float(np.log(np.finfo(np.float64).tiny))


@dataclass
class CgmmConfig:
    iterations: int = 10
    loading: float = DEFAULT_LOADING
    phi_floor: float = PHI_FLOOR

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.loading < 0.0 or self.phi_floor <= 0.0:
            raise ValueError("loading must be >= 0 and phi_floor > 0")


@dataclass
class CgmmState:
    """Mixture parameters and posteriors for one block.

    covariances: [K, bins, M, M], variances/posteriors: [K, bins, frames],
    priors: same shape or None (coefficients of one). ``stale_bins`` marks
    (component, bin) pairs whose covariance update was skipped for lack of
    posterior mass; ``degenerate_prior_bins`` marks bins whose prior is zero
    for every component.
    """

    covariances: np.ndarray
    variances: np.ndarray
    posteriors: np.ndarray
    priors: np.ndarray | None
    loading: float = DEFAULT_LOADING
    phi_floor: float = PHI_FLOOR
    log_likelihoods: list[float] = field(default_factory=list)
    stale_bins: np.ndarray | None = None
    degenerate_prior_bins: np.ndarray | None = None
    floored_bins: int = 0

    def __post_init__(self):
        if self.stale_bins is None:
            self.stale_bins = np.zeros(self.covariances.shape[:2], dtype=bool)
        if self.priors is not None:
            self.priors.setflags(write=False)

    @property
    def num_components(self) -> int:
        return self.covariances.shape[0]

    @property
    def num_bins(self) -> int:
        return self.covariances.shape[1]

    @property
    def num_frames(self) -> int:
        return self.variances.shape[2]


def _check_block(state: CgmmState, block: MultichannelSpectrum) -> None:
    k, f, m, _ = state.covariances.shape
    if block.num_bins != f or block.num_channels != m:
        raise ValueError("block geometry does not match the mixture state")
    if state.variances.shape != (k, f, block.num_frames):
        raise ValueError("state frame count does not match the block")


def _component_inverses(state: CgmmState) -> tuple[np.ndarray, np.ndarray]:
    """Loaded inverses and log-determinants of every component covariance."""
    k, f, m, _ = state.covariances.shape
    loaded = add_loading(symmetrize(state.covariances), state.loading)
    inv, logdet = _kernels.chol_inverse_logdet(loaded.reshape(k * f, m, m))
    return inv.reshape(k, f, m, m), logdet.reshape(k, f)


def _log_densities(
    state: CgmmState, block: MultichannelSpectrum, inverses: np.ndarray, logdets: np.ndarray
) -> np.ndarray:
    """log N_c(y; 0, phi*R) for every (component, bin, frame)."""
    m = block.num_channels
    quads = np.stack(
        [_kernels.quad_forms(block.data, inverses[k]) for k in range(state.num_components)]
    )
    np.clip(quads, 0.0, None, out=quads)
    phi = state.variances
    return -m * _LOG_PI - m * np.log(phi) - logdets[:, :, None] - quads / phi


def _log_weights(state: CgmmState, log_densities: np.ndarray) -> np.ndarray:
    if state.priors is None:
        return log_densities
    with np.errstate(divide="ignore"):
        return log_densities + np.log(state.priors)


def init_cgmm(
    block: MultichannelSpectrum,
    masks: list[np.ndarray] | None = None,
    prior: bool = False,
    config: CgmmConfig | None = None,
) -> CgmmState:
    """Build the starting mixture state for one block.

    With masks (one [bins, frames] tensor per component, values in [0, 1]):
    posteriors are the masks floored at LAMBDA_INIT_FLOOR and renormalized
    per bin, covariances are the posterior-weighted outer-product averages
    with unit per-bin variances, and when ``prior`` is set the coefficients
    are the raw masks renormalized per bin with exact zeros preserved.

    Without masks only the two-component form is allowed: the speech
    component starts from the plain signal covariance and the noise
    component from the identity, with uniform posteriors and no priors.

    In both forms the per-bin variances are then refit from the data and the
    starting covariances, which keeps the whole state equivariant under a
    global gain change.
    """
    config = config or CgmmConfig()
    y = block.data
    num_bins, num_frames = block.num_bins, block.num_frames

    degenerate = None
    if masks is None:
        if prior:
            raise ValueError("a prior requires initialization masks")
        num_components = 2
        lam = np.full((2, num_bins, num_frames), 0.5)
        covs = np.stack(
            [
                noisy_covariance(block).matrices,
                np.broadcast_to(
                    np.eye(block.num_channels, dtype=np.complex128),
                    (num_bins, block.num_channels, block.num_channels),
                ).copy(),
            ]
        )
        alpha = None
        stale = np.zeros((2, num_bins), dtype=bool)
    else:
        num_components = len(masks)
        if not 1 <= num_components <= 3:
            raise ValueError("expected between one and three masks")
        stacked = np.stack([np.asarray(m, dtype=np.float64) for m in masks])
        if stacked.shape[1:] != (num_bins, num_frames):
            raise ValueError(
                f"mask shape {stacked.shape[1:]} does not match the block "
                f"({num_bins}, {num_frames})"
            )
        if stacked.min() < 0.0 or stacked.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")
        lam = np.maximum(stacked, LAMBDA_INIT_FLOOR)
        lam /= lam.sum(axis=0)
        if prior:
            totals = stacked.sum(axis=0)
            alpha = np.zeros_like(stacked)
            np.divide(stacked, totals, out=alpha, where=totals > 0.0)
            degenerate = totals <= 0.0
            if not degenerate.any():
                degenerate = None
        else:
            alpha = None
        covs = np.empty(
            (num_components, num_bins, block.num_channels, block.num_channels),
            dtype=np.complex128,
        )
        stale = np.zeros((num_components, num_bins), dtype=bool)
        plain = None
        for k in range(num_components):
            num = _kernels.accumulate_weighted_outer(y, lam[k])
            mass = lam[k].sum(axis=1)
            low = mass < LOW_MASS
            covs[k] = symmetrize(num / np.where(low, 1.0, mass)[:, None, None])
            if low.any():
                if plain is None:
                    plain = noisy_covariance(block).matrices
                covs[k][low] = plain[low]
                stale[k] |= low

    state = CgmmState(
        covariances=covs,
        variances=np.ones((num_components, num_bins, num_frames)),
        posteriors=lam,
        priors=alpha,
        loading=config.loading,
        phi_floor=config.phi_floor,
        stale_bins=stale,
        degenerate_prior_bins=degenerate,
    )
    update_variances(state, block)
    return state


def e_step(state: CgmmState, block: MultichannelSpectrum) -> np.ndarray:
    """Posterior update: lambda = alpha*N_c / sum_k alpha*N_c, via log-sum-exp.

    A zero prior forces the matching posterior to exactly zero. Bins whose
    priors are all zero get uniform posteriors and are flagged.
    """
    _check_block(state, block)
    inverses, logdets = _component_inverses(state)
    logw = _log_weights(state, _log_densities(state, block, inverses, logdets))
    peak = logw.max(axis=0)
    degenerate = ~np.isfinite(peak)
    shifted = np.exp(logw - np.where(degenerate, 0.0, peak)[None])
    totals = shifted.sum(axis=0)
    lam = shifted / np.where(degenerate, 1.0, totals)[None]
    if degenerate.any():
        lam[:, degenerate] = 1.0 / state.num_components
        state.degenerate_prior_bins = degenerate
    else:
        state.degenerate_prior_bins = None
    state.posteriors[...] = lam
    return state.posteriors


def update_variances(state: CgmmState, block: MultichannelSpectrum) -> np.ndarray:
    """Per-bin variance refit: phi = (y^H R~^{-1} y) / M, floored."""
    _check_block(state, block)
    inverses, _ = _component_inverses(state)
    m = block.num_channels
    for k in range(state.num_components):
        quads = _kernels.quad_forms(block.data, inverses[k])
        state.variances[k] = np.maximum(quads / m, state.phi_floor)
    return state.variances


def update_covariances(state: CgmmState, block: MultichannelSpectrum) -> np.ndarray:
    """Covariance refit: R = sum_t (lambda/phi) y y^H / sum_t lambda per bin.

    Components with no posterior mass at a bin keep their previous matrix
    (flagged in ``stale_bins``) so the component count never shrinks.
    """
    _check_block(state, block)
    for k in range(state.num_components):
        weights = state.posteriors[k] / state.variances[k]
        num = _kernels.accumulate_weighted_outer(block.data, weights)
        mass = state.posteriors[k].sum(axis=1)
        low = mass < LOW_MASS
        fresh = symmetrize(num / np.where(low, 1.0, mass)[:, None, None])
        if low.any():
            fresh[low] = state.covariances[k][low]
            state.stale_bins[k] |= low
        state.covariances[k] = fresh
    return state.covariances


def m_step(state: CgmmState, block: MultichannelSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Variance update with the current covariances, then the covariance refit."""
    update_variances(state, block)
    update_covariances(state, block)
    return state.variances, state.covariances


def log_likelihood(state: CgmmState, block: MultichannelSpectrum) -> float:
    """sum over bins of log sum_k alpha*N_c(y; 0, phi*R), via log-sum-exp.

    Bins whose weighted densities are all zero contribute a fixed floor and
    are counted in ``state.floored_bins``.
    """
    _check_block(state, block)
    inverses, logdets = _component_inverses(state)
    logw = _log_weights(state, _log_densities(state, block, inverses, logdets))
    peak = logw.max(axis=0)
    degenerate = ~np.isfinite(peak)
    safe_peak = np.where(degenerate, 0.0, peak)
    per_bin = safe_peak + np.log(np.exp(logw - safe_peak[None]).sum(axis=0))
    if degenerate.any():
        per_bin = np.where(degenerate, _LL_FLOOR, per_bin)
        state.floored_bins = int(degenerate.sum())
    return float(per_bin.sum())


def run_em(
    block: MultichannelSpectrum,
    masks: list[np.ndarray] | None = None,
    prior: bool = False,
    config: CgmmConfig | None = None,
) -> CgmmState:
    """Initialize, then alternate E and M steps, recording the log-likelihood.

    With zero iterations the initialization is returned unchanged, so the
    final posteriors are the (floored, renormalized) input masks.
    """
    config = config or CgmmConfig()
    state = init_cgmm(block, masks, prior, config)
    state.log_likelihoods.append(log_likelihood(state, block))
    for _ in range(config.iterations):
        e_step(state, block)
        m_step(state, block)
        state.log_likelihoods.append(log_likelihood(state, block))
    return state
