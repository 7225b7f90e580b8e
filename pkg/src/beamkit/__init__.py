"""Mask-driven multichannel beamforming toolkit.

Submodules:
    spectral   STFT analysis/synthesis and block segmentation
    linalg     small complex Hermitian helpers
    beamform   spatial covariance, steering vectors, MVDR, delay-and-sum
    cgmm       EM for per-bin complex Gaussian mixtures
    pipeline   block-wise enhancement pipeline and its configuration
    io         WAV, mask tensor (MSK1) and run-config file formats
    simulate   synthetic scene generation, oracle masks, SI-SNR
    cli        command line interface

Submodules are imported lazily so that thread caps set by the CLI take
effect before numpy is loaded.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = {
    "beamform",
    "cgmm",
    "cli",
    "errors",
    "io",
    "linalg",
    "pipeline",
    "simulate",
    "spectral",
}


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | _SUBMODULES)
