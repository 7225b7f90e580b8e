"""Backend parity: the compiled kernels must match the numpy fallback."""

import numpy as np
import pytest

from beamkit._kernels import _numpy as fallback

compiled = pytest.importorskip(
    "beamkit._kernels._core", reason="compiled kernel extension not built"
)


def _random_case(rng, channels=4, bins=33, frames=50):
    y = rng.standard_normal((channels, bins, frames)) + 1j * rng.standard_normal(
        (channels, bins, frames)
    )
    w = rng.uniform(0.0, 1.0, (bins, frames))
    mats = fallback.accumulate_weighted_outer(y, w) + 2.0 * channels * np.eye(channels)
    return y, w, mats


def test_accumulate_weighted_outer_parity(rng):
    y, w, _ = _random_case(rng)
    a = compiled.accumulate_weighted_outer(y, w)
    b = fallback.accumulate_weighted_outer(y, w)
    assert np.abs(a - b).max() < 1e-10 * max(np.abs(b).max(), 1.0)


def test_quad_forms_parity(rng):
    y, _, mats = _random_case(rng)
    a = compiled.quad_forms(y, mats)
    b = fallback.quad_forms(y, mats)
    assert np.abs(a - b).max() < 1e-10 * max(b.max(), 1.0)


def test_chol_inverse_logdet_parity(rng):
    _, _, mats = _random_case(rng)
    inv_a, ld_a = compiled.chol_inverse_logdet(mats)
    inv_b, ld_b = fallback.chol_inverse_logdet(mats)
    assert np.abs(inv_a - inv_b).max() < 1e-10
    assert np.abs(ld_a - ld_b).max() < 1e-10
    eye = np.eye(mats.shape[1])
    assert np.abs(np.einsum("fab,fbc->fac", inv_a, mats) - eye).max() < 1e-9


@pytest.mark.parametrize("impl", [compiled, fallback], ids=["cython", "numpy"])
def test_non_pd_matrix_raises(impl):
    mats = np.stack([np.eye(3, dtype=np.complex128), -np.eye(3, dtype=np.complex128)])
    with pytest.raises(np.linalg.LinAlgError):
        impl.chol_inverse_logdet(mats)


@pytest.mark.parametrize("impl", [compiled, fallback], ids=["cython", "numpy"])
def test_shape_validation(impl, rng):
    y = rng.standard_normal((2, 3, 4)) + 0j
    with pytest.raises(ValueError):
        impl.accumulate_weighted_outer(y, np.ones((3, 5)))
    with pytest.raises(ValueError):
        impl.quad_forms(y, np.ones((3, 3, 3), dtype=np.complex128))


def test_backends_drive_identical_em(monkeypatch, rng):
    """One full EM run per backend on the same block must agree closely."""
    from beamkit import _kernels
    from beamkit.cgmm import run_em
    from helpers import random_spectrum

    spec = random_spectrum(rng, channels=3, bins=9, frames=24)
    masks = rng.uniform(0.0, 1.0, (2, 9, 24))
    masks /= masks.sum(axis=0)
    results = {}
    for name, impl in (("cython", compiled), ("numpy", fallback)):
        monkeypatch.setattr(_kernels, "accumulate_weighted_outer", impl.accumulate_weighted_outer)
        monkeypatch.setattr(_kernels, "quad_forms", impl.quad_forms)
        monkeypatch.setattr(_kernels, "chol_inverse_logdet", impl.chol_inverse_logdet)
        results[name] = run_em(spec, [masks[0], masks[1]], prior=True)
    lam_gap = np.abs(results["cython"].posteriors - results["numpy"].posteriors).max()
    ll_gap = abs(results["cython"].log_likelihoods[-1] - results["numpy"].log_likelihoods[-1])
    assert lam_gap < 1e-9
    assert ll_gap < 1e-6 * abs(results["numpy"].log_likelihoods[-1])
