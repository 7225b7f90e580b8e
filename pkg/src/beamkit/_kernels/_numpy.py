"""Vectorized numpy implementations of the hot per-bin kernels."""

import numpy as np


def accumulate_weighted_outer(y, weights):
    """Per-bin weighted sum of outer products: sum_t w[f,t] * y[:,f,t] y[:,f,t]^H.

    y: complex [channels, bins, frames]; weights: real [bins, frames].
    Returns complex [bins, channels, channels].
    """
    y = np.asarray(y, dtype=np.complex128)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != y.shape[1:]:
        raise ValueError("weights shape does not match the spectrum")
    return np.einsum("aft,bft->fab", y * w[None], np.conj(y), optimize=True)


def quad_forms(y, mats):
    """Real quadratic forms y^H A y per bin and frame for Hermitian A.

    y: complex [channels, bins, frames]; mats: complex [bins, M, M].
    Returns real [bins, frames].
    """
    y = np.asarray(y, dtype=np.complex128)
    a = np.asarray(mats, dtype=np.complex128)
    if a.shape != (y.shape[1], y.shape[0], y.shape[0]):
        raise ValueError("matrix stack shape does not match the spectrum")
    tmp = np.einsum("fab,bft->aft", a, y, optimize=True)
    return np.einsum("aft,aft->ft", np.conj(y), tmp, optimize=True).real


def chol_inverse_logdet(mats):
    """Inverse and log-determinant of a stack of Hermitian PD matrices.

    mats: complex [n, M, M]. Returns (inverses [n, M, M], logdets [n]).
    Raises numpy.linalg.LinAlgError when any matrix is not positive definite.
    """
    a = np.asarray(mats, dtype=np.complex128)
    chol = np.linalg.cholesky(a)
    diag = np.diagonal(chol, axis1=-2, axis2=-1).real
    logdet = 2.0 * np.log(diag).sum(axis=-1)
    return np.linalg.inv(a), logdet
