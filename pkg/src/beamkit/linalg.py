"""Small-dimension complex Hermitian helpers used per frequency bin.

Covariance matrices estimated from short blocks are routinely rank
deficient, so every inversion goes through relative diagonal loading.
Inputs are symmetrized as (A + A^H)/2 before use because accumulated
outer-product sums drift off Hermitian.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import SingularMatrixError

__all__ = [
    "DEFAULT_LOADING",
    "PHI_FLOOR",
    "EigResult",
    "symmetrize",
    "add_loading",
    "hermitian_solve",
    "principal_eigenvector",
    "log_complex_gaussian",
]

DEFAULT_LOADING = 1e-6
# Keeps per-bin variances (and thus log densities) finite on silent bins.
PHI_FLOOR = 1e-10

_LOG_PI = math.log(math.pi)
_RESIDUAL_TOL = 1e-6


class EigResult(NamedTuple):
    vector: np.ndarray
    value: float
    converged: bool


def symmetrize(mats: np.ndarray) -> np.ndarray:
    """(A + A^H)/2 over the trailing two axes."""
    a = np.asarray(mats, dtype=np.complex128)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def add_loading(mats: np.ndarray, loading: float) -> np.ndarray:
    """A + loading * (tr(A)/M) * I over the trailing two axes."""
    a = np.asarray(mats, dtype=np.complex128)
    if loading == 0.0:
        return a
    if loading < 0.0:
        raise ValueError("loading must be non-negative")
    m = a.shape[-1]
    mean_trace = np.trace(a, axis1=-2, axis2=-1).real / m
    return a + (loading * mean_trace)[..., None, None] * np.eye(m)


def hermitian_solve(matrix: np.ndarray, rhs: np.ndarray, loading: float = DEFAULT_LOADING) -> np.ndarray:
    """Solve (A + loading*(tr(A)/M)*I) x = b for Hermitian A.

    Raises SingularMatrixError when the loaded system is still numerically
    singular; never returns silent garbage.
    """
    a = symmetrize(matrix)
    b = np.asarray(rhs, dtype=np.complex128).ravel()
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if b.size != a.shape[0]:
        raise ValueError("right-hand side length does not match the matrix")
    loaded = add_loading(a, loading)
    try:
        x = np.linalg.solve(loaded, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular system even after loading {loading}") from exc
    residual = np.linalg.norm(loaded @ x - b)
    scale = np.linalg.norm(loaded) * np.linalg.norm(x) + np.linalg.norm(b)
    if not np.isfinite(x).all() or residual > _RESIDUAL_TOL * scale:
        raise SingularMatrixError(
            f"solve residual {residual:.3e} exceeds {_RESIDUAL_TOL:.0e} * {scale:.3e}"
        )
    return x


def principal_eigenvector(matrix: np.ndarray, tol: float = 1e-8, max_iterations: int = 100) -> EigResult:
    """Dominant eigenpair of a Hermitian PSD matrix by power iteration.

    Starts from the column of largest norm (e1 when all columns vanish) and
    stops when the direction change drops below ``tol``. The returned vector
    has unit Euclidean norm and the value is the Rayleigh quotient. On
    non-convergence the best iterate is returned with ``converged=False``.
    """
    a = symmetrize(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    m = a.shape[0]
    norms = np.linalg.norm(a, axis=0)
    start = int(np.argmax(norms))
    if norms[start] > 0.0:
        v = a[:, start] / norms[start]
    else:
        v = np.zeros(m, dtype=np.complex128)
        v[0] = 1.0
    converged = False
    for _ in range(max_iterations):
        w = a @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # v lies in the null space; it is an exact eigenvector of 0.
            converged = True
            break
        w /= norm_w
        # Direction change as the phase-aligned difference; unlike
        # 1 - |<v, w>| this stays linear in the angle, so the tolerance
        # transfers to the eigen-residual.
        overlap = np.vdot(v, w)
        if abs(overlap) > 0.0:
            drift = float(np.linalg.norm(w - v * (overlap / abs(overlap))))
        else:
            drift = 2.0
        v = w
        if drift < tol:
            converged = True
            break
    value = float(np.real(np.vdot(v, a @ v)))
    return EigResult(v, value, converged)


def log_complex_gaussian(
    y: np.ndarray, phi: float, covariance: np.ndarray, loading: float = DEFAULT_LOADING
) -> float:
    """log of the zero-mean circular complex Gaussian density N_c(y; 0, phi*R).

    Returns -M*log(pi) - M*log(phi) - log det(R~) - (y^H R~^{-1} y)/phi with
    R~ the loaded covariance, evaluated wholly in the log domain. ``phi`` is
    floored at PHI_FLOOR.
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    m = y.size
    if not np.isfinite(y).all() or not np.isfinite(phi):
        raise ValueError("non-finite input")
    phi = max(float(phi), PHI_FLOOR)
    r = add_loading(symmetrize(covariance), loading)
    if r.shape != (m, m):
        raise ValueError("covariance shape does not match the observation")
    if not np.isfinite(r).all():
        raise ValueError("non-finite covariance")
    try:
        chol = np.linalg.cholesky(r)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("covariance is not positive definite after loading") from exc
    log_det = 2.0 * float(np.log(np.diagonal(chol).real).sum())
    # y^H R^{-1} y = ||L^{-1} y||^2 for R = L L^H, guaranteed non-negative.
    z = np.linalg.solve(chol, y)
    quad = float(np.real(np.vdot(z, z)))
    return -m * _LOG_PI - m * math.log(phi) - log_det - quad / phi
