"""Independent oracles used by the tests.

Everything here is written as plain loops and direct formulas so the
oracles share no code path with the package: naive per-frame DFT,
Gaussian elimination, characteristic-polynomial eigenvalue search, and
direct mixture-model updates in the linear domain.
"""

import cmath
import math

import numpy as np


def naive_windowed_dft(frame):
    """O(N^2) DFT of one windowed frame, one-sided."""
    n = len(frame)
    bins = n // 2 + 1
    out = np.empty(bins, dtype=np.complex128)
    for k in range(bins):
        acc = 0.0 + 0.0j
        for t in range(n):
            acc += frame[t] * cmath.exp(-2j * math.pi * k * t / n)
        out[k] = acc
    return out


def gauss_solve(matrix, rhs):
    """Gaussian elimination with partial pivoting on python complex lists."""
    n = len(rhs)
    a = [[complex(matrix[i][j]) for j in range(n)] + [complex(rhs[i])] for i in range(n)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        if abs(a[pivot][col]) == 0.0:
            raise ZeroDivisionError("singular matrix")
        a[col], a[pivot] = a[pivot], a[col]
        for row in range(col + 1, n):
            factor = a[row][col] / a[col][col]
            for j in range(col, n + 1):
                a[row][j] -= factor * a[col][j]
    x = [0.0 + 0.0j] * n
    for row in range(n - 1, -1, -1):
        acc = a[row][n]
        for j in range(row + 1, n):
            acc -= a[row][j] * x[j]
        x[row] = acc / a[row][row]
    return np.array(x)


def gauss_det(matrix):
    """Determinant by elimination with partial pivoting."""
    n = len(matrix)
    a = [[complex(matrix[i][j]) for j in range(n)] for i in range(n)]
    det = 1.0 + 0.0j
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        if abs(a[pivot][col]) == 0.0:
            return 0.0 + 0.0j
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        for row in range(col + 1, n):
            factor = a[row][col] / a[col][col]
            for j in range(col, n):
                a[row][j] -= factor * a[col][j]
    return det


def char_poly_coefficients(matrix):
    """Coefficients of det(xI - A) by the Faddeev-LeVerrier recursion.

    Returns [1, c1, ..., cn] so p(x) = x^n + c1 x^(n-1) + ... + cn.
    """
    a = np.asarray(matrix, dtype=np.complex128)
    n = a.shape[0]
    coeffs = [1.0]
    mat = np.zeros_like(a)
    for k in range(1, n + 1):
        mat = a @ mat + coeffs[-1] * np.eye(n)
        coeffs.append(complex(-np.trace(a @ mat) / k))
    return [c.real if isinstance(c, complex) else c for c in coeffs]


def largest_eigenvalue_newton(matrix, tol=1e-13, max_iter=200):
    """Largest eigenvalue of a Hermitian PSD matrix via its characteristic
    polynomial: Newton started above the spectrum converges monotonically to
    the largest root when all roots are real."""
    coeffs = char_poly_coefficients(matrix)
    n = len(coeffs) - 1

    def poly(x):
        acc = 0.0
        for c in coeffs:
            acc = acc * x + c
        return acc

    def dpoly(x):
        acc = 0.0
        for power, c in enumerate(coeffs[:-1]):
            acc = acc * x + c * (n - power)
        return acc

    x = float(np.trace(np.asarray(matrix)).real) + 1.0
    for _ in range(max_iter):
        step = poly(x) / dpoly(x)
        x -= step
        if abs(step) < tol * max(1.0, abs(x)):
            break
    return x


def complex_gaussian_density(y, phi, covariance):
    """Linear-domain N_c(y; 0, phi*R) via elimination for det and solve."""
    y = np.asarray(y, dtype=np.complex128)
    m = y.size
    scaled = phi * np.asarray(covariance, dtype=np.complex128)
    det = gauss_det(scaled)
    solved = gauss_solve(scaled, y)
    quad = 0.0
    for i in range(m):
        quad += (y[i].conjugate() * solved[i]).real
    return math.exp(-quad) / (math.pi**m * det.real)


def loop_weighted_covariance(data, weights):
    """sum_t w[f,t] y y^H / sum_t w[f,t], plain loops, no fallbacks."""
    channels, bins, frames = data.shape
    out = np.zeros((bins, channels, channels), dtype=np.complex128)
    for f in range(bins):
        mass = 0.0
        for t in range(frames):
            mass += weights[f, t]
            for i in range(channels):
                for j in range(channels):
                    out[f, i, j] += weights[f, t] * data[i, f, t] * data[j, f, t].conjugate()
        out[f] /= mass
    return out


def loop_e_step(data, priors, variances, covariances):
    """Posterior update in the linear domain with per-bin density ratios."""
    k_comp = variances.shape[0]
    channels, bins, frames = data.shape
    lam = np.zeros((k_comp, bins, frames))
    for f in range(bins):
        for t in range(frames):
            weighted = []
            for k in range(k_comp):
                density = complex_gaussian_density(
                    data[:, f, t], variances[k, f, t], covariances[k, f]
                )
                weighted.append(priors[k, f, t] * density)
            total = sum(weighted)
            for k in range(k_comp):
                lam[k, f, t] = weighted[k] / total
    return lam


def loop_m_step(data, posteriors, covariances, phi_floor):
    """Variance update with the current covariances, then covariance refit."""
    k_comp = posteriors.shape[0]
    channels, bins, frames = data.shape
    variances = np.zeros((k_comp, bins, frames))
    fresh = np.zeros_like(covariances)
    for k in range(k_comp):
        for f in range(bins):
            inverse_rows = [
                gauss_solve(covariances[k, f], np.eye(channels)[:, col])
                for col in range(channels)
            ]
            inverse = np.stack(inverse_rows, axis=1)
            for t in range(frames):
                quad = 0.0
                for i in range(channels):
                    for j in range(channels):
                        quad += (
                            data[i, f, t].conjugate() * inverse[i, j] * data[j, f, t]
                        ).real
                variances[k, f, t] = max(quad / channels, phi_floor)
            mass = 0.0
            for t in range(frames):
                mass += posteriors[k, f, t]
                scale = posteriors[k, f, t] / variances[k, f, t]
                for i in range(channels):
                    for j in range(channels):
                        fresh[k, f, i, j] += (
                            scale * data[i, f, t] * data[j, f, t].conjugate()
                        )
            fresh[k, f] /= mass
    return variances, fresh


def loop_log_likelihood(data, priors, variances, covariances):
    """Direct linear-domain sum over bins of log sum_k alpha * density."""
    k_comp = variances.shape[0]
    channels, bins, frames = data.shape
    total = 0.0
    for f in range(bins):
        for t in range(frames):
            acc = 0.0
            for k in range(k_comp):
                acc += priors[k, f, t] * complex_gaussian_density(
                    data[:, f, t], variances[k, f, t], covariances[k, f]
                )
            total += math.log(acc)
    return total


def random_hermitian_pd(rng, dim, boost=None):
    """Random Hermitian positive definite matrix; boost adds to the diagonal."""
    base = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    mat = base @ base.conj().T
    if boost is None:
        boost = 0.1 * dim
    return mat + boost * np.eye(dim)


def random_hermitian_gapped(rng, dim, gap=0.7):
    """Random Hermitian PSD matrix whose top eigenvalue leads by >= 1/gap.

    Built as Q diag(lams) Q^H from a random unitary, so power iteration has
    a guaranteed contraction factor of at most ``gap`` per step.
    """
    base = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(base)
    lams = np.concatenate([[1.0], rng.uniform(0.0, gap, dim - 1)])
    scale = float(rng.uniform(0.5, 5.0))
    return (q * (scale * lams)) @ q.conj().T


def random_spectrum(rng, channels, bins, frames, sample_rate=16000):
    """MultichannelSpectrum with consistent one-sided geometry."""
    from beamkit.spectral import MultichannelSpectrum

    data = rng.standard_normal((channels, bins, frames)) + 1j * rng.standard_normal(
        (channels, bins, frames)
    )
    fft_size = 2 * (bins - 1)
    return MultichannelSpectrum(
        data, frame_hop=max(fft_size // 2, 1), fft_size=fft_size, sample_rate=sample_rate
    )
