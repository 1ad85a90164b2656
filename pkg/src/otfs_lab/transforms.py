"""Discrete transforms shared by the rest of the package.

Grids are plain ``(N, M)`` complex arrays: a delay-Doppler grid is indexed
``x[k, l]`` (Doppler ``k``, delay ``l``) and a time-frequency grid ``X[n, m]``
(time slot ``n``, subcarrier ``m``). All transforms are unitary.

Vectorization is column-wise over the ``(N, M)`` grid: element ``x[k, l]``
sits at flat index ``l*N + k``, i.e. ``M`` delay-major blocks of ``N``
Doppler (or time-slot) entries. Every matrix builder uses this convention.
"""

from __future__ import annotations

import numpy as np

from .errors import ResourceLimitError

MAX_OPERATOR_DIM = 2**20


def as_grid(x, name: str = "grid") -> np.ndarray:
    """Validate and return ``x`` as a finite complex 2-D array."""
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"{name} has a zero dimension: {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def vec(x: np.ndarray) -> np.ndarray:
    """Column-wise vectorization: ``x[k, l]`` goes to index ``l*N + k``."""
    return np.asarray(x).ravel(order="F")


def unvec(v: np.ndarray, N: int, M: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.size != N * M:
        raise ValueError(f"vector of length {v.size} cannot fill a {N}x{M} grid")
    return v.reshape((N, M), order="F")


def isfft(x) -> np.ndarray:
    """Inverse symplectic finite Fourier transform, delay-Doppler to time-frequency.

    ``X[n, m] = (NM)^(-1/2) sum_{k,l} x[k, l] exp(j2pi(nk/N - ml/M))``.
    """
    x = as_grid(x, "delay-Doppler grid")
    return np.fft.ifft(np.fft.fft(x, axis=1, norm="ortho"), axis=0, norm="ortho")


def sfft(X) -> np.ndarray:
    """Symplectic finite Fourier transform; exact inverse of :func:`isfft`."""
    X = as_grid(X, "time-frequency grid")
    return np.fft.fft(np.fft.ifft(X, axis=1, norm="ortho"), axis=0, norm="ortho")


def dft_matrix(K: int) -> np.ndarray:
    """Unitary ``K``-point DFT matrix with entries ``exp(-j2pi ab/K)/sqrt(K)``."""
    if int(K) != K or K < 1:
        raise ValueError(f"DFT size must be a positive integer, got {K!r}")
    K = int(K)
    ab = np.outer(np.arange(K), np.arange(K)) % K
    return np.exp(-2j * np.pi * ab / K) / np.sqrt(K)


def kron_dft_identity(N: int, M: int, conjugate: bool = False,
                      max_dim: int = MAX_OPERATOR_DIM) -> np.ndarray:
    """The operator ``F_N kron I_M`` (or ``F_N^H kron I_M``) in this package's vec order.

    Because vectors are delay-major (index ``l*N + k``), the block that
    transforms along Doppler is the inner factor, so the matrix returned is
    ``kron(I_M, F_N)``. It equals ``P (F_N kron I_M) P^T`` with ``P`` the
    commutation permutation between the two orderings. Applied to ``vec(x)``
    it performs an ``N``-point DFT (IDFT when ``conjugate``) along each delay
    column.
    """
    if N < 1 or M < 1:
        raise ValueError(f"N and M must be positive, got N={N}, M={M}")
    if N * M > max_dim:
        raise ResourceLimitError(f"NM={N * M} exceeds the operator limit {max_dim}")
    F = dft_matrix(N)
    if conjugate:
        F = F.conj().T
    return np.kron(np.eye(M), F)


def commutation_matrix(N: int, M: int) -> np.ndarray:
    """Permutation taking row-major ``k*M + l`` order to vec order ``l*N + k``."""
    P = np.zeros((N * M, N * M))
    k, l = np.meshgrid(np.arange(N), np.arange(M), indexing="ij")
    P[(l * N + k).ravel(), (k * M + l).ravel()] = 1.0
    return P


def circ_conv(f, g) -> np.ndarray:
    """Circular convolution ``out[k] = sum_q f[q] g[(k - q) mod N]``."""
    f = np.asarray(f, dtype=np.complex128)
    g = np.asarray(g, dtype=np.complex128)
    if f.ndim != 1 or g.ndim != 1:
        raise ValueError("circ_conv expects 1-D vectors")
    if f.shape != g.shape:
        raise ValueError(f"length mismatch: {f.size} vs {g.size}")
    return np.fft.ifft(np.fft.fft(f) * np.fft.fft(g))
