"""Pairwise-error and diversity analysis of OTFS codewords.

A delay-Doppler grid ``x`` is "encoded" per path as
``c_i = Pi^(l_i) (F_N^H kron I_M) vec(x)``: an IDFT along Doppler followed by
the path's delay permutation. Entry ``m*N + n`` of ``c_i`` is the sample seen
at slot ``n``, offset ``m``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import PathSpec
from .detectors import Constellation
from .transforms import as_grid, vec

ZERO_TOL = 1e-9


def _delays(paths) -> list[int]:
    return [p.delay_tap if isinstance(p, PathSpec) else int(p) for p in paths]


@dataclass(frozen=True)
class CodewordSet:
    c: np.ndarray          # (P, NM)
    delays: tuple
    N: int
    M: int

    def entry(self, i: int, n: int, m: int) -> complex:
        return complex(self.c[i, m * self.N + n])


def build_codewords(x, paths) -> CodewordSet:
    """Per-path codewords of grid ``x``; ``paths`` are :class:`PathSpec` objects or delay taps."""
    x = as_grid(x, "delay-Doppler grid")
    N, M = x.shape
    delays = _delays(paths)
    s = np.fft.ifft(x, axis=0, norm="ortho")   # (F_N^H kron I_M) in grid form
    # ideal-pulse delay permutation: cyclic shift along the within-slot axis
    c = np.stack([vec(np.roll(s, l, axis=1)) for l in delays])
    return CodewordSet(c, tuple(delays), N, M)


def codeword_difference(x, x_tilde, paths) -> np.ndarray:
    """``c - c~`` as a ``(P, NM)`` array."""
    return build_codewords(x, paths).c - build_codewords(x_tilde, paths).c


def effective_r(x, x_tilde, paths, tol: float = ZERO_TOL) -> int:
    """Number of sample positions where the stacked path codewords differ."""
    d = codeword_difference(x, x_tilde, paths)
    return int(np.count_nonzero(np.any(np.abs(d) > tol, axis=0)))


def hamming_distance(x, x_tilde, tol: float = ZERO_TOL) -> int:
    """Hamming distance between the single-path (zero-delay) codewords."""
    return effective_r(x, x_tilde, [0], tol)


@dataclass(frozen=True)
class PepBound:
    bound: float
    high_snr_bound: float
    r: int
    eigenvalues: np.ndarray = field(repr=False)


def pep_chernoff(x, x_tilde, paths, n0: float, tol: float = ZERO_TOL) -> PepBound:
    """Chernoff bound on the pairwise error probability under i.i.d. unit Rayleigh fading samples.

    Each sample position contributes a rank-one matrix whose only non-zero
    eigenvalue is ``lambda = ||c_{n,m} - c~_{n,m}||^2`` (over paths), giving
    ``prod 1 / (1 + lambda / (4 n0))``. ``high_snr_bound`` is the asymptote
    ``prod (lambda / (4 n0))^(-1)`` over the ``r`` non-zero terms.
    """
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    d = codeword_difference(x, x_tilde, paths)
    lam = np.sum(np.abs(d) ** 2, axis=0)
    nz = lam[lam > tol ** 2]
    bound = float(np.prod(1.0 / (1.0 + nz / (4.0 * n0))))
    high = float(np.prod(4.0 * n0 / nz)) if nz.size else 1.0
    return PepBound(bound, high, int(nz.size), lam)


def pair_matrix(x, x_tilde, paths, n: int, m: int) -> np.ndarray:
    """Hermitian ``P x P`` matrix ``d d^H`` of codeword differences at sample ``(n, m)``."""
    d = codeword_difference(x, x_tilde, paths)
    N = np.asarray(x).shape[0]
    col = d[:, m * N + n]
    return np.outer(col, col.conj())


def fading_weights(c, n: int, m: int) -> np.ndarray:
    """Row vector of per-path weights multiplying the codeword differences at ``(n, m)``.

    Gain, fading sample, the slot-rate Doppler phase and the constant
    ``exp(-j2pi l nu / NM)`` phase of the ideal-pulse model.
    """
    N, M = c.N, c.M
    return np.array([
        p.gain * f.samples[n, m] * np.exp(2j * np.pi * n * p.doppler / N)
        * np.exp(-2j * np.pi * p.delay_tap * p.doppler / (N * M))
        for p, f in zip(c.paths, c.fading)
    ])


def quadratic_form_energy(c, x, x_tilde) -> float:
    """``sum_{n,m} Omega C Omega^H`` for channel ``c`` and the pair ``(x, x~)``."""
    total = 0.0
    N, M = c.N, c.M
    for n in range(N):
        for m in range(M):
            w = fading_weights(c, n, m)
            C = pair_matrix(x, x_tilde, c.paths, n, m)
            total += float(np.real(w @ C @ w.conj()))
    return total


@dataclass
class DiversityHistogram:
    counts: dict
    N: int
    constellation: str
    pairs: int
    exhaustive: bool
    collinear_mismatches: int = 0

    def fraction(self, distance: int) -> float:
        return self.counts.get(distance, 0) / self.pairs if self.pairs else 0.0

    @property
    def full_diversity_fraction(self) -> float:
        return self.fraction(self.N)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["hamming", "count"])
            for k in sorted(self.counts):
                w.writerow([k, self.counts[k]])


def dft_collinear(d, tol: float = 1e-9) -> bool:
    """True when ``d`` is a non-zero multiple of some column of the DFT matrix."""
    d = np.asarray(d, dtype=np.complex128)
    N = d.size
    nrm2 = np.vdot(d, d).real
    if nrm2 <= tol:
        return False
    cols = np.exp(-2j * np.pi * np.outer(np.arange(N), np.arange(N)) / N)
    proj = np.abs(cols.conj().T @ d) ** 2 / N
    return bool(np.any(np.abs(proj - nrm2) <= tol * max(1.0, nrm2)))


def diversity_distribution(N: int, cons: Constellation, sample_budget: int = 2**20,
                           rng: np.random.Generator | None = None,
                           check_collinearity: bool = False) -> DiversityHistogram:
    """Histogram of Hamming weights of ``IDFT(a - a~)`` over distinct pairs from ``cons^N``.

    Enumerates every unordered pair when their number fits in
    ``sample_budget``; otherwise samples that many random distinct pairs.
    With ``check_collinearity`` each pair's weight-one status is compared with
    :func:`dft_collinear` and disagreements are counted.
    """
    Q = cons.order
    n_vec = Q ** N
    total_pairs = n_vec * (n_vec - 1) // 2
    exhaustive = total_pairs <= sample_budget
    base = Q ** np.arange(N - 1, -1, -1, dtype=np.int64)

    def vectors(ids):
        return cons.points[(ids[:, None] // base[None, :]) % Q]

    counts: dict[int, int] = {}
    mismatches = 0
    if exhaustive:
        iu, ju = np.triu_indices(n_vec, k=1)
        chunks = [(iu[s:s + 65536], ju[s:s + 65536]) for s in range(0, iu.size, 65536)]
        n_pairs = total_pairs
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        a = rng.integers(0, n_vec, size=sample_budget)
        b = (a + rng.integers(1, n_vec, size=sample_budget)) % n_vec
        chunks = [(a[s:s + 65536], b[s:s + 65536]) for s in range(0, sample_budget, 65536)]
        n_pairs = sample_budget
    for ia, ib in chunks:
        diff = vectors(ia) - vectors(ib)
        w = np.count_nonzero(np.abs(np.fft.ifft(diff, axis=1, norm="ortho")) > ZERO_TOL, axis=1)
        vals, cnt = np.unique(w, return_counts=True)
        for v, k in zip(vals, cnt):
            counts[int(v)] = counts.get(int(v), 0) + int(k)
        if check_collinearity:
            for row, weight in zip(diff, w):
                mismatches += int((weight == 1) != dft_collinear(row))
    return DiversityHistogram(counts, N, cons.name, n_pairs, exhaustive, mismatches)


def condition_number(H) -> float:
    """Ratio of extreme singular values; ``inf`` for a numerically singular operator."""
    Hd = H.dense if hasattr(H, "dense") else np.asarray(H)
    s = np.linalg.svd(Hd, compute_uv=False)
    if s[-1] <= s[0] * np.finfo(float).eps * max(Hd.shape):
        return float("inf")
    return float(s[0] / s[-1])



@dataclass(frozen=True)
class PepEstimate:
    mean: float
    stderr: float
    draws: int


def pep_monte_carlo(x, x_tilde, paths, n0: float, draws: int = 100_000,
                    rng: np.random.Generator | None = None, batch: int = 20_000) -> PepEstimate:
    """Average of the conditional PEP ``Q(sqrt(E / (2 n0)))`` over i.i.d. CN(0,1) fading weights.

    ``E = sum_{n,m} |sum_i w_{i,n,m} (c^i - c~^i)_{n,m}|^2`` is the received
    distance between the two hypotheses for one weight draw.
    """
    from scipy.special import erfc

    if n0 <= 0:
        raise ValueError("n0 must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    d = codeword_difference(x, x_tilde, paths)       # (P, NM)
    total = total_sq = 0.0
    done = 0
    while done < draws:
        b = min(batch, draws - done)
        w = (rng.standard_normal((b,) + d.shape) + 1j * rng.standard_normal((b,) + d.shape)) / np.sqrt(2)
        E = np.sum(np.abs(np.sum(w * d[None], axis=1)) ** 2, axis=1)
        q = 0.5 * erfc(np.sqrt(E / (4.0 * n0)))
        total += q.sum()
        total_sq += np.sum(q ** 2)
        done += b
    mean = total / draws
    var = max(total_sq / draws - mean ** 2, 0.0)
    return PepEstimate(float(mean), float(np.sqrt(var / draws)), int(draws))
