"""Time-frequency and delay-Doppler channel responses of a rapid-fading channel.

All delay-Doppler operators act on column-wise vectorized grids (see
:mod:`otfs_lab.transforms`) and carry every scalar prefactor, so that the
noiseless input-output relation is simply ``vec(y) = H @ vec(x)``.

For path ``i`` with gain ``h``, delay tap ``lt`` and Doppler ``nu`` (bins),
the Doppler response seen at output delay ``l`` is the circulant block::

    G(k, k') = sum_n gamma[n, l] exp(-j2pi n (k - k' - nu) / N)

which equals the circular convolution of ``DFT(gamma[:, l]) / N`` with the
Dirichlet kernel ``beta``. Output delay ``l`` couples only to input delay
``(l - lt) mod M``; with the ideal pulse the block is scaled by
``h exp(-j2pi lt nu / NM) / N`` and with the rectangular pulse by
``h exp(j2pi (l - lt) nu / NM) / N``, the latter picking up an extra
``exp(-j2pi k'/N)`` column phase for ``l < lt`` (samples that crossed the
slot boundary).
"""

from __future__ import annotations

import contextlib
import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .channel import ChannelRealization, FadingProcess
from .errors import PreconditionError
from .transforms import circ_conv, kron_dft_identity, vec

MAX_DENSE_DIM = 1024
PULSES = ("ideal", "rect")

_GOLDEN_MAGIC = b"OTFSHDD\x01"
_GOLDEN_HEADER = struct.Struct("<8sIIBB")
_PULSE_CODES = {"ideal": 0, "rect": 1, "none": 2}
_SOURCE_CODES = {"analytic": 0, "matrix-product": 1, "pipeline": 2}


@dataclass(frozen=True)
class DdChannelOperator:
    """The ``NM x NM`` delay-Doppler input-output matrix, dense or CSR."""

    matrix: object
    N: int
    M: int
    pulse: str = "rect"
    source: str = "analytic"

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.matrix.toarray()
        return self.matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, x) -> np.ndarray:
        """``H @ vec(x)``; accepts a grid or an already vectorized array."""
        x = np.asarray(x, dtype=np.complex128)
        v = vec(x) if x.ndim == 2 else x
        return self.matrix @ v

    def support(self, tol: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of entries with magnitude above ``tol``."""
        if self.is_sparse:
            coo = self.matrix.tocoo()
            keep = np.abs(coo.data) > tol
            return coo.row[keep], coo.col[keep]
        return np.nonzero(np.abs(self.matrix) > tol)


@dataclass(frozen=True)
class TfCir:
    """Time-frequency channel response restricted to ``n' in {n, n-1}``.

    ``same[n, m, m']`` couples ``X[n, m']`` into ``Y[n, m]`` and
    ``prev[n, m, m']`` couples ``X[(n-1) mod N, m']`` (inter-symbol
    interference through the frame cyclic prefix).
    """

    same: np.ndarray
    prev: np.ndarray
    pulse: str

    @property
    def N(self) -> int:
        return self.same.shape[0]

    @property
    def M(self) -> int:
        return self.same.shape[1]

    def entry(self, n: int, m: int, n_prime: int, m_prime: int) -> complex:
        if n_prime % self.N == n % self.N:
            return complex(self.same[n, m, m_prime])
        if n_prime % self.N == (n - 1) % self.N:
            return complex(self.prev[n, m, m_prime])
        return 0j

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.complex128)
        return (np.einsum("nab,nb->na", self.same, X)
                + np.einsum("nab,nb->na", self.prev, np.roll(X, 1, axis=0)))


def beta_kernel(N: int, k_delta, k_nu: int = 0, kappa_nu: float = 0.0):
    """Dirichlet kernel ``sum_{n<N} exp(-j2pi n (k_delta - k_nu - kappa_nu) / N)``.

    Closed form ``exp(-j pi x (N-1)/N) sin(pi x) / sin(pi x / N)`` with
    ``x = k_delta - k_nu - kappa_nu``; where ``x/N`` is (numerically) an
    integer the sum is evaluated term by term instead.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    x = np.asarray(k_delta, dtype=float) - k_nu - kappa_nu
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty(x.shape, dtype=np.complex128)
    den = np.sin(np.pi * x / N)
    near = np.abs(den) < 1e-6
    ok = ~near
    out[ok] = (np.exp(-1j * np.pi * x[ok] * (N - 1) / N)
               * np.sin(np.pi * x[ok]) / den[ok])
    if np.any(near):
        n = np.arange(N)
        out[near] = np.exp(-2j * np.pi * np.outer(x[near], n) / N).sum(axis=1)
    return complex(out[0]) if scalar else out


def tf_cir_gamma(gamma, n: int, m: int, m_prime: int, n_prime: int | None = None) -> complex:
    """Response of a sampled fading process between lattice points.

    Equal to ``(1/M) sum_u gamma[n, u] exp(-j2pi u (m - m') / M)`` on the same
    slot and zero across slots.
    """
    g = gamma.samples if isinstance(gamma, FadingProcess) else np.asarray(gamma)
    if n_prime is not None and n_prime != n:
        return 0j
    M = g.shape[1]
    u = np.arange(M)
    return complex(np.mean(g[n] * np.exp(-2j * np.pi * u * (m - m_prime) / M)))


def tf_cir(c: ChannelRealization, pulse: str = "rect") -> TfCir:
    """Time-frequency channel coefficients for the ideal or rectangular pulse."""
    _check_pulse(pulse)
    N, M = c.N, c.M
    NM = N * M
    u = np.arange(M)
    m = np.arange(M)
    same = np.zeros((N, M, M), dtype=np.complex128)
    prev = np.zeros((N, M, M), dtype=np.complex128)
    for path, fad in zip(c.paths, c.fading):
        lt, nu, h = path.delay_tap, path.doppler, path.gain
        g = fad.samples
        slot_phase = np.exp(2j * np.pi * nu * np.arange(N) / N)
        if pulse == "ideal":
            # E[n, m, m'] = sum_u gamma[n, u] exp(-j2pi u (m - m') / M)
            spread = np.einsum("nu,mu,pu->nmp", g,
                               np.exp(-2j * np.pi * np.outer(m, u) / M),
                               np.exp(2j * np.pi * np.outer(m, u) / M))
            coef = h * np.exp(-2j * np.pi * lt * nu / NM) * np.exp(-2j * np.pi * m * lt / M)
            same += spread * slot_phase[:, None, None] * coef[None, None, :] / M
            continue
        w = g * np.exp(2j * np.pi * nu * (u - lt) / NM)[None, :]
        rx = np.exp(-2j * np.pi * np.outer(m, u) / M)
        tx = np.exp(2j * np.pi * np.outer(m, u - lt) / M)
        cur = u >= lt
        same += h * slot_phase[:, None, None] * np.einsum(
            "nu,mu,pu->nmp", w[:, cur], rx[:, cur], tx[:, cur]) / M
        if lt:
            prev += h * slot_phase[:, None, None] * np.einsum(
                "nu,mu,pu->nmp", w[:, ~cur], rx[:, ~cur], tx[:, ~cur]) / M
    return TfCir(same, prev, pulse)


def doppler_response_direct(gamma_col, nu: float, N: int) -> np.ndarray:
    """``G[k, k'] = sum_n gamma[n] exp(-j2pi n (k - k' - nu) / N)`` by explicit summation."""
    g = np.asarray(gamma_col, dtype=np.complex128)
    n = np.arange(N)[:, None, None]
    d = (np.arange(N)[:, None] - np.arange(N)[None, :])[None, :, :]
    return np.sum(g[:, None, None] * np.exp(-2j * np.pi * n * (d - nu) / N), axis=0)


def doppler_response_conv(gamma_col, k_nu: int, kappa_nu: float, N: int) -> np.ndarray:
    """Same block as :func:`doppler_response_direct`, built as ``(DFT(gamma)/N) (*) beta``.

    Column ``k'`` is the circular convolution of the normalized fading
    spectrum with the Dirichlet kernel shifted to ``k'``.
    """
    spectrum = np.fft.fft(np.asarray(gamma_col, dtype=np.complex128)) / N
    d = np.arange(N)
    out = np.empty((N, N), dtype=np.complex128)
    for kp in range(N):
        out[:, kp] = circ_conv(spectrum, beta_kernel(N, d - kp, k_nu, kappa_nu))
    return out


def _check_pulse(pulse: str) -> None:
    if pulse not in PULSES:
        raise ValueError(f"pulse must be one of {PULSES}, got {pulse!r}")


def _doppler_mask(N: int, k_nu: int, window: int | None) -> np.ndarray | None:
    if window is None or 2 * window + 1 >= N:
        return None
    d = (np.arange(N)[:, None] - np.arange(N)[None, :] - k_nu) % N
    return np.minimum(d, N - d) <= window


def _assemble(c_paths, N: int, M: int, pulse: str, block_fn, *,
              max_dense: int, doppler_window: int | None, source: str) -> DdChannelOperator:
    """Place per-path, per-output-delay Doppler blocks into the NM x NM operator."""
    NM = N * M
    dense = NM <= max_dense
    H = np.zeros((NM, NM), dtype=np.complex128) if dense else None
    rows, cols, vals = [], [], []
    kp = np.arange(N)
    isi_phase = np.exp(-2j * np.pi * kp / N)
    rr, cc = np.meshgrid(kp, kp, indexing="ij")
    for path, fad in c_paths:
        lt, nu, h = path.delay_tap, path.doppler, path.gain
        mask = _doppler_mask(N, path.doppler_int, doppler_window)
        for l in range(M):
            G = block_fn(fad, l, path)
            if pulse == "ideal":
                B = G * (h * np.exp(-2j * np.pi * lt * nu / NM) / N)
            else:
                B = G * (h * np.exp(2j * np.pi * (l - lt) * nu / NM) / N)
                if l < lt:
                    B = B * isi_phase[None, :]
            if mask is not None:
                B = np.where(mask, B, 0)
            lp = (l - lt) % M
            if dense:
                H[l * N:(l + 1) * N, lp * N:(lp + 1) * N] += B
            else:
                keep = B != 0
                rows.append((l * N + rr)[keep])
                cols.append((lp * N + cc)[keep])
                vals.append(B[keep])
    if dense:
        return DdChannelOperator(H, N, M, pulse, source)
    mat = sp.csr_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(NM, NM))
    mat.sum_duplicates()
    return DdChannelOperator(mat, N, M, pulse, source)


def quasi_static_hdd(paths, N: int, M: int, fading=None, pulse: str = "ideal", *,
                     max_dense: int = MAX_DENSE_DIM,
                     doppler_window: int | None = None) -> DdChannelOperator:
    """Delay-Doppler operator of a channel whose path gains are constant over the frame.

    Each path contributes the Dirichlet kernel ``beta`` along Doppler at a
    single delay offset. ``pulse="ideal"`` is the textbook 2-D convolution
    relation; ``pulse="rect"`` adds the rectangular-pulse phase terms.

    Raises
    ------
    PreconditionError
        If ``fading`` is supplied and any process is not identically one.
    """
    _check_pulse(pulse)
    if fading is not None and not all(
            (f.is_constant if isinstance(f, FadingProcess) else np.all(np.asarray(f) == 1))
            for f in fading):
        raise PreconditionError("quasi-static operator requires constant fading")
    d = np.arange(N)

    def block(_fad, _l, path):
        b = beta_kernel(N, d, path.doppler_int, path.doppler_frac)
        return b[(d[:, None] - d[None, :]) % N]

    return _assemble([(p, None) for p in paths], N, M, pulse, block,
                     max_dense=max_dense, doppler_window=doppler_window, source="analytic")


def _gamma_block(method: str):
    def block(fad, l, path):
        col = fad.samples[:, l]
        if method == "direct":
            return doppler_response_direct(col, path.doppler, len(col))
        return doppler_response_conv(col, path.doppler_int, path.doppler_frac, len(col))
    return block


def ideal_pulse_hdd(c: ChannelRealization, *, method: str = "direct",
                    max_dense: int = MAX_DENSE_DIM,
                    doppler_window: int | None = None) -> DdChannelOperator:
    """Delay-Doppler operator with the ideal (bi-orthogonal) pulse.

    ``method="direct"`` sums the fading column against the Doppler phase;
    ``method="conv"`` forms the same blocks as fading spectrum (*) beta.
    """
    if method not in ("direct", "conv"):
        raise ValueError(f"unknown method {method!r}")
    return _assemble(zip(c.paths, c.fading), c.N, c.M, "ideal", _gamma_block(method),
                     max_dense=max_dense, doppler_window=doppler_window, source="analytic")


def rect_pulse_hdd(c: ChannelRealization, *, method: str = "direct",
                   max_dense: int = MAX_DENSE_DIM,
                   doppler_window: int | None = None) -> DdChannelOperator:
    """Delay-Doppler operator with the rectangular pulse and one CP per frame.

    Matches the time-domain chain modulate -> CP -> channel -> strip CP ->
    demodulate -> SFFT exactly (no approximation), including fractional
    Doppler and per-sample fading.
    """
    if method not in ("direct", "conv"):
        raise ValueError(f"unknown method {method!r}")
    return _assemble(zip(c.paths, c.fading), c.N, c.M, "rect", _gamma_block(method),
                     max_dense=max_dense, doppler_window=doppler_window, source="analytic")


def pulse_hdd(c: ChannelRealization, pulse: str = "rect", **kw) -> DdChannelOperator:
    _check_pulse(pulse)
    return rect_pulse_hdd(c, **kw) if pulse == "rect" else ideal_pulse_hdd(c, **kw)


def delay_permutation(N: int, M: int, pulse: str = "ideal") -> np.ndarray:
    """One-sample delay in vec order (index ``m*N + n`` is sample ``m`` of slot ``n``).

    For the ideal pulse it is the block-circulant ``kron(C_M, I_N)`` (cyclic
    shift inside each slot); for the rectangular pulse it is the full cyclic
    shift of the ``NM``-sample frame, so delayed samples spill into the next
    slot.
    """
    _check_pulse(pulse)
    if pulse == "ideal":
        return np.kron(np.roll(np.eye(M), 1, axis=0), np.eye(N))
    NM = N * M
    n, m = np.meshgrid(np.arange(N), np.arange(M), indexing="ij")
    t = (n * M + m).ravel()
    j = (m * N + n).ravel()
    j_of_t = np.empty(NM, dtype=int)
    j_of_t[t] = j
    Pi = np.zeros((NM, NM))
    Pi[j_of_t[(t + 1) % NM], j] = 1.0
    return Pi


def doppler_diagonal(N: int, M: int, nu: float, pulse: str = "ideal") -> np.ndarray:
    """Diagonal of the Doppler matrix raised to the (real) power ``nu``, vec order.

    Ideal pulse: the Doppler phase is sampled once per slot, ``exp(j2pi n nu/N)``.
    Rectangular pulse: per sample, ``exp(j2pi t nu / NM)`` with ``t = nM + m``.
    """
    _check_pulse(pulse)
    n, m = np.meshgrid(np.arange(N), np.arange(M), indexing="ij")
    if pulse == "ideal":
        ph = np.exp(2j * np.pi * n * nu / N)
    else:
        ph = np.exp(2j * np.pi * (n * M + m) * nu / (N * M))
    return vec(ph)


def build_H_matrix(c: ChannelRealization, pulse: str = "ideal") -> np.ndarray:
    """Sample-domain channel matrix ``H = sum_i Gamma_i Delta^(nu_i) Pi^(l_i)`` in vec order.

    ``Gamma_i`` is the diagonal of fading samples with the path gain and the
    constant phase ``exp(-j2pi l_i nu_i / NM)`` folded in.
    """
    _check_pulse(pulse)
    N, M = c.N, c.M
    NM = N * M
    Pi = delay_permutation(N, M, pulse)
    H = np.zeros((NM, NM), dtype=np.complex128)
    for path, fad in zip(c.paths, c.fading):
        gam = path.gain * np.exp(-2j * np.pi * path.delay_tap * path.doppler / NM) * vec(fad.samples)
        delta = doppler_diagonal(N, M, path.doppler, pulse)
        H += (gam * delta)[:, None] * np.linalg.matrix_power(Pi, path.delay_tap)
    return H


def build_hdd_from_H(H, N: int, M: int, pulse: str = "none") -> DdChannelOperator:
    """``(F_N kron I_M) H (F_N^H kron I_M)``."""
    H = np.asarray(H, dtype=np.complex128)
    if H.shape != (N * M, N * M):
        raise ValueError(f"H has shape {H.shape}, expected {(N * M, N * M)}")
    F = kron_dft_identity(N, M)
    return DdChannelOperator(F @ H @ F.conj().T, N, M, pulse, "matrix-product")


def write_operator_csv(op: DdChannelOperator, path, tol: float = 0.0,
                       dd_indices: bool = False) -> int:
    """Write non-negligible entries as ``row,col,re,im`` (or ``k,l,kp,lp,re,im``) to a path or open text file. Returns row count."""
    rows, cols = op.support(tol)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    H = op.matrix
    vals = H[rows, cols] if not op.is_sparse else np.asarray(H.tocsr()[rows, cols]).ravel()
    N = op.N
    with (contextlib.nullcontext(path) if hasattr(path, "write")
          else open(path, "w", newline="")) as fh:
        w = csv.writer(fh, lineterminator="\n")
        if dd_indices:
            w.writerow(["k", "l", "kp", "lp", "re", "im"])
            for r, cidx, v in zip(rows, cols, vals):
                w.writerow([r % N, r // N, cidx % N, cidx // N, repr(float(v.real)), repr(float(v.imag))])
        else:
            w.writerow(["row", "col", "re", "im"])
            for r, cidx, v in zip(rows, cols, vals):
                w.writerow([int(r), int(cidx), repr(float(v.real)), repr(float(v.imag))])
    return len(rows)


def write_operator_golden(op: DdChannelOperator, path) -> None:
    """Binary dump: header ``<8sIIBB`` (magic, N, M, pulse, source) then row-major
    little-endian float64 (re, im) pairs of the dense matrix."""
    H = np.ascontiguousarray(op.dense, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_GOLDEN_HEADER.pack(_GOLDEN_MAGIC, op.N, op.M,
                                     _PULSE_CODES.get(op.pulse, 2), _SOURCE_CODES[op.source]))
        fh.write(H.tobytes())


def read_operator_golden(path) -> DdChannelOperator:
    data = Path(path).read_bytes()
    magic, N, M, pc, sc = _GOLDEN_HEADER.unpack_from(data)
    if magic != _GOLDEN_MAGIC:
        raise ValueError("not an otfs-lab operator file")
    NM = N * M
    body = np.frombuffer(data, dtype="<c16", offset=_GOLDEN_HEADER.size)
    if body.size != NM * NM:
        raise ValueError("truncated operator file")
    pulse = {v: k for k, v in _PULSE_CODES.items()}[pc]
    source = {v: k for k, v in _SOURCE_CODES.items()}[sc]
    return DdChannelOperator(body.reshape(NM, NM).astype(np.complex128), N, M, pulse, source)

