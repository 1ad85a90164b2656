"""Time-domain OTFS/OFDM waveform with the rectangular prototype pulse.

Everything is sampled at ``M * delta_f`` so one symbol period ``T`` holds
exactly ``M`` samples and the frame holds ``N * M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import as_grid


@dataclass(frozen=True)
class FrameParams:
    """Frame geometry on the critically sampled lattice ``T * delta_f = 1``."""

    N: int
    M: int
    delta_f: float = 15e3
    carrier_hz: float = 4e9
    T: float | None = None

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError(f"N and M must be >= 1, got N={self.N}, M={self.M}")
        if self.delta_f <= 0 or self.carrier_hz <= 0:
            raise ValueError("delta_f and carrier_hz must be positive")
        if self.T is None:
            object.__setattr__(self, "T", 1.0 / self.delta_f)
        elif not np.isclose(self.T * self.delta_f, 1.0, rtol=1e-12, atol=0.0):
            raise ValueError(f"T*delta_f must equal 1, got {self.T * self.delta_f}")

    @property
    def sample_rate(self) -> float:
        return self.M * self.delta_f

    @property
    def doppler_resolution(self) -> float:
        """Width of one Doppler bin, ``1/(N T)`` in Hz."""
        return 1.0 / (self.N * self.T)


@dataclass(frozen=True)
class TimeSignal:
    """Complex baseband samples, optionally led by ``cp_len`` cyclic-prefix samples."""

    samples: np.ndarray
    sample_rate: float
    cp_len: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1:
            raise ValueError("samples must be 1-D")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if self.cp_len < 0 or self.cp_len > s.size:
            raise ValueError(f"invalid cp_len {self.cp_len} for {s.size} samples")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def body(self) -> np.ndarray:
        """Samples after the cyclic prefix."""
        return self.samples[self.cp_len:]


def rect_pulse(M: int) -> np.ndarray:
    """Unit-energy rectangular pulse over one symbol period."""
    return np.full(M, 1.0 / np.sqrt(M), dtype=np.complex128)


def add_cp(s: TimeSignal, cp_len: int) -> TimeSignal:
    """Prepend a copy of the last ``cp_len`` samples of an unprefixed signal."""
    if s.cp_len:
        raise ValueError("signal already carries a cyclic prefix")
    if cp_len < 0 or cp_len > len(s):
        raise ValueError(f"cp_len must be in [0, {len(s)}], got {cp_len}")
    body = s.samples
    return TimeSignal(np.concatenate([body[len(body) - cp_len:], body]), s.sample_rate, cp_len)


def remove_cp(s: TimeSignal) -> TimeSignal:
    return TimeSignal(s.body.copy(), s.sample_rate, 0)


def heisenberg_modulate(X, p: FrameParams, cp_len: int = 0) -> TimeSignal:
    """Modulate a time-frequency grid onto the rectangular Weyl-Heisenberg basis.

    Produces ``s[nM + u] = M^(-1/2) sum_m X[n, m] exp(j2pi mu/M)`` and then
    prepends a single frame-level cyclic prefix of ``cp_len`` samples.

    Raises
    ------
    ValueError
        If ``X`` is not ``N x M`` or ``cp_len`` is outside ``[0, M)``.
    """
    X = as_grid(X, "time-frequency grid")
    if X.shape != (p.N, p.M):
        raise ValueError(f"grid shape {X.shape} does not match frame ({p.N}, {p.M})")
    if not 0 <= cp_len < p.M:
        raise ValueError(f"cp_len must satisfy 0 <= cp_len < M={p.M}, got {cp_len}")
    s = np.fft.ifft(X, axis=1, norm="ortho").ravel()
    return add_cp(TimeSignal(s, p.sample_rate, 0), cp_len)


def matched_filter_demodulate(r: TimeSignal, p: FrameParams) -> np.ndarray:
    """Project the received frame onto the basis: ``Y[n, m] = M^(-1/2) sum_u r[nM+u] exp(-j2pi mu/M)``.

    The cyclic prefix recorded in ``r.cp_len`` is discarded first.
    """
    body = r.body
    if body.size != p.N * p.M:
        raise ValueError(f"expected {p.N * p.M} samples after CP removal, got {body.size}")
    return np.fft.fft(body.reshape(p.N, p.M), axis=1, norm="ortho")


def ambiguity(g, tau_samples: int, nu: float) -> complex:
    """Discrete cross-ambiguity ``A(tau, nu) = sum_t g[t] conj(g[t - tau]) exp(-j2pi nu (t - tau))``.

    ``g`` is zero outside its support, ``tau_samples`` is an integer lag and
    ``nu`` is in cycles per sample. For a unit-energy pulse ``|A| <= A(0, 0) = 1``.
    """
    g = np.asarray(g, dtype=np.complex128).ravel()
    L = g.size
    tau = int(tau_samples)
    if abs(tau) >= L:
        return 0j
    t = np.arange(max(0, tau), min(L, L + tau))
    return complex(np.sum(g[t] * np.conj(g[t - tau]) * np.exp(-2j * np.pi * nu * (t - tau))))
