"""Shared independent reference implementations (direct sums and naive loops)."""

import numpy as np
import pytest


def direct_isfft(x):
    N, M = x.shape
    X = np.zeros((N, M), dtype=complex)
    for n in range(N):
        for m in range(M):
            for k in range(N):
                for l in range(M):
                    X[n, m] += x[k, l] * np.exp(2j * np.pi * (n * k / N - m * l / M))
    return X / np.sqrt(N * M)


def direct_sfft(X):
    N, M = X.shape
    y = np.zeros((N, M), dtype=complex)
    for k in range(N):
        for l in range(M):
            for n in range(N):
                for m in range(M):
                    y[k, l] += X[n, m] * np.exp(-2j * np.pi * (n * k / N - m * l / M))
    return y / np.sqrt(N * M)


def naive_channel(body, c, cp_len):
    """Per-sample loop of the P-path rapid-fading model on an ``NM`` frame with CP."""
    N, M = c.N, c.M
    NM = N * M
    framed = np.concatenate([body[NM - cp_len:], body]) if cp_len else body.copy()
    out = np.zeros(NM + cp_len, dtype=complex)
    for idx in range(NM + cp_len):
        t = idx - cp_len
        for p, f in zip(c.paths, c.fading):
            src = idx - p.delay_tap
            if src < 0:
                continue
            g = f.samples[(t % NM) // M, (t % NM) % M]
            out[idx] += g * p.gain * framed[src] * np.exp(2j * np.pi * p.doppler * (t - p.delay_tap) / NM)
    return out


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
