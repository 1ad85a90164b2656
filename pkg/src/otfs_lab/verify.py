"""Basis-probing oracle: delay-Doppler operators measured through the time-domain chain.

Nothing here touches :mod:`otfs_lab.dd_cir`'s formulas; the operator is
recovered column by column by pushing unit grids through
ISFFT -> modulate -> CP -> channel -> strip CP -> demodulate -> SFFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, apply_channel, make_rng, sample_channel
from .transforms import isfft, sfft, unvec, vec
from .waveform import FrameParams, heisenberg_modulate, matched_filter_demodulate


def pipeline_response(c: ChannelRealization, x, cp_len: int | None = None) -> np.ndarray:
    """Noiseless received delay-Doppler grid for transmitted grid ``x``."""
    cp = c.max_delay if cp_len is None else cp_len
    s = heisenberg_modulate(isfft(x), c.params, cp)
    r = apply_channel(s, c)
    return sfft(matched_filter_demodulate(r, c.params))


def pipeline_hdd(c: ChannelRealization, cp_len: int | None = None) -> np.ndarray:
    """Dense ``NM x NM`` operator measured on every basis grid."""
    N, M = c.N, c.M
    NM = N * M
    H = np.empty((NM, NM), dtype=np.complex128)
    for j in range(NM):
        e = np.zeros(NM, dtype=np.complex128)
        e[j] = 1.0
        H[:, j] = vec(pipeline_response(c, unvec(e, N, M), cp_len))
    return H


@dataclass
class OracleReport:
    configs: int
    max_abs_error: float
    worst: dict


def random_realization(rng: np.random.Generator, N: int, M: int, P: int) -> ChannelRealization:
    """Random rect-pulse test channel: Rayleigh or Rician fading, fractional Doppler spanning the frame."""
    kind = str(rng.choice(["rayleigh", "rician", "block", "constant"]))
    p = FrameParams(N, M)
    v_max = rng.uniform(0.0, 0.95) * p.delta_f
    return sample_channel(p, P, v_max, kind, rng=rng)


def keystone_check(trials: int = 200, seed: int = 0, sizes=(2, 4, 8), path_counts=(1, 2, 4),
                   N: int | None = None, M: int | None = None, P: int | None = None,
                   operator=None) -> OracleReport:
    """Compare an analytic operator builder against :func:`pipeline_hdd` on random channels."""
    if operator is None:
        from .dd_cir import rect_pulse_hdd as operator
    rng = make_rng(seed)
    worst = {"error": 0.0}
    for t in range(trials):
        n = N if N is not None else int(rng.choice(sizes))
        m = M if M is not None else int(rng.choice(sizes))
        q = P if P is not None else int(rng.choice(path_counts))
        c = random_realization(rng, n, m, q)
        err = float(np.max(np.abs(operator(c).dense - pipeline_hdd(c))))
        if err > worst["error"] or t == 0:
            worst = {"error": err, "trial": t, "N": n, "M": m, "P": q}
    return OracleReport(trials, worst["error"], worst)
