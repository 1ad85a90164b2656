"""Random multipath rapid-fading channels and their time-domain application.

A realization holds ``P`` discrete paths, each with a complex gain, an
integer delay tap, an integer plus fractional Doppler bin, and a sampled
multiplicative fading process ``gamma[n, u]`` on the ``N x M`` receive
sample grid (slot ``n``, sample ``u`` within the slot).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .waveform import FrameParams, TimeSignal

SPEED_OF_LIGHT = 299_792_458.0

FADING_KINDS = ("constant", "rayleigh", "rician", "block")
DOPPLER_MODELS = ("vmax-cos", "uniform-bin")
GAIN_MODES = ("gaussian", "unit")


def make_rng(seed, *keys) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Streams for different keys are independent, so trial ``t`` always sees the
    same numbers no matter which worker runs it.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(var / 2.0)


def doppler_hz(v_kmh: float, carrier_hz: float) -> float:
    """Maximum Doppler shift for a speed in km/h."""
    return v_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT


def split_doppler(bins: float) -> tuple[int, float]:
    """Nearest-bin split of a Doppler in bin units: ``bins = k + kappa`` with ``kappa`` in [-0.5, 0.5)."""
    k = int(np.floor(bins + 0.5))
    return k, float(bins - k)


@dataclass(frozen=True)
class PathSpec:
    gain: complex
    delay_tap: int
    doppler_int: int = 0
    doppler_frac: float = 0.0

    def __post_init__(self):
        if int(self.delay_tap) != self.delay_tap or self.delay_tap < 0:
            raise ValueError(f"delay tap must be a non-negative integer, got {self.delay_tap}")
        if not -0.5 <= self.doppler_frac < 0.5:
            raise ValueError(f"fractional Doppler must lie in [-0.5, 0.5), got {self.doppler_frac}")
        object.__setattr__(self, "gain", complex(self.gain))
        object.__setattr__(self, "delay_tap", int(self.delay_tap))
        object.__setattr__(self, "doppler_int", int(self.doppler_int))
        object.__setattr__(self, "doppler_frac", float(self.doppler_frac))

    @property
    def doppler(self) -> float:
        """Doppler in units of the bin width ``1/(NT)``."""
        return self.doppler_int + self.doppler_frac


@dataclass(frozen=True)
class FadingProcess:
    kind: str
    samples: np.ndarray

    def __post_init__(self):
        if self.kind not in FADING_KINDS:
            raise ValueError(f"unknown fading kind {self.kind!r}")
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 2 or not np.all(np.isfinite(s)):
            raise ValueError("fading samples must be a finite N x M array")
        if self.kind == "constant" and not np.all(s == 1):
            raise ValueError("constant fading must be identically 1")
        if self.kind == "block" and not np.all(s == s[:, :1]):
            raise ValueError("block fading must be constant within each slot")
        object.__setattr__(self, "samples", s)

    @classmethod
    def constant(cls, N: int, M: int) -> "FadingProcess":
        return cls("constant", np.ones((N, M), dtype=np.complex128))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.samples == 1))


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple
    fading: tuple
    params: FrameParams
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        paths = tuple(self.paths)
        fading = tuple(self.fading) if self.fading is not None else ()
        if not paths:
            raise ValueError("a channel needs at least one path")
        N, M = self.params.N, self.params.M
        if not fading:
            fading = tuple(FadingProcess.constant(N, M) for _ in paths)
        if len(fading) != len(paths):
            raise ValueError("one fading process per path is required")
        for p in paths:
            if p.delay_tap >= M:
                raise ValueError(f"delay tap {p.delay_tap} violates the underspread bound M={M}")
            if abs(p.doppler) >= N:
                raise ValueError(f"Doppler {p.doppler} bins violates the underspread bound N={N}")
        for f in fading:
            if f.samples.shape != (N, M):
                raise ValueError(f"fading shape {f.samples.shape} != ({N}, {M})")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "fading", fading)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def M(self) -> int:
        return self.params.M

    @property
    def max_delay(self) -> int:
        return max(p.delay_tap for p in self.paths)

    @property
    def is_quasi_static(self) -> bool:
        return all(f.is_constant for f in self.fading)

    def to_json(self) -> str:
        return json.dumps(realization_to_dict(self), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        return realization_from_dict(json.loads(text))


def realization_to_dict(c: ChannelRealization) -> dict:
    p = c.params
    return {
        "format": "otfs-lab-channel",
        "version": 1,
        "seed": int(c.seed),
        "params": {"N": p.N, "M": p.M, "delta_f": p.delta_f, "carrier_hz": p.carrier_hz},
        "paths": [
            {"gain_re": q.gain.real, "gain_im": q.gain.imag, "delay_tap": q.delay_tap,
             "doppler_int": q.doppler_int, "doppler_frac": q.doppler_frac}
            for q in c.paths
        ],
        "fading": [
            {"kind": f.kind, "re": f.samples.real.tolist(), "im": f.samples.imag.tolist()}
            for f in c.fading
        ],
    }


def realization_from_dict(d: dict) -> ChannelRealization:
    if d.get("format") != "otfs-lab-channel":
        raise ValueError("not an otfs-lab channel document")
    params = FrameParams(**d["params"])
    paths = [PathSpec(complex(q["gain_re"], q["gain_im"]), q["delay_tap"],
                      q["doppler_int"], q["doppler_frac"]) for q in d["paths"]]
    fading = [FadingProcess(f["kind"], np.asarray(f["re"]) + 1j * np.asarray(f["im"]))
              for f in d["fading"]]
    return ChannelRealization(paths, fading, params, d.get("seed", 0))


def save_realization(c: ChannelRealization, path) -> None:
    Path(path).write_text(c.to_json())


def load_realization(path) -> ChannelRealization:
    return ChannelRealization.from_json(Path(path).read_text())


def _sample_fading(kind: str, N: int, M: int, rng: np.random.Generator,
                   rician_mean: float, rician_var: float) -> FadingProcess:
    if kind == "constant":
        return FadingProcess.constant(N, M)
    if kind == "rayleigh":
        return FadingProcess(kind, crandn(rng, (N, M)))
    if kind == "rician":
        power = abs(rician_mean) ** 2 + rician_var
        g = (rician_mean + crandn(rng, (N, M), rician_var)) / np.sqrt(power)
        return FadingProcess(kind, g)
    if kind == "block":
        return FadingProcess(kind, np.repeat(crandn(rng, (N, 1)), M, axis=1))
    raise ValueError(f"unknown fading kind {kind!r}")


def sample_channel(p: FrameParams, P: int, v_max_hz: float, fading_kind: str = "rayleigh",
                   rng_seed: int = 0, *, rng: np.random.Generator | None = None,
                   doppler_model: str = "vmax-cos", gain_mode: str = "gaussian",
                   rician_mean: float = 0.8, rician_var: float = 0.36) -> ChannelRealization:
    """Draw a random ``P``-path rapid-fading channel.

    Gains are ``CN(0, 1/P)`` (``gain_mode="gaussian"``) or the constant
    ``1/sqrt(P)`` (``"unit"``); fading samples always have unit mean power, so
    each path carries mean power ``1/P``. Delay taps are uniform on
    ``{0..M-1}``. With ``doppler_model="vmax-cos"`` the shift is
    ``v_max cos(theta)``, ``theta ~ U(0, pi)``, split into nearest integer
    bin and fractional remainder; ``"uniform-bin"`` draws an integer bin
    uniformly from ``{0..N-1}``.

    ``rng`` overrides ``rng_seed`` when given; ``rng_seed`` is still recorded
    on the realization.
    """
    if int(P) != P or P < 1:
        raise ValueError(f"number of paths must be >= 1, got {P}")
    if fading_kind not in FADING_KINDS:
        raise ValueError(f"unknown fading kind {fading_kind!r}")
    if doppler_model not in DOPPLER_MODELS:
        raise ValueError(f"unknown Doppler model {doppler_model!r}")
    if gain_mode not in GAIN_MODES:
        raise ValueError(f"unknown gain mode {gain_mode!r}")
    if v_max_hz < 0:
        raise ValueError("v_max_hz must be non-negative")
    P = int(P)
    if rng is None:
        rng = make_rng(rng_seed)
    N, M = p.N, p.M

    if gain_mode == "gaussian":
        gains = crandn(rng, P, 1.0 / P)
    else:
        gains = np.full(P, 1.0 / np.sqrt(P), dtype=np.complex128)
    delays = rng.integers(0, M, size=P)
    if doppler_model == "vmax-cos":
        theta = rng.uniform(0.0, np.pi, size=P)
        bins = v_max_hz * np.cos(theta) * N * p.T
        dopplers = [split_doppler(b) for b in bins]
    else:
        dopplers = [(int(k), 0.0) for k in rng.integers(0, N, size=P)]
    fading = [_sample_fading(fading_kind, N, M, rng, rician_mean, rician_var) for _ in range(P)]
    paths = [PathSpec(g, d, k, kap) for g, d, (k, kap) in zip(gains, delays, dopplers)]
    return ChannelRealization(paths, fading, p, int(rng_seed),
                              {"fading_kind": fading_kind, "doppler_model": doppler_model})


def apply_channel(s: TimeSignal, c: ChannelRealization) -> TimeSignal:
    """Pass a CP-framed signal through the channel.

    For post-CP sample index ``t`` (which may be negative inside the prefix)::

        r[t] = sum_i gamma_i[t] h_i s[t - l_i] exp(j2pi nu_i (t - l_i) / (NM))

    where ``nu_i`` is the Doppler in bins and ``gamma_i[t]`` is read at slot
    ``t // M``, offset ``t % M`` (cyclically inside the prefix region, which
    the receiver discards). Samples before the frame are taken as silent.

    Raises
    ------
    PreconditionError
        If a delay tap exceeds the cyclic prefix.
    """
    N, M = c.N, c.M
    NM = N * M
    cp = s.cp_len
    if len(s) != NM + cp:
        raise ValueError(f"signal length {len(s)} != NM + cp = {NM + cp}")
    if c.max_delay > cp:
        raise PreconditionError(f"delay tap {c.max_delay} is not covered by cp_len={cp}")
    x = s.samples
    t = np.arange(-cp, NM)
    r = np.zeros(NM + cp, dtype=np.complex128)
    for path, fad in zip(c.paths, c.fading):
        src = t + cp - path.delay_tap
        ok = src >= 0
        gamma = fad.samples.ravel()[t % NM]
        phase = np.exp(2j * np.pi * path.doppler * (t - path.delay_tap) / NM)
        contrib = np.zeros_like(r)
        contrib[ok] = x[src[ok]]
        r += path.gain * gamma * phase * contrib
    return TimeSignal(r, s.sample_rate, cp)


def add_awgn(r: TimeSignal, n0: float, rng: np.random.Generator) -> TimeSignal:
    """Add circular complex white Gaussian noise of variance ``n0`` per sample."""
    if n0 < 0:
        raise ValueError(f"noise variance must be non-negative, got {n0}")
    if n0 == 0:
        return r
    return TimeSignal(r.samples + crandn(rng, len(r), n0), r.sample_rate, r.cp_len)
