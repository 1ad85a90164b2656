"""Monte Carlo BER engine for OTFS and the paired OFDM baseline.

Every trial draws its channel and data from ``make_rng(seed, 0, trial)`` and
its noise from ``make_rng(seed, 1|2, snr_index, trial)``. Results therefore
do not depend on how trials are scheduled across workers, and OTFS and OFDM
runs with the same seed see identical channels and bits.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import (ChannelRealization, PathSpec, apply_channel, crandn, doppler_hz,
                      make_rng, sample_channel, FADING_KINDS, DOPPLER_MODELS, GAIN_MODES)
from .dd_cir import pulse_hdd
from .detectors import ML_BUDGET, make_constellation, ml_detect, mmse_detect, mp_detect
from .errors import ConfigError
from .transforms import isfft, sfft, unvec, vec
from .waveform import FrameParams, TimeSignal, heisenberg_modulate, matched_filter_demodulate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DETECTORS = ("ml", "mmse", "mp")
CHANNELS = ("multipath", "awgn")
SNR_NOTE = ("snr_db is Es/N0 per delay-Doppler symbol; unit-energy constellation; "
            "unit total mean channel power")


@dataclass
class ExperimentConfig:
    N: int = 4
    M: int = 4
    P: int = 2
    snr_db: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    constellation: str = "bpsk"
    pulse: str = "rect"
    fading_kind: str = "rayleigh"
    doppler_model: str = "vmax-cos"
    v_max_kmh: float = 500.0
    carrier_hz: float = 4e9
    delta_f_hz: float = 15e3
    detector: str = "mp"
    trials: int = 1000
    target_errors: int = 200
    seed: int = 0
    channel: str = "multipath"
    gain_mode: str = "gaussian"
    rician_mean: float = 0.8
    rician_var: float = 0.36
    cp_len: int | None = None
    mp_max_iter: int = 30
    mp_damping: float = 0.5
    ml_budget: int = ML_BUDGET
    ofdm_baseline: bool = False
    chunk: int = 64

    def validate(self) -> "ExperimentConfig":
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_db:
            raise ConfigError("snr_db must be non-empty")
        if min(self.N, self.M, self.P) < 1:
            raise ConfigError("N, M and P must be >= 1")
        if self.v_max_kmh < 0 or self.carrier_hz <= 0 or self.delta_f_hz <= 0:
            raise ConfigError("physical parameters must be positive")
        if self.chunk < 1:
            raise ConfigError("chunk must be >= 1")
        choices = {"detector": DETECTORS, "pulse": ("ideal", "rect"), "channel": CHANNELS,
                   "fading_kind": FADING_KINDS, "doppler_model": DOPPLER_MODELS,
                   "gain_mode": GAIN_MODES}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        try:
            cons = make_constellation(self.constellation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.cp_len is not None and not 0 <= self.cp_len < self.M:
            raise ConfigError(f"cp_len must lie in [0, M), got {self.cp_len}")
        if self.detector == "ml" and cons.order ** (self.N * self.M) > self.ml_budget:
            raise ConfigError(
                f"ML over {cons.order}^{self.N * self.M} hypotheses exceeds budget {self.ml_budget}")
        return self

    @property
    def frame(self) -> FrameParams:
        return FrameParams(self.N, self.M, self.delta_f_hz, self.carrier_hz)

    @property
    def v_max_hz(self) -> float:
        return doppler_hz(self.v_max_kmh, self.carrier_hz)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def config_from_dict(d: dict) -> ExperimentConfig:
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**d)
    cfg.snr_db = [float(s) for s in cfg.snr_db]
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    """Read a TOML (or JSON) experiment file; keys may sit at top level or under ``[experiment]``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            try:
                data = tomllib.loads(text)
            except tomllib.TOMLDecodeError:
                data = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if "experiment" in data and isinstance(data["experiment"], dict):
        data = data["experiment"]
    try:
        return config_from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class BerRecord:
    snr_db: float
    bit_errors: int
    bits_total: int
    frames: int
    detector: str
    wall_ms: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else 0.0

    @property
    def ci95_half_width(self) -> float:
        p = self.ber
        return 1.96 * math.sqrt(p * (1 - p) / self.bits_total) if self.bits_total else 0.0


def _draw(cfg: ExperimentConfig, cons, trial: int):
    rng = make_rng(cfg.seed, 0, trial)
    p = cfg.frame
    if cfg.channel == "awgn":
        c = ChannelRealization([PathSpec(1.0, 0)], None, p, cfg.seed)
    else:
        c = sample_channel(p, cfg.P, cfg.v_max_hz, cfg.fading_kind, cfg.seed, rng=rng,
                           doppler_model=cfg.doppler_model, gain_mode=cfg.gain_mode,
                           rician_mean=cfg.rician_mean, rician_var=cfg.rician_var)
    bits = rng.integers(0, 2, size=cfg.N * cfg.M * cons.bits_per_symbol)
    return c, bits, cons.modulate(bits)


def _cp(cfg: ExperimentConfig, c: ChannelRealization) -> int:
    return c.max_delay if cfg.cp_len is None else cfg.cp_len


def _detect(cfg, y, H, n0, cons):
    if cfg.detector == "ml":
        return ml_detect(y, H, cons, budget=cfg.ml_budget)
    if cfg.detector == "mmse":
        return mmse_detect(y, H, n0, cons)
    return mp_detect(y, H, n0, cons, max_iter=cfg.mp_max_iter, damping=cfg.mp_damping)


def otfs_trial(cfg: ExperimentConfig, snr_index: int, trial: int) -> tuple[int, int]:
    """One OTFS frame at one SNR; returns ``(bit_errors, bits)``."""
    cons = make_constellation(cfg.constellation)
    c, bits, sym = _draw(cfg, cons, trial)
    n0 = 10.0 ** (-cfg.snr_db[snr_index] / 10.0)
    noise = make_rng(cfg.seed, 1, snr_index, trial)
    x = unvec(sym, cfg.N, cfg.M)
    H = pulse_hdd(c, cfg.pulse)
    if cfg.pulse == "rect":
        s = heisenberg_modulate(isfft(x), c.params, _cp(cfg, c))
        r = apply_channel(s, c)
        r = TimeSignal(r.samples + crandn(noise, len(r), n0), r.sample_rate, r.cp_len)
        y = vec(sfft(matched_filter_demodulate(r, c.params)))
    else:
        y = H.apply(x) + crandn(noise, cfg.N * cfg.M, n0)
    det = _detect(cfg, y, H, n0, cons)
    return int(np.count_nonzero(det.bits != bits)), bits.size


def ofdm_one_tap_gains(c: ChannelRealization, cp_len: int) -> np.ndarray:
    """Diagonal of each OFDM symbol's subcarrier channel (per-symbol CP, same fading samples)."""
    N, M = c.N, c.M
    NM = N * M
    u = np.arange(M)
    m = np.arange(M)
    t_n = np.arange(N) * (M + cp_len) + cp_len
    G = np.zeros((N, M), dtype=np.complex128)
    for p, f in zip(c.paths, c.fading):
        nu, lt = p.doppler, p.delay_tap
        inner = f.samples @ np.exp(2j * np.pi * nu * u / NM)
        G += (p.gain * np.exp(2j * np.pi * nu * (t_n - lt) / NM) * inner / M)[:, None] \
            * np.exp(-2j * np.pi * m * lt / M)[None, :]
    return G


def ofdm_transmit(X, c: ChannelRealization, cp_len: int) -> np.ndarray:
    """Noiseless post-CP samples ``(N, M)`` of an OFDM frame with one CP per symbol."""
    N, M = c.N, c.M
    NM = N * M
    if c.max_delay > cp_len:
        raise ValueError(f"delay tap {c.max_delay} exceeds OFDM cp_len {cp_len}")
    s = np.fft.ifft(np.asarray(X, dtype=np.complex128), axis=1, norm="ortho")
    u = np.arange(M)
    t_abs = (np.arange(N) * (M + cp_len) + cp_len)[:, None] + u[None, :]
    r = np.zeros((N, M), dtype=np.complex128)
    for p, f in zip(c.paths, c.fading):
        shifted = s[:, (u - p.delay_tap) % M]
        r += p.gain * f.samples * shifted * np.exp(2j * np.pi * p.doppler * (t_abs - p.delay_tap) / NM)
    return r


def ofdm_trial(cfg: ExperimentConfig, snr_index: int, trial: int) -> tuple[int, int]:
    """Uncoded OFDM over the same channel and bits as :func:`otfs_trial`, one-tap MMSE."""
    cons = make_constellation(cfg.constellation)
    c, bits, sym = _draw(cfg, cons, trial)
    n0 = 10.0 ** (-cfg.snr_db[snr_index] / 10.0)
    noise = make_rng(cfg.seed, 2, snr_index, trial)
    X = unvec(sym, cfg.N, cfg.M)
    cp = _cp(cfg, c)
    r = ofdm_transmit(X, c, cp) + crandn(noise, (cfg.N, cfg.M), n0)
    Y = np.fft.fft(r, axis=1, norm="ortho")
    G = ofdm_one_tap_gains(c, cp)
    X_hat = np.conj(G) * Y / (np.abs(G) ** 2 + n0)
    idx = cons.slice_indices(vec(X_hat))
    return int(np.count_nonzero(cons.bits_of(idx) != bits)), bits.size


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("OTFS_LAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _sweep(cfg: ExperimentConfig, trial_fn, label: str, threads: int | None) -> list[BerRecord]:
    cfg.validate()
    threads = resolve_threads(threads)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    records = []
    try:
        for s_idx, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            errors = bits = frames = 0
            start = 0
            done = False
            while start < cfg.trials and not done:
                batch = range(start, min(start + cfg.chunk, cfg.trials))
                run = (lambda t, s=s_idx: trial_fn(cfg, s, t))
                results = pool.map(run, batch) if pool else map(run, batch)
                # aggregate in trial order so the stopping point is schedule-independent
                for e, b in results:
                    errors += e
                    bits += b
                    frames += 1
                    if cfg.target_errors and errors >= cfg.target_errors:
                        done = True
                        break
                start = batch.stop
            records.append(BerRecord(float(snr), errors, bits, frames, label,
                                     (time.perf_counter() - t0) * 1e3))
    finally:
        if pool:
            pool.shutdown()
    return records


def run_ber(cfg: ExperimentConfig, threads: int | None = None) -> list[BerRecord]:
    """BER sweep over ``cfg.snr_db`` for OTFS with the configured detector.

    Each SNR point stops after ``cfg.trials`` frames or once
    ``cfg.target_errors`` bit errors have accumulated.

    Raises
    ------
    ConfigError
        Before any trial runs, if the configuration is invalid (including an
        ML search larger than ``cfg.ml_budget``).
    """
    return _sweep(cfg, otfs_trial, f"otfs-{cfg.detector}", threads)


def run_ofdm_baseline(cfg: ExperimentConfig, threads: int | None = None) -> list[BerRecord]:
    """Paired OFDM sweep (same channels and bits) with one-tap MMSE per subcarrier."""
    return _sweep(cfg, ofdm_trial, "ofdm-mmse1tap", threads)


def format_ber_csv(records, cfg: ExperimentConfig | None = None,
                   timestamp: str | None = None) -> str:
    """CSV text: one timestamp comment line, metadata comments, then ``snr_db,detector,ber,ci95,bits,frames``."""
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    out = io.StringIO()
    out.write(f"# generated {ts}\n")
    out.write(f"# {SNR_NOTE}\n")
    if cfg is not None:
        out.write(f"# config {json.dumps(cfg.to_dict(), sort_keys=True)}\n")
    out.write("snr_db,detector,ber,ci95,bits,frames\n")
    for r in records:
        out.write(f"{r.snr_db:g},{r.detector},{r.ber:.10g},{r.ci95_half_width:.10g},"
                  f"{r.bits_total},{r.frames}\n")
    return out.getvalue()


def write_ber_csv(records, path, cfg: ExperimentConfig | None = None) -> None:
    Path(path).write_text(format_ber_csv(records, cfg))
