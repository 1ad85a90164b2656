"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script
(``python3 tests/test_acceptance.py``) for just the summary lines.
"""

import itertools
import math
import sys
import time

import numpy as np
from scipy.stats import norm

from otfs_lab.analysis import (condition_number, diversity_distribution,
                               pep_chernoff, pep_monte_carlo, quadratic_form_energy)
from otfs_lab.channel import ChannelRealization, FadingProcess, PathSpec, make_rng, sample_channel
from otfs_lab.dd_cir import build_H_matrix, build_hdd_from_H, ideal_pulse_hdd, quasi_static_hdd, rect_pulse_hdd
from otfs_lab.detectors import make_constellation
from otfs_lab.harness import ExperimentConfig, format_ber_csv, run_ber, run_ofdm_baseline
from otfs_lab.transforms import dft_matrix, isfft, sfft, vec
from otfs_lab.verify import keystone_check
from otfs_lab.waveform import FrameParams

Z95 = norm.ppf(0.95)


def report(request, number, ok, detail):
    line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
    capman = request.config.pluginmanager.getplugin("capturemanager") if request else None
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def lower_ber_z(better, worse):
    """One-sided two-proportion z statistic for ``better.ber < worse.ber``."""
    n1, n2 = better.bits_total, worse.bits_total
    pooled = (better.bit_errors + worse.bit_errors) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    return (worse.ber - better.ber) / se if se > 0 else 0.0


def random_integer_channel(rng, N, M, P, fading=True):
    paths, fad = [], []
    for _ in range(P):
        paths.append(PathSpec(complex(*rng.standard_normal(2)) / math.sqrt(2 * P),
                              int(rng.integers(0, M)), int(rng.integers(-(N - 1), N)) if N > 1 else 0))
        g = (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / math.sqrt(2)
        fad.append(FadingProcess("rayleigh", g) if fading else FadingProcess.constant(N, M))
    return ChannelRealization(paths, fad, FrameParams(N, M))


def test_criterion_01_keystone_oracle(request):
    t0 = time.perf_counter()
    rep = keystone_check(trials=200, seed=2024, sizes=(2, 4, 8), path_counts=(1, 2, 4))
    dt = time.perf_counter() - t0
    ok = rep.max_abs_error <= 1e-9 and dt <= 120
    report(request, 1, ok, f"200 configs, max abs error {rep.max_abs_error:.2e} (<= 1e-9), "
                           f"runtime {dt:.1f}s (<= 120s)")
    assert ok


def test_criterion_02_reduction(request):
    rng = make_rng(2)
    worst, support_ok = 0.0, True
    for _ in range(100):
        N, M = int(rng.choice([2, 4, 8])), int(rng.choice([2, 4, 8]))
        paths = []
        for _ in range(int(rng.integers(1, 4))):
            kap = float(rng.uniform(-0.5, 0.5)) if N > 1 else 0.0
            paths.append(PathSpec(complex(*rng.standard_normal(2)), int(rng.integers(0, M)),
                                  int(rng.integers(-(N // 2), N // 2)) if N > 1 else 0, kap))
        c = ChannelRealization(paths, None, FrameParams(N, M))
        worst = max(worst, float(np.max(np.abs(ideal_pulse_hdd(c).dense
                                               - quasi_static_hdd(paths, N, M).dense))))
        # single path, kappa = 0: the support must be exactly the shifted lattice point
        p0 = PathSpec(paths[0].gain, paths[0].delay_tap, paths[0].doppler_int, 0.0)
        H = ideal_pulse_hdd(ChannelRealization([p0], None, FrameParams(N, M))).dense
        rows, cols = np.nonzero(np.abs(H) > 1e-12 * np.abs(H).max())
        expect = {(r, cc) for r in range(N * M) for cc in range(N * M)
                  if (r % N - cc % N - p0.doppler_int) % N == 0
                  and (r // N - cc // N - p0.delay_tap) % M == 0}
        support_ok &= set(zip(rows.tolist(), cols.tolist())) == expect
    ok = worst <= 1e-12 and support_ok
    report(request, 2, ok, f"ideal vs quasi-static max diff {worst:.2e} (<= 1e-12); "
                           f"kappa=0 support exact: {support_ok}")
    assert ok


def test_criterion_03_transform_identities(request):
    rng = np.random.default_rng(3)
    rt = pv = 0.0
    for N, M in itertools.product(range(1, 17), repeat=2):
        x = rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))
        X = isfft(x)
        rt = max(rt, float(np.max(np.abs(sfft(X) - x))))
        pv = max(pv, abs(np.linalg.norm(X) ** 2 - np.linalg.norm(x) ** 2) / np.linalg.norm(x) ** 2)
    un = max(float(np.max(np.abs(dft_matrix(K) @ dft_matrix(K).conj().T - np.eye(K))))
             for K in range(1, 65))
    ok = rt <= 1e-12 and pv <= 1e-12 and un <= 1e-12
    report(request, 3, ok, f"round trip {rt:.1e}, Parseval rel {pv:.1e}, DFT unitarity {un:.1e} "
                           f"(all <= 1e-12, N,M <= 16, K <= 64)")
    assert ok


def test_criterion_04_vectorized_model(request):
    rng = make_rng(4)
    worst = worst_rel = 0.0
    bpsk = np.array([-1.0, 1.0])
    for _ in range(50):
        N, M = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        c = random_integer_channel(rng, N, M, int(rng.integers(1, 5)))
        Hdd = ideal_pulse_hdd(c).dense
        worst = max(worst, float(np.max(np.abs(build_hdd_from_H(build_H_matrix(c), N, M).dense - Hdd))))
        x, xt = rng.choice(bpsk, (N, M)), rng.choice(bpsk, (N, M))
        rhs = np.linalg.norm(Hdd @ vec(x - xt)) ** 2
        if rhs > 0:
            worst_rel = max(worst_rel, abs(quadratic_form_energy(c, x, xt) - rhs) / rhs)
    ok = worst <= 1e-9 and worst_rel <= 1e-8
    report(request, 4, ok, f"50 integer-Doppler channels: matrix-product vs analytic {worst:.1e} "
                           f"(<= 1e-9), eigen-sum identity rel {worst_rel:.1e} (<= 1e-8)")
    assert ok


def test_criterion_05_diversity_distribution(request):
    t0 = time.perf_counter()
    h = diversity_distribution(4, make_constellation("bpsk"), check_collinearity=True)
    dt = time.perf_counter() - t0
    frac = h.full_diversity_fraction
    ok = h.exhaustive and h.collinear_mismatches == 0 and frac > 0.90
    report(request, 5, ok, f"N=4 BPSK exhaustive ({h.pairs} pairs, {dt:.2f}s): histogram "
                           f"{dict(sorted(h.counts.items()))}, distance-1 <=> DFT-collinear "
                           f"mismatches {h.collinear_mismatches}; full-diversity fraction "
                           f"{frac:.4f} (needs > 0.90)")
    assert ok


def test_criterion_06_pep_bound(request):
    cons = make_constellation("bpsk")
    rng = make_rng(6)
    x = np.ones((2, 2), dtype=complex)
    violations, checked, worst_margin = [], 0, -np.inf
    for flips in itertools.product(cons.points, repeat=4):
        xt = np.array(flips).reshape((2, 2), order="F")
        if np.array_equal(xt, x):
            continue
        for snr in (0.0, 10.0, 20.0):
            n0 = 10 ** (-snr / 10)
            bound = pep_chernoff(x, xt, [0], n0).bound
            est = pep_monte_carlo(x, xt, [0], n0, 100_000, rng)
            # reject "MC <= bound" only if the MC lower 95% limit exceeds the bound
            margin = (est.mean - Z95 * est.stderr) - bound
            worst_margin = max(worst_margin, margin)
            checked += 1
            if margin > 0:
                violations.append((flips, snr))
    ok = not violations
    report(request, 6, ok, f"{checked} pair/SNR cases, 1e5 draws each: bound exceeded at 95% in "
                           f"{len(violations)} cases (largest lower-limit margin {worst_margin:.2e})")
    assert ok


def test_criterion_07_ml_small_grid_band(request):
    t0 = time.perf_counter()
    snrs = [0.0, 7.0, 14.0]
    rho = 10 ** (np.array(snrs) / 10)
    awgn, ray = norm.sf(np.sqrt(2 * rho)), 0.5 * (1 - np.sqrt(rho / (1 + rho)))
    runs = {}
    for P, N in [(2, 2), (4, 4)]:
        cfg = ExperimentConfig(N=N, M=2, P=P, snr_db=snrs, constellation="bpsk", detector="ml",
                               doppler_model="uniform-bin", fading_kind="rayleigh",
                               trials=20_000, target_errors=600, seed=7)
        runs[(P, N)] = run_ber(cfg)
    bounded = all(awgn[i] - r.ci95_half_width <= r.ber <= ray[i] + r.ci95_half_width
                  for recs in runs.values() for i, r in enumerate(recs))
    z = lower_ber_z(runs[(4, 4)][2], runs[(2, 2)][2])
    dt = time.perf_counter() - t0
    ok = bounded and z > Z95 and dt <= 600
    curves = "; ".join(f"P={P},N={N}: " + ", ".join(f"{r.ber:.2e}" for r in recs)
                       for (P, N), recs in runs.items())
    report(request, 7, ok, f"BER at {snrs} dB [{curves}] within AWGN/Rayleigh band: {bounded}; "
                           f"14 dB improvement z={z:.2f} (> {Z95:.3f}); runtime {dt:.0f}s")
    assert ok


def test_criterion_08_detector_ordering(request):
    base = dict(N=8, M=8, P=4, snr_db=[20.0], constellation="bpsk", pulse="rect",
                fading_kind="rayleigh", trials=1000, target_errors=0, seed=8)
    (mp,) = run_ber(ExperimentConfig(detector="mp", **base))
    (mmse,) = run_ber(ExperimentConfig(detector="mmse", **base))
    (mmse_qs,) = run_ber(ExperimentConfig(detector="mmse", **{**base, "fading_kind": "constant"}))
    z = lower_ber_z(mp, mmse)
    rng = make_rng(8, 1)
    p = FrameParams(8, 8)
    v = 0.95 * p.delta_f
    kappa = {}
    for kind in ("rician", "rayleigh"):
        kappa[kind] = float(np.median([condition_number(rect_pulse_hdd(
            sample_channel(p, 4, v, kind, rng=rng))) for _ in range(100)]))
    ok = z > Z95 and mmse.ber >= mmse_qs.ber and kappa["rician"] < kappa["rayleigh"]
    report(request, 8, ok, f"20 dB: BER MP {mp.ber:.2e} < MMSE {mmse.ber:.2e} (z={z:.2f}); "
                           f"MMSE rapid {mmse.ber:.2e} >= quasi-static {mmse_qs.ber:.2e}; "
                           f"median cond Rician {kappa['rician']:.1f} < Rayleigh {kappa['rayleigh']:.1f}")
    assert ok


def test_criterion_09_otfs_vs_ofdm(request):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(N=8, M=8, P=4, snr_db=[15.0, 20.0], constellation="bpsk",
                           detector="mp", fading_kind="rayleigh", trials=300,
                           target_errors=0, seed=9)
    otfs, ofdm = run_ber(cfg), run_ofdm_baseline(cfg)
    zs = [lower_ber_z(a, b) for a, b in zip(otfs, ofdm)]
    dt = time.perf_counter() - t0
    ok = all(z > Z95 for z in zs) and dt <= 600
    pts = "; ".join(f"{a.snr_db:g} dB OTFS {a.ber:.2e} vs OFDM {b.ber:.2e} (z={z:.1f})"
                    for a, b, z in zip(otfs, ofdm, zs))
    report(request, 9, ok, f"{pts}; runtime {dt:.0f}s")
    assert ok


def test_criterion_10_reproducibility(request):
    cfg = ExperimentConfig(N=4, M=4, P=3, snr_db=[5.0, 10.0, 15.0], detector="mp",
                           trials=120, target_errors=50, seed=10, chunk=16)

    def body(threads):
        recs = run_ber(cfg, threads) + run_ofdm_baseline(cfg, threads)
        return format_ber_csv(recs, cfg).split("\n", 1)[1].encode()   # drop the timestamp line

    outs = {t: body(t) for t in (1, 2, 4, 7)}
    ok = len(set(outs.values())) == 1
    report(request, 10, ok, f"CSV bytes identical for thread counts {sorted(outs)}: {ok}")
    assert ok


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(None)
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
