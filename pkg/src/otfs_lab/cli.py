"""Command-line entry point: ``otfs-lab {ber,cir,diversity,pep,verify}``."""

from __future__ import annotations

import argparse
import sys

from .analysis import diversity_distribution, pep_chernoff, pep_monte_carlo
from .channel import doppler_hz, make_rng, sample_channel
from .dd_cir import pulse_hdd, write_operator_csv
from .detectors import make_constellation
from .errors import ConfigError
from .harness import format_ber_csv, load_config, run_ber, run_ofdm_baseline
from .verify import keystone_check
from .waveform import FrameParams

# fading configurations of the CIR heatmaps: fading kind, per-path amplitude 1/sqrt(P)
CIR_FADING = {"quasi-static": "constant", "rayleigh": "rayleigh", "rician": "rician"}


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ber(args) -> int:
    cfg = load_config(args.config)
    if args.trials is not None:
        cfg.trials = args.trials
    records = run_ber(cfg, args.threads)
    if args.ofdm or cfg.ofdm_baseline:
        records += run_ofdm_baseline(cfg, args.threads)
    _emit(format_ber_csv(records, cfg), args.out)
    return 0


def cmd_cir(args) -> int:
    p = FrameParams(args.n, args.m)
    c = sample_channel(p, args.paths, doppler_hz(args.v_kmh, p.carrier_hz),
                       CIR_FADING[args.fading], args.seed, gain_mode="unit")
    op = pulse_hdd(c, args.pulse)
    write_operator_csv(op, args.out or sys.stdout, tol=args.tol, dd_indices=True)
    return 0


def cmd_diversity(args) -> int:
    cons = make_constellation(args.mod)
    hist = diversity_distribution(args.n, cons, args.budget, make_rng(args.seed))
    lines = ["hamming,count"] + [f"{k},{hist.counts[k]}" for k in sorted(hist.counts)]
    _emit("\n".join(lines) + "\n", args.out)
    kind = "exhaustive" if hist.exhaustive else "sampled"
    print(f"{kind}: {hist.pairs} pairs, full-diversity fraction {hist.full_diversity_fraction:.4f}",
          file=sys.stderr)
    return 0


def cmd_pep(args) -> int:
    cons = make_constellation(args.mod)
    rng = make_rng(args.seed)
    K = args.n * args.m
    x = cons.points[rng.integers(0, cons.order, K)].reshape((args.n, args.m), order="F")
    x_t = x.copy()
    flip = int(rng.integers(0, K))
    choices = cons.points[cons.points != x_t.ravel(order="F")[flip]]
    x_t[flip % args.n, flip // args.n] = choices[int(rng.integers(0, choices.size))]
    delays = rng.integers(0, args.m, size=args.paths)
    lines = ["snr_db,bound,empirical"]
    for snr in args.snr:
        n0 = 10.0 ** (-snr / 10.0)
        bound = pep_chernoff(x, x_t, delays, n0).bound
        est = pep_monte_carlo(x, x_t, delays, n0, args.draws, rng)
        lines.append(f"{snr:g},{bound:.10g},{est.mean:.10g}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_verify(args) -> int:
    rep = keystone_check(args.trials, args.seed, N=args.n, M=args.m, P=args.paths)
    print(f"configs={rep.configs} max_abs_error={rep.max_abs_error:.3e}")
    return 0 if rep.max_abs_error <= args.tol else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otfs-lab", description="OTFS rapid-fading simulation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("ber", help="Monte Carlo BER sweep from a TOML/JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="CSV path (default: stdout)")
    b.add_argument("--ofdm", action="store_true", help="also run the paired OFDM baseline")
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--trials", type=int, default=None, help="override cfg.trials")
    b.set_defaults(func=cmd_ber)

    c = sub.add_parser("cir", help="dump one delay-Doppler operator as k,l,kp,lp,re,im CSV")
    c.add_argument("--n", type=int, default=16)
    c.add_argument("--m", type=int, default=16)
    c.add_argument("--paths", type=int, default=4)
    c.add_argument("--fading", choices=sorted(CIR_FADING), default="rayleigh")
    c.add_argument("--pulse", choices=("ideal", "rect"), default="rect")
    c.add_argument("--v-kmh", type=float, default=500.0)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tol", type=float, default=0.0, help="drop entries with magnitude <= tol")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cir)

    d = sub.add_parser("diversity", help="Hamming-weight histogram of DFT-spread difference vectors")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--mod", default="bpsk")
    d.add_argument("--budget", type=int, default=2**20)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diversity)

    p = sub.add_parser("pep", help="Chernoff bound against Monte Carlo PEP for one random pair")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--mod", default="bpsk")
    p.add_argument("--snr", type=float, nargs="+", default=[0.0, 10.0, 20.0])
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pep)

    v = sub.add_parser("verify", help="analytic operator vs time-domain pipeline")
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--m", type=int, default=None)
    v.add_argument("--paths", type=int, default=None)
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-9)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:   # argparse usage errors exit with 2
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
