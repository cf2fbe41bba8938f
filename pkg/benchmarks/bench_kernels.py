"""Compare the numba and pure-numpy Monte Carlo kernels.

Both backends consume the same uniform block, so the counts must match
exactly; only the wall time differs.

    python3 benchmarks/bench_kernels.py --pulses 2000000
"""
import argparse
import time

from pcfpair import _kernels, _rng
from pcfpair._backend import HAVE_NUMBA


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pulses", type=int, default=1_000_000)
    ap.add_argument("--mu", type=float, default=0.1)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    n = args.pulses
    t0 = time.perf_counter()
    u_hom = _rng.uniforms(args.seed, 10, 0, n + 1, _kernels.HOM_COLS)
    u_src = _rng.uniforms(args.seed, 0, 0, n, _kernels.SRC_COLS)
    t_rng = time.perf_counter() - t0
    print(f"rng: {n} pulses x {_kernels.HOM_COLS + _kernels.SRC_COLS} columns in {t_rng:.3f} s")

    cases = {
        "hom_counts": lambda nb: _kernels.hom_counts(u_hom, n, args.mu, 0.0, 0.6, 0.6, 0.97,
                                                     True, use_numba=nb),
        "source_outcomes": lambda nb: _kernels.source_outcomes(u_src, args.mu, 0.0, 0.6, 0.6,
                                                               True, use_numba=nb),
    }
    print(f"{'kernel':<16} {'numpy s':>10} {'numba s':>10} {'speedup':>8} identical")
    for name, fn in cases.items():
        t_np, r_np = _time(lambda: fn(False), args.repeat)
        if not HAVE_NUMBA:
            print(f"{name:<16} {t_np:>10.4f} {'n/a':>10} {'n/a':>8} -")
            continue
        fn(True)  # compile outside the timed region
        t_nb, r_nb = _time(lambda: fn(True), args.repeat)
        same = all((a == b).all() if hasattr(a, "all") else a == b for a, b in zip(r_np, r_nb))
        print(f"{name:<16} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.1f} {same}")


if __name__ == "__main__":
    main()
