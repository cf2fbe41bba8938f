"""Command-line front end.

Exit codes: 0 success, 1 numerical failure or failed ``--verify`` check,
2 user or domain error. Failures print one ``error=...`` line to stderr.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import config as cfgmod
from . import dispersion, hom, pairstats, phasematch, state, tomography
from ._io import fmt
from .errors import (ConfigError, DomainError, NotInformationallyComplete, NumericalError,
                     PcfPairError)

log = logging.getLogger("pcfpair")


class VerifyError(PcfPairError):
    """An output failed its invariant re-check."""


# ---------------------------------------------------------------- helpers

def _range(text, name):
    """``start:stop:step`` or a comma list, returned as floats."""
    try:
        if ":" not in text:
            return [float(x) for x in text.split(",") if x.strip()]
        a, b, s = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    if not s > 0:
        raise ConfigError(f"{name}: step must be > 0")
    if not b >= a:
        raise ConfigError(f"{name}: stop must be >= start")
    n = int(math.floor((b - a) / s + 1e-9)) + 1
    return [round(a + i * s, 12) for i in range(n)]


def _emit(args, text):
    out = getattr(args, "output", None)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if getattr(args, "config", None) else cfgmod.RunConfig()
    if getattr(args, "output", None) is None and cfg.output_path:
        args.output = cfg.output_path
    return cfg


def _seed(args, cfg):
    s = getattr(args, "seed", None)
    return cfg.seed if s is None else s


def _fiber(cfg, d):
    if d is None:
        return cfg.fiber
    try:
        return cfg.fiber.with_diameter(d)
    except DomainError as exc:
        raise DomainError(f"--core-diameter: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_zdw(args):
    cfg = _config(args)
    fib = _fiber(cfg, args.core_diameter)
    z = dispersion.zero_dispersion_wavelength(fib)
    if args.verify:
        lo = dispersion.d2n_dlam2(z - 1e-4, fib)
        hi = dispersion.d2n_dlam2(z + 1e-4, fib)
        if not lo * hi < 0:
            raise VerifyError("second derivative does not change sign across the ZDW")
    _emit(args, f"zdw_nm={fmt(z * 1e3)}\n")


def cmd_gamma(args):
    cfg = _config(args)
    fib = _fiber(cfg, args.core_diameter)
    lp = (args.pump_nm if args.pump_nm is not None else cfg.pump_center_nm) * 1e-3
    a = dispersion.effective_area(lp, fib)
    g = dispersion.gamma(lp, fib)
    _emit(args, f"pump_nm={fmt(lp * 1e3)},a_eff_um2={fmt(a * 1e12)},gamma_per_W_m={fmt(g)}\n")


def cmd_phasematch(args):
    cfg = _config(args)
    pumps = _range(args.pump_range, "--pump-range")
    diameters = _range(args.diameters, "--diameters") if args.diameters else [cfg.fiber.core_diameter]
    power = cfg.pump.power_W if args.power is None else args.power
    step = (cfg.scan_step_nm if args.scan_step is None else args.scan_step) * 1e-3
    if not pumps:
        raise ConfigError("--pump-range: at least one pump wavelength is required")
    for d in diameters:
        if not 0.5 < d <= 50.0:
            raise DomainError(f"--diameters: core_diameter must lie in (0.5, 50] um, got {d}")
    res = phasematch.sweep_points([p * 1e-3 for p in pumps], diameters, power, cfg.fiber, step)
    rows = res.rows
    failures = [f"core_diameter_um={fmt(d)},pump_nm={fmt(lp * 1e3)},error={msg}"
                for d, lp, msg in res.failures]
    if args.verify:
        for r in rows:
            if r.energy_residual() >= 1e-12:
                raise VerifyError(f"energy residual {r.energy_residual():.3g} at pump {r.lambda_p}")
            if abs(r.mismatch_residual) >= phasematch.DK_TOL:
                raise VerifyError(f"|dk| {abs(r.mismatch_residual):.3g} at pump {r.lambda_p}")
    _emit(args, phasematch.sweep_csv(rows))
    if failures:
        if args.output:
            with open(args.output + ".log", "w", encoding="utf-8") as fh:
                fh.write("\n".join(failures) + "\n")


def cmd_rates(args):
    cfg = _config(args)
    src = cfg.source
    if args.mu is not None:
        src = pairstats.SourceParams(args.mu, src.raman_per_pulse, src.eta_s, src.eta_i,
                                     src.rep_rate, src.photon_statistics)
    rep = pairstats.coincidence_rates(src, src if not args.single else None)
    text = pairstats.RateReport.csv_header() + "\n" + rep.csv_row() + "\n"
    if args.mc_pulses:
        mc = pairstats.mc_rates(src, args.mc_pulses, _seed(args, cfg),
                                None if args.single else src)
        text += "".join(f"mc_{k}={fmt(v[0])},mc_{k}_error={fmt(v[1])}\n" for k, v in mc.items())
    _emit(args, text)


def cmd_hom(args):
    cfg = _config(args)
    seed = _seed(args, cfg)
    delays = _range(args.delays, "--delays")
    if not delays:
        raise ConfigError("--delays: at least one delay is required")
    mu = cfg.source.mu if args.mu is None else args.mu
    if mu < 0:
        raise DomainError(f"--mu must be >= 0, got {mu}")
    center = cfg.pump_center_nm
    fw = cfg.pump.fwhm_nm
    if args.calibrate_pump:
        fw = hom.calibrate_pump_fwhm(cfg.signal_filter, cfg.idler_filter, center,
                                     target=args.target_visibility)
    jsa = hom.build_jsa(center, fw, cfg.signal_filter, cfg.idler_filter)
    n_pulses = cfg.n_pulses if args.n_pulses is None else args.n_pulses
    res = hom.dip_profile(jsa, jsa, delays, mu, cfg.source, seed=seed, n_pulses=n_pulses,
                          polarization_overlap=args.polarization_overlap)
    ideal = hom.dip_profile(jsa, jsa, delays, 0.0, cfg.source)
    res.metadata.update(pump_center_nm=center, pump_fwhm_nm=fw,
                        pump_calibrated=bool(args.calibrate_pump),
                        ideal_visibility=ideal.raw_visibility,
                        heralded_purity=hom.heralded_purity(jsa))
    if args.verify:
        for v in (res.raw_visibility, res.corrected_visibility):
            if not 0.0 <= v <= 1.0:
                raise VerifyError(f"visibility {v} outside [0, 1]")
        if mu == 0:
            d_min = delays[int(np.argmin(res.fourfold_rate))]
            expect = args.polarization_overlap * float(hom.overlap(jsa, jsa, [d_min])[0])
            if abs(res.raw_visibility - expect) > 1e-6:
                raise VerifyError("ideal visibility disagrees with the analytic overlap")
    _emit(args, res.to_csv())


def _parse_state(text):
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "bell":
            return state.bell_state(arg or "phi+").density()
        if kind == "werner":
            return state.werner(float(arg))
        if kind == "mixed":
            return state.maximally_mixed()
        if kind == "sagnac":
            vals = [float(x) for x in arg.split(",")] if arg else []
            if not 1 <= len(vals) <= 3:
                raise ValueError
            return state.sagnac_state(*vals) if len(vals) > 1 else state.sagnac_state(0.0, vals[0])
    except ValueError:
        raise DomainError(f"--state: cannot parse {text!r}") from None
    raise DomainError(f"--state: unknown state kind {kind!r} "
                      "(use bell:phi+, werner:p, sagnac:phase,vis[,imbalance] or mixed)")


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from None


def cmd_tomo(args):
    cfg = _config(args)
    seed = _seed(args, cfg)
    if args.tomo_cmd == "simulate":
        rho = _parse_state(args.state)
        if not args.counts > 0:
            raise DomainError(f"--counts must be > 0, got {args.counts}")
        recs = tomography.simulate_counts(rho, tomography.standard_settings(), args.counts, seed)
        _emit(args, tomography.counts_csv(recs))
        return
    recs = tomography.read_counts_csv(_read(args.counts_file))
    rep = tomography.mle_reconstruct(recs, tolerance=args.tolerance,
                                     max_iterations=args.max_iterations)
    if args.verify:
        ev = np.linalg.eigvalsh(rep.rho.elements)
        if ev[0] < -1e-12 or abs(np.trace(rep.rho.elements).real - 1) > 1e-12:
            raise VerifyError("reconstruction is not a unit-trace PSD matrix")
    _emit(args, rep.to_text())
    if not rep.converged:
        log.warning("MLE did not converge in %d iterations", rep.iterations)


def cmd_metrics(args):
    _config(args)
    rho = state.read_density_csv(_read(args.rho_file))
    _emit(args, state.metrics_line(rho) + "\n")


# ---------------------------------------------------------------- parser

def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="key=value config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (u64)")
    p.add_argument("--output", default=argparse.SUPPRESS, help="write output here instead of stdout")
    p.add_argument("--verify", action="store_true", default=argparse.SUPPRESS,
                   help="re-check output invariants")
    return p


def build_parser():
    common = _common()
    ap = argparse.ArgumentParser(prog="pcfpair", parents=[common],
                                 description="PCF photon-pair source simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("zdw", parents=[common], help="zero-dispersion wavelength")
    p.add_argument("--core-diameter", type=float, help="um")
    p.set_defaults(func=cmd_zdw)

    p = sub.add_parser("gamma", parents=[common], help="effective area and nonlinear coefficient")
    p.add_argument("--core-diameter", type=float, help="um")
    p.add_argument("--pump-nm", type=float)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("phasematch", parents=[common], help="phase-matching sweep CSV")
    p.add_argument("--pump-range", required=True, help="start:stop:step in nm, or a comma list")
    p.add_argument("--diameters", help="comma list or start:stop:step, um")
    p.add_argument("--power", type=float, help="peak pump power, W")
    p.add_argument("--scan-step", type=float, help="signal scan step, nm")
    p.set_defaults(func=cmd_phasematch)

    p = sub.add_parser("rates", parents=[common], help="singles/twofold/fourfold rates")
    p.add_argument("--mu", type=float)
    p.add_argument("--single", action="store_true", help="one source only (no fourfold)")
    p.add_argument("--mc-pulses", type=int, default=0, help="also run a Monte Carlo check")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("hom", parents=[common], help="two-source HOM dip CSV")
    p.add_argument("--delays", default="-10:10:1", help="ps, start:stop:step or comma list")
    p.add_argument("--mu", type=float)
    p.add_argument("--n-pulses", type=int)
    p.add_argument("--calibrate-pump", action="store_true",
                   help="fit the pump fwhm so the ideal visibility hits --target-visibility")
    p.add_argument("--target-visibility", type=float, default=0.97)
    p.add_argument("--polarization-overlap", type=float, default=1.0)
    p.set_defaults(func=cmd_hom)

    p = sub.add_parser("tomo", parents=[common], help="tomography simulate / fit")
    tsub = p.add_subparsers(dest="tomo_cmd", required=True)
    s = tsub.add_parser("simulate", parents=[common])
    s.add_argument("--state", default="bell:phi+")
    s.add_argument("--counts", type=float, default=1e5, help="mean counts per basis group")
    s.set_defaults(func=cmd_tomo)
    f = tsub.add_parser("fit", parents=[common])
    f.add_argument("counts_file")
    f.add_argument("--tolerance", type=float, default=1e-10)
    f.add_argument("--max-iterations", type=int, default=5000)
    f.set_defaults(func=cmd_tomo)

    p = sub.add_parser("metrics", parents=[common], help="fidelity, linear entropy, tangle")
    p.add_argument("rho_file")
    p.set_defaults(func=cmd_metrics)
    return ap


def _error_line(category, exc):
    msg = str(exc).replace("\n", " ")
    return f"error={category},type={type(exc).__name__},message={msg}\n"


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("output", None), ("verify", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        sys.stderr.write(_error_line("domain", DomainError("--seed must be a u64")))
        return 2
    try:
        args.func(args)
    except VerifyError as exc:
        sys.stderr.write(_error_line("verify", exc))
        return 1
    except NumericalError as exc:
        sys.stderr.write(_error_line("numerical", exc))
        return 1
    except (DomainError, ConfigError, NotInformationallyComplete) as exc:
        sys.stderr.write(_error_line("domain", exc))
        return 2
    except OSError as exc:
        sys.stderr.write(_error_line("io", exc))
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
