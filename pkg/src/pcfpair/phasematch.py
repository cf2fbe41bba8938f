"""Four-wave-mixing energy conservation and phase matching.

All propagation constants are angular wavenumbers, ``beta = 2 pi n_eff / lambda``
in rad/m, so the mismatch

    dk = 2 beta(lp) - beta(ls) - beta(li) - 2 gamma(lp) P_p

is dimensionally consistent. Wavelengths are in um.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import dispersion
from ._io import fmt
from .dispersion import FiberSpec
from .errors import DomainError, NumericalError, PcfPairError

log = logging.getLogger(__name__)

SCAN_FLOOR = 0.35  # um, shortest signal wavelength searched
SCAN_STEP = 0.5e-3  # um
DEGENERATE_WIDTH = 1e-4  # um
DK_TOL = 1e-6  # rad/m
CSV_HEADER = ("core_diameter_um", "pump_nm", "signal_nm", "idler_nm", "power_W", "residual")


class Branch(str, Enum):
    SIGNAL = "signal"
    IDLER = "idler"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class PhaseMatchSolution:
    lambda_p: float
    lambda_s: float
    lambda_i: float
    pump_peak_power: float
    mismatch_residual: float
    branch: Branch
    core_diameter: float = float("nan")

    @property
    def separation(self):
        return self.lambda_i - self.lambda_s

    def energy_residual(self):
        """Relative violation of ``2/lp = 1/ls + 1/li``."""
        return abs(2.0 / self.lambda_p - 1.0 / self.lambda_s - 1.0 / self.lambda_i) * self.lambda_p / 2.0


@dataclass(frozen=True)
class SweepGrid:
    pump_range: tuple  # (start, stop, step) um
    diameters: tuple
    power: float = 0.0

    def __post_init__(self):
        start, stop, step = self.pump_range
        if not step > 0:
            raise DomainError(f"pump step must be > 0, got {step}")
        if not start < stop:
            raise DomainError(f"pump range start {start} must be below stop {stop}")
        if len(self.diameters) == 0:
            raise DomainError("diameters must be non-empty")
        if self.power < 0:
            raise DomainError(f"power must be >= 0, got {self.power}")

    def pumps(self):
        start, stop, step = self.pump_range
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]


@dataclass
class SweepResult:
    rows: list
    failures: list = field(default_factory=list)  # (diameter, pump, message)


def idler_from_energy(lp, ls):
    """Idler wavelength conjugate to ``ls`` for pump ``lp``."""
    lp = np.asarray(lp, dtype=float)
    ls = np.asarray(ls, dtype=float)
    # the true pole is at lp/2; the ls >= 2 lp guard keeps the map on the
    # range where it is its own inverse
    if np.any(ls <= lp / 2) or np.any(ls >= 2 * lp):
        raise DomainError("idler diverges: need lambda_p/2 < lambda_s < 2 lambda_p")
    out = 1.0 / (2.0 / lp - 1.0 / ls)
    return float(out) if out.ndim == 0 else out


def beta(lam, fiber):
    """Propagation constant in rad/m."""
    return 2.0 * np.pi * np.asarray(dispersion.n_eff(lam, fiber)) / (np.asarray(lam) * 1e-6)


def phase_mismatch(lp, ls, pp, fiber: FiberSpec, gamma_value=None):
    """Mismatch ``2 beta_p - beta_s - beta_i - 2 gamma P_p`` (rad/m), vectorized in ``ls``."""
    ls = np.asarray(ls, dtype=float)
    li = idler_from_energy(lp, ls)
    if gamma_value is None:
        gamma_value = dispersion.gamma(lp, fiber) if pp else 0.0
    bp = beta(float(lp), fiber)
    out = 2.0 * bp - beta(ls, fiber) - beta(li, fiber) - 2.0 * gamma_value * pp
    return float(out) if out.ndim == 0 else out


def _scan_floor(lp, fiber):
    lo_win, hi_win = fiber.material.window
    # keep the conjugate idler inside the material window
    ls_for_max_idler = 1.0 / (2.0 / lp - 1.0 / (hi_win * (1 - 1e-9)))
    return max(SCAN_FLOOR, lo_win, ls_for_max_idler)


def _refine(f, a, b, fa, fb, xtol=1e-6, ftol=DK_TOL / 10, max_iter=200):
    """Refine sign-change brackets ``[a, b]`` of ``f`` in place, vectorized.

    Bisection down to width ``xtol``, then Illinois false position until
    ``|f| < ftol`` or the bracket collapses to a few ulps.
    """
    a, b, fa, fb = (np.array(x, dtype=float) for x in (a, b, fa, fb))
    while np.any(b - a > xtol):
        m = 0.5 * (a + b)
        fm = f(m)
        left = np.sign(fm) == np.sign(fa)
        a, fa = np.where(left, m, a), np.where(left, fm, fa)
        b, fb = np.where(left, b, m), np.where(left, fb, fm)
    x = np.where(np.abs(fa) < np.abs(fb), a, b)
    fx = np.where(np.abs(fa) < np.abs(fb), fa, fb)
    side = np.zeros(a.shape, int)
    for _ in range(max_iter):
        active = (np.abs(fx) >= ftol) & (b - a > 4 * np.spacing(b))
        if not active.any():
            return x, fx
        c = (a * fb - b * fa) / (fb - fa)
        bad = ~((c > a) & (c < b)) | ~np.isfinite(c)
        c = np.where(bad, 0.5 * (a + b), c)
        fc = f(c)
        left = np.sign(fc) == np.sign(fa)
        # Illinois: halve the retained endpoint's value when a side repeats
        fb = np.where(left & (side == 1) & active, fb / 2, fb)
        fa = np.where(~left & (side == -1) & active, fa / 2, fa)
        a = np.where(left & active, c, a)
        fa = np.where(left & active, fc, fa)
        b = np.where(~left & active, c, b)
        fb = np.where(~left & active, fc, fb)
        side = np.where(active, np.where(left, 1, -1), side)
        x = np.where(active, c, x)
        fx = np.where(active, fc, fx)
    raise NumericalError(f"phase-matching refinement stalled, |dk| up to {np.max(np.abs(fx)):.3g} rad/m")


def solve_pair(lp, pp, fiber: FiberSpec, step=SCAN_STEP):
    """All phase-matched (signal, idler) pairs for pump ``lp`` at peak power ``pp``.

    Signal wavelengths are scanned on a ``step`` grid from the scan floor up to
    ``lp`` inclusive; exact grid zeros and sign changes are refined to
    ``|dk| < 1e-6 rad/m``. Roots within 0.1 nm of the pump are labelled
    degenerate. An empty list means no phase matching in range.
    """
    lp = float(lp)
    dispersion._check_window(lp, fiber.material)
    g = float(dispersion.gamma(lp, fiber)) if pp else 0.0
    lo = _scan_floor(lp, fiber)
    grid = np.append(np.arange(lo, lp, step), lp)
    grid = grid[grid <= lp]
    bp2 = 2.0 * beta(lp, fiber) - 2.0 * g * pp

    def f(ls):
        ls = np.asarray(ls, dtype=float)
        return bp2 - beta(ls, fiber) - beta(idler_from_energy(lp, ls), fiber)

    dk = f(grid)
    if pp == 0:
        # degenerate point is an exact root; rounding in beta must not hide it
        dk[-1] = 0.0
    roots, resid = [], []
    exact = np.nonzero(dk == 0.0)[0]
    roots.extend(grid[exact])
    resid.extend(dk[exact])
    idx = np.nonzero(dk[:-1] * dk[1:] < 0)[0]
    if idx.size:
        x, fx = _refine(f, grid[idx], grid[idx + 1], dk[idx], dk[idx + 1])
        roots.extend(x)
        resid.extend(fx)
    order = np.argsort(roots)
    out = []
    for i in order:
        ls = float(roots[i])
        li = lp if ls == lp else float(idler_from_energy(lp, ls))
        branch = Branch.DEGENERATE if lp - ls <= DEGENERATE_WIDTH else Branch.SIGNAL
        out.append(PhaseMatchSolution(lp, ls, li, float(pp), float(resid[i]), branch,
                                      fiber.core_diameter))
    return out


def sweep(grid: SweepGrid, fiber: FiberSpec, step=SCAN_STEP):
    """Evaluate ``solve_pair`` over pump wavelengths and core diameters.

    Rows are ordered by (diameter, pump, signal). Grid points that raise are
    logged and recorded in ``failures``; they never abort the sweep.
    """
    return sweep_points(grid.pumps(), grid.diameters, grid.power, fiber, step)


def sweep_points(pumps, diameters, power, fiber: FiberSpec, step=SCAN_STEP):
    """``sweep`` over explicit pump and diameter lists (um)."""
    rows, failures = [], []
    for d in diameters:
        try:
            fib = fiber.with_diameter(float(d))
        except PcfPairError as exc:
            failures.append((float(d), float("nan"), str(exc)))
            log.warning("diameter %s skipped: %s", d, exc)
            continue
        for lp in pumps:
            try:
                rows.extend(solve_pair(lp, power, fib, step=step))
            except PcfPairError as exc:
                failures.append((float(d), lp, str(exc)))
                log.warning("d=%s lp=%s failed: %s", d, lp, exc)
    return SweepResult(rows, failures)


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([fmt(r.core_diameter), fmt(r.lambda_p * 1e3), fmt(r.lambda_s * 1e3),
                    fmt(r.lambda_i * 1e3), fmt(r.pump_peak_power), fmt(r.mismatch_residual)])
    return buf.getvalue()


def read_sweep_csv(text):
    rd = csv.reader(io.StringIO(text))
    header = next(rd)
    if tuple(header) != CSV_HEADER:
        raise DomainError(f"unexpected sweep header {header}")
    return [tuple(float(x) for x in row) for row in rd if row]
