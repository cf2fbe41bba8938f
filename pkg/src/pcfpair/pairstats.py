"""Pair-generation statistics, Raman background and coincidence rates.

The analytic rates use the small-``mu`` expansion. ``sample_events`` is the
exact per-pulse Monte Carlo with threshold detectors; ``exact_twofold_probability``
gives its closed-form expectation, which the analytic rate approaches as
``mu -> 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels, _rng
from ._io import fmt
from .errors import DomainError

DEFAULT_REP_RATE = 80e6  # Hz
DEFAULT_EFFICIENCY = 0.6
MU_WARN = 0.5
RATE_HEADER = ("singles_s", "singles_i", "twofold", "accidental_twofold", "fourfold", "warning")

# stream ids inside one seed; HOM delay points use HOM_STREAM_BASE + index
SOURCE_STREAMS = (0, 1)
HOM_BASELINE_STREAM = 9
HOM_STREAM_BASE = 10


class PhotonStatistics(str, Enum):
    THERMAL = "thermal"
    POISSONIAN = "poissonian"


@dataclass(frozen=True)
class SourceParams:
    mu: float
    raman_per_pulse: float = 0.0
    eta_s: float = DEFAULT_EFFICIENCY
    eta_i: float = DEFAULT_EFFICIENCY
    rep_rate: float = DEFAULT_REP_RATE
    photon_statistics: PhotonStatistics = PhotonStatistics.THERMAL

    def __post_init__(self):
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise DomainError(f"mu must be finite and >= 0, got {self.mu}")
        if not self.raman_per_pulse >= 0:
            raise DomainError(f"raman_per_pulse must be >= 0, got {self.raman_per_pulse}")
        for name in ("eta_s", "eta_i"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        if not self.rep_rate > 0:
            raise DomainError(f"rep_rate must be > 0, got {self.rep_rate}")
        object.__setattr__(self, "photon_statistics", PhotonStatistics(self.photon_statistics))

    @property
    def thermal(self) -> bool:
        return self.photon_statistics is PhotonStatistics.THERMAL


@dataclass(frozen=True)
class RateReport:
    singles_s: float
    singles_i: float
    twofold: float
    accidental_twofold: float
    fourfold: float = 0.0
    warning: str = ""

    def csv_row(self) -> str:
        vals = [fmt(getattr(self, k)) for k in RATE_HEADER[:-1]]
        return ",".join(vals + [self.warning])

    @staticmethod
    def csv_header() -> str:
        return ",".join(RATE_HEADER)


def mu_from_pump(gamma_value, pp, length, k):
    """Mean pairs per pulse, ``k (gamma P L)^2``."""
    for name, v in (("gamma", gamma_value), ("pump power", pp), ("length", length), ("k", k)):
        if np.any(np.asarray(v) < 0):
            raise DomainError(f"{name} must be >= 0")
    return k * (gamma_value * pp * length) ** 2


def calibrate_k(twofold_target, gamma_value, pp, length, eta_s=DEFAULT_EFFICIENCY,
                eta_i=DEFAULT_EFFICIENCY, rep_rate=DEFAULT_REP_RATE):
    """Calibration constant reproducing ``twofold_target`` counts/s at one operating point.

    This is a fitted constant, not derived physics.
    """
    base = (gamma_value * pp * length) ** 2 * rep_rate * eta_s * eta_i
    if not base > 0:
        raise DomainError("calibration point must have nonzero gamma, power, length and efficiency")
    return twofold_target / base


def raman_rate(pp, c_raman):
    """Mean Raman photons per pulse per band, linear in pump power."""
    if np.any(np.asarray(pp) < 0) or c_raman < 0:
        raise DomainError("pump power and Raman coefficient must be >= 0")
    return c_raman * pp


def coincidence_rates(src1: SourceParams, src2: SourceParams | None = None,
                      window_accidentals: bool = True) -> RateReport:
    """Small-``mu`` singles, twofold, accidental and (two-source) fourfold rates.

    The fourfold rate assumes pulse-synchronised, independent sources and
    uses the repetition rate of ``src1``.
    """
    R = src1.rep_rate
    ss = R * (src1.mu + src1.raman_per_pulse) * src1.eta_s
    si = R * (src1.mu + src1.raman_per_pulse) * src1.eta_i
    two = R * src1.mu * src1.eta_s * src1.eta_i
    acc = ss * si / R if window_accidentals else 0.0
    four = 0.0
    warn = []
    if src1.mu > MU_WARN:
        warn.append("mu_above_0.5")
    if src2 is not None:
        two2 = src2.rep_rate * src2.mu * src2.eta_s * src2.eta_i
        four = two * two2 / R
        if src2.mu > MU_WARN and not warn:
            warn.append("mu_above_0.5")
    return RateReport(ss, si, two, acc, four, ";".join(warn))


def fourfold_from_twofold(twofold_1, twofold_2, rep_rate=DEFAULT_REP_RATE):
    return twofold_1 * twofold_2 / rep_rate


def pgf(params: SourceParams, x):
    """Probability generating function ``E[x^n]`` of the pair number."""
    mu = params.mu
    if params.thermal:
        return 1.0 / (1.0 + mu * (1.0 - x))
    return math.exp(-mu * (1.0 - x))


def exact_twofold_probability(params: SourceParams):
    """Per-pulse probability that both threshold detectors click."""
    qs, qi = 1.0 - params.eta_s, 1.0 - params.eta_i
    es = math.exp(-params.raman_per_pulse * params.eta_s)
    ei = math.exp(-params.raman_per_pulse * params.eta_i)
    return 1.0 - es * pgf(params, qs) - ei * pgf(params, qi) + es * ei * pgf(params, qs * qi)


@dataclass
class EventRecord:
    """Per-pulse outcomes of one source over ``start <= t < start + len``."""
    start: int
    n_pairs: np.ndarray
    click_s: np.ndarray
    click_i: np.ndarray

    @property
    def twofold(self):
        return self.click_s & self.click_i


def sample_events(params: SourceParams, n_pulses: int, seed: int, stream: int = 0,
                  start: int = 0, use_numba=None) -> EventRecord:
    """Monte Carlo pulse record for one source.

    Draws for pulse ``t`` depend only on ``(seed, stream, t)``, so disjoint
    ranges can be generated independently and concatenated.
    """
    if n_pulses <= 0:
        raise DomainError(f"n_pulses must be > 0, got {n_pulses}")
    parts = []
    for a, b in _rng.chunks(n_pulses):
        u = _rng.uniforms(seed, stream, start + a, start + b, _kernels.SRC_COLS)
        parts.append(_kernels.source_outcomes(u, params.mu, params.raman_per_pulse,
                                              params.eta_s, params.eta_i, params.thermal,
                                              use_numba))
    n = np.concatenate([p[0] for p in parts])
    cs = np.concatenate([p[1] for p in parts])
    ci = np.concatenate([p[2] for p in parts])
    return EventRecord(start, n, cs, ci)


def sample_two_sources(p1: SourceParams, p2: SourceParams, n_pulses, seed, start=0,
                       use_numba=None):
    r1 = sample_events(p1, n_pulses, seed, SOURCE_STREAMS[0], start, use_numba)
    r2 = sample_events(p2, n_pulses, seed, SOURCE_STREAMS[1], start, use_numba)
    return r1, r2


def mc_rates(p1: SourceParams, n_pulses, seed, p2: SourceParams | None = None, use_numba=None):
    """Monte Carlo twofold (and fourfold) rates with 1-sigma Poisson errors.

    Returns a dict of ``(rate, error)`` tuples in counts/s.
    """
    R = p1.rep_rate
    if p2 is None:
        r1 = sample_events(p1, n_pulses, seed, SOURCE_STREAMS[0], use_numba=use_numba)
        c = int(np.count_nonzero(r1.twofold))
        return {"twofold": (R * c / n_pulses, R * math.sqrt(c) / n_pulses)}
    r1, r2 = sample_two_sources(p1, p2, n_pulses, seed, use_numba=use_numba)
    c1 = int(np.count_nonzero(r1.twofold))
    c2 = int(np.count_nonzero(r2.twofold))
    c4 = int(np.count_nonzero(r1.twofold & r2.twofold))
    return {
        "twofold": (R * c1 / n_pulses, R * math.sqrt(c1) / n_pulses),
        "twofold_2": (R * c2 / n_pulses, R * math.sqrt(c2) / n_pulses),
        "fourfold": (R * c4 / n_pulses, R * math.sqrt(c4) / n_pulses),
    }


def dump_events(r1: EventRecord, r2: EventRecord):
    """Debug lines ``pulse_index,n_pairs_1,n_pairs_2,clicks:s1,i1,s2,i2``."""
    if r1.start != r2.start or len(r1.n_pairs) != len(r2.n_pairs):
        raise DomainError("event records cover different pulse ranges")
    lines = []
    for j in range(len(r1.n_pairs)):
        lines.append(f"{r1.start + j},{r1.n_pairs[j]},{r2.n_pairs[j]},clicks:"
                     f"{int(r1.click_s[j])},{int(r1.click_i[j])},"
                     f"{int(r2.click_s[j])},{int(r2.click_i[j])}")
    return lines
