"""Joint spectral amplitude, heralded purity and two-source HOM dips.

Frequencies are angular (rad/s). Spectral widths are intensity FWHM in nm,
converted at each band's centre wavelength. Filters and the pump are
Gaussian; the phase-matching amplitude is taken as flat across the filter
windows, so the JSA is ``alpha(ws + wi) * f_s(ws) * f_i(wi)`` with ``alpha``
the autoconvolution of the pump field.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import _kernels, _rng
from ._io import fmt
from .errors import ConfigError, DomainError
from .pairstats import HOM_BASELINE_STREAM, HOM_STREAM_BASE, SourceParams

C_LIGHT = 299_792_458.0
DEFAULT_PUMP_FWHM_NM = 0.5
GRID_POINTS = 128
GRID_SPAN_SIGMA = 8.0  # half-span in marginal intensity sigmas
MIN_SPAN_SIGMA = 3.0
MAX_GRID_POINTS = 2048
HOM_HEADER = ("delay_ps", "fourfold_rate", "raw_rate_error")


def omega(lam_nm):
    return 2.0 * math.pi * C_LIGHT / (lam_nm * 1e-9)


def fwhm_to_omega(center_nm, fwhm_nm):
    """Angular-frequency FWHM of a band of ``fwhm_nm`` around ``center_nm``."""
    return 2.0 * math.pi * C_LIGHT * fwhm_nm * 1e-9 / (center_nm * 1e-9) ** 2


def amplitude_sigma(d_omega):
    # intensity exp(-4 ln2 x^2 / FWHM^2) has amplitude exp(-x^2 / (2 s^2))
    return d_omega / (2.0 * math.sqrt(math.log(2.0)))


class FilterShape(str, Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class FilterSpec:
    center: float  # nm
    fwhm: float  # nm
    shape: FilterShape = FilterShape.GAUSSIAN

    def __post_init__(self):
        if not self.center > 0:
            raise DomainError(f"filter center must be > 0 nm, got {self.center}")
        if not self.fwhm > 0:
            raise DomainError(f"filter fwhm must be > 0 nm, got {self.fwhm}")
        object.__setattr__(self, "shape", FilterShape(self.shape))

    @property
    def omega0(self):
        return omega(self.center)

    @property
    def sigma(self):
        return amplitude_sigma(fwhm_to_omega(self.center, self.fwhm))


@dataclass(frozen=True)
class JointSpectralAmplitude:
    """Discretised JSA; rows index signal frequency, columns idler frequency."""
    signal_grid: np.ndarray
    idler_grid: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitude, dtype=complex)
        if a.shape != (len(self.signal_grid), len(self.idler_grid)):
            raise ConfigError(f"amplitude shape {a.shape} does not match grids "
                              f"({len(self.signal_grid)}, {len(self.idler_grid)})")
        norm = np.linalg.norm(a)
        if not norm > 0:
            raise ConfigError("JSA amplitude is identically zero")
        object.__setattr__(self, "amplitude", a / norm)

    def transpose(self):
        return JointSpectralAmplitude(self.idler_grid, self.signal_grid, self.amplitude.T)

    def heralded_state(self):
        """Reduced signal density matrix after heralding on the idler."""
        a = self.amplitude
        return a @ a.conj().T


def _gaussian_moments(sp, ss, si, detune):
    """Mean and covariance of |JSA|^2 in (ws - ws0, wi - wi0) offsets."""
    # |A|^2 = exp(-(x+y-d)^2/(2 sp^2) - x^2/ss^2 - y^2/si^2)
    P = np.array([[1 / sp**2 + 2 / ss**2, 1 / sp**2],
                  [1 / sp**2, 1 / sp**2 + 2 / si**2]])
    cov = np.linalg.inv(P)
    mean = cov @ np.array([detune / sp**2, detune / sp**2])
    return mean, cov, P


def build_jsa(pump_center, pump_fwhm, signal_filter: FilterSpec, idler_filter: FilterSpec,
              n=GRID_POINTS, span_sigma=GRID_SPAN_SIGMA) -> JointSpectralAmplitude:
    """Discretise the filtered two-photon amplitude on uniform grids.

    Each grid spans ``span_sigma`` marginal standard deviations of ``|JSA|^2``
    either side of its mean. The point count is raised above ``n`` if needed
    to resolve the narrowest conditional width with at least two samples per
    sigma.
    """
    if not pump_fwhm > 0 or not pump_center > 0:
        raise DomainError("pump center and fwhm must be > 0 nm")
    if span_sigma < MIN_SPAN_SIGMA:
        raise ConfigError(f"grid must span at least +-{MIN_SPAN_SIGMA} sigma, got {span_sigma}")
    if n < 64:
        raise ConfigError(f"grid needs at least 64 points per axis, got {n}")
    sp = amplitude_sigma(fwhm_to_omega(pump_center, pump_fwhm))
    ws0, wi0 = signal_filter.omega0, idler_filter.omega0
    ss, si = signal_filter.sigma, idler_filter.sigma
    detune = 2.0 * omega(pump_center) - ws0 - wi0
    mean, cov, P = _gaussian_moments(sp, ss, si, detune)
    # the joint peak must sit within 3 sigma of every envelope
    for name, off, width in (("signal filter", mean[0], ss / math.sqrt(2)),
                             ("idler filter", mean[1], si / math.sqrt(2)),
                             ("pump", mean[0] + mean[1] - detune, sp)):
        if abs(off) > MIN_SPAN_SIGMA * width:
            raise ConfigError(f"{name} does not overlap the energy-conservation line "
                              f"within the grid ({abs(off) / width:.3g} sigma off)")
    marg = np.sqrt(np.diag(cov))
    cond = 1.0 / np.sqrt(np.diag(P))
    need = int(math.ceil(np.max(4 * span_sigma * marg / cond))) + 1
    n_pts = max(n, need)
    if n_pts > MAX_GRID_POINTS:
        raise ConfigError(f"JSA needs {n_pts} points per axis to resolve the pump "
                          f"envelope (limit {MAX_GRID_POINTS})")
    xs = mean[0] + np.linspace(-span_sigma, span_sigma, n_pts) * marg[0]
    ys = mean[1] + np.linspace(-span_sigma, span_sigma, n_pts) * marg[1]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    log_amp = (-(X + Y - detune) ** 2 / (4 * sp**2) - X**2 / (2 * ss**2) - Y**2 / (2 * si**2))
    amp = np.exp(log_amp - log_amp.max())
    return JointSpectralAmplitude(ws0 + xs, wi0 + ys, amp)


def schmidt_coefficients(jsa: JointSpectralAmplitude):
    """Squared Schmidt coefficients, descending, summing to 1."""
    s = np.linalg.svd(jsa.amplitude, compute_uv=False)
    return s**2


def heralded_purity(jsa: JointSpectralAmplitude) -> float:
    lam = schmidt_coefficients(jsa)
    return float(np.sum(lam**2))


def schmidt_number(jsa: JointSpectralAmplitude) -> float:
    return 1.0 / heralded_purity(jsa)


def gaussian_purity(pump_center, pump_fwhm, signal_filter: FilterSpec, idler_filter: FilterSpec):
    """Closed-form purity of the continuous Gaussian JSA (no grid)."""
    sp = amplitude_sigma(fwhm_to_omega(pump_center, pump_fwhm))
    ss, si = signal_filter.sigma, idler_filter.sigma
    a = 1 / (4 * sp**2) + 1 / (2 * ss**2)
    b = 1 / (4 * sp**2) + 1 / (2 * si**2)
    c = 1 / (4 * sp**2)
    return math.sqrt((a * b - c * c) / (a * b))


def _check_same_signal_grid(j1, j2):
    g1, g2 = np.asarray(j1.signal_grid), np.asarray(j2.signal_grid)
    if g1.shape != g2.shape or not np.allclose(g1, g2, rtol=1e-12, atol=0):
        raise ConfigError("the two sources must share the same signal-frequency grid")


def overlap(jsa1: JointSpectralAmplitude, jsa2: JointSpectralAmplitude, delays_ps):
    """``Re Tr[rho1 rho2(dt)]`` of the heralded signal states for each delay."""
    _check_same_signal_grid(jsa1, jsa2)
    r1, r2 = jsa1.heralded_state(), jsa2.heralded_state()
    w = np.asarray(jsa1.signal_grid, float)
    w = w - w.mean()  # global phase cancels
    prod = r1 * r2.T
    out = []
    for dt in np.atleast_1d(np.asarray(delays_ps, float)) * 1e-12:
        d = np.exp(1j * w * dt)
        out.append(float(np.real(np.sum(prod * np.outer(d.conj(), d)))))
    return np.array(out)


def ideal_coincidence(jsa1, jsa2, delays_ps, polarization_overlap=1.0):
    """Two-photon coincidence probability ``(1 - M(dt)) / 2``."""
    return 0.5 * (1.0 - polarization_overlap * overlap(jsa1, jsa2, delays_ps))


@dataclass
class HomResult:
    """Dip profile. With ``mu == 0`` rates are ideal coincidence probabilities."""
    delays: np.ndarray
    fourfold_rate: np.ndarray
    rate_error: np.ndarray
    baseline: float
    baseline_error: float = 0.0
    accidental_rate: np.ndarray | None = None
    baseline_accidental: float = 0.0
    raw_visibility: float = 0.0
    raw_visibility_error: float = 0.0
    corrected_visibility: float = 0.0
    corrected_visibility_error: float = 0.0
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HOM_HEADER)
        for d, r, e in zip(self.delays, self.fourfold_rate, self.rate_error):
            w.writerow([fmt(d), fmt(r), fmt(e)])
        buf.write(f"raw_visibility={fmt(self.raw_visibility)},"
                  f"corrected_visibility={fmt(self.corrected_visibility)}\n")
        if self.metadata:
            buf.write(",".join(f"{k}={_meta(v)}" for k, v in self.metadata.items()) + "\n")
        return buf.getvalue()


def _meta(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def read_hom_csv(text):
    """Parse a dip CSV into ``(rows, footer)`` where footer merges all key=value lines."""
    lines = text.strip().splitlines()
    if tuple(lines[0].split(",")) != HOM_HEADER:
        raise DomainError(f"unexpected HOM header {lines[0]!r}")
    rows, footer = [], {}
    for ln in lines[1:]:
        if "=" in ln:
            footer.update(kv.split("=", 1) for kv in ln.split(","))
        else:
            rows.append(tuple(float(x) for x in ln.split(",")))
    return rows, footer


def visibility(baseline, minimum, baseline_err=0.0, minimum_err=0.0):
    """``(baseline - min) / baseline`` clipped to [0, 1], with a delta-method error."""
    if not baseline > 0:
        return 0.0, 0.0
    v = (baseline - minimum) / baseline
    err = math.hypot(minimum_err / baseline, minimum * baseline_err / baseline**2)
    return float(min(max(v, 0.0), 1.0)), float(err)


def _mc_point(seed, stream, n_pulses, det: SourceParams, overlap_value, use_numba, chunk):
    four = acc = 0
    for a, b in _rng.chunks(n_pulses, chunk):
        # one extra row lets the adjacent-pulse estimate look across the chunk edge
        u = _rng.uniforms(seed, stream, a, b + 1, _kernels.HOM_COLS)
        f, c = _kernels.hom_counts(u, b - a, det.mu, det.raman_per_pulse, det.eta_s,
                                   det.eta_i, overlap_value, det.thermal, use_numba)
        four += f
        acc += c
    return four, acc


def dip_profile(jsa1: JointSpectralAmplitude, jsa2: JointSpectralAmplitude, delays_ps,
                mu: float, detection: SourceParams, seed: int = 0, n_pulses: int = 2_000_000,
                polarization_overlap: float = 1.0, use_numba=None,
                chunk: int = 4 * _rng.BLOCK) -> HomResult:
    """Fourfold HOM dip versus delay.

    ``mu == 0`` gives the noiseless two-photon limit: rates are coincidence
    probabilities ``(1 - M(dt)) / 2`` with baseline 1/2. Otherwise each delay
    point is a Monte Carlo run on its own substream (``seed``, delay index)
    with ``mu`` pairs per pulse per source and the detection model of
    ``detection``; the baseline is a separate run with zero overlap, the
    ``|dt| -> inf`` limit. Accidentals are estimated by pairing each pulse's
    source-1 photons with the next pulse's source-2 signal photons.
    """
    delays = np.atleast_1d(np.asarray(delays_ps, float))
    if delays.size == 0:
        raise DomainError("at least one delay is required")
    if not 0.0 <= polarization_overlap <= 1.0:
        raise DomainError(f"polarization_overlap must be in [0, 1], got {polarization_overlap}")
    if mu < 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    M = np.clip(polarization_overlap * overlap(jsa1, jsa2, delays), 0.0, 1.0)
    meta = {"mu": float(mu)}
    if mu == 0:
        p = 0.5 * (1.0 - M)
        v, _ = visibility(0.5, float(p.min()))
        return HomResult(delays, p, np.zeros_like(p), 0.5, 0.0, np.zeros_like(p), 0.0,
                         v, 0.0, v, 0.0, meta)
    if n_pulses <= 0:
        raise DomainError(f"n_pulses must be > 0, got {n_pulses}")
    det = SourceParams(mu, detection.raman_per_pulse, detection.eta_s, detection.eta_i,
                       detection.rep_rate, detection.photon_statistics)
    R = det.rep_rate
    scale = R / n_pulses
    counts, accs = [], []
    for j, m in enumerate(M):
        f, a = _mc_point(seed, HOM_STREAM_BASE + j, n_pulses, det, float(m), use_numba, chunk)
        counts.append(f)
        accs.append(a)
    fb, ab = _mc_point(seed, HOM_BASELINE_STREAM, n_pulses, det, 0.0, use_numba, chunk)
    counts = np.array(counts, float)
    accs = np.array(accs, float)
    rates = counts * scale
    errs = np.sqrt(counts) * scale
    base, base_err = fb * scale, math.sqrt(fb) * scale
    i = int(np.argmin(rates))
    v, verr = visibility(base, rates[i], base_err, errs[i])
    meta.update(seed=int(seed), n_pulses=int(n_pulses))
    res = HomResult(delays, rates, errs, base, base_err, accs * scale, ab * scale,
                    v, verr, v, verr, meta)
    return background_subtract(res, accs * scale, ab * scale,
                               accidental_error=np.sqrt(accs) * scale,
                               baseline_accidental_error=math.sqrt(ab) * scale)


def background_subtract(result: HomResult, accidental_estimate, baseline_accidental=None,
                        accidental_error=None, baseline_accidental_error=0.0) -> HomResult:
    """Corrected visibility from ``rate - accidentals``; raw fields are kept.

    ``baseline_accidental`` defaults to the estimate at the largest ``|delay|``.
    """
    acc = np.broadcast_to(np.asarray(accidental_estimate, float), result.fourfold_rate.shape)
    if baseline_accidental is None:
        baseline_accidental = float(acc[int(np.argmax(np.abs(result.delays)))])
    net = result.fourfold_rate - acc
    bad = np.nonzero(net < 0)[0]
    if bad.size:
        raise DomainError(f"over-subtraction: accidentals exceed the measured rate at "
                          f"delay {result.delays[bad[0]]} ps")
    net_base = result.baseline - baseline_accidental
    if net_base < 0:
        raise DomainError("over-subtraction: accidentals exceed the baseline rate")
    aerr = np.zeros_like(net) if accidental_error is None else np.asarray(accidental_error, float)
    i = int(np.argmin(net))
    v, verr = visibility(net_base, net[i], math.hypot(result.baseline_error, baseline_accidental_error),
                         math.hypot(result.rate_error[i], aerr[i]))
    return HomResult(result.delays, result.fourfold_rate, result.rate_error, result.baseline,
                     result.baseline_error, acc.copy(), float(baseline_accidental),
                     result.raw_visibility, result.raw_visibility_error, v, verr,
                     dict(result.metadata))


def calibrate_pump_fwhm(signal_filter: FilterSpec, idler_filter: FilterSpec, pump_center,
                        target=0.97, bracket=(0.01, 50.0), n=GRID_POINTS):
    """Pump FWHM (nm) at which the discretised heralded purity equals ``target``."""
    def f(fw):
        return heralded_purity(build_jsa(pump_center, fw, signal_filter, idler_filter, n=n)) - target
    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise DomainError(f"purity target {target} not reachable for pump fwhm in {bracket} nm "
                          f"(purity spans {flo + target:.4g} to {fhi + target:.4g})")
    return brentq(f, lo, hi, xtol=1e-10, rtol=1e-12)
