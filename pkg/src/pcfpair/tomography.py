"""Two-qubit polarization tomography: simulation, linear inversion and MLE.

Each analysis arm is a quarter-wave plate, then a half-wave plate, then a
PBS whose transmitted (H) port is detected. Light meets the QWP first, so
the arm applies ``U = U_hwp(h) U_qwp(q)`` and the detected projector is
``U^dagger |H>``. Jones matrices use the fast-axis angle from horizontal:

    U_hwp(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
    U_qwp(t) = [[1 + i cos 2t, i sin 2t], [i sin 2t, 1 - i cos 2t]] / sqrt(2)

With these, ``R = (H - iV)/sqrt2``, ``L = (H + iV)/sqrt2``, ``D = (H + V)/sqrt2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._io import fmt
from .errors import DomainError, NotInformationallyComplete, NumericalError
from .state import DensityMatrix, clamp_psd, metrics

SETTINGS_VERSION = 1
COUNTS_HEADER = ("label", "hwp1_deg", "qwp1_deg", "hwp2_deg", "qwp2_deg", "counts", "integration_s")

# single-arm (qwp, hwp) in degrees realising each analysed polarization
ARM_ANGLES = {
    "H": (0.0, 0.0),
    "V": (0.0, 45.0),
    "D": (45.0, 22.5),
    "R": (0.0, 67.5),
    "L": (0.0, 22.5),
}
STANDARD_LABELS = ("HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                   "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL")

_PAULI = (np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
          np.array([[1, 0], [0, -1]]))
PAULI_PRODUCTS = np.array([np.kron(a, b) for a in _PAULI for b in _PAULI])


def hwp(theta_deg):
    t = math.radians(2 * theta_deg)
    return np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]], dtype=complex)


def qwp(theta_deg):
    t = math.radians(2 * theta_deg)
    return np.array([[1 + 1j * math.cos(t), 1j * math.sin(t)],
                     [1j * math.sin(t), 1 - 1j * math.cos(t)]]) / math.sqrt(2)


@dataclass(frozen=True)
class MeasurementSetting:
    hwp_1: float
    qwp_1: float
    hwp_2: float
    qwp_2: float
    label: str = ""

    def __post_init__(self):
        for name in ("hwp_1", "qwp_1", "hwp_2", "qwp_2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v < 180.0):
                raise DomainError(f"{name} angle must be in [0, 180) degrees, got {v}")


@dataclass(frozen=True)
class CountRecord:
    setting: MeasurementSetting
    counts: int
    integration_time: float = 1.0

    def __post_init__(self):
        if self.counts < 0 or int(self.counts) != self.counts:
            raise DomainError(f"counts must be a non-negative integer, got {self.counts}")
        if not self.integration_time > 0:
            raise DomainError(f"integration time must be > 0, got {self.integration_time}")


def standard_settings():
    """The canonical 16 two-qubit analysis settings."""
    out = []
    for lab in STANDARD_LABELS:
        q1, h1 = ARM_ANGLES[lab[0]]
        q2, h2 = ARM_ANGLES[lab[1]]
        out.append(MeasurementSetting(h1, q1, h2, q2, lab))
    return out


def _check_unique(settings):
    labels = [s.label for s in settings]
    if len(set(labels)) != len(labels):
        dup = next(l for l in labels if labels.count(l) > 1)
        raise DomainError(f"duplicate setting label {dup!r}")


def arm_state(hwp_deg, qwp_deg):
    u = hwp(hwp_deg) @ qwp(qwp_deg)
    return u.conj().T @ np.array([1.0, 0.0])


def projector_for(setting: MeasurementSetting):
    """Two-photon state ``|psi>`` detected by ``setting`` (unit norm)."""
    from .state import PureState
    v = np.kron(arm_state(setting.hwp_1, setting.qwp_1), arm_state(setting.hwp_2, setting.qwp_2))
    # fix the global phase: first nonzero component real and positive
    k = int(np.argmax(np.abs(v) > 1e-12))
    v = v * np.exp(-1j * np.angle(v[k]))
    return PureState(v / np.linalg.norm(v))


def _design(records):
    psis = np.array([projector_for(r.setting).amplitudes for r in records])
    # a[k, j] = <psi_k| sigma_j |psi_k> / 4
    a = np.einsum("ki,jil,kl->kj", psis.conj(), PAULI_PRODUCTS, psis).real / 4.0
    return psis, a


def simulate_counts(rho, settings, mean_total, seed):
    """Poisson counts with mean ``mean_total <psi_k|rho|psi_k>`` per setting."""
    if not mean_total > 0:
        raise DomainError(f"mean_total must be > 0, got {mean_total}")
    _check_unique(settings)
    r = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, complex)
    rng = np.random.default_rng(seed)
    out = []
    for s in settings:
        psi = projector_for(s).amplitudes
        p = max(float(np.real(psi.conj() @ r @ psi)), 0.0)
        out.append(CountRecord(s, int(rng.poisson(mean_total * p)), 1.0))
    return out


def expected_counts(rho, settings, mean_total):
    r = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, complex)
    return np.array([mean_total * float(np.real(projector_for(s).amplitudes.conj() @ r
                                                @ projector_for(s).amplitudes))
                     for s in settings])


def _key(r):
    s = r.setting
    return (s.label, s.hwp_1, s.qwp_1, s.hwp_2, s.qwp_2, r.counts, r.integration_time)


def _canonical(records, counts=None):
    """Records (and optional count overrides) in a fixed order independent of input order."""
    order = sorted(range(len(records)), key=lambda k: _key(records[k]))
    recs = [records[k] for k in order]
    if counts is None:
        return recs, None
    counts = np.asarray(counts, float)
    if counts.shape != (len(records),):
        raise DomainError(f"expected {len(records)} counts, got {counts.shape}")
    return recs, counts[order]


def _counts_and_times(records, counts=None):
    n = np.array([r.counts for r in records], float) if counts is None else np.asarray(counts, float)
    t = np.array([r.integration_time for r in records], float)
    return n, t


def linear_inversion(records, counts=None):
    """Hermitian unit-trace estimate from a least-squares Pauli expansion.

    ``counts`` may override the record counts (e.g. noiseless expectations).
    The result is not guaranteed PSD.
    """
    records, counts = _canonical(records, counts)
    _, a = _design(records)
    rank = np.linalg.matrix_rank(a, tol=1e-10)
    if rank < 16:
        raise NotInformationallyComplete(rank)
    n, t = _counts_and_times(records, counts)
    if not n.sum() > 0:
        raise DomainError("all counts are zero")
    c, *_ = np.linalg.lstsq(a, n / t, rcond=None)
    m = np.einsum("j,jab->ab", c, PAULI_PRODUCTS) / 4.0
    m = 0.5 * (m + m.conj().T)
    return m / np.trace(m).real


def is_physical(m, floor=-1e-10):
    return bool(np.linalg.eigvalsh(0.5 * (m + np.conj(m).T))[0] >= floor)


# ---------------------------------------------------------------- MLE

_TRIL = np.tril_indices(4, -1)


def t_from_params(x):
    """Lower-triangular T: 4 real diagonal entries, then 6 complex sub-diagonal entries."""
    T = np.zeros((4, 4), complex)
    T[np.diag_indices(4)] = x[:4]
    T[_TRIL] = x[4:10] + 1j * x[10:16]
    return T


def params_from_t(T):
    return np.concatenate([T.diagonal().real, T[_TRIL].real, T[_TRIL].imag])


def rho_from_params(x):
    T = t_from_params(x)
    m = T.conj().T @ T
    return m / np.trace(m).real


def poisson_nll(mean, n):
    """``sum(mean - n ln mean)``; zero-count terms contribute ``mean`` only."""
    mean = np.asarray(mean, float)
    pos = n > 0
    return float(np.sum(mean) - np.sum(n[pos] * np.log(mean[pos])))


def profile_nll(rho, records, counts=None):
    """NLL of a normalised state with its best-fit intensity ``sum n / sum t p``."""
    r = rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho, complex)
    records, counts = _canonical(records, counts)
    psis, _ = _design(records)
    n, t = _counts_and_times(records, counts)
    p = np.clip(np.einsum("ki,ij,kj->k", psis.conj(), r, psis).real, 1e-300, None)
    scale = n.sum() / np.sum(t * p)
    return poisson_nll(scale * t * p, n)


def _objective(psis, n, t):
    pos = n > 0
    npos = n[pos]
    shift = np.sum(npos * np.log(npos)) - n.sum()

    def f(x):
        T = t_from_params(x)
        tp = psis @ T.T  # rows are T psi_k
        q = np.sum(np.abs(tp) ** 2, axis=1)
        mean = t * q
        if np.any(mean[pos] <= 0):
            return np.inf, np.zeros_like(x)
        # deviance form: sum(mean - n - n ln(mean / n)), zero at a perfect fit
        val = np.sum(mean) - np.sum(npos * np.log(mean[pos])) + shift
        w = t.copy()
        w[pos] -= npos / q[pos]
        # dF/dT* = sum_k w_k (T psi_k) psi_k^dagger
        G = (tp * w[:, None]).T @ psis.conj()
        grad = np.concatenate([2 * G.diagonal().real, 2 * G[_TRIL].real, 2 * G[_TRIL].imag])
        return val, grad
    return f, shift


def _done(res, n):
    """Converged, or stalled in the line search at a stationary point.

    A perfect fit drives the deviance to zero, after which L-BFGS-B reports a
    line-search failure; that counts as converged when the gradient, scaled by
    the parameter magnitude, is below 1e-6 of the total counts.
    """
    if res.success:
        return True
    scale = np.max(np.abs(res.jac)) * max(np.max(np.abs(res.x)), 1.0)
    return bool(np.isfinite(res.fun) and scale <= 1e-6 * max(n.sum(), 1.0))


def _init_params(records, n, t):
    try:
        lin = linear_inversion(records, counts=n)
        rho0 = clamp_psd(lin)
        rho0 = (1 - 1e-3) * rho0 + 1e-3 * np.eye(4) / 4
        J = np.eye(4)[::-1]
        L = np.linalg.cholesky(J @ rho0 @ J)
        T = J @ L.conj().T @ J
    except (np.linalg.LinAlgError, NumericalError):
        T = np.eye(4) / 2
    psis, _ = _design(records)
    q = np.sum(np.abs(psis @ T.T) ** 2, axis=1)
    T = T * math.sqrt(n.sum() / np.sum(t * q))
    return params_from_t(T)


@dataclass
class ReconstructionReport:
    rho: DensityMatrix
    neg_log_likelihood: float
    iterations: int
    converged: bool
    metrics: tuple = field(default=(0.0, 0.0, 0.0))
    intensity: float = 0.0

    def footer(self) -> str:
        f, s, t = self.metrics
        return (f"fidelity_phi_plus={fmt(f)},linear_entropy={fmt(s)},tangle={fmt(t)},"
                f"nll={fmt(self.neg_log_likelihood)},converged={str(self.converged).lower()}")

    def to_text(self) -> str:
        from .state import write_density_csv
        return write_density_csv(self.rho) + self.footer() + "\n"


def mle_reconstruct(records, tolerance=1e-10, max_iterations=5000, init=None, counts=None):
    """Physical density matrix maximising the Poisson likelihood of ``records``.

    ``rho = T^dagger T / Tr`` with ``T`` lower triangular. The unnormalised
    ``T^dagger T`` also carries the count intensity, so expected counts are
    ``t_k <psi_k|T^dagger T|psi_k>``. L-BFGS-B runs on the analytic gradient
    and stops when the relative NLL change falls below ``tolerance``; if it
    reports failure, one restart from the maximally mixed state is tried and
    the better optimum is kept. ``init`` may be a 16-vector of T parameters.
    ``counts`` optionally overrides the record counts with real values.
    """
    records, counts = _canonical(records, counts)
    _check_unique([r.setting for r in records])
    n, t = _counts_and_times(records, counts)
    if not n.sum() > 0:
        raise DomainError("all counts are zero")
    psis, a = _design(records)
    rank = np.linalg.matrix_rank(a, tol=1e-10)
    if rank < 16:
        raise NotInformationallyComplete(rank)
    f, shift = _objective(psis, n, t)
    x0 = _init_params(records, n, t) if init is None else np.asarray(init, float)
    opts = {"maxiter": int(max_iterations), "ftol": tolerance, "gtol": 1e-12, "maxcor": 30}
    res = minimize(f, x0, jac=True, method="L-BFGS-B", options=opts)
    nit = int(res.nit)
    if not _done(res, n):
        T = np.eye(4) / 2
        q = np.sum(np.abs(psis @ T.T) ** 2, axis=1)
        xm = params_from_t(T * math.sqrt(n.sum() / np.sum(t * q)))
        res2 = minimize(f, xm, jac=True, method="L-BFGS-B", options=opts)
        nit += int(res2.nit)
        if res2.fun < res.fun:
            res = res2
    T = t_from_params(res.x)
    m = T.conj().T @ T
    intensity = float(np.trace(m).real)
    rho = DensityMatrix.from_matrix(m / intensity)
    nll = float(res.fun - shift)
    return ReconstructionReport(rho, nll, nit, _done(res, n), metrics(rho), intensity)


# ---------------------------------------------------------------- files

def counts_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_HEADER)
    for r in records:
        s = r.setting
        w.writerow([s.label, fmt(s.hwp_1), fmt(s.qwp_1), fmt(s.hwp_2), fmt(s.qwp_2),
                    int(r.counts), fmt(r.integration_time)])
    return buf.getvalue()


def read_counts_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != COUNTS_HEADER:
        raise DomainError("line 1: expected header " + ",".join(COUNTS_HEADER))
    out = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = [c.strip() for c in ln.split(",")]
        if len(parts) != len(COUNTS_HEADER):
            raise DomainError(f"line {ln_no}: expected {len(COUNTS_HEADER)} fields, got {len(parts)}")
        try:
            h1, q1, h2, q2 = (float(x) for x in parts[1:5])
            c = int(parts[5])
            it = float(parts[6])
        except ValueError as exc:
            raise DomainError(f"line {ln_no}: {exc}") from None
        try:
            out.append(CountRecord(MeasurementSetting(h1, q1, h2, q2, parts[0]), c, it))
        except DomainError as exc:
            raise DomainError(f"line {ln_no}: {exc}") from None
    _check_unique([r.setting for r in out])
    return out
