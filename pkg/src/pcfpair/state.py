"""Two-qubit polarization states and entanglement metrics.

Basis order is ``|HH>, |HV>, |VH>, |VV>`` throughout.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._io import fmt
from .errors import DomainError, NumericalError

HERM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_FLOOR = -1e-10
BASIS = ("HH", "HV", "VH", "VV")

SIGMA_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


class Bell(str, Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape != (4,):
            raise DomainError(f"pure state needs 4 amplitudes, got {a.size}")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise DomainError(f"pure state norm {np.linalg.norm(a):.15g} != 1")
        object.__setattr__(self, "amplitudes", a)

    def density(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    elements: np.ndarray

    def __post_init__(self):
        r = np.array(self.elements, dtype=complex)
        if r.shape != (4, 4):
            raise DomainError(f"density matrix must be 4x4, got {r.shape}")
        if not np.all(np.isfinite(r)):
            raise DomainError("density matrix has non-finite elements")
        herm = np.max(np.abs(r - r.conj().T))
        if herm > HERM_TOL:
            raise DomainError(f"density matrix not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(r).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"density matrix trace {tr:.15g} != 1")
        ev = np.linalg.eigvalsh(r)
        if ev[0] < PSD_FLOOR:
            raise DomainError(f"density matrix not PSD (min eigenvalue {ev[0]:.3g})")
        r.setflags(write=False)
        object.__setattr__(self, "elements", r)

    @classmethod
    def from_matrix(cls, m, clamp: bool = False):
        """Symmetrise and normalise ``m``; optionally clamp negative eigenvalues."""
        m = np.asarray(m, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        if clamp:
            m = clamp_psd(m)
        return cls(m / np.trace(m).real)


def clamp_psd(m):
    """Nearest PSD unit-trace matrix by zeroing negative eigenvalues."""
    m = 0.5 * (np.asarray(m, complex) + np.asarray(m, complex).conj().T)
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    if not w.sum() > 0:
        raise NumericalError("clamping removed every eigenvalue")
    out = (v * w) @ v.conj().T
    out = 0.5 * (out + out.conj().T)
    return out / np.trace(out).real


def bell_state(which="phi+") -> PureState:
    s = 1.0 / math.sqrt(2.0)
    vecs = {
        Bell.PHI_PLUS: (s, 0, 0, s),
        Bell.PHI_MINUS: (s, 0, 0, -s),
        Bell.PSI_PLUS: (0, s, s, 0),
        Bell.PSI_MINUS: (0, s, -s, 0),
    }
    return PureState(np.array(vecs[Bell(which)], dtype=complex))


def maximally_mixed() -> DensityMatrix:
    return DensityMatrix(np.eye(4) / 4)


def werner(p) -> DensityMatrix:
    """``p |Phi+><Phi+| + (1 - p) I/4``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Werner weight must be in [0, 1], got {p}")
    phi = bell_state().density().elements
    return DensityMatrix(p * phi + (1 - p) * np.eye(4) / 4)


def sagnac_state(phase, pair_visibility, amplitude_imbalance=0.0) -> DensityMatrix:
    """Partially dephased superposition of the |HH> and |VV> pair amplitudes.

    ``pair_visibility`` weights the coherent part; the remainder keeps the
    populations and drops the HH-VV coherences. ``amplitude_imbalance`` tilts
    the populations to ``(1 +- eps)/2``.
    """
    v, eps = pair_visibility, amplitude_imbalance
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"pair_visibility must be in [0, 1], got {v}")
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"amplitude_imbalance must be in [0, 1], got {eps}")
    if not math.isfinite(phase):
        raise DomainError("phase must be finite")
    psi = np.array([math.sqrt((1 + eps) / 2), 0, 0, np.exp(1j * phase) * math.sqrt((1 - eps) / 2)])
    pure = np.outer(psi, psi.conj())
    return DensityMatrix(v * pure + (1 - v) * np.diag(np.diag(pure)))


def _unit(x):
    # clip to [0, 1] and drop round-off next to the endpoints
    if abs(x) < 1e-12:
        return 0.0
    if abs(x - 1.0) < 1e-12:
        return 1.0
    return min(max(float(x), 0.0), 1.0)


def _rho(x):
    return x.elements if isinstance(x, DensityMatrix) else np.asarray(x, complex)


def _vec(x):
    return x.amplitudes if isinstance(x, PureState) else np.asarray(x, complex)


def fidelity(rho, target=None) -> float:
    """``<psi|rho|psi>``, with ``psi`` defaulting to Phi+."""
    psi = _vec(bell_state() if target is None else target)
    return _unit(np.real(psi.conj() @ _rho(rho) @ psi))


def purity(rho) -> float:
    r = _rho(rho)
    return float(np.real(np.trace(r @ r)))


def linear_entropy(rho) -> float:
    """``(4/3)(1 - Tr rho^2)``: 0 for pure states, 1 for I/4."""
    return _unit(4.0 / 3.0 * (1.0 - purity(rho)))


def concurrence(rho) -> float:
    """Wootters concurrence.

    The decreasing ``lambda_i`` are the singular values of
    ``sqrt(rho) (sy x sy) conj(sqrt(rho))``, which avoids the square roots of
    tiny, noisy eigenvalues of the non-Hermitian ``rho rho~``.
    """
    r = _rho(rho)
    try:
        w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
        root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        lam = np.linalg.svd(root @ SIGMA_YY @ root.conj(), compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"eigenvalue solve failed: {exc}") from exc
    c = lam[0] - lam[1] - lam[2] - lam[3]
    return _unit(c)


def tangle(rho) -> float:
    return _unit(concurrence(rho) ** 2)


def fit_sagnac(target_fidelity, x0=(0.0, 1.0, 0.0), penalty=1e-3):
    """``(phase, visibility, imbalance)`` whose state has the given Phi+ fidelity.

    The fidelity alone does not fix three parameters, so phase and imbalance
    carry a weak penalty: the fit prefers a compensated phase and balanced
    amplitudes whenever those reach the target.
    """
    from scipy.optimize import least_squares
    if not 0.25 <= target_fidelity <= 1.0:
        raise DomainError(f"target fidelity must be in [0.25, 1], got {target_fidelity}")

    def resid(x):
        return [fidelity(sagnac_state(x[0], x[1], x[2])) - target_fidelity,
                penalty * x[0], penalty * x[2]]

    sol = least_squares(resid, x0, bounds=([-math.pi, 0.0, 0.0], [math.pi, 1.0, 1.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return tuple(float(v) for v in sol.x)


def metrics(rho):
    """``(fidelity with Phi+, linear entropy, tangle)``."""
    return fidelity(rho), linear_entropy(rho), tangle(rho)


def metrics_line(rho) -> str:
    f, s, t = metrics(rho)
    return f"fidelity_phi_plus={fmt(f)},linear_entropy={fmt(s)},tangle={fmt(t)}"


# ---------------------------------------------------------------- file format

DM_HEADER = ("row", "col", "re", "im")


def write_density_csv(rho) -> str:
    """16 rows ``row,col,re,im`` at full (round-trip) precision."""
    r = _rho(rho)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DM_HEADER)
    for i in range(4):
        for j in range(4):
            w.writerow([i, j, repr(float(r[i, j].real)), repr(float(r[i, j].imag))])
    return buf.getvalue()


def read_density_csv(text, validate=True):
    """Parse the 16-row CSV; errors name the line, row and column of the first problem.

    Trailing ``key=value`` footer lines are ignored.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != DM_HEADER:
        raise DomainError("line 1: expected header row,col,re,im")
    m = np.full((4, 4), np.nan, dtype=complex)
    seen = set()
    for ln_no, ln in enumerate(lines[1:], start=2):
        if "=" in ln:
            continue
        parts = [c.strip() for c in ln.split(",")]
        if len(parts) != 4:
            raise DomainError(f"line {ln_no}: expected 4 fields, got {len(parts)}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise DomainError(f"line {ln_no}: row/col must be integers, got {parts[0]!r},{parts[1]!r}")
        if not (0 <= i < 4 and 0 <= j < 4):
            raise DomainError(f"line {ln_no}: row {i} col {j} out of range 0..3")
        try:
            re_, im_ = float(parts[2]), float(parts[3])
        except ValueError:
            raise DomainError(f"line {ln_no}: row {i} col {j}: non-numeric value")
        if not (math.isfinite(re_) and math.isfinite(im_)):
            raise DomainError(f"line {ln_no}: row {i} col {j}: non-finite value")
        if (i, j) in seen:
            raise DomainError(f"line {ln_no}: row {i} col {j} duplicated")
        seen.add((i, j))
        m[i, j] = complex(re_, im_)
    missing = [(i, j) for i in range(4) for j in range(4) if (i, j) not in seen]
    if missing:
        raise DomainError(f"row {missing[0][0]} col {missing[0][1]} missing")
    if not validate:
        return m
    for i in range(4):
        for j in range(i, 4):
            if abs(m[i, j] - np.conj(m[j, i])) > HERM_TOL:
                raise DomainError(f"row {i} col {j}: not Hermitian with row {j} col {i}")
    return DensityMatrix(m)
