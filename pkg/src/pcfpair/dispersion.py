"""Guided-mode dispersion of a silica strand in air.

The photonic crystal fibre is approximated by a circular fused-silica core
with an air cladding (n = 1) and the scalar LP01 mode. Wavelengths are in
micrometres throughout unless a name says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError

# First zero of J0: upper edge of the LP01 transverse parameter.
J0_ZERO = 2.404825557695773

N2_SILICA = 2e-20  # m^2/W
ZDW_WINDOW = (0.4, 1.6)


@dataclass(frozen=True)
class SellmeierModel:
    """Three-term Sellmeier fit ``n^2 = 1 + sum B_k l^2 / (l^2 - C_k)``.

    ``C_k`` are the squared resonance wavelengths in um^2. Defaults are the
    Malitson fused-silica coefficients.
    """

    b: tuple = (0.6961663, 0.4079426, 0.8974794)
    c: tuple = (0.0684043 ** 2, 0.1162414 ** 2, 9.896161 ** 2)
    window: tuple = (0.21, 3.7)

    def __post_init__(self):
        if len(self.b) != len(self.c) or not self.b:
            raise DomainError("Sellmeier model needs matching, non-empty B and C lists")
        if any(x <= 0 for x in self.b) or any(x <= 0 for x in self.c):
            raise DomainError("Sellmeier coefficients must be positive")


FUSED_SILICA = SellmeierModel()


@dataclass(frozen=True)
class FiberSpec:
    core_diameter: float  # um
    length: float = 0.12  # m
    n2: float = N2_SILICA  # m^2/W
    material: SellmeierModel = field(default=FUSED_SILICA)

    def __post_init__(self):
        if not 0.5 < self.core_diameter <= 50.0:
            raise DomainError(
                f"core_diameter must lie in (0.5, 50] um, got {self.core_diameter}")
        if not self.length > 0:
            raise DomainError(f"length must be > 0, got {self.length}")
        if not self.n2 > 0:
            raise DomainError(f"n2 must be > 0, got {self.n2}")

    def with_diameter(self, d):
        return FiberSpec(d, self.length, self.n2, self.material)


@dataclass(frozen=True)
class ModeSolution:
    wavelength: float
    n_eff: float
    u: float
    w: float
    v_number: float
    mode_field_radius: float  # um
    residual: float


def _check_window(lam, model):
    lo, hi = model.window
    lam = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(lam < lo) or np.any(lam > hi):
        bad = lam[(lam < lo) | (lam > hi) | ~np.isfinite(lam)]
        raise DomainError(
            f"wavelength {bad.flat[0]!r} um outside Sellmeier validity window [{lo}, {hi}] um")
    return lam


def silica_index(lam, model: SellmeierModel = FUSED_SILICA):
    """Material refractive index at ``lam`` (um); scalar in, scalar out."""
    x = _check_window(lam, model)
    x2 = x[..., None] ** 2
    n = np.sqrt(1.0 + np.sum(np.asarray(model.b) * x2 / (x2 - np.asarray(model.c)), axis=-1))
    return float(n) if n.ndim == 0 else n


def v_number(lam, d, n_core):
    return np.pi * d / lam * np.sqrt(n_core ** 2 - 1.0)


def _char_residual(u, w):
    """Normalized LP01 residual ``(u J1 K0 - w K1 J0) / (|u J1 K0| + |w K1 J0|)``."""
    a = u * special.j1(u) * special.k0e(w)
    b = w * special.k1e(w) * special.j0(u)
    return (a - b) / (np.abs(a) + np.abs(b))


def _newton(v, x, lo, hi, to_uw, dg_dx, increasing, max_iter):
    done = np.zeros(v.shape, bool)
    for _ in range(max_iter):
        u, w = to_uw(x)
        j0, j1 = special.j0(u), special.j1(u)
        k0, k1 = special.k0e(w), special.k1e(w)
        g = u * j1 * k0 - w * k1 * j0
        below = g < 0 if increasing else g > 0
        lo = np.where(below, x, lo)
        hi = np.where(~below & (g != 0), x, hi)
        xn = x - g / dg_dx(u, w, j1, k1)
        out = (xn < lo) | (xn > hi) | ~np.isfinite(xn)
        xn = np.where(out, 0.5 * (lo + hi), xn)
        # quadratic convergence: a step this small leaves xn at the noise floor
        newly = np.abs(xn - x) <= 1e-13 * np.abs(x)
        x = np.where(done, x, xn)
        if np.all(done | newly):
            return x
        done |= newly
    raise NumericalError(
        f"LP01 solve did not converge: V in [{v.min():.6g}, {v.max():.6g}], "
        f"bracket width up to {np.max(hi - lo):.3g}")


def solve_uw(v, max_iter=60):
    """Transverse parameters ``(u, w)`` of LP01 for an array of V-numbers.

    Newton iteration on ``G = u J1(u) K0(w) - w K1(w) J0(u)``, with
    ``dG/du = J1 K1 V^2 / w`` along ``u^2 + w^2 = V^2``. Strongly guided points
    (V > 2) iterate on ``u``; weakly guided ones iterate on ``b = (w/V)^2`` so
    that the small parameter ``w`` is never formed by cancellation. The
    exponential scaling of K0e/K1e cancels in each step. Steps leaving the
    bracket fall back to bisection.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    u_out = np.empty_like(v)
    w_out = np.empty_like(v)
    u0 = (1.0 + np.sqrt(2.0)) * v / (1.0 + (4.0 + v ** 4) ** 0.25)

    strong = v > 2.0
    if strong.any():
        vs = v[strong]
        hi = np.minimum(vs, J0_ZERO)
        x = np.minimum(u0[strong], hi * (1.0 - 1e-9))
        u = _newton(
            vs, x, np.zeros_like(vs), hi,
            lambda x: (x, np.sqrt(vs * vs - x * x)),
            lambda u, w, j1, k1: j1 * k1 * vs * vs / w,
            True, max_iter)
        u_out[strong] = u
        w_out[strong] = np.sqrt(vs * vs - u * u)
    weak = ~strong
    if weak.any():
        vw = v[weak]
        lo = np.maximum(0.0, 1.0 - (J0_ZERO / vw) ** 2)
        x = np.clip(1.0 - (u0[weak] / vw) ** 2, lo + 1e-12, 1.0 - 1e-12)
        b = _newton(
            vw, x, lo, np.ones_like(vw),
            lambda x: (vw * np.sqrt(1.0 - x), vw * np.sqrt(x)),
            lambda u, w, j1, k1: -j1 * k1 * vw ** 4 / (2.0 * u * w),
            False, max_iter)
        u_out[weak] = vw * np.sqrt(1.0 - b)
        w_out[weak] = vw * np.sqrt(b)
    return u_out, w_out


def _mode_arrays(lam, fiber):
    lam = _check_window(lam, fiber.material)
    n_core = np.asarray(silica_index(lam, fiber.material))
    v = v_number(lam, fiber.core_diameter, n_core)
    u, w = solve_uw(v)
    u, w = u.reshape(v.shape), w.reshape(v.shape)
    b = (w / v) ** 2
    n_eff = np.sqrt(1.0 + b * (n_core ** 2 - 1.0))
    return lam, n_core, v, u, w, n_eff


def n_eff(lam, fiber: FiberSpec):
    """Effective index of LP01, vectorized over ``lam``."""
    out = _mode_arrays(lam, fiber)[-1]
    return float(out) if np.ndim(out) == 0 else out


def marcuse_radius(v, core_radius):
    """Gaussian-equivalent mode-field radius (Marcuse fit in V)."""
    return core_radius * (0.65 + 1.619 * v ** -1.5 + 2.879 * v ** -6)


def effective_index(lam: float, fiber: FiberSpec) -> ModeSolution:
    lam, n_core, v, u, w, ne = _mode_arrays(float(lam), fiber)
    res = float(_char_residual(u, w))
    if not (1.0 < ne < n_core) or abs(res) > 1e-12:
        raise NumericalError(
            f"LP01 solution invalid at lambda={float(lam)} um, V={float(v):.6g}: "
            f"n_eff={float(ne)!r}, residual={res:.3g}, bracket=(0, {min(float(v), J0_ZERO):.6g})")
    return ModeSolution(float(lam), float(ne), float(u), float(w), float(v),
                        float(marcuse_radius(v, fiber.core_diameter / 2.0)), res)


def d2n_dlam2(lam, fiber: FiberSpec, h=1e-4):
    """Second derivative of n_eff in um^-2 by Richardson-refined central differences."""
    lam = np.asarray(lam, dtype=float)
    offs = np.array([-2 * h, -h, 0.0, h, 2 * h])
    n = n_eff(lam[..., None] + offs, fiber)
    d_h = (n[..., 3] - 2 * n[..., 2] + n[..., 1]) / h ** 2
    d_2h = (n[..., 4] - 2 * n[..., 2] + n[..., 0]) / (2 * h) ** 2
    return (4.0 * d_h - d_2h) / 3.0


def gvd(lam, fiber: FiberSpec):
    """Dispersion parameter D in ps/(nm km)."""
    c_um_per_ps = 299.792458
    d2 = d2n_dlam2(lam, fiber)
    # ps/um^2 -> ps/(nm km)
    return -np.asarray(lam) / c_um_per_ps * d2 * 1e6


def zero_dispersion_wavelength(fiber: FiberSpec, window=ZDW_WINDOW, step=1e-3, tol=1e-5):
    """Shortest wavelength in ``window`` where the LP01 group-velocity dispersion vanishes.

    Thin strands can have a second, longer ZDW; only the first crossing is
    returned.
    """
    grid = np.arange(window[0], window[1] + step / 2, step)
    d2 = d2n_dlam2(grid, fiber)
    idx = np.nonzero(np.sign(d2[:-1]) * np.sign(d2[1:]) < 0)[0]
    if idx.size == 0:
        raise DomainError(
            f"no ZDW in range [{window[0]}, {window[1]}] um for d={fiber.core_diameter} um")
    a, b = grid[idx[0]], grid[idx[0] + 1]
    fa = d2[idx[0]]
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = float(d2n_dlam2(m, fiber))
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return float(0.5 * (a + b))


def effective_area(lam, fiber: FiberSpec):
    """Effective mode area in m^2, ``pi * w^2`` with the Marcuse mode-field radius."""
    lam, n_core, v, u, w, ne = _mode_arrays(lam, fiber)
    r = marcuse_radius(v, fiber.core_diameter / 2.0) * 1e-6
    out = np.pi * r ** 2
    return float(out) if np.ndim(out) == 0 else out


def overlap_area(lam, fiber: FiberSpec, n_r=200_001, extent=30.0):
    """Effective area from the exact LP01 field by radial quadrature (m^2).

    ``(int |E|^2 dA)^2 / int |E|^4 dA`` on a uniform radial grid out to
    ``extent`` core radii. Slow; used as a cross-check of ``effective_area``.
    """
    m = effective_index(lam, fiber)
    a = fiber.core_diameter / 2.0
    r = np.linspace(0.0, extent * a, n_r)
    inside = r < a
    e = np.empty_like(r)
    e[inside] = special.j0(m.u * r[inside] / a) / special.j0(m.u)
    e[~inside] = special.k0(m.w * r[~inside] / a) / special.k0(m.w)
    e2 = e * e
    i2 = integrate.trapezoid(e2 * r, r)
    i4 = integrate.trapezoid(e2 * e2 * r, r)
    return 2.0 * np.pi * i2 ** 2 / i4 * 1e-12


def gamma(lam_p, fiber: FiberSpec, a_eff=None):
    """Nonlinear coefficient ``2 pi n2 / (lambda_p A_eff)`` in 1/(W m)."""
    if a_eff is None:
        a_eff = effective_area(lam_p, fiber)
    if np.any(np.asarray(a_eff) <= 0):
        raise DomainError("effective area must be positive")
    return 2.0 * np.pi * fiber.n2 / (np.asarray(lam_p) * 1e-6 * np.asarray(a_eff))
