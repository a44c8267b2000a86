"""Resistance kernels and the force/torque functionals of a rough disk.

``lam`` is the relative angular velocity ``omega * r / v``.  The kernel
``cost_c`` gives the dimensionless (transversal, longitudinal) force density
and ``cost_ci`` the torque density; integrating them against a scattering
measure yields ``R_T``, ``R_L`` and ``R_I``.  Three regimes are distinct:
``lam < 1`` (full square), ``lam == 1`` (support ``x >= 0``) and ``lam > 1``
(support ``x >= arccos(1/lam)`` with an integrable inverse-square-root
singularity on its edge).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import measures as _m
from .errors import DivisionByZero, DomainError

HALF_PI = 0.5 * math.pi


def x_min(lam: float) -> float:
    """Lower edge of the kernel support in ``x``."""
    if lam < 1.0:
        return -HALF_PI
    return math.acos(1.0 / lam)


def zeta(x, lam: float):
    """``arcsin(sqrt(1 - lam^2 cos^2 x))``, so that ``cos(zeta) = lam cos x``."""
    if lam <= 0:
        raise DomainError("zeta needs lam > 0")
    x = np.asarray(x, dtype=float)
    if lam > 1.0 and np.any(x < x_min(lam) - 1e-12):
        raise DomainError(f"x below arccos(1/lam) = {x_min(lam)} for lam = {lam}")
    arg = 1.0 - (lam * np.cos(x)) ** 2
    # the square root argument may dip below 0 by rounding near the support edge
    arg = np.clip(arg, 0.0, 1.0)
    out = np.arcsin(np.sqrt(arg))
    return float(out) if out.ndim == 0 else out


def _zeta_unchecked(x, lam):
    return np.arcsin(np.sqrt(np.clip(1.0 - (lam * np.cos(x)) ** 2, 0.0, 1.0)))


def cost_c(x, y, lam: float) -> np.ndarray:
    """Force kernel; returns an array of shape ``broadcast(x, y).shape + (2,)``."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    a = 0.5 * (x - y)
    if lam < 0:
        raise DomainError("lam must be nonnegative")
    if lam == 0.0:
        d = x - y
        return -0.375 * np.stack([np.sin(d), 1.0 + np.cos(d)], axis=-1)
    if lam < 1.0:
        z = _zeta_unchecked(x, lam)
        sz = np.sin(z)
        amp = 0.75 * (lam * np.sin(x) + sz) ** 3 / sz * np.cos(a)
        return np.stack([amp * np.cos(z + a), -amp * np.sin(z + a)], axis=-1)
    if lam == 1.0:
        s2 = 3.0 * np.sin(x) ** 2 * (x >= 0)
        return np.stack([s2 * (np.cos(2 * x - y) + np.cos(x)),
                         s2 * (-np.sin(2 * x - y) - np.sin(x))], axis=-1)
    inside = x >= x_min(lam)
    z = _zeta_unchecked(x, lam)
    sz, cz = np.sin(z), np.cos(z)
    sx = np.sin(x)
    ca, sa = np.cos(a), np.sin(a)
    p = (lam ** 3 * sx ** 3 + 3.0 * lam * sx * sz ** 2) * cz
    q = (3.0 * lam ** 2 * sx ** 2 * sz + sz ** 3) * sz
    ok = inside & (sz > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(ok, 1.5 * ca / np.where(ok, sz, 1.0), 0.0)
    return np.stack([f * (p * ca - q * sa), f * (-p * sa - q * ca)], axis=-1)


def cost_ci(x, y, lam: float, first_order: bool = False) -> np.ndarray:
    """Torque kernel.

    With ``first_order=True`` the derivative of the kernel in ``lam`` at
    ``lam = 0`` is returned instead; its integral is ``lim R_I / lam``.  (The
    ``lam``-independent part ``-3/8 (sin x + sin y)`` integrates to zero against
    every measure with cosine marginals.)
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    s = np.sin(x) + np.sin(y)
    if first_order:
        return -1.125 * np.sin(x) * s
    if lam < 0:
        raise DomainError("lam must be nonnegative")
    if lam == 0.0:
        return -0.375 * s
    if lam < 1.0:
        sz = np.sin(_zeta_unchecked(x, lam))
        return -0.375 * (lam * np.sin(x) + sz) ** 3 / sz * s
    if lam == 1.0:
        return -3.0 * np.sin(x) ** 2 * s * (x >= 0)
    inside = x >= x_min(lam)
    sz = np.sin(_zeta_unchecked(x, lam))
    sx = np.sin(x)
    ok = inside & (sz > 0)
    num = lam ** 3 * sx ** 3 + 3.0 * lam * sx * sz ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ok, -0.75 * num / np.where(ok, sz, 1.0) * s, 0.0)


def cost_symm(x, y, lam: float) -> np.ndarray:
    """Force kernel averaged with its transpose; symmetric in ``(x, y)``."""
    return 0.5 * (cost_c(x, y, lam) + cost_c(y, x, lam))


def cost_ci_symm(x, y, lam: float) -> np.ndarray:
    return 0.5 * (cost_ci(x, y, lam) + cost_ci(y, x, lam))


class Kernel:
    """Stacked ``(c_T, c_L, c_I)`` kernel at fixed ``lam`` with support hints."""

    def __init__(self, lam: float, first_order_torque: bool = False):
        if lam < 0:
            raise DomainError("lam must be nonnegative")
        self.lam = float(lam)
        self.first_order_torque = first_order_torque
        self.x_min = x_min(lam) if lam >= 1.0 else -HALF_PI
        self.sqrt_singular = lam > 1.0

    def __call__(self, x, y):
        c = cost_c(x, y, self.lam)
        ci = cost_ci(x, y, self.lam, first_order=self.first_order_torque)
        return np.concatenate([c, ci[..., None]], axis=-1)


@dataclass(frozen=True)
class ResistanceCoeffs:
    r_t: float
    r_l: float
    r_i: float
    lam: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r_t, self.r_l, self.r_i)


@dataclass(frozen=True)
class PhysicalLoad:
    """Force in the frame whose second axis points along the motion."""

    force: tuple[float, float]
    torque: float


def resistance_coeffs(measure: _m.ScatteringMeasure, lam: float,
                      tol: float = 1e-10) -> ResistanceCoeffs:
    r = _m.integrate(measure, Kernel(lam), tol)
    return ResistanceCoeffs(float(r[0]), float(r[1]), float(r[2]), float(lam))


def torque_slope_at_rest(measure: _m.ScatteringMeasure, tol: float = 1e-10) -> float:
    """``lim_{lam -> 0} R_I / lam``."""
    return float(_m.integrate(measure, lambda x, y: cost_ci(x, y, 0.0, first_order=True), tol))


def physical_load(coeffs: ResistanceCoeffs, r: float, rho: float, v: float) -> PhysicalLoad:
    if min(r, rho, v) <= 0:
        raise DomainError("r, rho and v must be positive")
    k = 8.0 / 3.0 * r * rho * v * v
    return PhysicalLoad((k * coeffs.r_t, k * coeffs.r_l), k * r * coeffs.r_i)


def alpha(measure: _m.ScatteringMeasure, lam: float, tol: float = 1e-10) -> float:
    """Transversal-force factor: the transversal force equals
    ``alpha * M_g * omega * v / 2`` with ``M_g = pi r^2 rho``."""
    if lam <= 0:
        raise DomainError("alpha needs lam > 0")
    return alpha_from(resistance_coeffs(measure, lam, tol))


def alpha_from(coeffs: ResistanceCoeffs) -> float:
    return 16.0 / (3.0 * math.pi) * coeffs.r_t / coeffs.lam


def g_ratio(measure: _m.ScatteringMeasure, lam: float, tol: float = 1e-10) -> float:
    """``lam * R_L / R_I``; the moment-of-inertia threshold for spin-up."""
    if lam <= 0:
        raise DomainError("g_ratio needs lam > 0")
    return g_from(resistance_coeffs(measure, lam, tol))


def g_from(coeffs: ResistanceCoeffs) -> float:
    if abs(coeffs.r_i) < 1e-12:
        raise DivisionByZero(f"R_I = {coeffs.r_i!r} is zero at lam = {coeffs.lam}")
    return coeffs.lam * coeffs.r_l / coeffs.r_i
