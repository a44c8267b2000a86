"""Planar motion of a spinning rough disk in a rarefied medium.

Time is rescaled by ``dtau = 8 r rho v / (3 M) dt``.  In ``tau`` the relative
angular velocity obeys the autonomous equation
``dlam/dtau = beta R_I(lam) - lam R_L(lam)``; speed, heading, position and
physical time follow by quadrature.  Resistance coefficients come from a
precomputed ``CoeffTable``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import (DomainError, InconclusiveClassification, StepUnderflow,
                     TableRangeExceeded)
from .measures import CanonicalKind, ScatteringMeasure
from .resistance import resistance_coeffs, torque_slope_at_rest

TABLE_LAM_MIN = 1e-3
TABLE_LAM_MAX = 10.0
TABLE_NODES = 64


@dataclass(frozen=True)
class DiskParams:
    mass: float = 1.0
    radius: float = 1.0
    rho: float = 1.0
    beta: float = 2.0
    measure: ScatteringMeasure | None = None

    def __post_init__(self):
        if min(self.mass, self.radius, self.rho) <= 0:
            raise DomainError("mass, radius and rho must be positive")
        if self.beta < 1.0:
            raise DomainError("beta = M r^2 / I is at least 1")

    @property
    def path_scale(self) -> float:
        """``ds/dtau = 3 M / (8 r rho)``."""
        return 3.0 * self.mass / (8.0 * self.radius * self.rho)


@dataclass(frozen=True)
class DiskState:
    lam: float
    v: float
    theta: float = 0.0
    pos: tuple[float, float] = (0.0, 0.0)
    tau: float = 0.0
    t: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("lam must be nonnegative")
        if self.v <= 0:
            raise DomainError("speed must be positive")

    @property
    def omega_r(self) -> float:
        """Rim speed ``omega r = lam v``."""
        return self.lam * self.v


def table_grid(lam_min: float = TABLE_LAM_MIN, lam_max: float = TABLE_LAM_MAX,
               n_nodes: int = TABLE_NODES) -> np.ndarray:
    """Geometric nodes on ``[lam_min, lam_max]`` with 1 pinned, plus ``lam = 0``."""
    grid = np.geomspace(lam_min, lam_max, n_nodes)
    if lam_min < 1.0 < lam_max:
        grid[np.argmin(np.abs(np.log(grid)))] = 1.0
    return np.concatenate([[0.0], grid])


@dataclass(frozen=True)
class CoeffTable:
    """``(R_T, R_L, R_I)`` on a ``lam`` grid with monotone cubic interpolation."""

    lambda_grid: np.ndarray
    values: np.ndarray  # shape (n, 3)
    torque_slope: float | None = None  # lim R_I / lam at 0, when known
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.lambda_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size < 2 or (np.diff(g) <= 0).any():
            raise ValueError("lambda grid must be strictly increasing")
        if vals.shape != (g.size, 3):
            raise ValueError("values must have shape (len(grid), 3)")
        object.__setattr__(self, "lambda_grid", g)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_interp", PchipInterpolator(g, vals, axis=0))

    @classmethod
    def from_measure(cls, measure: ScatteringMeasure, grid: np.ndarray | None = None,
                     tol: float = 1e-10) -> "CoeffTable":
        grid = table_grid() if grid is None else np.asarray(grid, dtype=float)
        vals = np.array([resistance_coeffs(measure, lam, tol).as_tuple() for lam in grid])
        return cls(grid, vals, torque_slope_at_rest(measure, tol))

    @classmethod
    def from_function(cls, fn: Callable[[float], tuple[float, float, float]],
                      grid: np.ndarray | None = None) -> "CoeffTable":
        grid = table_grid() if grid is None else np.asarray(grid, dtype=float)
        return cls(grid, np.array([fn(lam) for lam in grid]))

    @property
    def lam_max(self) -> float:
        return float(self.lambda_grid[-1])

    def __call__(self, lam: float) -> np.ndarray:
        if lam > self.lam_max * (1 + 1e-12) or lam < self.lambda_grid[0] - 1e-12:
            raise TableRangeExceeded(f"lam = {lam} outside table [{self.lambda_grid[0]}, "
                                     f"{self.lam_max}]")
        return self._interp(min(max(lam, self.lambda_grid[0]), self.lam_max))

    def lam_rate(self, lam: float, beta: float) -> float:
        r_t, r_l, r_i = self(lam)
        return beta * r_i - lam * r_l

    def g(self, lam: float) -> float:
        """``lam R_L / R_I``; at ``lam = 0`` the limit from the torque slope."""
        r_t, r_l, r_i = self(lam)
        if lam == 0.0:
            slope = self.torque_slope
            if slope is None:
                slope = float(self._interp.derivative()(0.0)[2])
            return r_l / slope
        return lam * r_l / r_i


# state vector: lam, log v, theta, x, y, t
def rhs(state: DiskState, params: DiskParams, table: CoeffTable) -> dict[str, float]:
    """Derivatives of the state with respect to ``tau``."""
    r_t, r_l, r_i = table(state.lam)
    k = params.path_scale
    return {
        "lam": params.beta * r_i - state.lam * r_l,
        "v": state.v * r_l,
        "theta": -r_t,
        "x": k * math.cos(state.theta),
        "y": k * math.sin(state.theta),
        "t": k / state.v,
        "s": k,
    }


def _rhs_vec(y: np.ndarray, params: DiskParams, table: CoeffTable) -> np.ndarray:
    lam = max(y[0], 0.0)
    r_t, r_l, r_i = table(lam)
    k = params.path_scale
    return np.array([params.beta * r_i - lam * r_l, r_l, -r_t,
                     k * math.cos(y[2]), k * math.sin(y[2]), k * math.exp(-y[1])])


def _rk4(y, h, f):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float = 1e-2
    h_min: float = 1e-12
    h_max: float = 0.05


def integrate(params: DiskParams, initial: DiskState, tau_end: float,
              table: CoeffTable, control: StepControl = StepControl()) -> list[DiskState]:
    """Classical RK4 with step doubling; returns every accepted state.

    The speed is carried as ``log v`` so that its exponential decay is
    integrated with uniform relative accuracy.  Path length is exactly
    ``s0 + (3M/(8 r rho)) (tau - tau0)``.
    """
    if tau_end <= initial.tau:
        raise ValueError("tau_end must exceed the initial tau")

    def f(y):
        return _rhs_vec(y, params, table)

    y = np.array([initial.lam, math.log(initial.v), initial.theta,
                  initial.pos[0], initial.pos[1], initial.t])
    tau = initial.tau
    k = params.path_scale
    out = [initial]
    h = min(control.h0, tau_end - tau)
    while tau < tau_end:
        h = min(h, tau_end - tau)
        full = _rk4(y, h, f)
        half = _rk4(_rk4(y, 0.5 * h, f), 0.5 * h, f)
        scale = control.atol + control.rtol * np.maximum(np.abs(y), np.abs(half))
        err = float(np.max(np.abs(half - full) / scale)) / 15.0
        if err <= 1.0:
            tau = tau + h
            # local extrapolation
            y = half + (half - full) / 15.0
            y[0] = max(y[0], 0.0)
            out.append(DiskState(float(y[0]), math.exp(y[1]), float(y[2]),
                                 (float(y[3]), float(y[4])), tau, float(y[5]),
                                 initial.s + k * (tau - initial.tau)))
        grow = 0.9 * (max(err, 1e-10)) ** -0.2
        h = min(h * min(max(grow, 0.2), 4.0), control.h_max)
        if h < control.h_min:
            raise StepUnderflow(f"step size fell below {control.h_min} at tau = {tau}")
    return out


# ---------------------------------------------------------------------------
# closed forms for the canonical measures


def analytic_oracle(kind: CanonicalKind | str, params: DiskParams,
                    initial: DiskState) -> Callable[[float], tuple[float, float, float]]:
    """Exact ``(lam, v, theta)`` as a function of ``tau`` (measured from ``initial.tau``)."""
    kind = CanonicalKind(kind)
    lam0, v0, th0, beta = initial.lam, initial.v, initial.theta, params.beta
    if kind is CanonicalKind.CIRCLE:
        # no torque: omega is constant while v decays, so lam = omega r / v grows
        rate_lam, rate_v, torque = 1.0, -1.0, 0.0
    elif kind is CanonicalKind.RETROREFLECTOR:
        rate_lam, rate_v, torque = -1.5 * (beta - 1.0), -1.5, 3.0 * math.pi / 8.0
    elif kind is CanonicalKind.RECTANGULAR:
        rate_lam, rate_v, torque = -0.75 * (beta - 5.0 / 3.0), -1.25, 3.0 * math.pi / 16.0
    else:
        raise ValueError(f"no closed form for {kind.value}")

    def state(tau: float) -> tuple[float, float, float]:
        d = tau - initial.tau
        lam = lam0 * math.exp(rate_lam * d)
        # theta' = -torque * lam
        if abs(rate_lam * d) < 1e-8:
            integral = d * (1.0 + 0.5 * rate_lam * d)
        else:
            integral = math.expm1(rate_lam * d) / rate_lam
        return lam, v0 * math.exp(rate_v * d), th0 - torque * lam0 * integral

    return state


def fit_circle(points: np.ndarray) -> tuple[tuple[float, float], float]:
    """Algebraic (Kasa) least-squares circle: centre and radius."""
    p = np.asarray(points, dtype=float)
    a = np.column_stack([p[:, 0], p[:, 1], np.ones(len(p))])
    b = -(p[:, 0] ** 2 + p[:, 1] ** 2)
    (d, e, f), *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy = -d / 2.0, -e / 2.0
    return (cx, cy), math.sqrt(cx * cx + cy * cy - f)


def trajectory_radius(traj: list[DiskState]) -> float:
    """Best-fit circle radius over the last half of a trajectory."""
    pts = np.array([st.pos for st in traj[len(traj) // 2:]])
    return fit_circle(pts)[1]


# ---------------------------------------------------------------------------
# asymptotic regimes


class Regime(str, enum.Enum):
    SPIRAL = "spiral"  # lam grows without bound
    CIRCLE = "circle"  # lam settles at a positive fixed point
    STRAIGHT = "straight"  # lam decays to zero


@dataclass(frozen=True)
class FixedPoint:
    lam: float
    stable: bool


def fixed_points(table: CoeffTable, beta: float, n_scan: int = 2000) -> list[FixedPoint]:
    """Positive zeros of ``dlam/dtau`` on the table range, i.e. ``g(lam) = beta``."""
    lo = table.lambda_grid[0]
    if lo == 0.0:
        lo = min(table.lambda_grid[1], 1e-3)
    lams = np.geomspace(lo, table.lam_max, n_scan)
    # sign of dlam/dtau equals the sign of g - beta because R_I < 0
    f = np.array([table.g(x) for x in lams]) - beta
    out = []
    for k in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0):
        root = brentq(lambda x: table.g(x) - beta, lams[k], lams[k + 1], xtol=1e-14)
        out.append(FixedPoint(root, stable=f[k] > 0))
    return out


def check_negative_torque(table: CoeffTable) -> None:
    r_i = table.values[table.lambda_grid > 0, 2]
    if (r_i >= 0).any():
        raise DomainError("classification requires R_I < 0 on the table range")


def _settle(table: CoeffTable, beta: float, lam0: float, target: float | None,
            tau_max: float, lam_floor: float) -> Regime:
    """Integrate the scalar equation for ``lam`` until its fate is evident."""
    lam, tau, h = lam0, 0.0, 1e-2

    def f(x):
        return table.lam_rate(min(max(x, 0.0), table.lam_max), beta)

    while tau < tau_max:
        lam_new = lam + h / 6 * _rk4_scalar(f, lam, h)
        if lam_new >= table.lam_max:
            return Regime.SPIRAL
        if lam_new <= lam_floor:
            return Regime.STRAIGHT
        if target is not None and abs(lam_new - target) <= 1e-7 * max(target, 1.0):
            return Regime.CIRCLE
        lam, tau = lam_new, tau + h
        h = min(h * 1.05, 0.2)
    raise InconclusiveClassification(f"lam0 = {lam0}: no settling by tau = {tau_max}")


def _rk4_scalar(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return k1 + 2 * k2 + 2 * k3 + k4


def classify_asymptotics(params: DiskParams, table: CoeffTable,
                         initial_lambdas, tau_max: float = 1e4,
                         lam_floor: float = 1e-9) -> list[tuple[float, Regime]]:
    """Asymptotic regime for each initial ``lam``.

    The fate is predicted from the zeros of ``g(lam) - beta`` and confirmed
    by integrating the ``lam`` equation: leaving the table upward means a
    spiral (``g`` grows without bound), decay to ``lam_floor`` a straight
    line, convergence to a stable zero a circle.
    """
    check_negative_torque(table)
    beta = params.beta
    fps = fixed_points(table, beta)
    out = []
    for lam0 in initial_lambdas:
        lam0 = float(lam0)
        if not 0 < lam0 < table.lam_max:
            raise DomainError(f"initial lam {lam0} outside (0, {table.lam_max})")
        rate = table.lam_rate(lam0, beta)
        if abs(rate) <= 1e-12 * max(lam0, 1.0):
            # neutral: lam stays put (e.g. g identically equal to beta)
            out.append((lam0, Regime.CIRCLE))
            continue
        rising = rate > 0
        if rising:
            ahead = [p for p in fps if p.lam > lam0]
            target = ahead[0] if ahead else None
        else:
            below = [p for p in fps if p.lam < lam0]
            target = below[-1] if below else None
        predicted = (Regime.CIRCLE if target is not None
                     else Regime.SPIRAL if rising else Regime.STRAIGHT)
        found = _settle(table, beta, lam0, target.lam if target else None, tau_max, lam_floor)
        if found is not predicted:
            raise InconclusiveClassification(
                f"lam0 = {lam0}: predicted {predicted.value}, integration gave {found.value}")
        out.append((lam0, found))
    return out


def regimes_present(params: DiskParams, table: CoeffTable,
                    initial_lambdas=None) -> set[Regime]:
    if initial_lambdas is None:
        initial_lambdas = np.geomspace(1e-2, 0.9 * table.lam_max, 60)
        # include points on both sides of every fixed point
        for p in fixed_points(table, params.beta):
            initial_lambdas = np.append(initial_lambdas, [p.lam * 0.97, p.lam * 1.03])
        initial_lambdas = initial_lambdas[initial_lambdas < table.lam_max]
    return {r for _, r in classify_asymptotics(params, table, initial_lambdas)}


def threshold_betas(table: CoeffTable, n_scan: int = 4000) -> dict[str, float]:
    """``g(0)`` and the interior extrema of ``g``; these separate the regimes."""
    lo = max(table.lambda_grid[1] if table.lambda_grid[0] == 0 else table.lambda_grid[0], 1e-3)
    lams = np.geomspace(lo, table.lam_max, n_scan)
    g = np.array([table.g(x) for x in lams])
    d = np.diff(g)
    maxima = [float(g[k + 1]) for k in range(len(d) - 1) if d[k] > 0 >= d[k + 1]]
    minima = [float(g[k + 1]) for k in range(len(d) - 1) if d[k] < 0 <= d[k + 1]]
    return {"g0": table.g(0.0), "local_max": maxima, "local_min": minima}
