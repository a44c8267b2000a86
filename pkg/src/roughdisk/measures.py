"""Scattering measures on the angle square [-pi/2, pi/2]^2.

A measure couples an incidence angle ``x`` with an exit angle ``y``.  Every
admissible measure has total mass 2, both marginals equal to
``cos(phi) dphi`` and is symmetric under ``(x, y) -> (y, x)``.

Kernels passed to :func:`integrate` are vectorized callables ``k(x, y)``
returning shape ``(n,)`` or ``(n, d)``.  Two optional attributes let a kernel
describe its support in ``x``: ``x_min`` (the kernel vanishes for
``x < x_min``) and ``sqrt_singular`` (the kernel blows up like
``(x - x_min)**-0.5``).  Singular kernels are integrated in the variable
``zeta`` defined by ``cos x = cos(zeta) * cos(x_min)``, which removes the
singularity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidMeasure
from .quadrature import gauss_kronrod

HALF_PI = 0.5 * math.pi

# Support lines, each parameterized by x: name -> (y as a function of x).
LINES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "anti": lambda x: -x,  # y = -x, specular reflection
    "diag": lambda x: x,  # y = x, retroreflection
    "lower": lambda x: -HALF_PI - x,  # x + y = -pi/2
    "upper": lambda x: HALF_PI - x,  # x + y = pi/2
}


@dataclass(frozen=True)
class Branch:
    """Mass ``weight(x) dx`` carried by ``line`` over ``x in [x_lo, x_hi]``."""

    line: str
    weight: Callable[[np.ndarray], np.ndarray]
    x_lo: float = -HALF_PI
    x_hi: float = HALF_PI

    def __post_init__(self):
        if self.line not in LINES:
            raise InvalidMeasure(f"unknown support line {self.line!r}")
        if not -HALF_PI <= self.x_lo < self.x_hi <= HALF_PI:
            raise InvalidMeasure(f"bad branch range [{self.x_lo}, {self.x_hi}]")

    def swapped(self) -> "Branch":
        w = self.weight
        if self.line == "diag":
            return self
        if self.line == "anti":
            return Branch("anti", lambda x: w(-x), -self.x_hi, -self.x_lo)
        if self.line == "lower":
            return Branch("lower", lambda x: w(-HALF_PI - x),
                          -HALF_PI - self.x_hi, -HALF_PI - self.x_lo)
        return Branch("upper", lambda x: w(HALF_PI - x),
                      HALF_PI - self.x_hi, HALF_PI - self.x_lo)


class ScatteringMeasure:
    """Common base of the four measure variants."""

    def integrate(self, kernel, tol: float = 1e-10):
        raise NotImplementedError

    def swapped(self) -> "ScatteringMeasure":
        """Push-forward under the coordinate swap."""
        raise NotImplementedError


@dataclass(frozen=True)
class LineSupported(ScatteringMeasure):
    branches: tuple[Branch, ...]

    def integrate(self, kernel, tol=1e-10):
        total = 0.0
        for br in self.branches:
            y_of = LINES[br.line]

            def g(x, y_of=y_of, w=br.weight):
                return _times(kernel(x, y_of(x)), w(x))

            total = total + _integrate_x(g, br.x_lo, br.x_hi, kernel, tol)
        return total

    def swapped(self):
        return LineSupported(tuple(b.swapped() for b in self.branches))


@dataclass(frozen=True)
class Density(ScatteringMeasure):
    """Absolutely continuous measure ``f(x, y) dx dy``.

    ``x_breaks`` / ``y_breaks`` list points where ``f`` is not smooth.
    """

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x_breaks: tuple[float, ...] = ()
    y_breaks: tuple[float, ...] = ()

    def integrate(self, kernel, tol=1e-10):
        def inner(xs):
            # y-integral for all outer nodes at once; xs ride along as an axis
            def h(ys):
                X = np.broadcast_to(xs[None, :], (len(ys), len(xs))).ravel()
                Y = np.broadcast_to(ys[:, None], (len(ys), len(xs))).ravel()
                vals = _times(kernel(X, Y), self.f(X, Y))
                return vals.reshape((len(ys), len(xs)) + vals.shape[1:])

            val, _ = gauss_kronrod(h, -HALF_PI, HALF_PI, breakpoints=self.y_breaks,
                                   rtol=tol * 0.1, atol=tol * 1e-3)
            return val

        return _integrate_x(inner, -HALF_PI, HALF_PI, kernel, tol, self.x_breaks)

    def swapped(self):
        f = self.f
        return Density(lambda x, y: f(y, x), self.y_breaks, self.x_breaks)


@dataclass(frozen=True)
class Histogram(ScatteringMeasure):
    """Mass per cell on a uniform ``B x B`` grid; row = x-bin, column = y-bin."""

    masses: np.ndarray
    discarded: float = 0.0  # sample-mass fraction dropped when built from a cavity

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidMeasure("histogram must be a square matrix")
        if (m < 0).any() or not np.isfinite(m).all():
            raise InvalidMeasure("histogram masses must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def bins(self) -> int:
        return self.masses.shape[0]

    @property
    def centers(self) -> np.ndarray:
        return bin_centers(self.bins)

    def integrate(self, kernel, tol=1e-10):
        i, j = np.nonzero(self.masses)
        c = self.centers
        if getattr(kernel, "sqrt_singular", False):
            return self._integrate_singular(kernel, i, j)
        vals = kernel(c[i], c[j])
        return np.tensordot(self.masses[i, j], np.asarray(vals, dtype=float), axes=(0, 0))

    def _integrate_singular(self, kernel, i, j, order=8):
        # Centre values are useless next to an inverse-square-root edge, so each
        # cell's mass is spread over its x-bin like cos(x) dx and the x-integral
        # is done by Gauss-Legendre in the zeta variable.
        x0 = kernel.x_min
        c0 = math.cos(x0)
        edges = bin_edges(self.bins)
        lo = np.maximum(edges[:-1], x0)
        hi = edges[1:]
        live = hi > x0
        keep = live[i]
        i, j = i[keep], j[keep]
        z_lo = np.arccos(np.minimum(1.0, np.cos(lo[i]) / c0))
        z_hi = np.arccos(np.minimum(1.0, np.cos(hi[i]) / c0))
        t, w = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (z_hi - z_lo)
        z = 0.5 * (z_hi + z_lo)[:, None] + half[:, None] * t[None, :]
        x = np.arccos(np.cos(z) * c0)
        # dx/dzeta * cos(x) dx-weight
        wq = half[:, None] * w[None, :] * np.sin(z) * c0 / np.sin(x) * np.cos(x)
        vals = np.asarray(kernel(x.ravel(), np.repeat(bin_centers(self.bins)[j], order)),
                          dtype=float)
        vals = vals.reshape((len(i), order) + vals.shape[1:])
        cell = np.einsum("nq,nq...->n...", wq, vals)
        gam = gamma_masses(self.bins)[i]
        scale = self.masses[i, j] / gam
        return np.tensordot(scale, cell, axes=(0, 0))

    def swapped(self):
        return Histogram(self.masses.T.copy())


@dataclass(frozen=True)
class Mixture(ScatteringMeasure):
    components: tuple[tuple[float, ScatteringMeasure], ...] = field(default=())

    def __post_init__(self):
        if any(c < 0 for c, _ in self.components):
            raise InvalidMeasure("mixture coefficients must be nonnegative")

    def integrate(self, kernel, tol=1e-10):
        return sum(c * m.integrate(kernel, tol) for c, m in self.components if c != 0)

    def swapped(self):
        return Mixture(tuple((c, m.swapped()) for c, m in self.components))


def _times(vals, w):
    vals = np.asarray(vals, dtype=float)
    w = np.asarray(w, dtype=float)
    return vals * w.reshape(w.shape + (1,) * (vals.ndim - w.ndim))


def _integrate_x(g, lo, hi, kernel, tol, breaks=()):
    """Integrate ``g(x)`` over ``[lo, hi]`` honouring the kernel's x-support."""
    x_min = getattr(kernel, "x_min", -HALF_PI)
    lo = max(lo, x_min)
    if hi <= lo:
        sample = np.asarray(g(np.array([0.5 * (lo + hi)])), dtype=float)
        return np.zeros(sample.shape[1:])
    breaks = tuple(breaks) + (0.0, -0.25 * math.pi, 0.25 * math.pi)
    rtol, atol = tol, tol * 1e-2
    if not (getattr(kernel, "sqrt_singular", False) and lo == x_min):
        val, _ = gauss_kronrod(g, lo, hi, breakpoints=breaks, rtol=rtol, atol=atol)
        return val

    c0 = math.cos(x_min)

    def to_zeta(x):
        return math.acos(min(1.0, math.cos(x) / c0))

    def gz(z):
        x = np.arccos(np.cos(z) * c0)
        dxdz = np.sin(z) * c0 / np.sin(x)
        return _times(g(x), dxdz)

    zb = [to_zeta(b) for b in breaks if lo < b < hi]
    val, _ = gauss_kronrod(gz, 0.0, to_zeta(hi), breakpoints=zb, rtol=rtol, atol=atol)
    return val


# ---------------------------------------------------------------------------
# public operations


def bin_edges(bins: int) -> np.ndarray:
    return np.linspace(-HALF_PI, HALF_PI, bins + 1)


def bin_centers(bins: int) -> np.ndarray:
    e = bin_edges(bins)
    return 0.5 * (e[:-1] + e[1:])


def gamma_masses(bins: int) -> np.ndarray:
    """Exact ``cos(phi) dphi`` mass of each uniform bin (sums to 2)."""
    return np.diff(np.sin(bin_edges(bins)))


def integrate(measure: ScatteringMeasure, kernel, tol: float = 1e-10):
    """Integral of ``kernel`` against ``measure`` (scalar or vector)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    val = measure.integrate(kernel, tol)
    val = np.asarray(val, dtype=float)
    return float(val) if val.ndim == 0 else val


def total_mass(measure: ScatteringMeasure) -> float:
    return integrate(measure, lambda x, y: np.ones_like(x))


GAMMA_MOMENTS = {"1": 2.0, "sin": 0.0, "sin2": 2.0 / 3.0}

TEST_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "1": np.ones_like,
    "sin": np.sin,
    "sin2": lambda t: np.sin(t) ** 2,
}


def marginal(measure: ScatteringMeasure, axis: str,
             test_functions: Sequence[Callable] | None = None,
             tol: float = 1e-10) -> list[float]:
    """Moments ``int g d(marginal)`` for each test function ``g``.

    With no test functions, the moments of ``1, sin, sin^2`` are returned; the
    reference values against gamma are ``2, 0, 2/3``.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    if test_functions is None:
        test_functions = list(TEST_FUNCTIONS.values())
    out = []
    for g in test_functions:
        if axis == "x":
            kern = lambda x, y, g=g: g(x)  # noqa: E731
        else:
            kern = lambda x, y, g=g: g(y)  # noqa: E731
        out.append(integrate(measure, kern, tol))
    return out


def symmetrize(measure: ScatteringMeasure) -> ScatteringMeasure:
    """Average of the measure and its mirror image across the diagonal."""
    if isinstance(measure, Histogram):
        return Histogram(0.5 * (measure.masses + measure.masses.T))
    return Mixture(((0.5, measure), (0.5, measure.swapped())))


def check_admissible(measure: ScatteringMeasure, atol: float = 1e-9) -> None:
    """Raise InvalidMeasure unless mass, marginals and symmetry hold to ``atol``."""
    mass = total_mass(measure)
    if abs(mass - 2.0) > atol:
        raise InvalidMeasure(f"total mass {mass!r} != 2")
    ref = list(GAMMA_MOMENTS.values())
    for axis in ("x", "y"):
        got = marginal(measure, axis)
        if max(abs(a - b) for a, b in zip(got, ref)) > atol:
            raise InvalidMeasure(f"{axis}-marginal moments {got} differ from gamma {ref}")
    asym = lambda x, y: np.sin(x) * np.cos(y) ** 2 + x * y * y  # noqa: E731
    a = integrate(measure, asym)
    b = integrate(measure, lambda x, y: asym(y, x))
    if abs(a - b) > atol:
        raise InvalidMeasure("measure is not symmetric under (x, y) -> (y, x)")


# ---------------------------------------------------------------------------
# canonical measures


class CanonicalKind(enum.Enum):
    CIRCLE = "circle"
    RETROREFLECTOR = "retro"
    RECTANGULAR = "rect"
    TRIANGULAR = "triangle"
    PRODUCT = "product"


def _cos(x):
    return np.cos(x)


def _abs_sin(x):
    return np.abs(np.sin(x))


def _tri_diag(x):
    return np.cos(x) - np.abs(np.sin(x))


_QUARTER_PI = 0.25 * math.pi


def canonical_measure(kind: CanonicalKind | str) -> ScatteringMeasure:
    kind = CanonicalKind(kind)
    if kind is CanonicalKind.CIRCLE:
        return LineSupported((Branch("anti", _cos),))
    if kind is CanonicalKind.RETROREFLECTOR:
        return LineSupported((Branch("diag", _cos),))
    if kind is CanonicalKind.RECTANGULAR:
        return Mixture(((0.5, canonical_measure("circle")),
                        (0.5, canonical_measure("retro"))))
    if kind is CanonicalKind.TRIANGULAR:
        # letter-H support; the signed diagonal term is folded into one weight
        return LineSupported((
            Branch("lower", _cos, -HALF_PI, -_QUARTER_PI),
            Branch("lower", _abs_sin, -_QUARTER_PI, 0.0),
            Branch("diag", _tri_diag, -_QUARTER_PI, _QUARTER_PI),
            Branch("upper", _abs_sin, 0.0, _QUARTER_PI),
            Branch("upper", _cos, _QUARTER_PI, HALF_PI),
        ))
    return Density(lambda x, y: 0.5 * np.cos(x) * np.cos(y))


# ---------------------------------------------------------------------------
# histogram CSV


def histogram_csv(hist: Histogram) -> str:
    lines = [f"bins,{hist.bins}"]
    for row in hist.masses:
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def write_histogram_csv(hist: Histogram, path) -> None:
    Path(path).write_text(histogram_csv(hist))


def read_histogram_csv(path) -> Histogram:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise InvalidMeasure(f"{path}: empty histogram file")
    head = text[0].split(",")
    if len(head) != 2 or head[0].strip() != "bins":
        raise InvalidMeasure(f"{path}: expected header 'bins,B'")
    bins = int(head[1])
    rows = [[float(v) for v in line.split(",")] for line in text[1:]]
    if len(rows) != bins or any(len(r) != bins for r in rows):
        raise InvalidMeasure(f"{path}: expected {bins} rows of {bins} values")
    return Histogram(np.array(rows))


def format_float(v: float) -> str:
    """17 significant digits, locale independent."""
    return f"{float(v):.17g}"


def measure_from_spec(spec: str) -> ScatteringMeasure:
    """Resolve a CLI measure name (``circle`` ... or ``file:<path>``)."""
    if spec.startswith("file:"):
        path = Path(spec[5:])
        if not path.is_file():
            raise InvalidMeasure(f"measure file not found: {path}")
        return read_histogram_csv(path)
    try:
        return canonical_measure(spec)
    except ValueError:
        names = ", ".join(k.value for k in CanonicalKind)
        raise InvalidMeasure(f"unknown measure {spec!r}; expected one of {names} or file:<path>")
