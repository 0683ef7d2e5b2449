"""Lower bound on Eve's conditional entropy as a function of the CHSH value.

The qubit reduction leaves a four-variable problem: Alice's half-angle
(through ``s = sin(phi/2)``, ``c = cos(phi/2)``), the norms ``g`` and ``h`` of
the rows of Alice and Bob's X-Y correlation matrix, and the cosine ``Delta``
of the angle between the rows. The smallest admissible value of

    s^2 g^2 + c^2 h^2 + 2 (2 lam - 1) s c g h Delta

given ``c g + s h >= S/2`` is the squared complementary correlation that
enters ``g(x) = 1 - h(1/2 + x/2)``.

The objective is linear in ``Delta`` over an interval symmetric about zero,
so ``Delta`` sits at the end of that interval. On the feasible set
``g^2 + h^2 > 1`` whenever ``S > 2``, which fixes the end at
``sqrt((1-g^2)(1-h^2)) / (g h)``. The objective also increases in ``g`` and
``h``, so the CHSH constraint is active at the optimum and ``h`` follows
from ``(phi, g)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

log = logging.getLogger(__name__)

S_CLASSICAL = 2.0
S_MAX = 2 * math.sqrt(2)

_COARSE = 96
_POLISH_TOL = 1e-10


class RootNotFound(RuntimeError):
    pass


def binary_entropy(x):
    """Binary Shannon entropy in bits, with ``h(0) = h(1) = 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError(f"binary entropy needs x in [0, 1], got {x!r}")
    inner = (arr > 0) & (arr < 1)
    safe = np.where(inner, arr, 0.5)
    out = np.where(inner, -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe), 0.0)
    return float(out) if out.ndim == 0 else out


def _phi(x):
    return binary_entropy(0.5 + 0.5 * np.asarray(x, dtype=float))


def _unit_interval(x, name="x"):
    arr = np.asarray(x, dtype=float)
    # absorb rounding from square roots of values at 1
    if np.any((arr < -1e-12) | (arr > 1 + 1e-12)):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return np.clip(arr, 0.0, 1.0)


def g_bound(x):
    """``1 - phi(x)`` where ``phi(x) = h(1/2 + x/2)``."""
    x = _unit_interval(x)
    out = 1.0 - _phi(x)
    return float(out) if np.ndim(out) == 0 else out


def g_bound_q(x, q: float):
    """Entropy bound after Alice flips her outcome with probability ``q``."""
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 0.5], got {q!r}")
    x = _unit_interval(x)
    inner = np.sqrt(np.clip((1 - 2 * q) ** 2 + 4 * q * (1 - q) * x**2, 0.0, 1.0))
    out = 1.0 + _phi(inner) - _phi(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QubitCorrelationVars:
    s: float
    c: float
    g: float
    h: float
    delta: float

    @classmethod
    def from_angles(cls, theta: float, g: float, h: float, lam: float) -> "QubitCorrelationVars":
        s, c = math.sin(theta), math.cos(theta)
        return cls(s, c, g, h, _optimal_delta(s, c, g, h, lam))

    def objective(self, lam: float) -> float:
        s, c, g, h = self.s, self.c, self.g, self.h
        return s * s * g * g + c * c * h * h + 2 * (2 * lam - 1) * s * c * g * h * self.delta

    def constraint_slack(self, S: float) -> dict[str, float]:
        """Slack of each constraint; all are nonnegative at a feasible point."""
        s, c, g, h, d = self.s, self.c, self.g, self.h, self.delta
        return {
            "chsh": c * g + s * h - S / 2,
            "g": 1 - g * g,
            "h": 1 - h * h,
            "coupling": (1 - g * g) * (1 - h * h) - g * g * h * h * d * d,
            "norm_upper": 1 - (c * c + s * s),
            "norm_lower": (c * c + s * s) - 1,
            "delta": 1 - d * d,
        }

    def is_feasible(self, S: float, atol: float = 1e-9) -> bool:
        return all(v >= -atol for v in self.constraint_slack(S).values())


def _optimal_delta(s, c, g, h, lam):
    k = (2 * lam - 1) * s * c * g * h
    if k == 0.0:
        return 0.0
    bound = math.sqrt(max(0.0, (1 - g * g) * (1 - h * h))) / abs(g * h)
    return -math.copysign(min(1.0, bound), k)


def _theta_window(S):
    w = math.acos(min(1.0, S / S_MAX))
    return math.pi / 4 - w, math.pi / 4 + w


def _reduced(theta, t, S, k):
    """Objective on the active CHSH constraint; returns ``(value, g, h)``.

    ``t`` in [0, 1] interpolates ``g`` between its smallest feasible value
    and 1, and ``h`` is then fixed by the constraint.
    """
    s, c = math.sin(theta), math.cos(theta)
    g_lo = min(1.0, max(0.0, (S / 2 - s) / c))
    g = g_lo + t * (1 - g_lo)
    h = min(1.0, max(0.0, (S / 2 - c * g) / s))
    root = math.sqrt(max(0.0, (1 - g * g) * (1 - h * h)))
    return s * s * g * g + c * c * h * h - 2 * k * s * c * root, g, h


def _coarse_grid(S, k, n=_COARSE):
    lo, hi = _theta_window(S)
    theta = np.linspace(lo, hi, n)[:, None]
    t = np.linspace(0.0, 1.0, n)[None, :]
    s, c = np.sin(theta), np.cos(theta)
    g_lo = np.clip((S / 2 - s) / c, 0.0, 1.0)
    g = g_lo + t * (1 - g_lo)
    h = np.clip((S / 2 - c * g) / s, 0.0, 1.0)
    val = s * s * g * g + c * c * h * h - 2 * k * s * c * np.sqrt(
        np.clip((1 - g * g) * (1 - h * h), 0.0, None)
    )
    i, j = np.unravel_index(np.argmin(val), val.shape)
    return float(theta[i, 0]), float(t[0, j]), ((hi - lo) / (n - 1), 1.0 / (n - 1))


def _bracketed_min(fun, centre, width, lo, hi):
    """Bounded Brent search on ``[centre - width, centre + width]`` clipped to ``[lo, hi]``."""
    a, b = max(lo, centre - width), min(hi, centre + width)
    res = minimize_scalar(fun, bounds=(a, b), method="bounded", options={"xatol": _POLISH_TOL})
    # the bounded method never probes the end points, which is where g = 1 lives
    x, val = float(res.x), float(res.fun)
    for edge in (a, b):
        v = fun(edge)
        if v < val:
            x, val = edge, v
    return x, val


def _polish(S, k, theta, t, step):
    """Nested 1D minimisation around the coarse-grid optimum.

    The inner search runs over ``t`` for fixed ``theta`` and the outer one
    over ``theta``. Only the minimum value matters downstream, so the
    nearly flat valley that develops as ``S -> 2`` costs nothing extra.
    """
    lo, hi = _theta_window(S)
    inner_t = {}

    def inner(th):
        tt, val = _bracketed_min(lambda u: _reduced(th, u, S, k)[0], t, 2 * step[1], 0.0, 1.0)
        inner_t[th] = tt
        return val

    theta, best = _bracketed_min(inner, theta, 2 * step[0], lo, hi)
    return theta, inner_t[theta], best


def solve_E_lambda(S: float, lam: float) -> tuple[float, QubitCorrelationVars]:
    """Smallest squared complementary correlation compatible with CHSH value ``S``.

    Returns the value and a feasible witness. ``S <= 2`` admits a classical
    strategy and yields 0.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    if S > S_MAX + 1e-12:
        raise ValueError(f"S cannot exceed 2*sqrt(2), got {S!r}")
    S = min(float(S), S_MAX)
    if S <= S_CLASSICAL:
        return 0.0, QubitCorrelationVars(s=0.0, c=1.0, g=1.0, h=0.0, delta=0.0)
    k = abs(2 * lam - 1)
    theta, t, step = _coarse_grid(S, k)
    theta, t, _ = _polish(S, k, theta, t, step)
    _, g, h = _reduced(theta, t, S, k)
    witness = QubitCorrelationVars.from_angles(theta, g, h, lam)
    return min(1.0, max(0.0, witness.objective(lam))), witness


def _half_stationarity(x, S):
    # stationarity of s^2 + c^2 h^2 along g = 1, written in x = cos(phi_A)
    return 4 * x * (2 - x) + 2 * (S * S + 2) + S * (x - 5) * math.sqrt(2 * (1 + x))


def _half_value(x, S):
    c = math.sqrt((1 + x) / 2)
    s2 = (1 - x) / 2
    return s2 + c * c * (S / 2 - c) ** 2 / s2


def solve_E_half_analytic(S: float, fallback: bool = False) -> float:
    """Closed-form route for ``lambda = 1/2``.

    At equal weights the optimum sits on ``g = 1`` and the stationarity
    condition in ``x = cos(phi_A)`` is

        4 x (2 - x) + 2 (S^2 + 2) + S (x - 5) sqrt(2 (1 + x)) = 0.

    The admissible root maps back through
    ``E^2 = (1-x)/2 + c^2 (S/2 - c)^2 / s^2`` with ``c^2 = (1+x)/2``.
    """
    if not S_CLASSICAL < S <= S_MAX + 1e-12:
        raise ValueError(f"analytic route needs 2 < S <= 2*sqrt(2), got {S!r}")
    S = min(float(S), S_MAX)
    if S_MAX - S < 1e-9:
        return 1.0
    # h <= 1 along g = 1 holds for c between the roots of c + sqrt(1 - c^2) = S/2
    r = math.sqrt(max(0.0, 0.5 - (S / 4) ** 2))
    x_lo, x_hi = (2 * cc * cc - 1 for cc in (S / 4 - r, S / 4 + r))
    grid = np.linspace(x_lo, min(x_hi, 1 - 1e-12), 400)
    vals = [_half_stationarity(x, S) for x in grid]
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(_half_stationarity, a, b, args=(S,), xtol=1e-15))
    if not roots:
        if not fallback:
            raise RootNotFound(f"no admissible stationary point for S={S!r}")
        log.warning("no stationary point at S=%s; using the numeric solver", S)
        return solve_E_lambda(S, 0.5)[0]
    values = [_half_value(x, S) for x in roots]
    return min(values)


def lower_convex_envelope(x, y):
    """Lower convex hull of the points ``(x, y)`` evaluated back on ``x``.

    ``x`` must be increasing.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross > 0:
                break
            hull.pop()
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


@dataclass(frozen=True)
class EntropyBound:
    """Tabulated ``S -> H(A|E)`` bound for one ``(lambda, q)`` pair."""

    lam: float
    q: float
    s: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    raw: np.ndarray = field(repr=False)
    convexified: bool = True

    @property
    def grid(self) -> list[tuple[float, float]]:
        return list(zip(self.s.tolist(), self.h.tolist()))

    def __call__(self, S):
        """Interpolated bound; values below ``S = 2`` take the classical floor."""
        S = np.clip(np.asarray(S, dtype=float), S_CLASSICAL, S_MAX)
        out = np.interp(S, self.s, self.h)
        return float(out) if out.ndim == 0 else out


def raw_entropy_curve(S_values, lam: float, q: float) -> np.ndarray:
    e2 = np.array([solve_E_lambda(S, lam)[0] for S in S_values])
    return np.asarray(g_bound_q(np.sqrt(e2), q))


@lru_cache(maxsize=64)
def _entropy_bound(lam, q, resolution, convexify):
    s = np.linspace(S_CLASSICAL, S_MAX, resolution)
    raw = raw_entropy_curve(s, lam, q)
    h = lower_convex_envelope(s, raw) if convexify else raw.copy()
    for arr in (s, raw, h):
        arr.setflags(write=False)
    return EntropyBound(lam=lam, q=q, s=s, h=h, raw=raw, convexified=convexify)


def entropy_bound(lam: float, q: float = 0.0, resolution: int = 512, convexify: bool = True) -> EntropyBound:
    """Build (or fetch from cache) the convexified entropy bound on a uniform S grid."""
    if resolution < 32:
        raise ValueError(f"resolution must be at least 32, got {resolution!r}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 0.5], got {q!r}")
    # the bound depends on lambda only through |2 lambda - 1|
    lam = float(round(min(lam, 1 - lam), 15))
    return _entropy_bound(lam, float(q), int(resolution), bool(convexify))
