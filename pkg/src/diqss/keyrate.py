"""Asymptotic key rates and the thresholds derived from them.

The rate per round is

    r = (p^2 + (1-p)^2) [H(S) - h(q + (1 - 2q) delta)]

with ``H`` the convexified entropy bound for ``lambda = p^2 / (p^2 + (1-p)^2)``
and preprocessing flip probability ``q``. Unless told otherwise ``S`` follows
the QBER through ``S = 2 sqrt 2 (1 - 2 delta)``.

Two detection models are supported. With postselection, a missing click is
replaced by a fair coin and the white-noise/loss model gives
``delta = (1 - F eta^3) / 2`` and ``S = 2 sqrt 2 F eta^3`` (the two are linked
as above). Without postselection the rounds with a missing click count as
errors, ``delta = 1 - eta^3 (1 + F) / 2``, while ``S`` stays at
``2 sqrt 2 F eta^3``; this is the unimproved reference protocol.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .correlations import TSIRELSON, bell_value, preprocessed_qber, qber_model
from .entropy import EntropyBound, binary_entropy, entropy_bound
from .states import basis_weight

log = logging.getLogger(__name__)

USER_DISTANCE_FACTOR = math.sqrt(3)
DELTA_BRACKET = (0.0, 0.25)
ETA_BRACKET = (0.5, 1.0)
L_BRACKET = (0.0, 50.0)
DELTA_TOL = 1e-7
ETA_TOL = 1e-7
L_TOL = 1e-6


class InfeasibleError(ValueError):
    """No positive key rate exists anywhere in the search bracket."""


@dataclass(frozen=True)
class ChannelParams:
    """Fiber link from the source to each user.

    ``eta_t = 10^(-alpha L / 10)`` is the transmission and the global
    efficiency is ``eta_t * eta_d * eta_c``.
    """

    alpha_db_per_km: float = 0.2
    eta_d: float = 0.98
    eta_c: float = 0.99
    L_km: float = 0.0

    def __post_init__(self):
        if self.alpha_db_per_km < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha_db_per_km!r}")
        for name in ("eta_d", "eta_c"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if self.L_km < 0:
            raise ValueError(f"L must be nonnegative, got {self.L_km!r}")

    @property
    def eta_t(self) -> float:
        return 10 ** (-self.alpha_db_per_km * self.L_km / 10)

    @property
    def eta(self) -> float:
        return self.eta_t * self.eta_d * self.eta_c

    def at(self, L_km: float) -> "ChannelParams":
        return ChannelParams(self.alpha_db_per_km, self.eta_d, self.eta_c, L_km)


@dataclass(frozen=True)
class RateCurve:
    """Uniformly sampled curve, e.g. rate against QBER, efficiency or distance."""

    kind: str
    abscissa: str
    x: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    label: str = ""
    params: dict = field(default_factory=dict)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.r.tolist()))


def _check_p_q(p, q):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 0.5], got {q!r}")


def sift_factor(p: float) -> float:
    return p**2 + (1 - p) ** 2


def bound_for(p: float, q: float, resolution: int = 512) -> EntropyBound:
    """Entropy bound matching the basis probability ``p`` and flip probability ``q``."""
    _check_p_q(p, q)
    return entropy_bound(basis_weight(p), q, resolution)


def _check_bound(bound: EntropyBound, p: float, q: float):
    # the stored lambda is folded into [0, 1/2], so compare |2 lambda - 1|
    want = abs(2 * basis_weight(p) - 1)
    have = abs(2 * bound.lam - 1)
    if abs(want - have) > 1e-9 or abs(bound.q - q) > 1e-12:
        raise ValueError(
            f"entropy bound was built for lambda={bound.lam}, q={bound.q}; "
            f"rate requested for p={p} (lambda={basis_weight(p)}), q={q}"
        )


def key_rate(
    delta: float,
    p: float,
    q: float = 0.0,
    bound: EntropyBound | None = None,
    S: float | None = None,
    clamp: bool = True,
) -> float:
    """Devetak-Winter lower bound on the key rate per round.

    Parameters
    ----------
    delta : float
        QBER of the key rounds before Alice's preprocessing flip.
    p, q : float
        Key-basis probability and preprocessing flip probability.
    bound : EntropyBound, optional
        Precomputed bound. Must match ``p`` and ``q``; built on demand if
        omitted.
    S : float, optional
        CHSH value fed to the bound. Defaults to ``2 sqrt 2 (1 - 2 delta)``.
    clamp : bool
        Report negative values as 0. Threshold searches use the raw sign.
    """
    if not 0.0 <= delta <= 0.5:
        raise ValueError(f"delta must lie in [0, 0.5], got {delta!r}")
    _check_p_q(p, q)
    if bound is None:
        bound = bound_for(p, q)
    else:
        _check_bound(bound, p, q)
    if S is None:
        S = TSIRELSON * (1 - 2 * delta)
    r = sift_factor(p) * (bound(S) - binary_entropy(preprocessed_qber(delta, q)))
    return max(0.0, r) if clamp else r


def default_postselection(p: float, q: float) -> bool:
    """Postselection is on unless neither basis mixing nor preprocessing is in use.

    With ``q = 0`` and a single key basis the protocol is the unimproved
    reference, which does not postselect.
    """
    return not (q == 0.0 and p in (0.0, 1.0))


def rate_at(
    F: float,
    eta: float,
    p: float,
    q: float = 0.0,
    postselection: bool | None = None,
    bound: EntropyBound | None = None,
    clamp: bool = True,
) -> float:
    """Key rate for fidelity ``F`` and global detection efficiency ``eta``."""
    if postselection is None:
        postselection = default_postselection(p, q)
    _, _, delta = qber_model(F, eta, postselection)
    delta = min(delta, 0.5)
    return key_rate(delta, p, q, bound=bound, S=bell_value(F, eta), clamp=clamp)


def _bisect_sign_change(fun: Callable[[float], float], lo: float, hi: float, tol: float, what: str) -> float:
    f_lo, f_hi = fun(lo), fun(hi)
    if f_lo > 0 and f_hi > 0:
        raise InfeasibleError(f"{what}: rate stays positive across [{lo}, {hi}]")
    if f_lo <= 0 and f_hi <= 0:
        raise InfeasibleError(f"{what}: no positive rate in [{lo}, {hi}]")
    return bisect(fun, lo, hi, xtol=tol)


def noise_threshold(p: float, q: float = 0.0, resolution: int = 512) -> float:
    """Largest QBER with a positive key rate."""
    bound = bound_for(p, q, resolution)
    lo, hi = DELTA_BRACKET
    return _bisect_sign_change(
        lambda d: key_rate(d, p, q, bound=bound, clamp=False), lo, hi, DELTA_TOL, "noise threshold"
    )


def efficiency_threshold(
    p: float,
    q: float = 0.0,
    F: float = 1.0,
    postselection: bool | None = None,
    resolution: int = 512,
) -> float:
    """Smallest global detection efficiency with a positive key rate."""
    if not 0.0 < F <= 1.0:
        raise ValueError(f"F must lie in (0, 1], got {F!r}")
    bound = bound_for(p, q, resolution)
    lo, hi = ETA_BRACKET
    if rate_at(F, hi, p, q, postselection, bound=bound, clamp=False) <= 0:
        raise InfeasibleError(f"no positive key rate at eta=1 for F={F}, p={p}, q={q}")
    return _bisect_sign_change(
        lambda e: rate_at(F, e, p, q, postselection, bound=bound, clamp=False),
        lo, hi, ETA_TOL, "efficiency threshold",
    )


def max_distance(
    p: float,
    q: float = 0.0,
    channel: ChannelParams | None = None,
    postselection: bool | None = None,
    F: float = 1.0,
    resolution: int = 512,
) -> tuple[float, float]:
    """Longest source-to-user fiber with a positive rate, and the user-to-user distance.

    The source sits at the centroid of an equilateral triangle of users, so
    users are ``sqrt 3`` source distances apart. If the rate is not positive
    even at ``L = 0`` the result is ``(0.0, 0.0)`` and a warning is logged.
    """
    channel = channel or ChannelParams()
    bound = bound_for(p, q, resolution)

    def fun(L):
        return rate_at(F, channel.at(L).eta, p, q, postselection, bound=bound, clamp=False)

    lo, hi = L_BRACKET
    if fun(lo) <= 0:
        log.warning(
            "no positive key rate at L=0 (eta=%.6f) for p=%s, q=%s; distance set to 0",
            channel.eta, p, q,
        )
        return 0.0, 0.0
    L_star = _bisect_sign_change(fun, lo, hi, L_TOL, "distance")
    return L_star, USER_DISTANCE_FACTOR * L_star


# ---------------------------------------------------------------------------
# curves and figure presets

CURVE_KINDS = ("rate_vs_qber", "rate_vs_eta", "rate_vs_L", "entropy_vs_S")
_ABSCISSA = {"rate_vs_qber": "delta", "rate_vs_eta": "eta", "rate_vs_L": "L_km", "entropy_vs_S": "S"}
_DEFAULT_RANGE = {
    "rate_vs_qber": (0.0, 0.12),
    "rate_vs_eta": (0.9, 1.0),
    "rate_vs_L": (0.0, 1.0),
    "entropy_vs_S": (2.0, TSIRELSON),
}


def curve(
    kind: str,
    p: float = 0.5,
    q: float = 0.0,
    F: float = 1.0,
    channel: ChannelParams | None = None,
    postselection: bool | None = None,
    resolution: int = 512,
    points: int = 241,
    x_range: tuple[float, float] | None = None,
    label: str = "",
) -> RateCurve:
    """Sample one figure series on a uniform grid.

    ``resolution`` is the entropy-bound grid and ``points`` the number of
    samples along the curve.
    """
    kind = kind.replace("-", "_")
    if kind not in CURVE_KINDS:
        raise ValueError(f"unknown curve kind {kind!r}; choose from {CURVE_KINDS}")
    if points < 2:
        raise ValueError(f"a curve needs at least 2 points, got {points!r}")
    bound = bound_for(p, q, resolution)
    channel = channel or ChannelParams()
    lo, hi = x_range or _DEFAULT_RANGE[kind]
    x = np.linspace(lo, hi, points)
    if kind == "entropy_vs_S":
        y = np.asarray(bound(x), dtype=float)
    elif kind == "rate_vs_qber":
        y = np.array([key_rate(d, p, q, bound=bound) for d in x])
    elif kind == "rate_vs_eta":
        y = np.array([rate_at(F, e, p, q, postselection, bound=bound) for e in x])
    else:
        y = np.array([rate_at(F, channel.at(L).eta, p, q, postselection, bound=bound) for L in x])
    params = {"p": p, "q": q}
    if kind in ("rate_vs_eta", "rate_vs_L"):
        params["F"] = F
        params["postselection"] = default_postselection(p, q) if postselection is None else postselection
    if kind == "rate_vs_L":
        params.update(alpha=channel.alpha_db_per_km, eta_d=channel.eta_d, eta_c=channel.eta_c)
    return RateCurve(kind, _ABSCISSA[kind], x, y, label or f"p={p:g} q={q:g}", params)


@dataclass(frozen=True)
class Series:
    label: str
    p: float
    q: float
    postselection: bool | None = None
    note: str = ""


_P_SWEEP = (1.0, 0.9, 0.8, 0.7, 0.6, 0.5)

# Improvement strategies compared against the distance and efficiency axes.
SCENARIOS = {
    "baseline": Series("baseline", 1.0, 0.0, False, "no postselection: lost rounds count as errors"),
    "noise-preprocessing": Series("noise-preprocessing", 1.0, 0.2, False),
    "postselection": Series("postselection", 1.0, 0.0, True),
    "advanced-postselection": Series("advanced-postselection", 1.0, 0.2, True),
    "advanced-random-basis": Series("advanced-random-basis", 0.5, 0.2, True),
}


def _with_q(s: Series, q: float) -> Series:
    return Series(s.label, s.p, q, s.postselection, s.note)


PRESETS = {
    "fig2": ("entropy_vs_S", tuple(Series(f"p={p:g}", p, 0.0) for p in _P_SWEEP)),
    "fig3": ("rate_vs_qber", tuple(Series(f"p={p:g}", p, 0.0) for p in _P_SWEEP)),
    "fig4": (
        "rate_vs_qber",
        tuple(Series(f"p={p:g} q={q:g}", p, q) for q in (0.0, 0.2, 0.4) for p in (1.0, 0.5)),
    ),
    "fig5": (
        "rate_vs_eta",
        tuple(
            _with_q(SCENARIOS[name], 0.4) if SCENARIOS[name].q else SCENARIOS[name]
            for name in ("noise-preprocessing", "postselection", "advanced-postselection", "advanced-random-basis")
        ),
    ),
    "fig6": ("rate_vs_L", tuple(SCENARIOS.values())),
}


def preset_curves(name: str, resolution: int = 512, points: int = 241, **kwargs) -> list[RateCurve]:
    """All series of a named figure preset."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kind, series = PRESETS[name]
    return [
        curve(kind, p=s.p, q=s.q, postselection=s.postselection, resolution=resolution,
              points=points, label=s.label, **kwargs)
        for s in series
    ]
