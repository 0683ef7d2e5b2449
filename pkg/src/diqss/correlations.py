"""Bell polynomials and closed-form error rates of the white-noise/loss model.

Sign convention: with Alice on (sx, sy), Charlie on (sx, -sy) and Bob's test
settings at 45 and 135 degrees, the GHZ correlators give
``<S_AB c2> = 2 sqrt 2`` and ``<S'_AB c1> = -2 sqrt 2``. The Svetlichny value
is therefore assembled as ``<S_AB c2> - <S'_AB c1>`` and a ``c1 = +1`` outcome
maps to ``-S'_AB`` when selecting the two-party CHSH value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qmath import ghz_state, kron, projector
from .states import (
    ALICE_BASES,
    BOB_BASES,
    CHARLIE_BASES,
    KEY_COMBINATIONS,
    SIGNS,
    outcome_distribution,
    postselect,
)

SQRT2 = np.sqrt(2.0)
TSIRELSON = 2 * SQRT2

# (alice, bob) settings and coefficient of each CHSH polynomial
CHSH_AB = (((1, 2), 1), ((2, 2), 1), ((1, 3), 1), ((2, 3), -1))
CHSH_AB_PRIME = (((2, 3), 1), ((2, 2), 1), ((1, 3), 1), ((1, 2), -1))
# Charlie's setting paired with each polynomial, and the sign it enters with
CHARLIE_FOR = {"ab": (2, 1), "ab_prime": (1, -1)}

SVETLICHNY_TERMS = tuple(
    (i, j, CHARLIE_FOR["ab"][0], coef * CHARLIE_FOR["ab"][1])
    for (i, j), coef in CHSH_AB
) + tuple(
    (i, j, CHARLIE_FOR["ab_prime"][0], coef * CHARLIE_FOR["ab_prime"][1])
    for (i, j), coef in CHSH_AB_PRIME
)


@dataclass(frozen=True)
class BellReport:
    """Bell values of the postselected statistics.

    ``s_ab`` is ``<S_AB c2>``, ``s_ab_prime`` is ``<S'_AB c1>``; both have
    magnitude ``s_effective`` on the GHZ family.
    """

    s_ab: float
    s_ab_prime: float
    s_abc: float
    s_effective: float


def _check_unit(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def correlator(F: float, eta: float, bases) -> float:
    """``<a_i b_j c_k>`` after no-click randomisation."""
    return postselect(outcome_distribution(F, eta, bases)).correlator()


def svetlichny(F: float, eta: float) -> float:
    return sum(coef * correlator(F, eta, (i, j, k)) for i, j, k, coef in SVETLICHNY_TERMS)


def _charlie_weighted_chsh(F, eta, which):
    terms = CHSH_AB if which == "ab" else CHSH_AB_PRIME
    k = CHARLIE_FOR[which][0]
    return sum(coef * correlator(F, eta, (i, j, k)) for (i, j), coef in terms)


def conditioned_chsh(F: float, eta: float, charlie_basis: int) -> float:
    """Average CHSH value selected by Charlie's outcome.

    The two-party polynomial is evaluated on Alice and Bob's statistics
    conditioned on each outcome of Charlie's setting and signed by the
    selection rule, then averaged over Charlie's outcome.
    """
    if charlie_basis not in (1, 2):
        raise ValueError(f"Charlie's basis must be 1 or 2, got {charlie_basis!r}")
    which = "ab" if charlie_basis == 2 else "ab_prime"
    terms = CHSH_AB if which == "ab" else CHSH_AB_PRIME
    rule_sign = CHARLIE_FOR[which][1]
    total = 0.0
    for c in SIGNS:
        p_c = None
        s_given_c = 0.0
        for (i, j), coef in terms:
            dist = postselect(outcome_distribution(F, eta, (i, j, charlie_basis)))
            joint = {ab: dist[(ab[0], ab[1], c)] for ab in ((1, 1), (1, -1), (-1, 1), (-1, -1))}
            mass = sum(joint.values())
            p_c = mass if p_c is None else p_c
            if mass > 0:
                s_given_c += coef * sum(a * b * pr for (a, b), pr in joint.items()) / mass
        total += p_c * rule_sign * c * s_given_c
    return total


def chsh_pair(F: float, eta: float) -> BellReport:
    """Assemble all Bell values from outcome distributions.

    Raises ``RuntimeError`` if the assembled value drifts from
    ``2 sqrt 2 F eta^3`` by more than 1e-9.
    """
    _check_unit("F", F)
    _check_unit("eta", eta)
    s_ab = _charlie_weighted_chsh(F, eta, "ab")
    s_ab_prime = _charlie_weighted_chsh(F, eta, "ab_prime")
    s_abc = CHARLIE_FOR["ab"][1] * s_ab + CHARLIE_FOR["ab_prime"][1] * s_ab_prime
    s_eff = s_abc / 2
    expected = TSIRELSON * F * eta**3
    if abs(s_eff - expected) > 1e-9:
        raise RuntimeError(f"Bell assembly gave S={s_eff!r}, closed form {expected!r}")
    return BellReport(s_ab, s_ab_prime, s_abc, s_eff)


def qber_model(F: float, eta: float, postselection: bool = True) -> tuple[float, float, float]:
    """Closed-form ``(Q1, Q2, delta)``.

    ``Q1 = (1-F)/2`` comes from white noise on fully detected rounds. With
    postselection a missing click is a fair coin, so ``Q2 = (1 - eta^3)/2``.
    Without it every round with a missing click is counted as an error,
    ``Q2 = 1 - eta^3``; this reproduces the unimproved protocol's reported
    efficiency threshold. In both cases ``delta = Q1 eta^3 + Q2``.
    """
    _check_unit("F", F)
    _check_unit("eta", eta)
    q1 = (1 - F) / 2
    lost = 1 - eta**3
    q2 = lost / 2 if postselection else lost
    return q1, q2, q1 * eta**3 + q2


def preprocessed_qber(delta: float, q: float) -> float:
    """Error rate after Alice flips her bit with probability ``q``."""
    if not 0.0 <= delta <= 0.5:
        raise ValueError(f"delta must lie in [0, 0.5], got {delta!r}")
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 0.5], got {q!r}")
    return q + (1 - 2 * q) * delta


def bell_value(F: float, eta: float) -> float:
    """Model CHSH value ``2 sqrt 2 F eta^3``."""
    return TSIRELSON * F * eta**3


def qber_per_branch(ghz_index: int, sign: str, bases) -> bool:
    """Whether a pure GHZ branch breaks ``K_A = K_B xor K_C`` in a key basis."""
    bases = tuple(int(b) for b in bases)
    if bases not in KEY_COMBINATIONS:
        raise ValueError(f"branch QBER is defined for key bases {KEY_COMBINATIONS}, got {bases}")
    rho = projector(ghz_state(ghz_index, sign))
    i, j, k = bases
    p_violate = 0.0
    for a in SIGNS:
        for b in SIGNS:
            c = -a * b  # abc = -1
            proj = kron(
                ALICE_BASES[i].projector(a),
                BOB_BASES[j].projector(b),
                CHARLIE_BASES[k].projector(c),
            )
            p_violate += np.trace(rho @ proj).real
    if min(abs(p_violate), abs(1 - p_violate)) > 1e-12:
        raise RuntimeError(f"branch {ghz_index}{sign} is not an eigenstate of {bases}")
    return p_violate > 0.5


def key_error_rate(F: float, eta: float, bases=(1, 1, 1)) -> float:
    """``1 - P(K_A = K_B xor K_C)`` from the postselected distribution."""
    return 1.0 - postselect(outcome_distribution(F, eta, bases)).key_agreement()


__all__ = [
    "BellReport",
    "SVETLICHNY_TERMS",
    "TSIRELSON",
    "bell_value",
    "chsh_pair",
    "conditioned_chsh",
    "correlator",
    "key_error_rate",
    "preprocessed_qber",
    "qber_model",
    "qber_per_branch",
    "svetlichny",
]
