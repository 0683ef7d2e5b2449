"""Noisy GHZ states and per-basis outcome statistics with lossy detection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .qmath import ObservableXY, check_density_matrix, ghz_state, kron, projector

NO_CLICK = 0
OUTCOMES = (1, -1, NO_CLICK)
SIGNS = (1, -1)

# Measurement settings in the X-Y plane. Bob's Bell-test settings are chosen
# so that both halves of the Svetlichny polynomial reach 2*sqrt(2) on the GHZ
# state (see correlations.svetlichny).
ALICE_BASES = {1: ObservableXY(0.0), 2: ObservableXY(np.pi / 2)}
BOB_BASES = {1: ObservableXY(0.0), 2: ObservableXY(np.pi / 4), 3: ObservableXY(3 * np.pi / 4)}
CHARLIE_BASES = {1: ObservableXY(0.0), 2: ObservableXY(-np.pi / 2)}

KEY_COMBINATIONS = ((1, 1, 1), (2, 1, 2))
DISCARDED_COMBINATIONS = ((1, 1, 2), (2, 1, 1))
ALL_COMBINATIONS = tuple(itertools.product((1, 2), (1, 2, 3), (1, 2)))


@dataclass(frozen=True)
class NoiseParams:
    """Channel and strategy parameters.

    F is the white-noise fidelity, eta the global detection efficiency per
    party, p the probability that Alice (and Charlie) pick their first basis,
    and q Alice's preprocessing flip probability.
    """

    F: float = 1.0
    eta: float = 1.0
    p: float = 0.5
    q: float = 0.0

    def __post_init__(self):
        for name in ("F", "eta", "p"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if not 0.0 <= self.q <= 0.5:
            raise ValueError(f"q must lie in [0, 0.5], got {self.q!r}")

    @property
    def lam(self) -> float:
        return basis_weight(self.p)

    @property
    def sift(self) -> float:
        """Probability that Alice and Charlie pick matching key bases, ``p^2 + (1-p)^2``."""
        return self.p**2 + (1 - self.p) ** 2


def basis_weight(p: float) -> float:
    """Matching weight ``p^2 / (p^2 + (1-p)^2)`` of the first key combination."""
    return p**2 / (p**2 + (1 - p) ** 2)


@dataclass(frozen=True)
class OutcomeDistribution:
    bases: tuple[int, int, int]
    probabilities: Mapping[tuple[int, int, int], float]

    def __getitem__(self, outcome: tuple[int, int, int]) -> float:
        return self.probabilities.get(outcome, 0.0)

    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    def correlator(self) -> float:
        """``P(abc = +1) - P(abc = -1)`` over click outcomes."""
        return float(
            sum(pr * a * b * c for (a, b, c), pr in self.probabilities.items())
        )

    def key_agreement(self) -> float:
        """Probability that ``K_A = K_B xor K_C``, i.e. ``abc = +1``."""
        return float(
            sum(pr for (a, b, c), pr in self.probabilities.items() if a * b * c == 1)
        )

    def as_array(self) -> np.ndarray:
        """Probabilities ordered like ``itertools.product(OUTCOMES, repeat=3)``."""
        return np.array([self[o] for o in itertools.product(OUTCOMES, repeat=3)])


def noisy_ghz(F: float) -> np.ndarray:
    """``F |GHZ><GHZ| + (1-F)/8`` times the sum of the eight GHZ branch projectors."""
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"F must lie in [0, 1], got {F!r}")
    branches = sum(
        projector(ghz_state(i, s)) for i in range(1, 5) for s in "+-"
    )
    rho = F * projector(ghz_state(1, "+")) + (1 - F) / 8 * branches
    return check_density_matrix(rho)


def _validate_bases(bases) -> tuple[int, int, int]:
    i, j, k = (int(x) for x in bases)
    if i not in ALICE_BASES or j not in BOB_BASES or k not in CHARLIE_BASES:
        raise ValueError(f"invalid basis combination {bases!r}")
    return i, j, k


def click_probabilities(F: float, bases) -> np.ndarray:
    """Born-rule ``P(a, b, c)`` as a 2x2x2 array indexed by ``(1 - outcome) // 2``."""
    i, j, k = _validate_bases(bases)
    rho = noisy_ghz(F)
    obs = (ALICE_BASES[i], BOB_BASES[j], CHARLIE_BASES[k])
    probs = np.empty((2, 2, 2))
    for a, b, c in itertools.product(SIGNS, repeat=3):
        proj = kron(obs[0].projector(a), obs[1].projector(b), obs[2].projector(c))
        probs[(1 - a) // 2, (1 - b) // 2, (1 - c) // 2] = np.trace(rho @ proj).real
    return probs


@lru_cache(maxsize=4096)
def _outcome_distribution(F: float, eta: float, bases: tuple[int, int, int]):
    born = click_probabilities(F, bases)
    probs = {}
    for outcome in itertools.product(OUTCOMES, repeat=3):
        detected = [o != NO_CLICK for o in outcome]
        weight = 1.0
        for d in detected:
            weight *= eta if d else 1 - eta
        # lost parties are traced out, which is a sum over their outcomes
        idx = tuple(
            (1 - o) // 2 if d else slice(None) for o, d in zip(outcome, detected)
        )
        probs[outcome] = weight * float(np.sum(born[idx]))
    return OutcomeDistribution(bases, MappingProxyType(probs))


def outcome_distribution(F: float, eta: float, bases) -> OutcomeDistribution:
    """Joint outcome statistics over ``{+1, -1, no-click}^3`` for one basis triple.

    Each party independently registers its photon with probability ``eta``;
    registered outcomes follow the Born rule on ``noisy_ghz(F)`` marginalised
    over the parties that lost theirs.
    """
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"F must lie in [0, 1], got {F!r}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    return _outcome_distribution(float(F), float(eta), _validate_bases(bases))


def postselect(dist: OutcomeDistribution) -> OutcomeDistribution:
    """Replace every no-click by an independent fair +/-1 coin."""
    out = dict.fromkeys(itertools.product(SIGNS, repeat=3), 0.0)
    for outcome, pr in dist.probabilities.items():
        lost = [n for n, o in enumerate(outcome) if o == NO_CLICK]
        share = pr / 2 ** len(lost)
        for fill in itertools.product(SIGNS, repeat=len(lost)):
            filled = list(outcome)
            for n, v in zip(lost, fill):
                filled[n] = v
            out[tuple(filled)] += share
    return OutcomeDistribution(dist.bases, MappingProxyType(out))


def key_bit(outcome: int) -> int:
    """+1 encodes key bit 0 and -1 encodes key bit 1."""
    if outcome not in SIGNS:
        raise ValueError(f"key bits need a +/-1 outcome, got {outcome!r}")
    return (1 - outcome) // 2
