"""Round-by-round Monte-Carlo simulation of the secret-sharing protocol.

Each round draws the three basis choices, samples an outcome triple from the
exact 27-outcome distribution of that basis combination (no-clicks
included), replaces no-clicks by fair coins, and then routes the round:

* key combinations ``A1B1C1`` and ``A2B1C2``: Alice flips her bit with
  probability ``q``; a random ``announce_fraction`` of these rounds is
  published to estimate the QBER and the rest form the raw key;
* ``A1B1C2`` and ``A2B1C1``: discarded;
* Bob in ``B2`` or ``B3``: Bell-test rounds feeding the Svetlichny estimate.

Rounds are processed in fixed-size blocks. Block ``b`` draws from its own
stream ``SeedSequence(seed, spawn_key=(b,))``, so the result does not depend
on how blocks are spread over workers.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correlations import SVETLICHNY_TERMS, bell_value, preprocessed_qber, qber_model
from .states import (
    ALL_COMBINATIONS,
    DISCARDED_COMBINATIONS,
    KEY_COMBINATIONS,
    NO_CLICK,
    OUTCOMES,
    NoiseParams,
    outcome_distribution,
)

BLOCK_SIZE = 1 << 16

_OUTCOME_TABLE = np.array(list(itertools.product(OUTCOMES, repeat=3)), dtype=np.int8)
_COMBO_INDEX = {combo: n for n, combo in enumerate(ALL_COMBINATIONS)}
_KEY_IDX = np.array([_COMBO_INDEX[c] for c in KEY_COMBINATIONS])
_DISCARD_IDX = np.array([_COMBO_INDEX[c] for c in DISCARDED_COMBINATIONS])
_BELL_IDX = np.array([_COMBO_INDEX[(i, j, k)] for i, j, k, _ in SVETLICHNY_TERMS])
_BELL_COEF = np.array([coef for *_, coef in SVETLICHNY_TERMS], dtype=float)


@dataclass(frozen=True)
class SimConfig:
    rounds: int
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    announce_fraction: float = 0.1
    bob_probabilities: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise ValueError(f"rounds must be a positive integer, got {self.rounds!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not 0.0 < self.announce_fraction < 1.0:
            raise ValueError(f"announce_fraction must lie in (0, 1), got {self.announce_fraction!r}")
        probs = np.asarray(self.bob_probabilities, dtype=float)
        if probs.shape != (3,) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError(f"bob_probabilities must be 3 nonnegative weights summing to 1, got {self.bob_probabilities!r}")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")

    @property
    def n_blocks(self) -> int:
        return -(-self.rounds // self.block_size)


@dataclass
class _Tally:
    """Integer counters for a set of rounds; adding two tallies merges them."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros(len(ALL_COMBINATIONS), dtype=np.int64))
    announced: int = 0
    announced_errors: int = 0
    retained: int = 0
    retained_failures: int = 0
    bell_n: np.ndarray = field(default_factory=lambda: np.zeros(len(_BELL_IDX), dtype=np.int64))
    bell_sum: np.ndarray = field(default_factory=lambda: np.zeros(len(_BELL_IDX), dtype=np.int64))

    def __add__(self, other: "_Tally") -> "_Tally":
        return _Tally(
            self.counts + other.counts,
            self.announced + other.announced,
            self.announced_errors + other.announced_errors,
            self.retained + other.retained,
            self.retained_failures + other.retained_failures,
            self.bell_n + other.bell_n,
            self.bell_sum + other.bell_sum,
        )


@dataclass(frozen=True)
class SimStats:
    """Tallies and estimates from one simulation run.

    ``counts`` maps each basis combination ``(i, j, k)`` to its number of
    rounds. ``S_estimate`` is half the Svetlichny estimate, i.e. the CHSH
    value the entropy bound consumes. ``reconstruction_failures`` counts
    retained raw-key rounds where ``K_A != K_B xor K_C`` before error
    correction; it is zero only on a noiseless channel.
    """

    rounds: int
    counts: dict
    sifted_key_rounds: int
    discarded_rounds: int
    bell_rounds: int
    announced_rounds: int
    qber_estimate: float
    qber_se: float
    S_estimate: float
    S_se: float
    S_ABC_estimate: float
    S_ABC_se: float
    reconstruction_failures: int
    correlators: dict = field(repr=False)
    bob_probabilities: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)


def _cumulative_tables(noise: NoiseParams) -> np.ndarray:
    table = np.empty((len(ALL_COMBINATIONS), len(_OUTCOME_TABLE)))
    for n, combo in enumerate(ALL_COMBINATIONS):
        probs = outcome_distribution(noise.F, noise.eta, combo).as_array()
        table[n] = np.cumsum(probs / probs.sum())
    table[:, -1] = 1.0
    return table


def _key_bits(x):
    return (1 - x) // 2


def _run_block(args) -> _Tally:
    cfg, block, cdf = args
    start = block * cfg.block_size
    n = min(cfg.block_size, cfg.rounds - start)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(block,)))
    p, q = cfg.noise.p, cfg.noise.q

    alice = np.where(rng.random(n) < p, 1, 2)
    bob = rng.choice(3, size=n, p=cfg.bob_probabilities) + 1
    charlie = np.where(rng.random(n) < p, 1, 2)
    combo = (alice - 1) * 6 + (bob - 1) * 2 + (charlie - 1)

    u = rng.random(n)
    outcome_idx = np.empty(n, dtype=np.int64)
    for c in np.unique(combo):
        sel = combo == c
        outcome_idx[sel] = np.searchsorted(cdf[c], u[sel], side="right")
    outcomes = _OUTCOME_TABLE[outcome_idx].astype(np.int64)

    coins = rng.choice(np.array([1, -1]), size=(n, 3))
    outcomes = np.where(outcomes == NO_CLICK, coins, outcomes)
    a, b, c = outcomes.T

    tally = _Tally()
    tally.counts += np.bincount(combo, minlength=len(ALL_COMBINATIONS))

    flips = rng.random(n) < q
    announce = rng.random(n) < cfg.announce_fraction
    key = np.isin(combo, _KEY_IDX)
    a_key = np.where(flips, -a, a)
    # Bob and Charlie reconstruct Alice's bit as K_B xor K_C
    mismatch = _key_bits(a_key) != (_key_bits(b) ^ _key_bits(c))
    tally.announced = int(np.sum(key & announce))
    tally.announced_errors = int(np.sum(key & announce & mismatch))
    tally.retained = int(np.sum(key & ~announce))
    tally.retained_failures = int(np.sum(key & ~announce & mismatch))

    prod = a * b * c
    for t, idx in enumerate(_BELL_IDX):
        sel = combo == idx
        tally.bell_n[t] = int(np.sum(sel))
        tally.bell_sum[t] = int(np.sum(prod[sel]))
    return tally


def _summarise(cfg: SimConfig, tally: _Tally) -> SimStats:
    counts = {combo: int(tally.counts[n]) for combo, n in _COMBO_INDEX.items()}
    key_rounds = int(tally.counts[_KEY_IDX].sum())
    discarded = int(tally.counts[_DISCARD_IDX].sum())
    bell_rounds = int(tally.bell_n.sum())

    if tally.announced:
        qber = tally.announced_errors / tally.announced
        qber_se = math.sqrt(qber * (1 - qber) / tally.announced)
    else:
        qber, qber_se = math.nan, math.nan

    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(tally.bell_n > 0, tally.bell_sum / np.maximum(tally.bell_n, 1), np.nan)
        var = np.where(tally.bell_n > 0, (1 - corr**2) / np.maximum(tally.bell_n, 1), np.nan)
    s_abc = float(np.sum(_BELL_COEF * corr))
    s_abc_se = float(math.sqrt(np.sum(_BELL_COEF**2 * var)))
    correlators = {
        (i, j, k): float(e) for (i, j, k, _), e in zip(SVETLICHNY_TERMS, corr)
    }
    return SimStats(
        rounds=cfg.rounds,
        counts=counts,
        sifted_key_rounds=key_rounds,
        discarded_rounds=discarded,
        bell_rounds=bell_rounds,
        announced_rounds=tally.announced,
        qber_estimate=qber,
        qber_se=qber_se,
        S_estimate=s_abc / 2,
        S_se=s_abc_se / 2,
        S_ABC_estimate=s_abc,
        S_ABC_se=s_abc_se,
        reconstruction_failures=tally.retained_failures,
        correlators=correlators,
        bob_probabilities=tuple(cfg.bob_probabilities),
    )


def run_simulation(cfg: SimConfig, workers: int = 1) -> SimStats:
    """Simulate ``cfg.rounds`` protocol rounds.

    ``workers > 1`` spreads blocks over processes; the output is identical
    for any worker count.
    """
    cdf = _cumulative_tables(cfg.noise)
    jobs = [(cfg, b, cdf) for b in range(cfg.n_blocks)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(_run_block, jobs))
    else:
        tallies = [_run_block(job) for job in jobs]
    total = _Tally()
    for t in tallies:
        total = total + t
    return _summarise(cfg, total)


@dataclass(frozen=True)
class ZReport:
    """Standardised deviations of simulated estimates from the closed-form model."""

    z_qber: float
    z_S: float
    z_sift: float
    expected: dict
    flags: tuple[str, ...] = ()

    def max_abs(self) -> float:
        return max(abs(z) for z in (self.z_qber, self.z_S, self.z_sift) if not math.isnan(z))

    def within(self, sigmas: float = 3.0) -> bool:
        return all(abs(z) <= sigmas for z in (self.z_qber, self.z_S, self.z_sift) if not math.isnan(z))


def _z(est, model, se, name, flags, fallback_se=math.nan):
    if math.isnan(est):
        flags.append(f"{name}: no samples")
        return math.nan
    if not se > 0:
        se = fallback_se
    if not se > 0:
        flags.append(f"{name}: zero variance")
        return 0.0 if est == model else math.copysign(math.inf, est - model)
    return float((est - model) / se)


def estimate_vs_model(stats: SimStats, noise: NoiseParams) -> ZReport:
    """z-scores of QBER, CHSH value and key-round fraction against the model.

    Binomial quantities use the model variance, falling back to the
    empirical one when the model variance vanishes; if both vanish the
    z-score is 0 (exact agreement) or infinite and the quantity is flagged.
    The CHSH standard error is the propagated empirical one.
    """
    flags: list[str] = []
    _, _, delta = qber_model(noise.F, noise.eta, postselection=True)
    delta_q = preprocessed_qber(delta, noise.q)
    n_ann = stats.announced_rounds
    qber_se = math.sqrt(delta_q * (1 - delta_q) / n_ann) if n_ann else math.nan
    z_qber = _z(stats.qber_estimate, delta_q, qber_se, "qber", flags, stats.qber_se)

    S_model = bell_value(noise.F, noise.eta)
    z_S = _z(stats.S_estimate, S_model, stats.S_se, "S", flags)

    sift = (noise.p**2 + (1 - noise.p) ** 2) * stats.bob_probabilities[0]
    frac = stats.sifted_key_rounds / stats.rounds
    z_sift = _z(frac, sift, math.sqrt(sift * (1 - sift) / stats.rounds), "sift", flags)
    expected = {"qber": delta_q, "S": float(S_model), "S_ABC": float(2 * S_model), "sift_fraction": sift}
    return ZReport(z_qber, z_S, z_sift, expected, tuple(flags))
