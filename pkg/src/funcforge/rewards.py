"""Reward signals for tool-calling rollouts and the group-normalized
policy objective built on them.

Structural reward checks schema validity per call (mean of 0/1).
Correctness reward matches predicted calls against gold calls with tiered
credit: 3 for an exact match (name + all arguments), 2 for a correct name
with at least one matching argument, 1 for name only, 0 otherwise; pairing
maximizes total credit, and the sum is divided by max(|gold|, |pred|).
The final reward is their sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError
from .tools import ToolCall, ToolSpec
from .validation import canonical_value, validate_call

EXACT_LIMIT = 6  # up to this many calls the pairing is provably optimal


@dataclass(frozen=True)
class RewardBreakdown:
    structural: float
    correctness: float
    final: float

    def to_dict(self) -> dict[str, float]:
        return {"structural": self.structural, "correctness": self.correctness, "final": self.final}


@dataclass(frozen=True)
class RewardGroup:
    query_id: str
    rewards: tuple[float, ...]


@dataclass(frozen=True)
class AdvantageVector:
    values: tuple[float, ...]
    mean: float
    std: float
    eta: float


@dataclass(frozen=True)
class ClipParams:
    epsilon: float = 0.2
    eta: float = 1e-8

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise DomainError(f"clip epsilon must be > 0, got {self.epsilon}")
        if self.eta <= 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")


def structural_reward(pred: Sequence[ToolCall], tools: Sequence[ToolSpec]) -> float:
    """Fraction of predicted calls that are schema-valid; 0.0 for no calls."""
    if not pred:
        return 0.0
    by_name = {t.name: t for t in tools}
    valid = sum(1 for call in pred if not validate_call(call, by_name))
    return valid / len(pred)


def correctness_tier(pred: ToolCall, gold: ToolCall) -> int:
    """Tiered credit for one predicted call against one gold call."""
    if pred.name != gold.name:
        return 0
    pred_args = {k: canonical_value(v) for k, v in pred.arguments.items()}
    gold_args = {k: canonical_value(v) for k, v in gold.arguments.items()}
    if pred_args == gold_args:
        return 3
    if any(k in gold_args and gold_args[k] == v for k, v in pred_args.items()):
        return 2
    return 1


def _best_total(tiers: list[list[int]]) -> int:
    """Maximum-total injective pairing of pred rows to gold columns.

    Exact (bitmask DP) when the larger side is within EXACT_LIMIT;
    greedy highest-tier-first beyond that, which can be suboptimal but
    keeps runtime linear in the number of candidate pairs.
    """
    n_pred = len(tiers)
    n_gold = len(tiers[0]) if tiers else 0
    if n_pred == 0 or n_gold == 0:
        return 0
    if max(n_pred, n_gold) <= EXACT_LIMIT:
        best_by_state: dict[int, int] = {0: 0}
        for row in tiers:
            next_state: dict[int, int] = dict(best_by_state)  # skipping this pred is allowed
            for mask, total in best_by_state.items():
                for j in range(n_gold):
                    if not mask & (1 << j):
                        candidate = total + row[j]
                        key = mask | (1 << j)
                        if candidate > next_state.get(key, -1):
                            next_state[key] = candidate
            best_by_state = next_state
        return max(best_by_state.values())
    ranked = sorted(
        ((tiers[i][j], i, j) for i in range(n_pred) for j in range(n_gold)),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    total = 0
    for tier, i, j in ranked:
        if tier == 0:
            break
        if i not in used_pred and j not in used_gold:
            used_pred.add(i)
            used_gold.add(j)
            total += tier
    return total


def correctness_reward(pred: Sequence[ToolCall], gold: Sequence[ToolCall]) -> float:
    """Best-pairing tier total divided by max(|gold|, |pred|); 0.0 when both empty."""
    denominator = max(len(gold), len(pred))
    if denominator == 0:
        return 0.0
    tiers = [[correctness_tier(p, g) for g in gold] for p in pred]
    return _best_total(tiers) / denominator


def final_reward(
    pred: Sequence[ToolCall], gold: Sequence[ToolCall], tools: Sequence[ToolSpec]
) -> RewardBreakdown:
    structural = structural_reward(pred, tools)
    correctness = correctness_reward(pred, gold)
    return RewardBreakdown(structural=structural, correctness=correctness, final=structural + correctness)


def group_advantages(rewards: Sequence[float], eta: float = 1e-8) -> AdvantageVector:
    """Per-rollout advantages: (r - mean) / (population std + eta).

    Population std (1/n); eta keeps uniform groups finite (their
    advantages are exactly 0 because the numerator vanishes).
    """
    if not rewards:
        raise ValueError("advantage group must be non-empty")
    if eta <= 0:
        raise DomainError(f"eta must be > 0, got {eta}")
    n = len(rewards)
    mean = math.fsum(rewards) / n
    variance = math.fsum((r - mean) ** 2 for r in rewards) / n
    std = math.sqrt(variance)
    values = tuple((r - mean) / (std + eta) for r in rewards)
    return AdvantageVector(values=values, mean=mean, std=std, eta=eta)


def clipped_objective(
    p_new: Sequence[float],
    p_old: Sequence[float],
    advantages: Sequence[float],
    clip: ClipParams = ClipParams(),
) -> float:
    """Mean over rollouts of min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).

    No KL penalty term.  Old probabilities must be strictly positive.
    """
    if not (len(p_new) == len(p_old) == len(advantages)):
        raise ValueError("p_new, p_old, and advantages must have equal length")
    if not p_new:
        raise ValueError("objective needs at least one rollout")
    terms = []
    for pn, po, adv in zip(p_new, p_old, advantages):
        if po <= 0:
            raise DomainError(f"old probability must be > 0, got {po}")
        if pn < 0:
            raise DomainError(f"new probability must be >= 0, got {pn}")
        ratio = pn / po
        clamped = min(max(ratio, 1.0 - clip.epsilon), 1.0 + clip.epsilon)
        terms.append(min(ratio * adv, clamped * adv))
    return math.fsum(terms) / len(terms)
