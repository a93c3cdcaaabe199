"""Group-relative advantage math: standardized group advantages, the clipped
token surrogate with its on-policy ratio=1 variant, and KL penalty estimators.

Pure scalar functions over value inputs — an external trainer differentiates
these quantities; no gradients or parameters live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import fmean
from typing import Sequence


@dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = 0.2
    kl_coeff: float = 0.001
    on_policy: bool = False
    std_eps: float = 1e-6
    std_mode: str = "population"  # population | sample
    kl_estimator: str = "k3"  # direct | k3

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must be in (0, 1)")
        if self.std_eps <= 0:
            raise ValueError("std_eps must be > 0")
        if self.std_mode not in ("population", "sample"):
            raise ValueError(f"unknown std_mode {self.std_mode!r}")
        if self.kl_estimator not in ("direct", "k3"):
            raise ValueError(f"unknown kl_estimator {self.kl_estimator!r}")


@dataclass(frozen=True)
class TokenLogProbs:
    """Aligned per-trajectory token log-probabilities for one rollout group."""

    logp_new: tuple[tuple[float, ...], ...]
    logp_old: tuple[tuple[float, ...], ...]
    logp_ref: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        n = len(self.logp_new)
        if len(self.logp_old) != n or len(self.logp_ref) != n:
            raise ValueError("logp_new/logp_old/logp_ref must cover the same trajectories")
        for new, old, ref in zip(self.logp_new, self.logp_old, self.logp_ref):
            if not (len(new) == len(old) == len(ref)):
                raise ValueError("per-trajectory token lists must be aligned")
            if not new:
                raise ValueError("trajectories must carry at least one token")
            for v in (*new, *old, *ref):
                if v > 0:
                    raise ValueError("log-probabilities must be <= 0")

    @classmethod
    def from_lists(cls, logp_new, logp_old=None, logp_ref=None) -> "TokenLogProbs":
        """Missing old/ref default to the new log-probs (on-policy, anchored)."""
        new = tuple(tuple(float(x) for x in traj) for traj in logp_new)
        old = tuple(tuple(float(x) for x in traj) for traj in logp_old) if logp_old is not None else new
        ref = tuple(tuple(float(x) for x in traj) for traj in logp_ref) if logp_ref is not None else new
        return cls(new, old, ref)

    def __len__(self) -> int:
        return len(self.logp_new)


def group_advantages(rewards: Sequence[float], config: GrpoConfig = GrpoConfig()) -> list[float]:
    """Per-trajectory advantage: (R_i - mean) / std within the group.

    Degenerate groups (std below std_eps) yield exactly zero advantages rather
    than a division blow-up. Every token of trajectory i shares advantage i.
    """
    n = len(rewards)
    if n < 2:
        raise ValueError("group advantages need at least 2 rewards")
    mean = fmean(rewards)
    var = sum((r - mean) ** 2 for r in rewards) / (n if config.std_mode == "population" else n - 1)
    std = math.sqrt(var)
    if std < config.std_eps:
        return [0.0] * n
    return [(r - mean) / std for r in rewards]


def token_surrogate(
    logp: TokenLogProbs,
    advantages: Sequence[float],
    config: GrpoConfig = GrpoConfig(),
) -> tuple[list[float], float]:
    """Clipped importance-weighted objective: per-trajectory token means and
    their batch mean. on_policy forces the ratio to exactly 1."""
    if len(advantages) != len(logp):
        raise ValueError("advantages and log-probs must cover the same trajectories")
    lo, hi = 1 - config.clip_eps, 1 + config.clip_eps
    per_trajectory = []
    for adv, new, old in zip(advantages, logp.logp_new, logp.logp_old):
        terms = []
        for ln, lo_ in zip(new, old):
            rho = 1.0 if config.on_policy else math.exp(ln - lo_)
            clipped = min(max(rho, lo), hi)
            terms.append(min(rho * adv, clipped * adv))
        per_trajectory.append(fmean(terms))
    return per_trajectory, fmean(per_trajectory)


def kl_penalty(logp: TokenLogProbs, config: GrpoConfig = GrpoConfig()) -> float:
    """KL(new || ref) estimate: 'direct' mean log-ratio or the non-negative
    'k3' estimator, averaged per trajectory then across the group."""
    per_trajectory = []
    for new, ref in zip(logp.logp_new, logp.logp_ref):
        if config.kl_estimator == "direct":
            terms = [ln - lr for ln, lr in zip(new, ref)]
        else:
            terms = [math.exp(lr - ln) - (lr - ln) - 1 for ln, lr in zip(new, ref)]
        per_trajectory.append(fmean(terms))
    return fmean(per_trajectory)


def grpo_objective(
    groups: Sequence[tuple[Sequence[float], TokenLogProbs]],
    config: GrpoConfig = GrpoConfig(),
) -> float:
    """Mean over groups of (clipped surrogate − kl_coeff · KL penalty)."""
    if not groups:
        raise ValueError("at least one group required")
    values = []
    for rewards, logp in groups:
        advantages = group_advantages(rewards, config)
        _, surrogate = token_surrogate(logp, advantages, config)
        values.append(surrogate - config.kl_coeff * kl_penalty(logp, config))
    return fmean(values)
