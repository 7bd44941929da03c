"""Cost arithmetic: per-agent cost, social cost, the exact potential, and the
cost of a consecutive agent block served by one facility.

``EPS_CMP`` is the global absolute tolerance for cost-equality tests. Strict
comparisons inside algorithms use raw floating-point values: ties are
meaningful because equilibrium is defined through weak inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Assignment, Environment, Profile, ValidationError

__all__ = [
    "EPS_CMP",
    "harmonic_numbers",
    "agent_cost",
    "AgentCost",
    "CostBreakdown",
    "social_cost",
    "potential",
    "block_cost",
]

EPS_CMP: float = 1e-9


def harmonic_numbers(n: int) -> np.ndarray:
    """Array ``H`` with ``H[k] = 1 + 1/2 + ... + 1/k`` and ``H[0] = 0``.

    Computed by direct summation; no closed-form approximation is used
    anywhere, so harmonic terms are exact up to float rounding.
    """
    out = np.zeros(n + 1)
    if n >= 1:
        out[1:] = np.cumsum(1.0 / np.arange(1, n + 1, dtype=float))
    return out


def agent_cost(agent: int, profile: Profile, assignment: Assignment,
               env: Environment) -> float:
    """Distance to the chosen facility plus an equal share of its building cost.

    ``agent`` is a 0-based index into the profile.
    """
    assignment.validate_for(profile, env)
    if not 0 <= agent < profile.n:
        raise IndexError(f"agent index {agent} out of range for n={profile.n}")
    f = assignment.choices[agent]
    users = assignment.choices.count(f)
    distance = abs(profile.positions[agent] - env.locations[f - 1])
    return distance + env.building_costs[f - 1] / users


@dataclass(frozen=True)
class AgentCost:
    distance: float
    share: float
    total: float


@dataclass(frozen=True)
class CostBreakdown:
    per_agent: tuple[AgentCost, ...]
    social_cost: float


def social_cost(profile: Profile, assignment: Assignment,
                env: Environment) -> CostBreakdown:
    """Sum of all agents' costs, with the per-agent distance/share split."""
    assignment.validate_for(profile, env)
    counts = assignment.counts(env.m)
    per = []
    for x, f in zip(profile.positions, assignment.choices):
        d = abs(x - env.locations[f - 1])
        share = env.building_costs[f - 1] / counts[f - 1]
        per.append(AgentCost(d, share, d + share))
    return CostBreakdown(tuple(per), sum(a.total for a in per))


def potential(profile: Profile, assignment: Assignment,
              env: Environment) -> float:
    """Exact potential of an assignment.

    For every used facility, its building cost times the harmonic number of
    its load, plus every agent's connection distance. Any unilateral deviation
    changes this value by exactly the deviator's cost change, so minimizers
    are equilibria.
    """
    assignment.validate_for(profile, env)
    counts = assignment.counts(env.m)
    harm = harmonic_numbers(max(counts))
    total = 0.0
    for j, c in enumerate(counts):
        if c:
            total += env.building_costs[j] * float(harm[c])
    for x, f in zip(profile.positions, assignment.choices):
        total += abs(x - env.locations[f - 1])
    return total


def block_cost(sorted_positions: Sequence[float], start: int, stop: int,
               facility: int, env: Environment) -> float:
    """Potential contribution of agents ``[start, stop)`` all using ``facility``.

    ``sorted_positions`` must be ascending; indices are 0-based, half-open;
    ``facility`` is 1-based. Equals the facility's building cost times the
    harmonic number of the block size, plus the block's distances.
    """
    if not 0 <= start < stop <= len(sorted_positions):
        raise ValidationError("empty agent range")
    if not 1 <= facility <= env.m:
        raise ValidationError("facility index out of range for this environment")
    block = sorted_positions[start:stop]
    if any(block[i] > block[i + 1] for i in range(len(block) - 1)):
        raise ValidationError("positions must be sorted ascending")
    size = stop - start
    harm = float(harmonic_numbers(size)[size])
    loc = env.locations[facility - 1]
    return env.building_costs[facility - 1] * harm + sum(abs(x - loc) for x in block)
