"""Equilibrium computation and verification.

The solver exploits two structural facts about this game. First, it is an
exact-potential game: a unilateral deviation changes the potential (see
:func:`facshare.costs.potential`) by exactly the deviator's cost change, so
any assignment minimizing the potential is a pure Nash equilibrium and
best-response dynamics cannot cycle. Second, in any equilibrium agents sorted
by position use facilities sorted by location (the no-cross property), so a
potential minimizer can be found by dynamic programming over consecutive
agent blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._blockdp import distance_prefix, solve_block_partition
from .costs import EPS_CMP, harmonic_numbers, potential, social_cost
from .model import Assignment, Environment, Instance, Profile, ValidationError

__all__ = [
    "Deviation",
    "PneVerdict",
    "is_pne",
    "best_response",
    "DynamicsStep",
    "DynamicsTrace",
    "run_dynamics",
    "compute_pne_dp",
    "DpTable",
    "build_dp_table",
    "brute_force_min_potential",
    "CrossingWitness",
    "NoCrossVerdict",
    "check_no_cross",
    "consecutive_blocks_ok",
    "HarmonicBoundReport",
    "check_harmonic_bound",
]


@dataclass(frozen=True)
class Deviation:
    """A strictly improving unilateral move: ``agent`` (0-based) switching to
    ``better_facility`` (1-based) saves ``improvement`` > 0."""

    agent: int
    better_facility: int
    improvement: float


@dataclass(frozen=True)
class PneVerdict:
    is_equilibrium: bool
    witness: Deviation | None = None

    def __bool__(self) -> bool:
        return self.is_equilibrium


def _deviation_cost(x: float, current: int, target: int, counts, env: Environment) -> float:
    # Joining a different facility raises its load by one.
    loc = env.locations[target - 1]
    users = counts[target - 1] + (0 if target == current else 1)
    return abs(x - loc) + env.building_costs[target - 1] / users


def is_pne(profile: Profile, assignment: Assignment, env: Environment,
           tol: float = EPS_CMP) -> PneVerdict:
    """Weak-inequality equilibrium check; ties never refute.

    A negative verdict carries the first improving deviation found (scanning
    agents, then facilities, in order).
    """
    assignment.validate_for(profile, env)
    counts = assignment.counts(env.m)
    for i, (x, f) in enumerate(zip(profile.positions, assignment.choices)):
        current = _deviation_cost(x, f, f, counts, env)
        for g in range(1, env.m + 1):
            if g == f:
                continue
            gain = current - _deviation_cost(x, f, g, counts, env)
            if gain > tol:
                return PneVerdict(False, Deviation(i, g, gain))
    return PneVerdict(True)


def best_response(agent: int, profile: Profile, assignment: Assignment,
                  env: Environment) -> int:
    """Facility minimizing the agent's deviation cost (raw comparisons).

    The current facility wins ties; otherwise the smallest minimizing index
    is returned. ``agent`` is 0-based, the result 1-based.
    """
    assignment.validate_for(profile, env)
    if not 0 <= agent < profile.n:
        raise IndexError(f"agent index {agent} out of range for n={profile.n}")
    counts = assignment.counts(env.m)
    x = profile.positions[agent]
    f = assignment.choices[agent]
    costs = [_deviation_cost(x, f, g, counts, env) for g in range(1, env.m + 1)]
    best = min(costs)
    if costs[f - 1] <= best:
        return f
    return costs.index(best) + 1


@dataclass(frozen=True)
class DynamicsStep:
    agent: int
    from_facility: int
    to_facility: int
    cost_delta: float
    potential_after: float


@dataclass(frozen=True)
class DynamicsTrace:
    steps: tuple[DynamicsStep, ...]
    converged: bool
    final_assignment: Assignment
    initial_potential: float


_ORDERS = ("round-robin", "max-gain", "seeded-random")


def run_dynamics(instance: Instance, start: Assignment,
                 order: str = "round-robin", max_steps: int = 100_000,
                 seed: int | None = None, tol: float = EPS_CMP) -> DynamicsTrace:
    """Iterate strict best-response improvements until none exists.

    ``order`` picks the deviator each step: ``round-robin`` cycles agents and
    moves the first improver, ``max-gain`` moves the agent with the largest
    saving (smallest agent index on ties), ``seeded-random`` draws uniformly
    among improvers and requires ``seed``. Non-convergence within
    ``max_steps`` is reported, not raised. The potential strictly decreases
    at every step, which is why the iteration cannot cycle.
    """
    if order not in _ORDERS:
        raise ValidationError(f"unknown order {order!r}; expected one of {_ORDERS}")
    if order == "seeded-random" and seed is None:
        raise ValidationError("seeded-random order requires an explicit seed")
    profile, env = instance.profile, instance.environment
    start.validate_for(profile, env)
    rng = np.random.default_rng(seed) if order == "seeded-random" else None

    choices = list(start.choices)
    counts = list(start.counts(env.m))
    n, m = profile.n, env.m

    def gain_of(i: int) -> tuple[float, int]:
        x, f = profile.positions[i], choices[i]
        current = _deviation_cost(x, f, f, counts, env)
        best_gain, best_fac = 0.0, f
        for g in range(1, m + 1):
            if g == f:
                continue
            gain = current - _deviation_cost(x, f, g, counts, env)
            if gain > best_gain:
                best_gain, best_fac = gain, g
        return best_gain, best_fac

    steps: list[DynamicsStep] = []
    initial_potential = potential(profile, start, env)
    pointer = 0
    converged = False
    while True:
        mover: tuple[int, float, int] | None = None
        if order == "round-robin":
            for off in range(n):
                i = (pointer + off) % n
                gain, fac = gain_of(i)
                if gain > tol:
                    mover = (i, gain, fac)
                    break
        elif order == "max-gain":
            for i in range(n):
                gain, fac = gain_of(i)
                if gain > tol and (mover is None or gain > mover[1]):
                    mover = (i, gain, fac)
        else:
            improvers = []
            for i in range(n):
                gain, fac = gain_of(i)
                if gain > tol:
                    improvers.append((i, gain, fac))
            if improvers:
                mover = improvers[int(rng.integers(len(improvers)))]
        if mover is None:
            converged = True
            break
        if len(steps) >= max_steps:
            break
        i, gain, fac = mover
        old = choices[i]
        counts[old - 1] -= 1
        counts[fac - 1] += 1
        choices[i] = fac
        pointer = (i + 1) % n
        steps.append(DynamicsStep(
            agent=i, from_facility=old, to_facility=fac, cost_delta=-gain,
            potential_after=potential(profile, Assignment(tuple(choices)), env),
        ))
    return DynamicsTrace(tuple(steps), converged, Assignment(tuple(choices)),
                         initial_potential)


def _sorted_view(profile: Profile) -> tuple[np.ndarray, np.ndarray]:
    positions = np.asarray(profile.positions, dtype=float)
    order = np.argsort(positions, kind="stable")
    return positions[order], order


def compute_pne_dp(instance: Instance, *, verify: bool = False) -> Assignment:
    """Compute a potential-minimizing assignment, which is always a pure Nash
    equilibrium, in O(n^2 * m) time after sorting.

    Agents are sorted by position (stable, so co-located agents keep input
    order and land in one block), facilities are already location-sorted, and
    the consecutive-block dynamic program of :mod:`facshare._blockdp` is run
    with harmonic size weights. The result is mapped back to the caller's
    agent order. Under ``python -O`` the equilibrium self-check only runs
    when ``verify`` is set; in normal (debug) runs it always does.
    """
    profile, env = instance.profile, instance.environment
    sorted_x, order = _sorted_view(profile)
    solution = solve_block_partition(
        sorted_x,
        np.asarray(env.locations, dtype=float),
        np.asarray(env.building_costs, dtype=float),
        harmonic_numbers(profile.n),
    )
    choices_sorted = np.empty(profile.n, dtype=int)
    for lo, hi, fac in solution.blocks:
        choices_sorted[lo:hi] = fac
    choices = np.empty(profile.n, dtype=int)
    choices[order] = choices_sorted
    assignment = Assignment(tuple(int(c) for c in choices))
    if verify or __debug__:
        verdict = is_pne(profile, assignment, env)
        if not verdict:
            raise RuntimeError(
                f"internal error: solver output admits an improving deviation "
                f"{verdict.witness}")
    return assignment


@dataclass
class DpTable:
    """Reference memo table for the consecutive-block recursion.

    ``memo[(i, j, k)]`` is the cheapest potential over assignments of the
    first ``j`` sorted agents to facilities ``1..k`` in which agents ``i..j``
    (1-based, inclusive) share the rightmost block. ``math.inf`` marks
    infeasible index combinations: agents remaining with no facility allowed.
    ``choice`` holds ``("extend",)`` when agent ``i-1`` joins the block and
    ``("split", f)`` when the block is exactly ``[i..j]`` at facility ``f``.
    Entries are written once and never mutated.

    This path is quadratic per state and meant for small instances and
    cross-checking; :func:`compute_pne_dp` is the production solver.
    """

    memo: dict[tuple[int, int, int], float]
    choice: dict[tuple[int, int, int], tuple]
    n: int
    m: int
    _order: np.ndarray
    _blocks: tuple[tuple[int, int, int], ...]

    @property
    def min_potential(self) -> float:
        return self.memo[(self.n, self.n, self.m)]

    def assignment(self) -> Assignment:
        choices_sorted = np.empty(self.n, dtype=int)
        for lo, hi, fac in self._blocks:
            choices_sorted[lo:hi] = fac
        choices = np.empty(self.n, dtype=int)
        choices[self._order] = choices_sorted
        return Assignment(tuple(int(c) for c in choices))


def build_dp_table(instance: Instance) -> DpTable:
    """Evaluate the block recursion by memoized recursion (reference path).

    For ``1 <= i <= j`` and ``k >= 1`` the value is the cheaper of extending
    the rightmost block to agent ``i-1`` and closing it as ``[i..j]`` at some
    facility ``f <= k``, with the remaining agents ``1..i-1`` restricted to
    facilities ``1..f-1``. Extension is preferred on ties, then the smallest
    facility.
    """
    profile, env = instance.profile, instance.environment
    sorted_x, order = _sorted_view(profile)
    n, m = profile.n, env.m
    dist = distance_prefix(sorted_x, np.asarray(env.locations, dtype=float))
    harm = harmonic_numbers(n)
    b = env.building_costs

    def phi(i: int, j: int, fac: int) -> float:
        return b[fac - 1] * harm[j - i + 1] + (dist[fac - 1, j] - dist[fac - 1, i - 1])

    memo: dict[tuple[int, int, int], float] = {}
    choice: dict[tuple[int, int, int], tuple] = {}

    def minp(i: int, j: int, k: int) -> float:
        if j == 0:
            return 0.0
        if k == 0:
            return math.inf
        key = (i, j, k)
        if key in memo:
            return memo[key]
        best = math.inf
        picked: tuple = ("infeasible",)
        if i >= 2:
            best = minp(i - 1, j, k)
            picked = ("extend",)
        for fac in range(1, k + 1):
            value = minp(i - 1, i - 1, fac - 1) + phi(i, j, fac)
            if value < best:
                best, picked = value, ("split", fac)
        memo[key] = best
        choice[key] = picked
        return best

    minp(n, n, m)

    blocks: list[tuple[int, int, int]] = []
    i, j, k = n, n, m
    while j > 0:
        picked = choice[(i, j, k)]
        if picked[0] == "extend":
            i -= 1
        else:
            fac = picked[1]
            blocks.append((i - 1, j, fac))
            i = j = i - 1
            k = fac - 1
    blocks.reverse()
    return DpTable(memo=memo, choice=choice, n=n, m=m, _order=order,
                   _blocks=tuple(blocks))


def brute_force_min_potential(instance: Instance, *, limit: int = 10_000_000) -> float:
    """Minimum potential over all ``m**n`` assignments (guarded exhaustive scan)."""
    from .optimal import BruteForceLimitError  # local import: sibling module

    n, m = instance.n, instance.m
    total = m ** n
    if total > limit:
        raise BruteForceLimitError(
            f"{m}**{n} = {total} assignments exceed the search guard {limit}")
    x = np.asarray(instance.profile.positions, dtype=float)
    locs = np.asarray(instance.environment.locations, dtype=float)
    b = np.asarray(instance.environment.building_costs, dtype=float)
    harm = harmonic_numbers(n)
    divisors = (m ** np.arange(n - 1, -1, -1)).astype(np.int64)
    best = math.inf
    chunk = 1 << 16
    for lo in range(0, total, chunk):
        ids = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        digits = (ids[:, None] // divisors[None, :]) % m
        value = np.abs(x[None, :] - locs[digits]).sum(axis=1)
        for fac in range(m):
            counts = (digits == fac).sum(axis=1)
            value += b[fac] * harm[counts]
        best = min(best, float(value.min()))
    return best


@dataclass(frozen=True)
class CrossingWitness:
    """Agents (0-based) with ``x[left_agent] < x[right_agent]`` whose facilities
    are in the opposite location order."""

    left_agent: int
    right_agent: int


@dataclass(frozen=True)
class NoCrossVerdict:
    ok: bool
    witness: CrossingWitness | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_no_cross(profile: Profile, assignment: Assignment,
                   env: Environment) -> NoCrossVerdict:
    """Verify the no-cross property: strictly left agents never use a strictly
    righter facility location. Equal positions are unconstrained."""
    assignment.validate_for(profile, env)
    order = sorted(range(profile.n), key=lambda i: profile.positions[i])
    max_loc = -math.inf
    max_agent = -1
    idx = 0
    while idx < len(order):
        # Process one group of equal positions against the strictly-left max.
        group_end = idx
        pos = profile.positions[order[idx]]
        while group_end < len(order) and profile.positions[order[group_end]] == pos:
            group_end += 1
        for t in range(idx, group_end):
            agent = order[t]
            if env.locations[assignment.choices[agent] - 1] < max_loc:
                return NoCrossVerdict(False, CrossingWitness(max_agent, agent))
        for t in range(idx, group_end):
            agent = order[t]
            loc = env.locations[assignment.choices[agent] - 1]
            if loc > max_loc:
                max_loc, max_agent = loc, agent
        idx = group_end
    return NoCrossVerdict(True)


def consecutive_blocks_ok(profile: Profile, assignment: Assignment) -> bool:
    """True when every facility's users form one consecutive run after a
    stable sort of agents by position."""
    order = np.argsort(np.asarray(profile.positions), kind="stable")
    seq = [assignment.choices[i] for i in order]
    seen: set[int] = set()
    previous = None
    for fac in seq:
        if fac != previous:
            if fac in seen:
                return False
            seen.add(fac)
            previous = fac
    return True


@dataclass(frozen=True)
class HarmonicBoundReport:
    ratio: float
    bound: float
    holds: bool


def check_harmonic_bound(instance: Instance, pne: Assignment,
                         opt: Assignment) -> HarmonicBoundReport:
    """Compare the equilibrium's social cost against the harmonic-number bound
    H_n times the optimum (the logarithmic price-of-stability guarantee; H_n
    rather than ln n so the statement is meaningful at n = 1)."""
    profile, env = instance.profile, instance.environment
    sc_pne = social_cost(profile, pne, env).social_cost
    sc_opt = social_cost(profile, opt, env).social_cost
    ratio = sc_pne / sc_opt
    bound = float(harmonic_numbers(instance.n)[instance.n])
    return HarmonicBoundReport(ratio, bound, ratio <= bound + EPS_CMP)
