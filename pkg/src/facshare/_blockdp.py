"""Shared dynamic program over consecutive agent blocks.

Both the equilibrium solver and the optimal-assignment solver search the
family of assignments in which, after sorting agents by position, every used
facility serves one consecutive block and blocks take facilities in strictly
increasing index order (facilities themselves are location-sorted). Each
solver supplies a ``size_weight`` vector ``w`` that prices a block of ``s``
agents at facility ``f`` as::

    b_f * w[s] + sum of |x_a - loc_f| over the block

(harmonic prefix for the potential, all-ones for the social cost).

The table ``G[t, k]`` holds the cheapest partition of the first ``t`` sorted
agents using facilities ``1..k`` only. ``G[t, 0]`` is infeasible (+inf) for
``t >= 1``: agents cannot be left unassigned. The transposed candidate matrix
for the rightmost block is scanned with cumulative minima, which keeps the
whole solve at O(n*m) vectorized element operations per agent prefix,
O(n^2 * m) overall, after an O(n*m) distance-prefix precomputation.

Tie-breaking is deterministic: the rightmost block is extended as far left as
possible among cost minimizers, and the smallest facility index wins among
the remaining ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["distance_prefix", "PartitionSolution", "solve_block_partition"]


def distance_prefix(sorted_x: np.ndarray, locations: np.ndarray) -> np.ndarray:
    """``D[f, t] = sum_{a < t} |sorted_x[a] - locations[f]|`` for every facility."""
    d = np.abs(sorted_x[None, :] - locations[:, None])
    out = np.zeros((len(locations), len(sorted_x) + 1))
    np.cumsum(d, axis=1, out=out[:, 1:])
    return out


@dataclass(frozen=True)
class PartitionSolution:
    """Blocks are ``(start, stop, facility)``: 0-based half-open agent ranges in
    sorted order with 1-based, strictly increasing facility indices."""

    value: float
    blocks: tuple[tuple[int, int, int], ...]


def solve_block_partition(sorted_x: np.ndarray, locations: np.ndarray,
                          building_costs: np.ndarray,
                          size_weight: np.ndarray) -> PartitionSolution:
    n = len(sorted_x)
    m = len(locations)
    dist = distance_prefix(sorted_x, locations)
    weight = np.asarray(size_weight, dtype=float)

    table = np.full((n + 1, m + 1), math.inf)
    table[0, :] = 0.0

    def candidates(j: int, cap: int) -> np.ndarray:
        # cand[f-1, i-1]: close with block [i..j] at facility f, remainder
        # solved over facilities 1..f-1. Row/column minima realize the
        # recurrence's two branches.
        sizes = np.arange(j, 0, -1)
        phi = (building_costs[:cap, None] * weight[sizes][None, :]
               + (dist[:cap, j][:, None] - dist[:cap, :j]))
        return phi + table[:j, :cap].T

    for j in range(1, n + 1):
        cand = candidates(j, m)
        rowmin = cand.min(axis=1)
        np.minimum.accumulate(rowmin, out=rowmin)
        table[j, 1:] = rowmin

    value = float(table[n, m])

    blocks: list[tuple[int, int, int]] = []
    j, cap = n, m
    while j > 0:
        cand = candidates(j, cap)
        start = int(np.argmin(cand.min(axis=0)))      # smallest start: widest block
        fac = int(np.argmin(cand[:, start]))          # then smallest facility
        blocks.append((start, j, fac + 1))
        j, cap = start, fac
    blocks.reverse()
    return PartitionSolution(value, tuple(blocks))
