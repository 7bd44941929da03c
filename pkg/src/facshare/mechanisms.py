"""Strategyproof assignment mechanisms and their audit harnesses.

For a two-facility environment the three thresholds L < M < R (offsets from
the left facility) carve the line into the regions that govern which
strategyproof and anonymous mechanisms exist. The five characterized
mechanism families for two agents, and the k-rank family for any number of
agents and facilities, are implemented as data (:class:`MechanismSpec`) plus
an applier, with every "either facility works here" clause resolved by an
explicit constructor choice so each spec is a function.

The audits are grid-based: real-line quantification is replaced by a finite
grid that always contains the case boundaries of the characterization (and
small offsets around them), which is where violations surface. Audits accept
either a :class:`MechanismSpec` or any callable mapping a ``(P, n)`` batch of
position profiles to a ``(P, n)`` batch of 1-based facility indices, so
deliberately broken mechanisms can be audited too.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .costs import EPS_CMP
from .model import Assignment, Environment, Instance, Profile, ValidationError
from .optimal import optimal_block_dp

__all__ = [
    "MechanismPreconditionError",
    "EnvParams",
    "env_params",
    "EnvironmentClass",
    "classify_environment",
    "MechanismSpec",
    "spec_from_dict",
    "validate_spec",
    "resolve_x_star",
    "apply_mechanism",
    "best_facility",
    "k_rank",
    "nearest_facility_mechanism",
    "default_audit_grid",
    "Counterexample",
    "AuditReport",
    "audit_strategyproof",
    "audit_anonymous",
    "audit_unanimous",
    "LemmaPropertyReport",
    "audit_lemma_properties",
    "ratio_lower_bound_terms",
    "ratio_lower_bound",
    "EmpiricalRatio",
    "empirical_ratio",
]

BatchMechanism = Callable[[np.ndarray], np.ndarray]
Mechanism = Union["MechanismSpec", BatchMechanism]


class MechanismPreconditionError(ValueError):
    """A mechanism spec does not match the environment (or profile size)."""


def _plain(row: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in row)


# ---------------------------------------------------------------------------
# Environmental parameters and classification


@dataclass(frozen=True)
class EnvParams:
    """Thresholds of a two-facility environment, as offsets from the left
    facility: L = D/2 + b2/4 - b1/2, M = D/2 + b2/4 - b1/4,
    R = D/2 + b2/2 - b1/4 where D is the facility distance. Always L < M < R."""

    L: float
    M: float
    R: float
    delta: float


def env_params(env: Environment) -> EnvParams:
    if env.m != 2:
        raise MechanismPreconditionError("environmental parameters require m = 2")
    b1, b2 = env.building_costs
    delta = env.delta
    return EnvParams(
        L=0.5 * delta + 0.25 * b2 - 0.5 * b1,
        M=0.5 * delta + 0.25 * b2 - 0.25 * b1,
        R=0.5 * delta + 0.5 * b2 - 0.25 * b1,
        delta=delta,
    )


@dataclass(frozen=True)
class EnvironmentClass:
    """Which algebraic conditions on (2*delta, b1 - b2) hold, and which
    mechanism families are constructible for the environment.

    ``conditions`` lists every satisfied row of the five-way case split (the
    equal-cost case satisfies two of the strict rows simultaneously, so this
    is deliberately not forced to be unique). ``admitted_types`` comes from
    the constructor preconditions: M = 0 admits type2, M = delta admits
    type3, 0 < M < delta admits type4 and type5; type1 always exists.
    ``boundary_gaps`` reports the distance of M to each equality boundary.
    """

    params: EnvParams
    conditions: tuple[str, ...]
    admitted_types: tuple[str, ...]
    boundary_gaps: dict[str, float]


def classify_environment(env: Environment, tol: float = EPS_CMP) -> EnvironmentClass:
    params = env_params(env)
    b1, b2 = env.building_costs
    two_delta = 2.0 * params.delta
    # The equality rows are the M = 0 and M = delta boundaries scaled by 4:
    # M = (2*delta - (b1 - b2)) / 4 and delta - M = (2*delta - (b2 - b1)) / 4.
    eq_low = abs(two_delta - (b1 - b2)) <= 4.0 * tol
    eq_high = abs(two_delta - (b2 - b1)) <= 4.0 * tol
    conditions = []
    if not eq_low and two_delta < b1 - b2:
        conditions.append("2delta<b1-b2")
    if eq_low:
        conditions.append("2delta=b1-b2")
    if (not eq_low and not eq_high
            and b1 - b2 < two_delta and b2 - b1 < two_delta):
        conditions.append("b1-b2<2delta<b2-b1")
    if eq_high:
        conditions.append("2delta=b2-b1")
    if not eq_high and two_delta > b2 - b1:
        conditions.append("2delta>b2-b1")

    admitted = ["type1"]
    if abs(params.M) <= tol:
        admitted.append("type2")
    if abs(params.M - params.delta) <= tol:
        admitted.append("type3")
    if tol < params.M < params.delta - tol:
        admitted.extend(["type4", "type5"])
    return EnvironmentClass(
        params=params,
        conditions=tuple(conditions),
        admitted_types=tuple(admitted),
        boundary_gaps={"M=0": abs(params.M), "M=delta": abs(params.M - params.delta)},
    )


# ---------------------------------------------------------------------------
# Mechanism specs

_KINDS = ("type1", "type2", "type3", "type4", "type5", "krank")

DiagChoice = Union[int, Callable[[float], int]]


@dataclass(frozen=True)
class MechanismSpec:
    """A fully resolved mechanism.

    kind "type1": constant, all agents to ``target``.
    kind "type2" (needs M = 0): all agents to ``diag_choice`` of the smallest
        report when it is <= left facility, to facility 2 otherwise.
    kind "type3" (needs M = delta): all agents to facility 1 while the
        smallest report is < right facility, to ``diag_choice`` of it after.
    kind "type4" / "type5" (need 0 < M < delta): threshold mechanisms on the
        smallest / largest report against M + left facility, with
        ``boundary_choice`` deciding the exact-threshold case.
    kind "krank": all agents to the cheapest all-together facility of the
        k-th smallest report.

    ``diag_choice`` may be a constant facility or a per-position callable;
    the strategyproofness audit is the arbiter of which callables are sound.
    """

    kind: str
    target: int | None = None
    diag_choice: DiagChoice | None = None
    boundary_choice: int | None = None
    k: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown mechanism kind {self.kind!r}")
        if self.kind == "type1":
            if self.target not in (1, 2):
                raise ValidationError("type1 requires target in {1, 2}")
        elif self.kind in ("type2", "type3"):
            ok = self.diag_choice in (1, 2) or callable(self.diag_choice)
            if not ok:
                raise ValidationError(
                    f"{self.kind} requires diag_choice in {{1, 2}} or a callable")
        elif self.kind in ("type4", "type5"):
            if self.boundary_choice not in (1, 2):
                raise ValidationError(
                    f"{self.kind} requires boundary_choice in {{1, 2}}")
        else:
            if self.k is None or self.k < 1:
                raise ValidationError("krank requires k >= 1")


def spec_from_dict(doc: dict) -> MechanismSpec:
    """Build a spec from the file representation
    ``{"kind": ..., "params": {...}}`` (diag_choice given as "fac1"/"fac2")."""
    if not isinstance(doc, dict) or not isinstance(doc.get("kind"), str):
        raise ValidationError("mechanism document must be an object with a 'kind'")
    kind = doc["kind"]
    params = doc.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ValidationError("'params' must be an object")
    diag = params.get("diag_choice")
    if isinstance(diag, str):
        if diag not in ("fac1", "fac2"):
            raise ValidationError("diag_choice must be 'fac1' or 'fac2'")
        diag = 1 if diag == "fac1" else 2
    return MechanismSpec(
        kind=kind,
        target=params.get("target"),
        diag_choice=diag,
        boundary_choice=params.get("boundary_choice"),
        k=params.get("k"),
    )


def validate_spec(spec: MechanismSpec, env: Environment, n: int | None = None,
                  tol: float = EPS_CMP) -> None:
    """Check the environment precondition of a spec (and the profile size when
    ``n`` is given); raises :class:`MechanismPreconditionError` naming the
    violated condition."""
    if spec.kind == "type1":
        if spec.target > env.m:
            raise MechanismPreconditionError(
                f"type1 target {spec.target} exceeds m={env.m}")
        if n is not None and n != 2:
            raise MechanismPreconditionError("type1 is defined for n = 2")
        return
    if spec.kind == "krank":
        if n is not None and not 1 <= spec.k <= n:
            raise MechanismPreconditionError(
                f"krank requires 1 <= k <= n (k={spec.k}, n={n})")
        return
    if env.m != 2:
        raise MechanismPreconditionError(f"{spec.kind} requires m = 2")
    if n is not None and n != 2:
        raise MechanismPreconditionError(f"{spec.kind} is defined for n = 2")
    params = env_params(env)
    if spec.kind == "type2" and abs(params.M) > tol:
        raise MechanismPreconditionError(
            f"type2 requires M = 0, got M = {params.M}")
    if spec.kind == "type3" and abs(params.M - params.delta) > tol:
        raise MechanismPreconditionError(
            f"type3 requires M = delta, got M = {params.M}, delta = {params.delta}")
    if spec.kind in ("type4", "type5") and not tol < params.M < params.delta - tol:
        raise MechanismPreconditionError(
            f"{spec.kind} requires 0 < M < delta, got M = {params.M}, "
            f"delta = {params.delta}")


def _diag_values(choice: DiagChoice, xs: np.ndarray) -> np.ndarray:
    if callable(choice):
        return np.array([int(choice(float(v))) for v in xs], dtype=int)
    return np.full(len(xs), int(choice), dtype=int)


def _batch_apply(spec: MechanismSpec, env: Environment,
                 profiles: np.ndarray) -> np.ndarray:
    """Apply a spec to a (P, n) batch of profiles; returns (P, n) facilities.

    Every characterized family assigns all agents to one facility, so the
    common facility is computed per row and broadcast.
    """
    profiles = np.asarray(profiles, dtype=float)
    p, n = profiles.shape
    if spec.kind == "type1":
        fac = np.full(p, spec.target, dtype=int)
    elif spec.kind == "krank":
        theta = np.partition(profiles, spec.k - 1, axis=1)[:, spec.k - 1]
        fac = _best_facility_vec(theta, env, n)
    else:
        l1, l2 = env.locations
        if spec.kind == "type2":
            # diagonal choices are only defined left of the left facility
            mn = profiles.min(axis=1)
            fac = np.full(p, 2, dtype=int)
            onto_diag = mn <= l1
            fac[onto_diag] = _diag_values(spec.diag_choice, mn[onto_diag])
        elif spec.kind == "type3":
            mn = profiles.min(axis=1)
            fac = np.ones(p, dtype=int)
            onto_diag = ~(mn < l2)
            fac[onto_diag] = _diag_values(spec.diag_choice, mn[onto_diag])
        else:
            pivot = profiles.min(axis=1) if spec.kind == "type4" else profiles.max(axis=1)
            threshold = l1 + env_params(env).M
            fac = np.where(pivot < threshold, 1,
                           np.where(pivot > threshold, 2, spec.boundary_choice))
    return np.broadcast_to(fac[:, None], (p, n)).copy()


def apply_mechanism(spec: MechanismSpec, profile: Profile,
                    env: Environment) -> Assignment:
    """Run one mechanism on one profile.

    The profile is sorted internally (the characterized clauses assume
    ordered reports); since every family gives all agents the same facility,
    mapping back to the caller's agent order is trivial.
    """
    validate_spec(spec, env, n=profile.n)
    row = _batch_apply(spec, env, np.array([profile.positions]))[0]
    return Assignment(tuple(int(f) for f in row))


def resolve_x_star(spec: MechanismSpec, env: Environment) -> float:
    """Supremum of the diagonal's facility-1 region: the largest common report
    for which the mechanism still answers "both to facility 1".

    Resolved analytically for constant choices (the implemented functions are
    known in closed form); per-position diagonal callables are bracketed by
    bisection under the assumption that their facility-1 region is a left
    ray, which strategyproofness forces for the families where the diagonal
    matters.
    """
    validate_spec(spec, env)
    if spec.kind == "type1":
        return math.inf if spec.target == 1 else -math.inf
    if spec.kind in ("type4", "type5"):
        return env.locations[0] + env_params(env).M
    anchor = env.locations[0] if spec.kind == "type2" else env.locations[1]
    choice = spec.diag_choice
    if not callable(choice):
        if spec.kind == "type2":
            return anchor if choice == 1 else -math.inf
        return math.inf if choice == 1 else anchor

    span = max(1.0, abs(env.locations[1] - env.locations[0]),
               abs(anchor)) * 4.0
    if spec.kind == "type2":
        lo, hi = anchor - span, anchor
        if int(choice(hi)) == 1:
            return hi
        if int(choice(lo)) == 2:
            return -math.inf
    else:
        lo, hi = anchor, anchor + span
        if int(choice(hi)) == 1:
            return math.inf
        if int(choice(lo)) == 2:
            return lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if int(choice(mid)) == 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Best single facility and the k-rank family


def _best_facility_vec(xs: np.ndarray, env: Environment, n: int) -> np.ndarray:
    locs = np.asarray(env.locations, dtype=float)
    b = np.asarray(env.building_costs, dtype=float)
    cost = np.abs(xs[:, None] - locs[None, :]) + b[None, :] / n
    return cost.argmin(axis=1) + 1


def best_facility(x: float, env: Environment, n: int) -> int:
    """Facility minimizing ``|x - loc| + cost/n``: the favorite all-to-one
    outcome of a position when the cost is split n ways. Ties break to the
    smaller index (a fixed arbitrary rule)."""
    if n < 1:
        raise ValidationError("n must be ≥ 1")
    return int(_best_facility_vec(np.array([float(x)]), env, n)[0])


def k_rank(profile: Profile, env: Environment, k: int) -> Assignment:
    """Assign every agent to the best facility of the k-th smallest position."""
    if not 1 <= k <= profile.n:
        raise ValidationError(f"k out of range: need 1 <= k <= {profile.n}, got {k}")
    theta = sorted(profile.positions)[k - 1]
    fac = best_facility(theta, env, profile.n)
    return Assignment((fac,) * profile.n)


def nearest_facility_mechanism(env: Environment) -> BatchMechanism:
    """Each agent to her nearest facility, ignoring cost shares.

    The natural greedy rule; not strategyproof in general. Used as a negative
    control in the audit suite.
    """
    locs = np.asarray(env.locations, dtype=float)

    def assign(profiles: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(profiles, dtype=float)[..., None]
                      - locs).argmin(axis=-1) + 1

    return assign


# ---------------------------------------------------------------------------
# Audit harness


def default_audit_grid(env: Environment, *, offset: float = 1e-3,
                       extra: int = 0) -> tuple[float, ...]:
    """Positions covering every case boundary of the characterization.

    Anchors: facility locations, the L/M/R thresholds shifted to the left
    facility (two-facility environments), midpoints of consecutive anchors,
    and flanking points outside the span. Each anchor also contributes
    +/- ``offset`` neighbors. ``extra`` appends that many uniform points
    across the padded span.
    """
    anchors = set(env.locations)
    if env.m == 2:
        params = env_params(env)
        l1 = env.locations[0]
        anchors |= {l1 + params.L, l1 + params.M, l1 + params.R}
    base = sorted(anchors)
    mids = [0.5 * (a + b) for a, b in zip(base, base[1:]) if a != b]
    span = base[-1] - base[0]
    pad = max(1.0, 0.25 * span)
    points = set(base) | set(mids) | {base[0] - pad, base[-1] + pad}
    grid = {p + d for p in points for d in (-offset, 0.0, offset)}
    if extra > 0:
        grid |= set(np.linspace(base[0] - pad, base[-1] + pad, extra).tolist())
    return tuple(sorted(grid))


def _profiles_from_grid(grid: Sequence[float], n: int, max_profiles: int,
                        seed: int) -> np.ndarray:
    """All grid^n profiles when that fits under ``max_profiles``, otherwise a
    seeded uniform sample of ``max_profiles`` profiles from the grid."""
    g = len(grid)
    if g == 0:
        raise ValidationError("audit grid must be nonempty")
    arr = np.asarray(grid, dtype=float)
    if g ** n <= max_profiles:
        combos = np.array(list(itertools.product(range(g), repeat=n)), dtype=int)
        return arr[combos]
    rng = np.random.default_rng(seed)
    return arr[rng.integers(0, g, size=(max_profiles, n))]


def _as_batch_mechanism(mechanism: Mechanism, env: Environment,
                        n: int) -> BatchMechanism:
    if isinstance(mechanism, MechanismSpec):
        validate_spec(mechanism, env, n=n)
        return lambda profiles: _batch_apply(mechanism, env, profiles)
    if callable(mechanism):
        return mechanism
    raise ValidationError("mechanism must be a MechanismSpec or a batch callable")


def _row_costs(true_positions: np.ndarray, assigned: np.ndarray,
               env: Environment) -> np.ndarray:
    """Cost of each agent given true positions (P, n) and an assignment batch
    (P, n): distance plus an equal share of the assigned facility's cost."""
    locs = np.asarray(env.locations, dtype=float)
    b = np.asarray(env.building_costs, dtype=float)
    idx = assigned - 1
    counts = np.zeros((assigned.shape[0], env.m), dtype=int)
    for fac in range(env.m):
        counts[:, fac] = (idx == fac).sum(axis=1)
    rows = np.arange(assigned.shape[0])[:, None]
    share = b[idx] / counts[rows, idx]
    return np.abs(true_positions - locs[idx]) + share


@dataclass(frozen=True)
class Counterexample:
    """One audit violation. ``deviation`` is the misreported position for
    strategyproofness, the permutation for anonymity, and the expected
    facility for unanimity; cost fields are filled where they apply."""

    profile: tuple[float, ...]
    agent: int | None
    deviation: object
    cost_before: float | None = None
    cost_after: float | None = None


@dataclass(frozen=True)
class AuditReport:
    property: str
    passed: bool
    counterexamples: tuple[Counterexample, ...]
    checked: int

    def __bool__(self) -> bool:
        return self.passed


def _finish(prop: str, bad: list[Counterexample], checked: int) -> AuditReport:
    bad.sort(key=lambda c: (c.profile, -1 if c.agent is None else c.agent,
                            repr(c.deviation)))
    return AuditReport(prop, not bad, tuple(bad), checked)


def audit_strategyproof(mechanism: Mechanism, env: Environment,
                        grid: Sequence[float] | None = None,
                        misreports: Sequence[float] | None = None, *,
                        n: int = 2, max_profiles: int = 2048, seed: int = 0,
                        tol: float = EPS_CMP) -> AuditReport:
    """Search for a profitable misreport.

    Every (profile, agent, misreport) triple over the grid is checked: the
    agent's true cost under the truthful outcome must not exceed her true
    cost under the outcome of the altered report by more than ``tol``.
    """
    if grid is None:
        grid = default_audit_grid(env)
    if misreports is None:
        misreports = grid
    apply_batch = _as_batch_mechanism(mechanism, env, n)
    profiles = _profiles_from_grid(grid, n, max_profiles, seed)
    truthful = apply_batch(profiles)
    base_cost = _row_costs(profiles, truthful, env)
    locs = np.asarray(env.locations, dtype=float)
    b = np.asarray(env.building_costs, dtype=float)

    bad: list[Counterexample] = []
    checked = 0
    for i in range(n):
        for report in misreports:
            mod = profiles.copy()
            mod[:, i] = report
            outcome = apply_batch(mod)
            idx = outcome - 1
            counts_i = np.zeros(len(profiles), dtype=int)
            for fac in range(env.m):
                counts_i += np.where(idx[:, i] == fac, (idx == fac).sum(axis=1), 0)
            lied_cost = (np.abs(profiles[:, i] - locs[idx[:, i]])
                         + b[idx[:, i]] / counts_i)
            checked += len(profiles)
            mask = base_cost[:, i] - lied_cost > tol
            for r in np.nonzero(mask)[0]:
                bad.append(Counterexample(
                    profile=_plain(profiles[r]), agent=i, deviation=float(report),
                    cost_before=float(base_cost[r, i]),
                    cost_after=float(lied_cost[r])))
    return _finish("strategyproof", bad, checked)


def audit_anonymous(mechanism: Mechanism, env: Environment,
                    grid: Sequence[float] | None = None, *,
                    n: int = 2, max_profiles: int = 2048,
                    max_permutations: int = 100, seed: int = 0) -> AuditReport:
    """Check that the position-to-facility outcome is permutation invariant.

    Outcomes are compared as multisets of (position, facility) pairs, so
    co-located agents may trade facility labels freely. All n! permutations
    are tried for n <= 5, a seeded sample of ``max_permutations`` otherwise.
    """
    if grid is None:
        grid = default_audit_grid(env)
    apply_batch = _as_batch_mechanism(mechanism, env, n)
    profiles = _profiles_from_grid(grid, n, max_profiles, seed)
    base = apply_batch(profiles)
    base_key = np.sort(profiles + 1j * base, axis=1)

    if n <= 5:
        perms = [p for p in itertools.permutations(range(n))
                 if p != tuple(range(n))]
    else:
        rng = np.random.default_rng(seed)
        perms = [tuple(rng.permutation(n)) for _ in range(max_permutations)]

    bad: list[Counterexample] = []
    checked = 0
    for perm in perms:
        permuted = profiles[:, perm]
        out = apply_batch(permuted)
        key = np.sort(permuted + 1j * out, axis=1)
        checked += len(profiles)
        mismatch = np.any(key != base_key, axis=1)
        for r in np.nonzero(mismatch)[0]:
            bad.append(Counterexample(profile=_plain(profiles[r]), agent=None,
                                      deviation=perm))
    return _finish("anonymous", bad, checked)


def audit_unanimous(mechanism: Mechanism, env: Environment,
                    grid: Sequence[float] | None = None, *,
                    n: int = 2, max_profiles: int = 2048, seed: int = 0,
                    tol: float = EPS_CMP) -> AuditReport:
    """On profiles where every agent strictly prefers the same all-to-one
    facility, the mechanism must output it.

    Only strict unanimity is enforced: at an exact cost tie both facilities
    are best for the tied agent, so either outcome is consistent with
    unanimity and the profile is skipped.
    """
    if grid is None:
        grid = default_audit_grid(env)
    apply_batch = _as_batch_mechanism(mechanism, env, n)
    profiles = _profiles_from_grid(grid, n, max_profiles, seed)
    locs = np.asarray(env.locations, dtype=float)
    b = np.asarray(env.building_costs, dtype=float)
    cost = np.abs(profiles[:, :, None] - locs) + b / n  # (P, n, m)
    favorite = cost.argmin(axis=2)
    if env.m >= 2:
        ordered = np.sort(cost, axis=2)
        strict = ordered[:, :, 1] - ordered[:, :, 0] > tol
    else:
        strict = np.ones(profiles.shape[:2], dtype=bool)
    unanimous = strict.all(axis=1) & (favorite == favorite[:, :1]).all(axis=1)

    outcome = apply_batch(profiles)
    expected = favorite[:, 0] + 1
    violated = unanimous & np.any(outcome != expected[:, None], axis=1)
    bad = [Counterexample(profile=_plain(profiles[r]), agent=None,
                          deviation=int(expected[r]))
           for r in np.nonzero(violated)[0]]
    return _finish("unanimous", bad, int(unanimous.sum()))


@dataclass(frozen=True)
class LemmaPropertyReport:
    """Structural consequences of strategyproofness plus anonymity, checked
    empirically on the grid. P1-P3 range over single-coordinate report
    changes for any n; P4-P5 are two-agent profile properties."""

    p1: AuditReport
    p2: AuditReport
    p3: AuditReport
    p4: AuditReport | None
    p5: AuditReport | None

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in (self.p1, self.p2, self.p3)
                   ) and all(r is None or r.passed for r in (self.p4, self.p5))


def audit_lemma_properties(mechanism: Mechanism, env: Environment,
                           grid: Sequence[float] | None = None, *,
                           n: int = 2, max_profiles: int = 512, seed: int = 0,
                           tol: float = EPS_CMP) -> LemmaPropertyReport:
    """Check P1 (no jumping over the move interval), P2 (the share-difference
    sandwich), P3 (same facility implies same load) over report changes, and
    for n = 2 also P4 (agents on one side pool) and P5 (never cross-assign
    when the agent gap meets the facility gap)."""
    if grid is None:
        grid = default_audit_grid(env)
    apply_batch = _as_batch_mechanism(mechanism, env, n)
    profiles = _profiles_from_grid(grid, n, max_profiles, seed)
    truthful = apply_batch(profiles)
    locs = np.asarray(env.locations, dtype=float)
    b = np.asarray(env.building_costs, dtype=float)

    def loads(assigned: np.ndarray, col: int) -> np.ndarray:
        idx = assigned - 1
        out = np.zeros(len(assigned), dtype=int)
        for fac in range(env.m):
            out += np.where(idx[:, col] == fac, (idx == fac).sum(axis=1), 0)
        return out

    bad1: list[Counterexample] = []
    bad2: list[Counterexample] = []
    bad3: list[Counterexample] = []
    checked = 0
    for i in range(n):
        base_fac = truthful[:, i]
        base_load = loads(truthful, i)
        for report in grid:
            mod = profiles.copy()
            mod[:, i] = report
            outcome = apply_batch(mod)
            alt_fac = outcome[:, i]
            alt_load = loads(outcome, i)
            xi = profiles[:, i]
            checked += len(profiles)

            # P1, oriented so the report increases.
            low = np.where(xi < report, xi, np.full_like(xi, report))
            high = np.where(xi < report, np.full_like(xi, report), xi)
            first = np.where(xi < report, base_fac, alt_fac)
            second = np.where(xi < report, alt_fac, base_fac)
            moved_left = locs[second - 1] < locs[first - 1]
            ok = ((high <= locs[second - 1] + tol)
                  | (locs[first - 1] <= low + tol))
            for r in np.nonzero(moved_left & ~ok & (xi != report))[0]:
                bad1.append(Counterexample(_plain(profiles[r]), i, float(report)))

            # P2 sandwich on the share difference.
            mid = b[base_fac - 1] / base_load - b[alt_fac - 1] / alt_load
            lhs = (np.abs(report - locs[alt_fac - 1])
                   - np.abs(report - locs[base_fac - 1]))
            rhs = (np.abs(xi - locs[alt_fac - 1])
                   - np.abs(xi - locs[base_fac - 1]))
            for r in np.nonzero((lhs > mid + tol) | (mid > rhs + tol))[0]:
                bad2.append(Counterexample(_plain(profiles[r]), i, float(report),
                                           cost_before=float(lhs[r]),
                                           cost_after=float(rhs[r])))

            # P3: unchanged facility implies unchanged load.
            for r in np.nonzero((base_fac == alt_fac) & (base_load != alt_load))[0]:
                bad3.append(Counterexample(_plain(profiles[r]), i, float(report)))

    p4 = p5 = None
    if n == 2 and env.m == 2:
        l1, l2 = env.locations
        x_lo = profiles.min(axis=1)
        x_hi = profiles.max(axis=1)
        distinct = profiles[:, 0] != profiles[:, 1]
        lo_col = (profiles[:, 0] > profiles[:, 1]).astype(int)
        rows = np.arange(len(profiles))
        f_lo = truthful[rows, lo_col]
        f_hi = truthful[rows, 1 - lo_col]
        overlap = np.maximum(x_lo, l1) < np.minimum(x_hi, l2)
        bad4 = [Counterexample(_plain(profiles[r]), None, "pooling")
                for r in np.nonzero(distinct & ~overlap & (f_lo != f_hi))[0]]
        bad5 = [Counterexample(_plain(profiles[r]), None, "cross")
                for r in np.nonzero(distinct & overlap
                                    & (f_lo == 2) & (f_hi == 1))[0]]
        p4 = _finish("P4", bad4, int((distinct & ~overlap).sum()))
        p5 = _finish("P5", bad5, int((distinct & overlap).sum()))

    return LemmaPropertyReport(
        p1=_finish("P1", bad1, checked),
        p2=_finish("P2", bad2, checked),
        p3=_finish("P3", bad3, checked),
        p4=p4,
        p5=p5,
    )


# ---------------------------------------------------------------------------
# Approximation ratio


def ratio_lower_bound_terms(env: Environment) -> tuple[float, float]:
    """The two terms whose maximum bounds every strategyproof and anonymous
    two-agent mechanism away from the optimum when 0 < M < delta.

    The first term charges pooling both agents onto one facility when
    splitting them is optimal; the second charges the wrong side of the
    threshold at M. In the unbounded-ratio environment family
    ``((e, e), (0, 1/e - e))`` the first term equals ``1 / (2 e^2)``.
    """
    params = env_params(env)
    if not EPS_CMP < params.M < params.delta - EPS_CMP:
        raise MechanismPreconditionError(
            f"ratio lower bound requires 0 < M < delta, got M = {params.M}, "
            f"delta = {params.delta}")
    b1, b2 = env.building_costs
    small, big = min(b1, b2), max(b1, b2)
    return ((small + params.delta) / (b1 + b2),
            (small + params.delta + params.M) / (big + params.M))


def ratio_lower_bound(env: Environment) -> float:
    """Maximum of :func:`ratio_lower_bound_terms`: no strategyproof and
    anonymous two-agent mechanism approximates the social cost better."""
    return max(ratio_lower_bound_terms(env))


@dataclass(frozen=True)
class EmpiricalRatio:
    worst_ratio: float
    witness_profile: tuple[float, ...]


def empirical_ratio(mechanism: Mechanism, env: Environment,
                    grid: Sequence[float] | None = None, *,
                    n: int = 2, max_profiles: int = 4096,
                    seed: int = 0) -> EmpiricalRatio:
    """Worst social-cost ratio of the mechanism against the optimum over grid
    profiles; returns the maximizing profile."""
    if grid is None:
        grid = default_audit_grid(env)
    apply_batch = _as_batch_mechanism(mechanism, env, n)
    profiles = _profiles_from_grid(grid, n, max_profiles, seed)
    outcome = apply_batch(profiles)
    mech_cost = _row_costs(profiles, outcome, env).sum(axis=1)

    m = env.m
    if m ** n <= 4096:
        locs = np.asarray(env.locations, dtype=float)
        b = np.asarray(env.building_costs, dtype=float)
        opt = np.full(len(profiles), math.inf)
        for combo in itertools.product(range(m), repeat=n):
            digits = np.array(combo)
            value = np.abs(profiles - locs[digits]).sum(axis=1)
            value += b[np.unique(digits)].sum()
            np.minimum(opt, value, out=opt)
    else:
        opt = np.array([
            optimal_block_dp(Instance(env, Profile(tuple(row)))).social_cost
            for row in profiles])
    ratios = mech_cost / opt
    at = int(np.argmax(ratios))
    return EmpiricalRatio(float(ratios[at]), _plain(profiles[at]))
