"""In-sample stability of scenario-based route choices.

A stability run builds 2m+1 scenario sets of sizes S-m..S+m, solves the
routing problem on each, and cross-evaluates every solution on every
set.  Three measures condense the cross matrix: the worst relative
spread of a solution's value across sets (rd, percent), the worst
per-solution variance (var), and the mean optimality gap of the
solutions against the full-panel optimum (ord_pct, percent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateObjective, InputError, InternalInvariantError, SizeOutOfRange
from .network import RoadNetwork
from .objectives import ObjectiveSpec, evaluate
from .scenarios import (
    CopulaScenarioGenerator,
    RandomSampler,
    ScenarioSet,
    full_set,
)
from .solver import SolveResult, hall_solve
from .speeds import SpeedPanel

METHODS = ("sg", "rs")


def derive_seed(master: int, *parts: int) -> int:
    """Deterministic child seed from a master seed and integer context."""
    if master < 0:
        raise InputError("seeds must be >= 0")
    ss = np.random.SeedSequence([int(master), *[int(p) for p in parts]])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class StabilityRun:
    """Everything one stability replication produced."""

    method: str
    base_size: int
    half_width: int
    sizes: tuple[int, ...]
    seed: int
    sets: tuple[ScenarioSet, ...]
    results: tuple[SolveResult, ...]
    cross: np.ndarray
    spec: ObjectiveSpec
    origin: int
    destination: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.cross, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "cross", arr)


def stability_from_sets(
    net: RoadNetwork,
    sets: list[ScenarioSet] | tuple[ScenarioSet, ...],
    spec: ObjectiveSpec,
    origin: int,
    destination: int,
    method: str = "custom",
    base_size: int | None = None,
    half_width: int | None = None,
    seed: int = 0,
    k_max: int = 10_000,
) -> StabilityRun:
    """Solve and cross-evaluate an explicit collection of scenario sets.

    This is the protocol core; ``run_stability`` feeds it generated
    sets, and tests feed it handcrafted ones (e.g. identical sets).
    """
    sets = tuple(sets)
    if not sets:
        raise InputError("need at least one scenario set")
    results = tuple(hall_solve(net, ss, spec, origin, destination, k_max=k_max) for ss in sets)
    n = len(sets)
    cross = np.empty((n, n))
    for i, res in enumerate(results):
        for j, ss in enumerate(sets):
            cross[i, j] = evaluate(net, res.path, ss, spec)
        if not math.isclose(cross[i, i], results[i].value, rel_tol=1e-12, abs_tol=1e-12):
            raise InternalInvariantError(
                f"cross matrix diagonal {cross[i, i]!r} disagrees with the "
                f"solver value {results[i].value!r}"
            )
    sizes = tuple(ss.n_scenarios for ss in sets)
    mid = len(sets) // 2
    return StabilityRun(
        method=method,
        base_size=base_size if base_size is not None else sizes[mid],
        half_width=half_width if half_width is not None else len(sets) // 2,
        sizes=sizes,
        seed=seed,
        sets=sets,
        results=results,
        cross=cross,
        spec=spec,
        origin=origin,
        destination=destination,
    )


def run_stability(
    net: RoadNetwork,
    panel: SpeedPanel,
    method: str,
    base_size: int,
    spec: ObjectiveSpec,
    origin: int,
    destination: int,
    half_width: int = 4,
    seed: int = 0,
    generator: CopulaScenarioGenerator | None = None,
    k_max: int = 10_000,
) -> StabilityRun:
    """One stability replication: sets of sizes S-m..S+m, solved and crossed.

    Per-size seeds derive from the master seed, so the same call is
    reproducible while different sizes stay independent.  A pre-fitted
    generator can be passed to amortize the fit across replications.
    """
    method = method.lower()
    if method not in METHODS:
        raise InputError(f"method must be one of {METHODS}, got {method!r}")
    if half_width < 0:
        raise InputError("half_width must be >= 0")
    lo, hi = base_size - half_width, base_size + half_width
    if lo < 1:
        raise SizeOutOfRange(f"smallest set size {lo} is below 1")
    if method == "rs" and hi > panel.n_days:
        raise SizeOutOfRange(
            f"largest set size {hi} exceeds the {panel.n_days} observed days"
        )
    sizes = range(lo, hi + 1)
    if method == "sg":
        gen = generator if generator is not None else CopulaScenarioGenerator().fit(panel)
        sets = [gen.sample(size, derive_seed(seed, 0, size)) for size in sizes]
    else:
        sampler = RandomSampler().fit(panel)
        sets = [sampler.sample(size, derive_seed(seed, 0, size)) for size in sizes]
    return stability_from_sets(
        net, sets, spec, origin, destination,
        method=method, base_size=base_size, half_width=half_width, seed=seed, k_max=k_max,
    )


def rd(run: StabilityRun) -> float:
    """Worst relative spread of one solution's value across sets, percent.

    Rows whose largest value is zero have no defined spread; they are
    skipped, and the measure is undefined only when every row is such.
    """
    hi = run.cross.max(axis=1)
    lo = run.cross.min(axis=1)
    valid = hi > 0
    if not valid.any():
        raise DegenerateObjective("every solution evaluates to zero on every set")
    return float(((hi[valid] - lo[valid]) / hi[valid]).max() * 100.0)


def rd_degenerate_rows(run: StabilityRun) -> int:
    """How many rows the rd measure had to skip."""
    return int((run.cross.max(axis=1) <= 0).sum())


def var(run: StabilityRun) -> float:
    """Worst per-solution population variance across sets."""
    return float(run.cross.var(axis=1).max())


def ord_pct(
    run: StabilityRun,
    net: RoadNetwork,
    panel: SpeedPanel,
    full_sset: ScenarioSet | None = None,
    full_result: SolveResult | None = None,
) -> float:
    """Mean optimality gap of the run's solutions on the full panel, percent.

    Non-negative whenever the full-set solve certified optimality.
    """
    if full_sset is None:
        full_sset = full_set(panel)
    if full_result is None:
        full_result = hall_solve(net, full_sset, run.spec, run.origin, run.destination)
    base = full_result.value
    if base <= 0:
        raise DegenerateObjective("full-set optimum is zero; gaps are undefined")
    gaps = [
        (evaluate(net, res.path, full_sset, run.spec) - base) / base
        for res in run.results
    ]
    return float(np.mean(gaps) * 100.0)


@dataclass(frozen=True)
class RsAggregate:
    """Min/mean/max of the stability measures over repeated rs runs."""

    runs: tuple[StabilityRun, ...]
    rd_values: tuple[float, ...]
    var_values: tuple[float, ...]

    @property
    def rd_min(self) -> float:
        return min(self.rd_values)

    @property
    def rd_mean(self) -> float:
        return sum(self.rd_values) / len(self.rd_values)

    @property
    def rd_max(self) -> float:
        return max(self.rd_values)

    @property
    def var_min(self) -> float:
        return min(self.var_values)

    @property
    def var_mean(self) -> float:
        return sum(self.var_values) / len(self.var_values)

    @property
    def var_max(self) -> float:
        return max(self.var_values)


def rs_repeated(
    net: RoadNetwork,
    panel: SpeedPanel,
    base_size: int,
    spec: ObjectiveSpec,
    origin: int,
    destination: int,
    half_width: int = 4,
    runs: int = 10,
    seed: int = 0,
    k_max: int = 10_000,
) -> RsAggregate:
    """Repeat the rs stability run and aggregate rd/var across repetitions."""
    if runs < 1:
        raise InputError("need at least one run")
    collected = []
    for idx in range(runs):
        collected.append(
            run_stability(
                net, panel, "rs", base_size, spec, origin, destination,
                half_width=half_width, seed=derive_seed(seed, 1, idx), k_max=k_max,
            )
        )
    return RsAggregate(
        runs=tuple(collected),
        rd_values=tuple(rd(r) for r in collected),
        var_values=tuple(var(r) for r in collected),
    )


@dataclass(frozen=True)
class RequiredScenariosResult:
    """Outcome of the smallest-stable-size search."""

    method: str
    goal_rd_pct: float
    s_required: int | None
    limit: int
    evaluated: tuple[tuple[int, float], ...]


def required_scenarios(
    net: RoadNetwork,
    panel: SpeedPanel,
    method: str,
    spec: ObjectiveSpec,
    origin: int,
    destination: int,
    goal_rd_pct: float,
    half_width: int = 4,
    runs: int = 10,
    seed: int = 0,
    grid: tuple[int, ...] | None = None,
    generator: CopulaScenarioGenerator | None = None,
    k_max: int = 10_000,
) -> RequiredScenariosResult:
    """Smallest grid size whose rd meets the goal (rs: mean over runs).

    The default grid starts at 10 and climbs in steps of 5 up to the
    largest size the panel supports with the given half width.
    """
    method = method.lower()
    if method not in METHODS:
        raise InputError(f"method must be one of {METHODS}, got {method!r}")
    limit = panel.n_days - half_width
    if grid is None:
        grid = tuple(range(10, limit + 1, 5))
    evaluated: list[tuple[int, float]] = []
    if method == "sg" and generator is None and grid:
        generator = CopulaScenarioGenerator().fit(panel)
    for size in grid:
        if method == "sg":
            run = run_stability(
                net, panel, "sg", size, spec, origin, destination,
                half_width=half_width, seed=derive_seed(seed, 2, size),
                generator=generator, k_max=k_max,
            )
            value = rd(run)
        else:
            agg = rs_repeated(
                net, panel, size, spec, origin, destination,
                half_width=half_width, runs=runs, seed=derive_seed(seed, 2, size),
                k_max=k_max,
            )
            value = agg.rd_mean
        evaluated.append((size, value))
        if value <= goal_rd_pct:
            return RequiredScenariosResult(
                method=method, goal_rd_pct=goal_rd_pct, s_required=size,
                limit=limit, evaluated=tuple(evaluated),
            )
    return RequiredScenariosResult(
        method=method, goal_rd_pct=goal_rd_pct, s_required=None,
        limit=limit, evaluated=tuple(evaluated),
    )
