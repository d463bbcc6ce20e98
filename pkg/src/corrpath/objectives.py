"""Path objectives over scenario sets.

A path is traversed against piecewise-constant period speeds; the six
objective kinds aggregate the per-scenario traversal times (or emission
loads) into a single figure:

  f1  mean travel time plus a weighted population std (seconds)
  f2  mean travel time (seconds)
  f3  expected carbon emission of the traversal (kilograms)
  f4  expected tardiness against a due time (seconds)
  f5  expected tardiness plus earliness against a window (seconds)
  f6  smallest travel time reachable with the requested probability (seconds)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, InvalidSpec
from .network import RoadNetwork
from .scenarios import ScenarioSet

OBJECTIVE_KINDS = ("f1", "f2", "f3", "f4", "f5", "f6")


@dataclass(frozen=True)
class MeetParams:
    """Speed-to-emission polynomial, grams per km at speed v km/h:

    rate(v) = constant + linear*v + quadratic*v^2 + cubic*v^3
              + inverse/v + inverse_sq/v^2 + inverse_cu/v^3

    Defaults are the published coefficients for a 3.5-7.5 t rigid
    diesel truck.
    """

    constant: float = 110.0
    linear: float = 0.0
    quadratic: float = 0.0
    cubic: float = 0.000375
    inverse: float = 8702.0
    inverse_sq: float = 0.0
    inverse_cu: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return (self.constant, self.linear, self.quadratic, self.cubic,
                self.inverse, self.inverse_sq, self.inverse_cu)


DEFAULT_MEET = MeetParams()


def meet_rate(speed_kmh, params: MeetParams = DEFAULT_MEET):
    """Emission rate in grams per km; accepts scalars or arrays."""
    v = np.asarray(speed_kmh, dtype=np.float64)
    if np.any(v <= 0):
        raise InputError("emission rate needs speed > 0 km/h")
    rate = (
        params.constant
        + params.linear * v
        + params.quadratic * v * v
        + params.cubic * v * v * v
        + params.inverse / v
        + params.inverse_sq / (v * v)
        + params.inverse_cu / (v * v * v)
    )
    return float(rate) if np.isscalar(speed_kmh) else rate


@dataclass(frozen=True)
class ObjectiveSpec:
    """What to optimize and the clock parameters it needs.

    All times are seconds from midnight.  ``depart_s`` anchors every
    traversal; ``due_s``/``earliest_s`` define the delivery window for
    f4/f5; ``reliability`` is the f6 probability level; ``std_weight``
    scales the f1 std term.
    """

    kind: str
    depart_s: float = 0.0
    std_weight: float = 1.27
    due_s: float | None = None
    earliest_s: float | None = None
    reliability: float = 0.9
    meet: MeetParams = field(default_factory=MeetParams)

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise InvalidSpec(f"objective kind must be one of {OBJECTIVE_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.depart_s) or self.depart_s < 0:
            raise InvalidSpec(f"depart_s must be a finite time >= 0, got {self.depart_s}")
        if self.std_weight < 0 or not math.isfinite(self.std_weight):
            raise InvalidSpec(f"std_weight must be >= 0, got {self.std_weight}")
        if not 0 < self.reliability <= 1:
            raise InvalidSpec(f"reliability must be in (0, 1], got {self.reliability}")
        if self.kind in ("f4", "f5") and self.due_s is None:
            raise InvalidSpec(f"{self.kind} needs due_s")
        if self.kind == "f5":
            if self.earliest_s is None:
                raise InvalidSpec("f5 needs earliest_s")
            if self.earliest_s > self.due_s:
                raise InvalidSpec(
                    f"window start {self.earliest_s} is after its end {self.due_s}"
                )
        for name in ("due_s", "earliest_s"):
            val = getattr(self, name)
            if val is not None and (not math.isfinite(val) or val < 0):
                raise InvalidSpec(f"{name} must be a finite time >= 0, got {val}")


@dataclass(frozen=True)
class Path:
    """A loopless walk stored as node ids plus link rows into the network."""

    nodes: tuple[int, ...]
    links: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.links)


def make_path(net: RoadNetwork, link_rows) -> Path:
    """Build and validate a Path from an ordered sequence of link rows."""
    rows = tuple(int(r) for r in link_rows)
    if not rows:
        raise InputError("a path needs at least one link; use Path((node,), ()) for staying put")
    for r in rows:
        if not 0 <= r < net.n_links:
            raise InputError(f"link row {r} outside the network")
    nodes = [net.links[rows[0]].from_node]
    for r in rows:
        ln = net.links[r]
        if ln.from_node != nodes[-1]:
            raise InputError(
                f"link {ln.link_id} starts at node {ln.from_node}, expected {nodes[-1]}"
            )
        nodes.append(ln.to_node)
    if len(set(nodes)) != len(nodes):
        raise InputError("path revisits a node")
    return Path(nodes=tuple(nodes), links=rows)


def path_from_nodes(net: RoadNetwork, nodes) -> Path:
    """Resolve a node sequence to a Path; hops must be unique links."""
    seq = [int(n) for n in nodes]
    if len(seq) < 2:
        return Path(nodes=tuple(seq), links=())
    rows: list[int] = []
    for a, b in zip(seq, seq[1:]):
        hits = [r for r in net.adjacency.get(a, ()) if net.links[r].to_node == b]
        if not hits:
            raise InputError(f"no link from node {a} to node {b}")
        if len(hits) > 1:
            raise InputError(f"parallel links from node {a} to node {b}; pass link rows instead")
        rows.append(hits[0])
    return make_path(net, rows)


@dataclass(frozen=True)
class TraceSegment:
    """Distance covered on one link within one speed period."""

    link: int
    period: int
    km: float
    speed_kmh: float


@dataclass(frozen=True)
class TraversalTrace:
    total_s: float
    segments: tuple[TraceSegment, ...]


def traverse(
    net: RoadNetwork,
    path: Path,
    speeds_lm: np.ndarray,
    depart_s: float,
    period_offset: int = 0,
    period_seconds: float = 300.0,
) -> TraversalTrace:
    """Drive the path against one scenario's (links, periods) speed matrix.

    Within a period the vehicle holds that link's period speed; the first
    period's speed extends before the window and the last period's speed
    extends beyond it.
    """
    if depart_s < 0 or not math.isfinite(depart_s):
        raise InputError(f"depart_s must be a finite time >= 0, got {depart_s}")
    n_periods = speeds_lm.shape[1]
    last = n_periods - 1
    t = float(depart_s)
    segments: list[TraceSegment] = []
    for row in path.links:
        remaining = net.links[row].length_km
        while remaining > 1e-15:
            k = int(t // period_seconds) - period_offset
            if k < 0:
                k = 0
            elif k > last:
                k = last
            v = speeds_lm[row, k]
            if k == last:
                segments.append(TraceSegment(row, k, remaining, float(v)))
                t += remaining * 3600.0 / v
                break
            boundary = (period_offset + k + 1) * period_seconds
            reach = v * (boundary - t) / 3600.0
            if reach >= remaining:
                segments.append(TraceSegment(row, k, remaining, float(v)))
                t += remaining * 3600.0 / v
                break
            segments.append(TraceSegment(row, k, float(reach), float(v)))
            t = boundary
            remaining -= reach
    return TraversalTrace(total_s=t - float(depart_s), segments=tuple(segments))


def _traversal_seconds(net, path, sset: ScenarioSet, depart_s: float) -> np.ndarray:
    out = np.empty(sset.n_scenarios)
    for s in range(sset.n_scenarios):
        out[s] = traverse(
            net, path, sset.speeds[s], depart_s, sset.period_offset, sset.period_seconds
        ).total_s
    return out


def _emission_kg(net, path, sset: ScenarioSet, depart_s: float, params: MeetParams) -> np.ndarray:
    out = np.empty(sset.n_scenarios)
    for s in range(sset.n_scenarios):
        trace = traverse(
            net, path, sset.speeds[s], depart_s, sset.period_offset, sset.period_seconds
        )
        grams = 0.0
        for seg in trace.segments:
            grams += meet_rate(seg.speed_kmh, params) * seg.km
        out[s] = grams / 1000.0
    return out


def evaluate_all_scenarios(
    net: RoadNetwork, path: Path, sset: ScenarioSet, spec: ObjectiveSpec
) -> np.ndarray:
    """Per-scenario contributions: travel seconds for f1/f2/f6, kilograms
    for f3, tardiness seconds for f4, tardiness-plus-earliness for f5."""
    if spec.kind == "f3":
        return _emission_kg(net, path, sset, spec.depart_s, spec.meet)
    times = _traversal_seconds(net, path, sset, spec.depart_s)
    if spec.kind in ("f1", "f2", "f6"):
        return times
    late = np.maximum(spec.depart_s + times - spec.due_s, 0.0)
    if spec.kind == "f4":
        return late
    early = np.maximum(spec.earliest_s - times - spec.depart_s, 0.0)
    return late + early


def evaluate(net: RoadNetwork, path: Path, sset: ScenarioSet, spec: ObjectiveSpec) -> float:
    """Objective value of one path on one scenario set."""
    vals = evaluate_all_scenarios(net, path, sset, spec)
    p = sset.probabilities
    if spec.kind == "f1":
        mu = float(np.dot(p, vals))
        sigma = math.sqrt(float(np.dot(p, (vals - mu) ** 2)))
        return mu + spec.std_weight * sigma
    if spec.kind == "f6":
        order = np.lexsort((np.arange(len(vals)), vals))
        cum = np.cumsum(p[order])
        pos = int(np.searchsorted(cum, spec.reliability - 1e-12, side="left"))
        pos = min(pos, len(vals) - 1)
        return float(vals[order[pos]])
    return float(np.dot(p, vals))
