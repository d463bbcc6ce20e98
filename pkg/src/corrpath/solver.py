"""Exact path optimization: optimistic static bounds, loopless path
enumeration in bound order, and a prune loop that stops as soon as the
incumbent beats the next path's bound."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import Exhausted, InputError, InternalInvariantError, NoPath, UnknownNode
from .network import RoadNetwork
from .objectives import ObjectiveSpec, Path, evaluate, meet_rate
from .scenarios import ScenarioSet

_REL_TOL = 1e-9


@dataclass(frozen=True)
class BoundWeights:
    """Optimistic static per-link weights for one objective kind.

    Time objectives use seconds at each link's best speed over every
    scenario and period; the emission objective uses grams at each
    link's best emission rate.  Weight sums transform into objective
    units through :func:`bound_value`.
    """

    kind: str
    per_link: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.per_link, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "per_link", arr)


def lower_bound_weights(net: RoadNetwork, sset: ScenarioSet, spec: ObjectiveSpec) -> BoundWeights:
    """Per-link optimistic weights; never above any realized traversal.

    Independent of the f1 std weight, window times, and the f6 level by
    construction, so one weight table serves a whole solve.
    """
    lengths = np.array([ln.length_km for ln in net.links])
    if spec.kind == "f3":
        rates = meet_rate(sset.speeds, spec.meet)
        best_rate = rates.min(axis=(0, 2))
        return BoundWeights(kind=spec.kind, per_link=lengths * best_rate)
    v_max = sset.speeds.max(axis=(0, 2))
    return BoundWeights(kind=spec.kind, per_link=lengths / v_max * 3600.0)


def bound_value(weights: BoundWeights, spec: ObjectiveSpec, weight_sum: float) -> float:
    """Transform a path's static weight sum into objective units."""
    if spec.kind == "f3":
        return weight_sum / 1000.0
    if spec.kind in ("f4", "f5"):
        return max(spec.depart_s + weight_sum - spec.due_s, 0.0)
    return weight_sum


class ShortestPathEnumerator:
    """Loopless origin-destination paths in non-decreasing weight order.

    Successive ``next_path`` calls share one candidate heap, so asking
    for the k-th path costs one spur round.  Ties are broken
    lexicographically by node sequence (then link rows, for parallel
    links), and every candidate's cost is re-summed left to right so
    equal paths tie exactly.
    """

    def __init__(self, net: RoadNetwork, per_link: np.ndarray, origin: int, destination: int):
        for node in (origin, destination):
            if node not in net.nodes:
                raise UnknownNode(f"node {node} is not in the network")
        if np.any(per_link < 0) or not np.all(np.isfinite(per_link)):
            raise InputError("link weights must be finite and >= 0")
        self._net = net
        self._w = np.asarray(per_link, dtype=np.float64)
        self._origin = origin
        self._destination = destination
        self._accepted: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
        self._heap: list[tuple[float, tuple[int, ...], tuple[int, ...]]] = []
        self._queued: set[tuple[int, ...]] = set()
        self._primed = False

    def _path_cost(self, links: tuple[int, ...]) -> float:
        total = 0.0
        for row in links:
            total += self._w[row]
        return total

    def _dijkstra(
        self, source: int, banned_nodes: frozenset[int], banned_links: frozenset[int]
    ) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
        """Lexicographically smallest min-cost loopless path source -> destination."""
        heap: list[tuple[float, tuple[int, ...], tuple[int, ...]]] = [
            (0.0, (source,), ())
        ]
        closed: set[int] = set()
        adjacency = self._net.adjacency
        links = self._net.links
        dest = self._destination
        while heap:
            cost, nodes, rows = heapq.heappop(heap)
            node = nodes[-1]
            if node in closed:
                continue
            closed.add(node)
            if node == dest:
                return nodes, rows
            for row in adjacency[node]:
                if row in banned_links:
                    continue
                nxt = links[row].to_node
                if nxt in closed or nxt in banned_nodes:
                    continue
                heapq.heappush(heap, (cost + self._w[row], nodes + (nxt,), rows + (row,)))
        return None

    def _push(self, nodes: tuple[int, ...], rows: tuple[int, ...]) -> None:
        if rows in self._queued:
            return
        self._queued.add(rows)
        heapq.heappush(self._heap, (self._path_cost(rows), nodes, rows))

    def _spur_round(self, nodes: tuple[int, ...], rows: tuple[int, ...]) -> None:
        for i in range(len(rows)):
            root_rows = rows[:i]
            spur = nodes[i]
            banned_links = set()
            for a_nodes, a_rows in self._accepted:
                if a_rows[:i] == root_rows and len(a_rows) > i:
                    banned_links.add(a_rows[i])
            banned_nodes = frozenset(nodes[:i])
            found = self._dijkstra(spur, banned_nodes, frozenset(banned_links))
            if found is None:
                continue
            spur_nodes, spur_rows = found
            self._push(nodes[:i] + spur_nodes, root_rows + spur_rows)

    def next_path(self) -> tuple[float, Path]:
        """Return (weight_sum, path) for the next path, or raise Exhausted."""
        if not self._primed:
            self._primed = True
            first = self._dijkstra(self._origin, frozenset(), frozenset())
            if first is not None:
                self._push(*first)
        elif self._accepted:
            self._spur_round(*self._accepted[-1])
        if not self._heap:
            raise Exhausted(
                f"no further loopless path from {self._origin} to {self._destination}"
            )
        cost, nodes, rows = heapq.heappop(self._heap)
        self._accepted.append((nodes, rows))
        return cost, Path(nodes=nodes, links=rows)


def k_shortest_paths(
    net: RoadNetwork, per_link: np.ndarray, origin: int, destination: int, k: int
) -> list[tuple[float, Path]]:
    """Up to k loopless paths in non-decreasing static weight order."""
    en = ShortestPathEnumerator(net, per_link, origin, destination)
    out: list[tuple[float, Path]] = []
    for _ in range(k):
        try:
            out.append(en.next_path())
        except Exhausted:
            break
    return out


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one bound-and-prune solve.

    ``value`` equals ``evaluate(path)`` on the solved set.  ``optimal``
    is False only when the path cap stopped the search early.
    ``k_explored`` counts generated paths; the histories expose the
    bound/evaluation sequence for auditing.
    """

    path: Path
    value: float
    k_explored: int
    optimal: bool
    tau_history: tuple[float, ...]
    g_history: tuple[float, ...]
    f_history: tuple[float, ...]


def _check_bound(g: float, f: float) -> None:
    if g > f + _REL_TOL * max(1.0, abs(f)):
        raise InternalInvariantError(
            f"optimistic bound {g!r} exceeds the realized value {f!r}"
        )


def hall_solve(
    net: RoadNetwork,
    sset: ScenarioSet,
    spec: ObjectiveSpec,
    origin: int,
    destination: int,
    k_max: int = 10_000,
) -> SolveResult:
    """Minimize the objective over loopless origin-destination paths.

    Paths come out of the enumerator in non-decreasing bound order; each
    is evaluated exactly, and the search stops once the incumbent drops
    below the next path's bound (or the enumerator runs dry).  Both
    optimality conditions are asserted on every explored path.
    """
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    weights = lower_bound_weights(net, sset, spec)
    enum = ShortestPathEnumerator(net, weights.per_link, origin, destination)
    try:
        cost, current = enum.next_path()
    except Exhausted:
        raise NoPath(f"no path from {origin} to {destination}") from None
    current_g = bound_value(weights, spec, cost)
    g_hist = [current_g]
    f_hist: list[float] = []
    tau_hist: list[float] = []
    tau = math.inf
    best = current
    k = 1
    while True:
        f = evaluate(net, current, sset, spec)
        _check_bound(current_g, f)
        f_hist.append(f)
        if f < tau:
            tau = f
            best = current
        tau_hist.append(tau)
        if k >= k_max:
            return SolveResult(
                path=best, value=tau, k_explored=k, optimal=False,
                tau_history=tuple(tau_hist), g_history=tuple(g_hist), f_history=tuple(f_hist),
            )
        try:
            cost, nxt = enum.next_path()
        except Exhausted:
            return SolveResult(
                path=best, value=tau, k_explored=k, optimal=True,
                tau_history=tuple(tau_hist), g_history=tuple(g_hist), f_history=tuple(f_hist),
            )
        k += 1
        g = bound_value(weights, spec, cost)
        if g < current_g - 1e-12 * max(1.0, abs(current_g)):
            raise InternalInvariantError(
                f"bound order violated: {g!r} after {current_g!r}"
            )
        g_hist.append(g)
        if tau < g:
            return SolveResult(
                path=best, value=tau, k_explored=k, optimal=True,
                tau_history=tuple(tau_hist), g_history=tuple(g_hist), f_history=tuple(f_hist),
            )
        current, current_g = nxt, g
