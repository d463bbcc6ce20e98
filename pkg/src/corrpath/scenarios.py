"""Scenario sets over a speed panel.

Two generators share one estimator-style API: ``RandomSampler`` draws
whole observed days without replacement, ``CopulaScenarioGenerator``
builds mean-preserving stratified marginals and reorders them so the
scenario ranks reproduce the panel's Spearman correlation structure.
Both are deterministic functions of (panel, size, seed).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import __version__
from .errors import (
    InputError,
    MissingHeader,
    ScenarioFormatError,
    STooLarge,
)
from .network import RoadNetwork
from .speeds import SpeedPanel

SCENARIOS_HEADER = ("scenario", "link_id", "period", "speed_kmh")


@dataclass(frozen=True)
class ScenarioSet:
    """A finite set of equally-structured speed scenarios.

    ``speeds[s, l, t]`` mirrors the panel layout (link rows, window
    periods).  Probabilities default to uniform and must sum to one.
    """

    speeds: np.ndarray
    probabilities: np.ndarray
    method: str
    seed: int | None
    source_panel_id: str
    link_ids: tuple[int, ...]
    period_offset: int = 0
    period_minutes: float = 5.0
    day_indices: tuple[int, ...] | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.speeds, dtype=np.float64)
        if arr.ndim != 3:
            raise InputError("scenario array must be 3-d (scenarios, links, periods)")
        if arr.shape[0] < 1:
            raise InputError("a scenario set needs at least one scenario")
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise InputError("scenario speeds must all be finite and > 0 km/h")
        probs = np.ascontiguousarray(self.probabilities, dtype=np.float64)
        if probs.shape != (arr.shape[0],):
            raise InputError("probabilities must align with the scenario axis")
        if np.any(probs < 0):
            raise InputError("probabilities must be non-negative")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise InputError(f"probabilities sum to {probs.sum()!r}, expected 1")
        if len(self.link_ids) != arr.shape[1]:
            raise InputError("link_ids length does not match the link axis")
        arr.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "speeds", arr)
        object.__setattr__(self, "probabilities", probs)

    @property
    def n_scenarios(self) -> int:
        return self.speeds.shape[0]

    @property
    def n_links(self) -> int:
        return self.speeds.shape[1]

    @property
    def n_periods(self) -> int:
        return self.speeds.shape[2]

    @property
    def period_seconds(self) -> float:
        return self.period_minutes * 60.0

    def as_matrix(self) -> np.ndarray:
        return self.speeds.reshape(self.n_scenarios, self.n_links * self.n_periods)


def _uniform_probs(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def moments(sset: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    """Probability-weighted per-variable mean and population std, (links, periods)."""
    p = sset.probabilities
    if np.all(p == p[0]):
        # uniform sets take the plain formulas so the full set reproduces
        # panel moments bit for bit
        return sset.speeds.mean(axis=0), sset.speeds.std(axis=0)
    mean = np.tensordot(p, sset.speeds, axes=(0, 0))
    var = np.tensordot(p, (sset.speeds - mean) ** 2, axes=(0, 0))
    return mean, np.sqrt(var)


def full_set(panel: SpeedPanel) -> ScenarioSet:
    """Every observed day as one equally likely scenario, in day order."""
    return ScenarioSet(
        speeds=panel.speeds.copy(),
        probabilities=_uniform_probs(panel.n_days),
        method="FULL",
        seed=None,
        source_panel_id=panel.panel_id(),
        link_ids=panel.link_ids,
        period_offset=panel.period_offset,
        period_minutes=panel.period_minutes,
        day_indices=tuple(range(panel.n_days)),
    )


# --- stratified marginals ---------------------------------------------------


@dataclass(frozen=True)
class StratifiedMarginal:
    """Equal-probability strata of one empirical marginal.

    ``points[s]`` is the conditional mean of stratum ``s``;
    ``obs_boundaries`` are the fractional positions of the stratum cuts
    on the sorted-observation axis (s * E / S for s = 0..S).
    """

    points: tuple[float, ...]
    obs_boundaries: tuple[float, ...]
    n_observations: int

    @property
    def n_strata(self) -> int:
        return len(self.points)


def _stratum_weights(n_obs: int, n_strata: int) -> np.ndarray:
    """(S, E) weights: W[s] dot sorted_values = conditional mean of stratum s.

    Exact integer overlap on a grid of 1/(E*S) probability units, so each
    row sums to one and column sums give back 1/E per observation -- the
    source of exact mean preservation.  Requires S <= E.
    """
    e, s = n_obs, n_strata
    obs_lo = np.arange(e, dtype=np.int64) * s
    obs_hi = obs_lo + s
    str_lo = np.arange(s, dtype=np.int64) * e
    str_hi = str_lo + e
    overlap = np.minimum(obs_hi[None, :], str_hi[:, None]) - np.maximum(
        obs_lo[None, :], str_lo[:, None]
    )
    np.clip(overlap, 0, None, out=overlap)
    return overlap.astype(np.float64) / e


def _interp_stratified_points(sorted_values: np.ndarray, n_strata: int) -> np.ndarray:
    """Stratum means of the piecewise-linear quantile function (S > E case).

    The quantile function passes through the sorted values at midpoints
    (i + 0.5) / E with flat tails; trapezoid integration over each
    stratum keeps the overall mean exact.
    """
    e, n_vars = sorted_values.shape
    xs = np.concatenate([[0.0], (np.arange(e) + 0.5) / e, [1.0]])
    ys = np.vstack([sorted_values[:1], sorted_values, sorted_values[-1:]])
    seg_area = (xs[1:] - xs[:-1])[:, None] * (ys[:-1] + ys[1:]) / 2.0
    cum = np.vstack([np.zeros((1, n_vars)), np.cumsum(seg_area, axis=0)])
    bounds = np.arange(n_strata + 1) / n_strata
    seg = np.clip(np.searchsorted(xs, bounds, side="right") - 1, 0, len(xs) - 2)
    frac = np.zeros_like(bounds)
    widths = xs[seg + 1] - xs[seg]
    nonzero = widths > 0
    frac[nonzero] = (bounds[nonzero] - xs[seg][nonzero]) / widths[nonzero]
    y_at = ys[seg] + (ys[seg + 1] - ys[seg]) * frac[:, None]
    partial = (bounds - xs[seg])[:, None] * (ys[seg] + y_at) / 2.0
    cum_at = cum[seg] + partial
    return np.diff(cum_at, axis=0) * n_strata


def _stratified_points(sorted_values: np.ndarray, n_strata: int) -> np.ndarray:
    """(S, V) stratum means for every column of an (E, V) sorted matrix."""
    e = sorted_values.shape[0]
    if n_strata <= e:
        return _stratum_weights(e, n_strata) @ sorted_values
    return _interp_stratified_points(sorted_values, n_strata)


def stratify_marginal(values, n_strata: int) -> StratifiedMarginal:
    """Split one empirical marginal into equal-probability strata.

    Observations carry mass 1/E each; when E is not divisible by S the
    boundary observations split fractionally between adjacent strata.
    Each stratum is represented by its conditional mean, so the average
    of the points reproduces the sample mean.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size < 1:
        raise InputError("need at least one observation")
    if n_strata < 1:
        raise InputError("need at least one stratum")
    if not np.all(np.isfinite(arr)):
        raise InputError("observations must be finite")
    pts = _stratified_points(np.sort(arr)[:, None], n_strata)[:, 0]
    bounds = tuple(s * arr.size / n_strata for s in range(n_strata + 1))
    return StratifiedMarginal(
        points=tuple(float(p) for p in pts),
        obs_boundaries=bounds,
        n_observations=arr.size,
    )


# --- generators --------------------------------------------------------------


class RandomSampler(BaseEstimator):
    """Scenario sets drawn as whole days, uniformly, without replacement."""

    def fit(self, panel: SpeedPanel) -> "RandomSampler":
        self.panel_ = panel
        return self

    def sample(self, n_scenarios: int, seed: int = 0) -> ScenarioSet:
        check_is_fitted(self)
        panel = self.panel_
        if n_scenarios < 1:
            raise InputError("need at least one scenario")
        if n_scenarios > panel.n_days:
            raise STooLarge(
                f"{n_scenarios} scenarios requested but the panel has only "
                f"{panel.n_days} days"
            )
        rng = np.random.default_rng(seed)
        days = rng.choice(panel.n_days, size=n_scenarios, replace=False)
        return ScenarioSet(
            speeds=panel.speeds[days].copy(),
            probabilities=_uniform_probs(n_scenarios),
            method="RS",
            seed=seed,
            source_panel_id=panel.panel_id(),
            link_ids=panel.link_ids,
            period_offset=panel.period_offset,
            period_minutes=panel.period_minutes,
            day_indices=tuple(int(d) for d in days),
        )


class CopulaScenarioGenerator(BaseEstimator):
    """Stratified, rank-correlated scenario sets from an empirical panel.

    ``fit`` learns everything that does not depend on the set size: the
    sorted marginals and a factor of the regularized Spearman matrix.
    ``sample`` stratifies each marginal into ``n_scenarios`` mean-exact
    points, mixes van der Waerden scores through the factor, and assigns
    the points by the resulting ranks (ties broken by the seeded RNG).
    One fitted instance can serve any number of sizes and seeds.
    """

    def __init__(self, shrink_extra: float = 1e-10):
        self.shrink_extra = shrink_extra

    def fit(self, panel: SpeedPanel) -> "CopulaScenarioGenerator":
        x = panel.as_matrix()
        ranks = stats.rankdata(x, axis=0, method="average")
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(ranks, rowvar=False)
        corr = np.atleast_2d(corr)
        corr = np.nan_to_num(corr, nan=0.0)
        np.fill_diagonal(corr, 1.0)
        corr = (corr + corr.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(corr)
        low = float(eigvals[0])
        lam = 0.0 if low >= 0 else -low / (1.0 - low)
        lam += self.shrink_extra
        reg_vals = np.clip((1.0 - lam) * eigvals + lam, 0.0, None)
        self.factor_ = eigvecs * np.sqrt(reg_vals)
        self.shrink_ = lam
        self.sorted_values_ = np.sort(x, axis=0)
        self.panel_ = panel
        return self

    def sample(self, n_scenarios: int, seed: int = 0) -> ScenarioSet:
        check_is_fitted(self)
        panel = self.panel_
        if n_scenarios < 1:
            raise InputError("need at least one scenario")
        s = n_scenarios
        n_vars = panel.n_variables
        points = _stratified_points(self.sorted_values_, s)
        rng = np.random.default_rng(seed)
        scores = stats.norm.ppf(np.arange(1, s + 1) / (s + 1))
        mixed = rng.permuted(np.broadcast_to(scores, (n_vars, s)).copy(), axis=1).T
        mixed = mixed @ self.factor_.T
        tiebreak = rng.random((s, n_vars))
        rank_of = np.empty((s, n_vars), dtype=np.int64)
        rows = np.arange(s)
        for v in range(n_vars):
            order = np.lexsort((tiebreak[:, v], mixed[:, v]))
            rank_of[order, v] = rows
        values = np.take_along_axis(points, rank_of, axis=0)
        return ScenarioSet(
            speeds=values.reshape(s, panel.n_links, panel.n_periods),
            probabilities=_uniform_probs(s),
            method="SG",
            seed=seed,
            source_panel_id=panel.panel_id(),
            link_ids=panel.link_ids,
            period_offset=panel.period_offset,
            period_minutes=panel.period_minutes,
        )


def sample_rs(panel: SpeedPanel, n_scenarios: int, seed: int = 0) -> ScenarioSet:
    """Day-resampled scenario set (convenience wrapper over RandomSampler)."""
    return RandomSampler().fit(panel).sample(n_scenarios, seed)


def generate_sg(panel: SpeedPanel, n_scenarios: int, seed: int = 0) -> ScenarioSet:
    """Stratified rank-correlated scenario set (wrapper over CopulaScenarioGenerator)."""
    return CopulaScenarioGenerator().fit(panel).sample(n_scenarios, seed)


# --- file round trip ---------------------------------------------------------


def sidecar_path(csv_path: str) -> str:
    root, ext = csv_path.rsplit(".", 1) if "." in csv_path else (csv_path, "")
    return root + ".json" if ext else csv_path + ".json"


def save_scenarios(sset: ScenarioSet, path: str) -> None:
    """Write ``scenario,link_id,period,speed_kmh`` rows plus a JSON sidecar."""
    p = sset.probabilities
    if not np.all(p == p[0]):
        raise InputError("the scenario CSV format implies uniform probabilities")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCENARIOS_HEADER)
        for s in range(sset.n_scenarios):
            for l, link_id in enumerate(sset.link_ids):
                for t in range(sset.n_periods):
                    writer.writerow(
                        [s, link_id, sset.period_offset + t, repr(float(sset.speeds[s, l, t]))]
                    )
    meta = {
        "method": sset.method,
        "seed": sset.seed,
        "S": sset.n_scenarios,
        "source_panel_id": sset.source_panel_id,
        "tool_version": __version__,
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenarios(path: str, net: RoadNetwork) -> ScenarioSet:
    """Read a scenario CSV (and its sidecar, when present) back into a set."""
    cells: dict[tuple[int, int, int], float] = {}
    scenario_ids: set[int] = set()
    periods: set[int] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != SCENARIOS_HEADER:
            raise MissingHeader(
                f"{path}: expected header {','.join(SCENARIOS_HEADER)!r}, "
                f"got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ScenarioFormatError(f"{path}:{lineno}: expected 4 fields")
            try:
                s, link_id, period, speed = int(row[0]), int(row[1]), int(row[2]), float(row[3])
            except ValueError as exc:
                raise ScenarioFormatError(f"{path}:{lineno}: {exc}") from None
            if link_id not in net.row_by_link_id:
                raise ScenarioFormatError(f"{path}:{lineno}: unknown link id {link_id}")
            key = (s, link_id, period)
            if key in cells:
                raise ScenarioFormatError(f"{path}:{lineno}: duplicate cell {key}")
            cells[key] = speed
            scenario_ids.add(s)
            periods.add(period)
    if not cells:
        raise ScenarioFormatError(f"{path}: no scenario rows")
    s_labels = sorted(scenario_ids)
    if s_labels != list(range(len(s_labels))):
        raise ScenarioFormatError(f"{path}: scenario ids must be 0..S-1, got {s_labels[:5]}...")
    p_labels = sorted(periods)
    for a, b in zip(p_labels, p_labels[1:]):
        if b != a + 1:
            raise ScenarioFormatError(f"{path}: period labels must be consecutive")
    offset = p_labels[0]
    arr = np.full((len(s_labels), net.n_links, len(p_labels)), np.nan)
    for (s, link_id, period), speed in cells.items():
        arr[s, net.row_by_link_id[link_id], period - offset] = speed
    missing = np.argwhere(np.isnan(arr))
    if missing.size:
        s, l, t = missing[0]
        raise ScenarioFormatError(
            f"{path}: missing cell (scenario {s}, link {net.links[l].link_id}, "
            f"period {offset + t})"
        )
    method, seed, panel_id = "UNKNOWN", None, ""
    try:
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
        method = str(meta.get("method", method))
        seed = meta.get("seed", None)
        panel_id = str(meta.get("source_panel_id", ""))
    except FileNotFoundError:
        pass
    return ScenarioSet(
        speeds=arr,
        probabilities=_uniform_probs(len(s_labels)),
        method=method,
        seed=seed,
        source_panel_id=panel_id,
        link_ids=net.link_ids(),
        period_offset=offset,
    )
