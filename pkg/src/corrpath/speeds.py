"""Historical speed panel and its correlation statistics."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (
    DuplicateCell,
    InputError,
    MalformedRow,
    MissingCell,
    MissingHeader,
    NonPositiveSpeed,
    PanelTooLarge,
    UnknownLink,
    ZeroVariance,
)
from .network import RoadNetwork

SPEEDS_HEADER = ("link_id", "day", "period", "speed_kmh")


@dataclass(frozen=True)
class VarKey:
    """Identifies one speed variable: a link row at one period index."""

    link: int
    period: int


class SpeedPanel:
    """Dense speed observations, one value per (day, link, period).

    ``speeds[e, l, t]`` is the km/h speed on link row ``l`` during period
    ``t`` of day ``e``.  Period indices are window-relative: index ``t``
    covers the absolute clock interval
    ``[(period_offset + t) * period_seconds, (period_offset + t + 1) * period_seconds)``
    in seconds from midnight.  The array is frozen after construction, so
    a panel is safe to share across threads and worker processes.
    """

    def __init__(
        self,
        speeds: np.ndarray,
        link_ids: tuple[int, ...],
        day_labels: tuple[int, ...],
        period_offset: int = 0,
        period_minutes: float = 5.0,
    ):
        arr = np.ascontiguousarray(speeds, dtype=np.float64)
        if arr.ndim != 3:
            raise InputError(f"panel array must be 3-d (days, links, periods), got {arr.ndim}-d")
        if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise InputError(f"panel array has an empty axis: shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise NonPositiveSpeed("panel speeds must all be finite and > 0 km/h")
        if len(link_ids) != arr.shape[1]:
            raise InputError("link_ids length does not match the link axis")
        if len(day_labels) != arr.shape[0]:
            raise InputError("day_labels length does not match the day axis")
        if period_minutes <= 0:
            raise InputError("period_minutes must be positive")
        arr.setflags(write=False)
        self.speeds = arr
        self.link_ids = tuple(int(i) for i in link_ids)
        self.day_labels = tuple(int(d) for d in day_labels)
        self.period_offset = int(period_offset)
        self.period_minutes = float(period_minutes)

    @property
    def n_days(self) -> int:
        return self.speeds.shape[0]

    @property
    def n_links(self) -> int:
        return self.speeds.shape[1]

    @property
    def n_periods(self) -> int:
        return self.speeds.shape[2]

    @property
    def n_variables(self) -> int:
        return self.n_links * self.n_periods

    @property
    def period_seconds(self) -> float:
        return self.period_minutes * 60.0

    def as_matrix(self) -> np.ndarray:
        """(days, variables) view; variable v = link * n_periods + period."""
        return self.speeds.reshape(self.n_days, self.n_variables)

    def variable_means(self) -> np.ndarray:
        """Per-variable mean over days, shape (links, periods)."""
        return self.speeds.mean(axis=0)

    def panel_id(self) -> str:
        """Stable content hash used to stamp derived scenario files."""
        digest = hashlib.sha256()
        digest.update(repr(self.speeds.shape).encode())
        digest.update(self.speeds.tobytes())
        return digest.hexdigest()[:16]

    def var_index(self, key: VarKey) -> int:
        if not (0 <= key.link < self.n_links and 0 <= key.period < self.n_periods):
            raise InputError(f"variable {key} outside panel of shape "
                             f"({self.n_links} links, {self.n_periods} periods)")
        return key.link * self.n_periods + key.period

    def __repr__(self) -> str:
        return (f"SpeedPanel(days={self.n_days}, links={self.n_links}, "
                f"periods={self.n_periods})")


def load_speeds(path: str, net: RoadNetwork) -> SpeedPanel:
    """Read a ``speeds.csv`` table, aligned to the network's link order.

    Header: ``link_id,day,period,speed_kmh``.  Day labels are arbitrary
    integers (sorted ascending); period labels must be consecutive
    integers (absolute 5-minute slot indices).  Every (link, day, period)
    cell must be present exactly once for every network link.
    """
    cells: dict[tuple[int, int, int], float] = {}
    days: set[int] = set()
    periods: set[int] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != SPEEDS_HEADER:
            raise MissingHeader(
                f"{path}: expected header {','.join(SPEEDS_HEADER)!r}, got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRow(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                link_id = int(row[0])
                day = int(row[1])
                period = int(row[2])
                speed = float(row[3])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
            if link_id not in net.row_by_link_id:
                raise UnknownLink(f"{path}:{lineno}: link id {link_id} not in the network")
            if speed <= 0 or not math.isfinite(speed):
                raise NonPositiveSpeed(
                    f"{path}:{lineno}: speed {row[3]} km/h on link {link_id} is not > 0"
                )
            key = (link_id, day, period)
            if key in cells:
                raise DuplicateCell(
                    f"{path}:{lineno}: duplicate cell (link {link_id}, day {day}, period {period})"
                )
            cells[key] = speed
            days.add(day)
            periods.add(period)
    if not cells:
        raise MissingCell(f"{path}: no speed rows")
    day_labels = tuple(sorted(days))
    period_labels = sorted(periods)
    for a, b in zip(period_labels, period_labels[1:]):
        if b != a + 1:
            raise InputError(
                f"{path}: period labels must be consecutive integers, "
                f"found gap between {a} and {b}"
            )
    offset = period_labels[0]
    n_days, n_links, n_periods = len(day_labels), net.n_links, len(period_labels)
    arr = np.empty((n_days, n_links, n_periods), dtype=np.float64)
    arr.fill(np.nan)
    day_pos = {d: i for i, d in enumerate(day_labels)}
    for (link_id, day, period), speed in cells.items():
        arr[day_pos[day], net.row_by_link_id[link_id], period - offset] = speed
    missing = np.argwhere(np.isnan(arr))
    if missing.size:
        e, l, t = missing[0]
        raise MissingCell(
            f"{path}: missing cell (link {net.links[l].link_id}, "
            f"day {day_labels[e]}, period {offset + t})"
        )
    return SpeedPanel(arr, net.link_ids(), day_labels, period_offset=offset)


def save_speeds(panel: SpeedPanel, path: str) -> None:
    """Write the canonical ``speeds.csv`` form (rows sorted by link, day, period)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPEEDS_HEADER)
        for l, link_id in enumerate(panel.link_ids):
            for e, day in enumerate(panel.day_labels):
                for t in range(panel.n_periods):
                    writer.writerow(
                        [link_id, day, panel.period_offset + t, repr(float(panel.speeds[e, l, t]))]
                    )


def _columns(panel: SpeedPanel, key: VarKey) -> np.ndarray:
    return panel.speeds[:, key.link, key.period]


def pearson(panel: SpeedPanel, a: VarKey, b: VarKey) -> float:
    """Sample Pearson correlation between two speed variables over days."""
    if panel.n_days < 3:
        raise InputError(f"need at least 3 days for a correlation, panel has {panel.n_days}")
    panel.var_index(a)
    panel.var_index(b)
    x = _columns(panel, a)
    y = _columns(panel, b)
    for key, col in ((a, x), (b, y)):
        if col.max() == col.min():
            raise ZeroVariance(f"variable {key} is constant across days")
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return max(-1.0, min(1.0, r))


def t_critical(n_samples: int, level: float = 0.05) -> float:
    """Two-sided Student-t critical value at the given significance level."""
    if n_samples < 3:
        raise InputError("need n_samples >= 3")
    if not 0 < level < 1:
        raise InputError(f"level must be in (0, 1), got {level}")
    return float(stats.t.ppf(1 - level / 2, n_samples - 2))


def significance_threshold(n_samples: int, level: float = 0.05) -> float:
    """Smallest |r| that a two-sided t-test calls significant.

    Inverts t = |r| * sqrt((n - 2) / (1 - r^2)) at the critical value,
    giving |r|* = t_crit / sqrt(t_crit^2 + n - 2).
    """
    t = t_critical(n_samples, level)
    return t / math.sqrt(t * t + n_samples - 2)


def pair_count(n_variables: int) -> int:
    """Number of distinct unordered variable pairs, V * (V - 1) / 2."""
    return n_variables * (n_variables - 1) // 2


@dataclass(frozen=True)
class CorrelationSummary:
    """Histogram and significance breakdown of pairwise correlations."""

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    n_variables: int
    n_zero_variance: int
    n_pairs_total: int
    n_pairs_counted: int
    level: float
    threshold: float
    t_critical: float
    insignificant_frac: float
    significant_frac: float
    frac_abs_above: float
    abs_cutoff: float
    sampled: bool


def correlation_summary(
    panel: SpeedPanel,
    level: float = 0.05,
    pair_budget: int = 100_000_000,
    sample_size: int = 1_000_000,
    seed: int = 0,
    allow_sampling: bool = True,
    abs_cutoff: float = 0.6,
) -> CorrelationSummary:
    """Summarize all pairwise correlations between speed variables.

    Constant variables are excluded (their count is reported).  When the
    pair count exceeds ``pair_budget`` the summary switches to a seeded
    uniform subsample of ``sample_size`` pairs, unless ``allow_sampling``
    is off, in which case PanelTooLarge is raised.
    """
    if panel.n_days < 3:
        raise InputError("need at least 3 days for correlations")
    threshold = significance_threshold(panel.n_days, level)
    tcrit = t_critical(panel.n_days, level)
    x = panel.as_matrix()
    keep = x.max(axis=0) != x.min(axis=0)
    n_zero = int((~keep).sum())
    z = x[:, keep].astype(np.float64)
    z = z - z.mean(axis=0)
    norms = np.sqrt((z * z).sum(axis=0))
    z /= norms
    v_eff = z.shape[1]
    n_pairs = pair_count(v_eff)
    edges = np.linspace(-1.0, 1.0, 21)
    hist = np.zeros(20, dtype=np.int64)
    insig = 0
    above = 0

    if n_pairs <= pair_budget:
        sampled = False
        counted = n_pairs
        block = 512
        for start in range(0, v_eff, block):
            stop = min(start + block, v_eff)
            r_block = z[:, start:stop].T @ z
            for i_local in range(stop - start):
                i = start + i_local
                r = r_block[i_local, i + 1:]
                if r.size == 0:
                    continue
                np.clip(r, -1.0, 1.0, out=r)
                hist += np.histogram(r, bins=edges)[0]
                absr = np.abs(r)
                insig += int((absr < threshold).sum())
                above += int((absr > abs_cutoff).sum())
    else:
        if not allow_sampling:
            raise PanelTooLarge(
                f"{n_pairs} pairs exceed the budget of {pair_budget}; "
                "enable sampling or raise the budget"
            )
        sampled = True
        counted = min(sample_size, n_pairs)
        rng = np.random.default_rng(seed)
        codes: np.ndarray = np.empty(0, dtype=np.int64)
        while codes.size < counted:
            draw = rng.integers(0, n_pairs, size=2 * (counted - codes.size), dtype=np.int64)
            codes = np.unique(np.concatenate([codes, draw]))
        if codes.size > counted:
            codes = codes[np.sort(rng.permutation(codes.size)[:counted])]
        # decode pair code p -> (i, j), i < j, lexicographic enumeration
        vf = float(v_eff)
        i_idx = np.floor((2 * vf - 1 - np.sqrt((2 * vf - 1) ** 2 - 8 * codes.astype(np.float64))) / 2).astype(np.int64)
        # guard against float rounding at stratum edges
        while True:
            base = i_idx * (2 * v_eff - i_idx - 1) // 2
            too_high = base > codes
            too_low = codes - base >= (v_eff - 1 - i_idx)
            if not (too_high.any() or too_low.any()):
                break
            i_idx = i_idx - too_high.astype(np.int64) + too_low.astype(np.int64)
        j_idx = codes - base + i_idx + 1
        for start in range(0, counted, 65536):
            stop = min(start + 65536, counted)
            r = (z[:, i_idx[start:stop]] * z[:, j_idx[start:stop]]).sum(axis=0)
            np.clip(r, -1.0, 1.0, out=r)
            hist += np.histogram(r, bins=edges)[0]
            absr = np.abs(r)
            insig += int((absr < threshold).sum())
            above += int((absr > abs_cutoff).sum())

    denom = max(counted, 1)
    return CorrelationSummary(
        bin_edges=tuple(edges.tolist()),
        counts=tuple(int(c) for c in hist),
        n_variables=panel.n_variables,
        n_zero_variance=n_zero,
        n_pairs_total=n_pairs,
        n_pairs_counted=counted,
        level=level,
        threshold=threshold,
        t_critical=tcrit,
        insignificant_frac=insig / denom,
        significant_frac=(counted - insig) / denom,
        frac_abs_above=above / denom,
        abs_cutoff=abs_cutoff,
        sampled=sampled,
    )


@dataclass(frozen=True)
class ProfileEntry:
    """One correlation against the anchor variable."""

    key: VarKey
    r: float
    significant: bool
    zero_variance: bool


def _profile_r(panel: SpeedPanel, anchor: VarKey, other: VarKey, threshold: float) -> ProfileEntry:
    try:
        r = pearson(panel, anchor, other)
    except ZeroVariance:
        return ProfileEntry(other, float("nan"), False, True)
    return ProfileEntry(other, r, abs(r) >= threshold, False)


def profile(panel: SpeedPanel, anchor: VarKey, mode: str, level: float = 0.05) -> list[ProfileEntry]:
    """Correlation profile of one variable against the rest of the panel.

    ``spatial``: anchor against every other link at the same period,
    sorted by descending correlation (undefined pairs flagged and sorted
    last).  ``temporal``: the anchor against the same link at the anchor
    period onward, in period order; the first entry is the lag-0 self
    correlation of 1.
    """
    panel.var_index(anchor)
    threshold = significance_threshold(panel.n_days, level)
    if mode == "spatial":
        entries = [
            _profile_r(panel, anchor, VarKey(l, anchor.period), threshold)
            for l in range(panel.n_links)
            if l != anchor.link
        ]
        entries.sort(key=lambda e: (e.zero_variance, -(e.r if not e.zero_variance else 0.0)))
        return entries
    if mode == "temporal":
        return [
            _profile_r(panel, anchor, VarKey(anchor.link, t), threshold)
            for t in range(anchor.period, panel.n_periods)
        ]
    raise InputError(f"profile mode must be 'spatial' or 'temporal', got {mode!r}")
