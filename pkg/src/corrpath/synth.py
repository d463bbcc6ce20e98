"""Synthetic road networks and speed panels with controlled correlation.

Speeds come from a Gaussian copula: per day, a latent normal field over
(links, periods) carries AR(1) dependence along periods and
adjacency-driven dependence between links sharing a node, then a
shifted log-normal transform maps the field to km/h around a base
speed.  Everything is a pure function of the settings' seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .network import Link, RoadNetwork
from .speeds import SpeedPanel


@dataclass(frozen=True)
class SynthSpec:
    """Shape and dependence parameters for one synthetic instance."""

    n_nodes: int = 20
    n_links: int = 40
    n_periods: int = 24
    n_days: int = 102
    spatial_rho: float = 0.3
    temporal_rho: float = 0.5
    base_speed_kmh: float = 60.0
    sigma_log: float = 0.15
    speed_floor_kmh: float = 1.0
    period_minutes: float = 5.0
    first_period: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 2:
            raise InputError("need at least 2 nodes")
        if self.n_links < self.n_nodes - 1:
            raise InputError(
                f"need at least {self.n_nodes - 1} links to keep node {self.n_nodes - 1} reachable"
            )
        if min(self.n_periods, self.n_days) < 1:
            raise InputError("need at least one period and one day")
        if not -0.999 <= self.spatial_rho <= 0.999 or not -0.999 <= self.temporal_rho <= 0.999:
            raise InputError("correlation coefficients must lie in [-0.999, 0.999]")
        if self.base_speed_kmh <= 0 or self.speed_floor_kmh <= 0:
            raise InputError("speeds must be positive")
        if self.sigma_log < 0:
            raise InputError("sigma_log must be >= 0")


def random_network(n_nodes: int, n_links: int, seed: int = 0) -> RoadNetwork:
    """Random directed multigraph with a guaranteed 0 -> n_nodes-1 chain.

    The first n_nodes-1 links form the chain 0 -> 1 -> ... -> n-1; the
    rest connect uniformly random distinct node pairs.  Lengths are
    uniform on [0.5, 5.0] km, rounded to metres.
    """
    if n_nodes < 2:
        raise InputError("need at least 2 nodes")
    if n_links < n_nodes - 1:
        raise InputError(f"need at least {n_nodes - 1} links for the backbone chain")
    rng = np.random.default_rng(seed)
    links: list[Link] = []
    for i in range(n_nodes - 1):
        links.append(
            Link(
                link_id=i + 1,
                from_node=i,
                to_node=i + 1,
                length_km=round(float(rng.uniform(0.5, 5.0)), 3),
            )
        )
    while len(links) < n_links:
        a = int(rng.integers(0, n_nodes))
        b = int(rng.integers(0, n_nodes))
        if a == b:
            continue
        links.append(
            Link(
                link_id=len(links) + 1,
                from_node=a,
                to_node=b,
                length_km=round(float(rng.uniform(0.5, 5.0)), 3),
            )
        )
    return RoadNetwork(links)


def _spatial_factor(net: RoadNetwork, rho: float) -> np.ndarray:
    """Factor F with F F^T ~= the adjacency-driven link correlation matrix.

    Links sharing a node get correlation rho; eigenvalue clipping plus
    re-normalization makes the target valid for any rho.
    """
    n = net.n_links
    sigma = np.eye(n)
    if rho != 0.0 and n > 1:
        ends = [(ln.from_node, ln.to_node) for ln in net.links]
        for i in range(n):
            for j in range(i + 1, n):
                if set(ends[i]) & set(ends[j]):
                    sigma[i, j] = sigma[j, i] = rho
        vals, vecs = np.linalg.eigh(sigma)
        sigma = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        d = np.sqrt(np.clip(np.diag(sigma), 1e-12, None))
        sigma = sigma / np.outer(d, d)
    vals, vecs = np.linalg.eigh(sigma)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def generate_panel(net: RoadNetwork, spec: SynthSpec) -> SpeedPanel:
    """Synthesize a dense speed panel for the given network."""
    n_links, n_periods, n_days = net.n_links, spec.n_periods, spec.n_days
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal((n_days, n_periods, n_links))
    factor = _spatial_factor(net, spec.spatial_rho)
    field = np.empty_like(noise)
    field[:, 0] = noise[:, 0] @ factor.T
    decay = spec.temporal_rho
    fresh = np.sqrt(max(1.0 - decay * decay, 0.0))
    for t in range(1, n_periods):
        field[:, t] = decay * field[:, t - 1] + fresh * (noise[:, t] @ factor.T)
    z = np.transpose(field, (0, 2, 1))
    sig = spec.sigma_log
    speeds = spec.base_speed_kmh * np.exp(sig * z - sig * sig / 2.0)
    np.clip(speeds, spec.speed_floor_kmh, None, out=speeds)
    return SpeedPanel(
        speeds,
        link_ids=net.link_ids(),
        day_labels=tuple(range(n_days)),
        period_offset=spec.first_period,
        period_minutes=spec.period_minutes,
    )
