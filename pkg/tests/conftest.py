"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from corrpath import Link, RoadNetwork, SpeedPanel

# verdict lines queued by the acceptance tests; printed after the run,
# outside pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def chain_net(lengths) -> RoadNetwork:
    """Chain 0 -> 1 -> ... with one link per hop."""
    return RoadNetwork(
        [
            Link(link_id=i + 1, from_node=i, to_node=i + 1, length_km=float(km))
            for i, km in enumerate(lengths)
        ]
    )


def panel_from_array(arr, period_offset=0, period_minutes=5.0) -> SpeedPanel:
    """SpeedPanel straight from a (days, links, periods) array."""
    arr = np.asarray(arr, dtype=np.float64)
    return SpeedPanel(
        arr,
        link_ids=tuple(range(1, arr.shape[1] + 1)),
        day_labels=tuple(range(arr.shape[0])),
        period_offset=period_offset,
        period_minutes=period_minutes,
    )


@pytest.fixture
def two_period_net() -> RoadNetwork:
    return chain_net([8.0])
