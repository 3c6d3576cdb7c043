"""Test the ordered thread-pool map and its worker setting."""

# pylint: disable=protected-access,redefined-outer-name
import threading

import pytest

from pairplan.exceptions import ConfigurationError
from pairplan.parallel import ordered_map, worker_count


def test_worker_count(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test the environment override and its validation."""
    monkeypatch.setenv("PAIRPLAN_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.delenv("PAIRPLAN_THREADS")
    assert worker_count() >= 1
    for bad in ("0", "-2", "many"):
        monkeypatch.setenv("PAIRPLAN_THREADS", bad)
        with pytest.raises(ConfigurationError):
            worker_count()


def test_ordered_map_keeps_input_order(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that results come back in input order whatever the worker count."""
    monkeypatch.setenv("PAIRPLAN_THREADS", "4")
    items = list(range(50))
    assert ordered_map(lambda x: x * x, items) == [x * x for x in items]
    assert ordered_map(lambda x: -x, items, workers=1) == [-x for x in items]
    assert ordered_map(lambda x: x, []) == []


def test_single_worker_runs_inline() -> None:
    """Test that one worker maps on the calling thread."""
    caller = threading.get_ident()
    assert ordered_map(lambda _: threading.get_ident(), range(3), workers=1) == [caller] * 3
