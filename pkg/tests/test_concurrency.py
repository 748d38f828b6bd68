import threading
import time

import pytest

from faceclust.core.concurrency import Executor, ExecutorConfig, map_ordered


def test_map_ordered_returns_input_order_despite_completion_order():
    def slow_first(x):
        time.sleep(0.02 if x == 0 else 0.0)
        return x * x

    assert map_ordered(list(range(8)), slow_first, max_workers=4) == [x * x for x in range(8)]


def test_map_ordered_inline_when_single_worker():
    threads = set()

    def fn(x):
        threads.add(threading.get_ident())
        return x + 1

    assert map_ordered([1, 2, 3], fn, max_workers=1) == [2, 3, 4]
    assert threads == {threading.get_ident()}


def test_map_ordered_reraises_worker_error():
    def fn(x):
        if x == 3:
            raise RuntimeError("boom")
        return x

    with pytest.raises(RuntimeError, match="boom"):
        map_ordered(list(range(6)), fn, max_workers=3)


def test_map_ordered_rejects_zero_workers():
    with pytest.raises(ValueError):
        map_ordered([1], lambda x: x, max_workers=0)


def test_map_unordered_stops_after_first_error():
    executor = Executor(ExecutorConfig(max_workers=1, window=2))
    started = []

    def fn(x):
        started.append(x)
        if x == 1:
            raise ValueError("bad item")
        return x

    seen = []
    with pytest.raises(ValueError, match="bad item"):
        executor.map_unordered(range(20), fn, seen.append)
    assert max(started) < 19
    assert 1 not in seen


def test_map_unordered_respects_window():
    executor = Executor(ExecutorConfig(max_workers=2, window=2))
    lock = threading.Lock()
    in_flight = 0
    peak = 0

    def fn(x):
        nonlocal in_flight, peak
        with lock:
            in_flight += 1
            peak = max(peak, in_flight)
        time.sleep(0.005)
        with lock:
            in_flight -= 1
        return x

    out = []
    executor.map_unordered(range(10), fn, out.append)
    assert sorted(out) == list(range(10))
    assert peak <= 2
