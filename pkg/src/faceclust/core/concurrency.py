# concurrency.py
# SPDX-License-Identifier: MIT
"""Bounded thread-pool helpers for faceclust jobs.

Wraps :class:`concurrent.futures.ThreadPoolExecutor` with a bounded
submission window. :func:`map_ordered` is the entry point used by the
partition, aggregation and sweep code: it returns results in input order,
so outputs never depend on completion order or worker count.
"""
from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import TypeVar

from .log import get_logger

log = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

__all__ = ["ExecutorConfig", "Executor", "map_ordered"]


@dataclass(frozen=True)
class ExecutorConfig:
    """Immutable executor settings.

    Attributes:
        max_workers (int): Maximum number of worker threads.
        window (int): Maximum number of in-flight tasks allowed before
            backpressure is applied.
    """
    max_workers: int
    window: int


class Executor:
    """Run tasks in a thread pool with bounded submission.

    Results are delivered to callbacks in completion order, not
    submission order.
    """

    def __init__(self, cfg: ExecutorConfig) -> None:
        self.cfg = cfg

    def _make_executor(self) -> ThreadPoolExecutor:
        if self.cfg.max_workers < 1:
            raise ValueError("Executor requires max_workers >= 1")
        return ThreadPoolExecutor(max_workers=self.cfg.max_workers)

    def map_unordered(
        self,
        items: Iterable[T],
        fn: Callable[[T], R],
        on_result: Callable[[R], None],
    ) -> None:
        """Submit items to workers and consume results as they complete.

        The first worker error cancels the tasks still queued and is
        re-raised.

        Args:
            items (Iterable[T]): Items to process.
            fn (Callable[[T], R]): Worker function invoked for each item.
            on_result (Callable[[R], None]): Callback for each result.
        """
        window = max(self.cfg.window, self.cfg.max_workers)
        with self._make_executor() as pool:
            pending: set[Future[R]] = set()

            def _drain() -> None:
                nonlocal pending
                done, still = wait(pending, return_when=FIRST_COMPLETED)
                pending = set(still)
                for fut in done:
                    try:
                        result = fut.result()
                    except Exception:
                        for other in pending:
                            other.cancel()
                        raise
                    on_result(result)

            for item in items:
                pending.add(pool.submit(fn, item))
                if len(pending) >= window:
                    _drain()

            while pending:
                _drain()


def map_ordered(
    items: Sequence[T],
    fn: Callable[[T], R],
    *,
    max_workers: int = 1,
    window: int | None = None,
) -> list[R]:
    """Apply ``fn`` to every item and return results in input order.

    ``max_workers=1`` (or a single item) runs inline in the calling thread.
    The first worker error is re-raised.

    Args:
        items (Sequence[T]): Jobs to run.
        fn (Callable[[T], R]): Pure worker function.
        max_workers (int): Thread cap.
        window (int | None): In-flight cap; defaults to ``4 * max_workers``.

    Returns:
        list[R]: ``[fn(items[0]), fn(items[1]), ...]``.
    """
    if max_workers < 1:
        raise ValueError("map_ordered requires max_workers >= 1")
    jobs = list(items)
    if max_workers == 1 or len(jobs) <= 1:
        return [fn(item) for item in jobs]

    results: list[R | None] = [None] * len(jobs)

    def _indexed(pair: tuple[int, T]) -> tuple[int, R]:
        idx, item = pair
        return idx, fn(item)

    def _store(res: tuple[int, R]) -> None:
        idx, value = res
        results[idx] = value

    workers = min(max_workers, len(jobs))
    cfg = ExecutorConfig(max_workers=workers, window=window or 4 * workers)
    log.debug("Running %d jobs on %d threads.", len(jobs), workers)
    Executor(cfg).map_unordered(enumerate(jobs), _indexed, _store)
    return results  # type: ignore[return-value]
