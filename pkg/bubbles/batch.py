"""Async process pool for independent runs."""

from __future__ import annotations

import asyncio
import functools
import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Any

logger = logging.getLogger(__name__)


class RunPool:
    """Bounded pool running top-level functions in worker processes.

    Usage::

        async with RunPool(workers=3) as pool:
            results = await pool.map(run_child, configs)
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")
        self._workers = workers
        self._executor: ProcessPoolExecutor | None = None
        self._semaphore: asyncio.Semaphore | None = None

    async def __aenter__(self) -> RunPool:
        self._executor = ProcessPoolExecutor(max_workers=self._workers)
        self._semaphore = asyncio.Semaphore(self._workers)
        return self

    async def __aexit__(self, *exc: Any) -> None:
        if self._executor:
            self._executor.shutdown(wait=True)
            self._executor = None

    async def submit(self, fn: Callable[..., Any], *args: Any) -> Any:
        """Run fn(*args) in a worker once a slot is free.

        :param fn: Picklable top-level callable
        :return: Its return value
        """
        assert self._executor is not None, "Use RunPool as context manager"
        assert self._semaphore is not None

        async with self._semaphore:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(self._executor, functools.partial(fn, *args))

    async def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> list[Any]:
        """Apply fn to every item concurrently, preserving order."""
        items = list(items)
        logger.info("Dispatching %d jobs to %d workers", len(items), self._workers)
        return list(await asyncio.gather(*(self.submit(fn, item) for item in items)))
