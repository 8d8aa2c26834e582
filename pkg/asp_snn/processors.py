import logging
import os
import concurrent.futures
import dataclasses
from typing import Callable, Iterable, List, Optional, TypeVar

from .defaults import Defaults

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count(requested: Optional[int] = None) -> int:
    """Worker threads to use: `requested`, capped by ASP_SNN_THREADS, defaulting to the machine's cores."""
    cores = os.cpu_count() or 1
    env_value = os.environ.get(Defaults.THREADS_ENV_VAR)
    cap = cores
    if env_value:
        try:
            cap = max(1, int(env_value))
        except ValueError:
            logger.warning(f"Ignoring {Defaults.THREADS_ENV_VAR}={env_value!r}: not an integer")
    return max(1, min(requested or cap, cap))


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply `fn` to every item on a thread pool; results keep the input order."""
    items = list(items)
    workers = worker_count(workers)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def run_seeds(config, seeds: Iterable[int], data, workers: Optional[int] = None) -> list:
    """Run one independent experiment per seed on a thread pool.

    Args:
        config: Base RunConfig; only its seed changes between runs
        seeds: Run seeds
        data: RunData shared by every run (read-only)
        workers: Thread count, capped by ASP_SNN_THREADS

    Returns:
        One (TrainResult, LabelMap, EvalReport) tuple per seed, in `seeds` order
    """
    from .trainer import run_experiment

    def run_one(seed: int):
        logger.info(f"Starting run with seed {seed}")
        # inner evaluation stays single-threaded; parallelism is across seeds
        return run_experiment(dataclasses.replace(config, seed=seed), data, workers=1)

    return map_ordered(run_one, seeds, workers)
