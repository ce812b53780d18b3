import hashlib
import os
import typing as t
from concurrent.futures import ThreadPoolExecutor

from .globals import current_lab

T = t.TypeVar("T")
R = t.TypeVar("R")


def get_debug_flag() -> bool:
    val = os.environ.get('RESTRICTION_LAB_DEBUG')
    return bool(val and val.lower() not in {'0', 'false', 'no'})


def worker_count() -> int:
    """Worker cap of the running lab, 1 outside a lab context."""
    if current_lab:
        return max(1, int(current_lab.config.get("THREADS") or 1))

    return 1


def parallel_map(fn: t.Callable[[T], R], items: t.Iterable[T]) -> list[R]:
    """Map ``fn`` over ``items`` with at most :func:`worker_count` threads.

    Results come back in input order, so any reduction over them is
    reproducible regardless of scheduling.
    """
    items = list(items)
    workers = min(worker_count(), len(items))

    if workers <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def config_hash(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
