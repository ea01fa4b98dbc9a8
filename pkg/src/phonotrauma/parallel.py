from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, TypeVar

T = TypeVar("T")

_CONTEXT: Any = None


def _install(context):
    global _CONTEXT
    _CONTEXT = context


def _call(fn, item):
    return fn(item, _CONTEXT)


def map_ordered(fn: Callable[[Any, Any], T], items: Iterable, workers: int = 1, context=None) -> list[T]:
    """``[fn(i, context) for i in items]``, optionally over worker processes.

    Results come back in input order, so output never depends on ``workers``.
    ``context`` is shipped to each worker once; ``fn`` must be a picklable
    module-level callable when ``workers > 1``.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i, context) for i in items]
    from functools import partial

    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_install, initargs=(context,)) as ex:
        return list(ex.map(partial(_call, fn), items, chunksize=chunk))
