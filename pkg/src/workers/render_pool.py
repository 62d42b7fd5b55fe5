"""
Пул потоков для пачек лучей. Результаты всегда возвращаются в порядке входных чанков,
поэтому число воркеров не влияет на итог.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

Span = tuple[int, int]


def chunk_spans(total: int, chunk_size: int) -> list[Span]:
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def map_ordered(func: Callable[[Span], T], spans: list[Span], workers: int) -> list[T]:
    if workers <= 1 or len(spans) <= 1:
        return [func(span) for span in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, spans))
