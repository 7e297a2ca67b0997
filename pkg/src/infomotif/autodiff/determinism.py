"""Switch for single-threaded BLAS (bit-reproducible reductions)."""
from contextlib import contextmanager

from threadpoolctl import threadpool_limits

_limiter = None


def set_deterministic(on: bool = True) -> None:
    """Pin BLAS/OpenMP pools to one thread (``on``) or restore them."""
    global _limiter
    if on and _limiter is None:
        _limiter = threadpool_limits(limits=1)
    elif not on and _limiter is not None:
        _limiter.restore_original_limits()
        _limiter = None


@contextmanager
def deterministic():
    with threadpool_limits(limits=1):
        yield
