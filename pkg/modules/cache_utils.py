"""
In-memory caching utilities for the solver tables.

Quadrature index tables, quadrature rules and diagonalizer matrices depend
only on a handful of integers and parameters but are rebuilt at every step
otherwise. Results are memoized per process:
- All caching is in-memory only (no disk persistence)
- Keys are content hashes, so equal arrays share an entry
- Cached numpy arrays are returned read-only; callers must copy before writing
"""

import dataclasses
import hashlib
from functools import wraps
from typing import Callable

import numpy as np

# Registry of every cache created by cache_result (process-local)
_cache_registry = {}


def _hash_bytes(payload: bytes, width: int = 16) -> str:
    return hashlib.sha256(payload).hexdigest()[:width]


def _key_part(arg) -> str:
    if isinstance(arg, np.ndarray):
        # dtype and shape take part so that views of different layout never collide
        header = f"{arg.dtype.str}{arg.shape}".encode()
        return _hash_bytes(header + np.ascontiguousarray(arg).tobytes())
    if hasattr(arg, "coeffs") and isinstance(getattr(arg, "coeffs"), np.ndarray):
        return "sf:" + _key_part(arg.coeffs)
    if dataclasses.is_dataclass(arg) and not isinstance(arg, type):
        return _hash_bytes(repr(arg).encode())
    if isinstance(arg, float):
        return arg.hex()
    if isinstance(arg, (list, tuple)):
        return "(" + ",".join(_key_part(item) for item in arg) + ")"
    return str(arg)


def _make_cache_key(*args, **kwargs) -> str:
    """
    Create a cache key from arguments.
    Arrays are hashed by content, floats by their exact hex form.
    """
    key_parts = [_key_part(arg) for arg in args]
    for k, v in sorted(kwargs.items()):
        key_parts.append(f"{k}={_key_part(v)}")
    return "|".join(key_parts)


def _freeze(result):
    if isinstance(result, np.ndarray):
        result.setflags(write=False)
    elif isinstance(result, tuple):
        for item in result:
            _freeze(item)
    return result


def cache_result(maxsize: int = 128) -> Callable:
    """
    Decorator for caching function results in memory.

    Args:
        maxsize: Maximum number of cached results to keep

    Usage:
        @cache_result(maxsize=32)
        def index_table(m):
            # Heavy computation here
            return table
    """
    def decorator(func: Callable) -> Callable:
        func_cache = {}
        func_cache_order = []  # For LRU eviction
        stats = {"hits": 0, "misses": 0}

        @wraps(func)
        def wrapper(*args, **kwargs):
            cache_key = _make_cache_key(func.__name__, *args, **kwargs)

            if cache_key in func_cache:
                # Move to end (most recently used)
                func_cache_order.remove(cache_key)
                func_cache_order.append(cache_key)
                stats["hits"] += 1
                return func_cache[cache_key]

            stats["misses"] += 1
            result = _freeze(func(*args, **kwargs))

            func_cache[cache_key] = result
            func_cache_order.append(cache_key)

            # LRU eviction
            while len(func_cache) > maxsize:
                oldest_key = func_cache_order.pop(0)
                del func_cache[oldest_key]

            return result

        def cache_clear():
            func_cache.clear()
            func_cache_order.clear()
            stats["hits"] = stats["misses"] = 0

        wrapper.cache_clear = cache_clear
        wrapper.cache_info = lambda: {
            'size': len(func_cache),
            'maxsize': maxsize,
            'hits': stats["hits"],
            'misses': stats["misses"],
            'function': func.__name__,
        }
        _cache_registry[f"{func.__module__}.{func.__qualname__}"] = wrapper

        return wrapper
    return decorator


def clear_all_caches():
    """Clear every registered cache (used between verification suites and in tests)."""
    for wrapper in _cache_registry.values():
        wrapper.cache_clear()


def get_cache_info() -> dict:
    """Get information about current cache state (for debugging)."""
    return {name: wrapper.cache_info() for name, wrapper in _cache_registry.items()}


# Specific helpers for the solver tables

def cache_quadrature_table(func):
    """Cache for quadrature rules and alpha-beta index tables (keyed by grid size)."""
    return cache_result(maxsize=16)(func)


def cache_linear_operator(func):
    """Cache for diagonalizer matrices and exponential weights."""
    return cache_result(maxsize=32)(func)


def cache_contour_kernel(func):
    """Cache for the alpha-beta kernel tables of one interface (reused across Neumann terms)."""
    return cache_result(maxsize=4)(func)
