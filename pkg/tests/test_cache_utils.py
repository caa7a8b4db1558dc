import numpy as np
import pytest

from modules.cache_utils import cache_result, clear_all_caches, get_cache_info
from modules.singular_quadrature import quadrature_rule, translation_indices


@cache_result(maxsize=2)
def _doubled(values):
    return np.asarray(values) * 2


def test_arrays_are_keyed_by_content(fresh_caches):
    first = _doubled(np.arange(3))
    second = _doubled(np.arange(3))
    assert first is second
    assert _doubled.cache_info()["hits"] == 1


def test_cached_arrays_are_read_only(fresh_caches):
    table = translation_indices(8)
    with pytest.raises(ValueError):
        table[0, 0] = 1


def test_lru_eviction(fresh_caches):
    for n in range(4):
        _doubled(np.arange(n + 1))
    assert _doubled.cache_info()["size"] == 2


def test_clear_all_caches():
    quadrature_rule(32)
    clear_all_caches()
    info = get_cache_info()
    assert all(entry["size"] == 0 for entry in info.values())
    assert any(name.endswith("quadrature_rule") for name in info)
