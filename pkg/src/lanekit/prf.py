"""splitmix64-based keyed PRF and per-query pool permutation.

Lanes share only these functions and a 64-bit query seed; given the same pool
every lane computes the same order without talking to the others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lanekit._jit import njit, pick
from lanekit.core import U64_MASK

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB

_G = np.uint64(GOLDEN_GAMMA)
_M1 = np.uint64(MIX_MUL_1)
_M2 = np.uint64(MIX_MUL_2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


class DuplicateIdError(ValueError):
    pass


# -- scalar reference (Python ints) ------------------------------------------


def mix64(z: int) -> int:
    """splitmix64 output finalizer on a 64-bit integer."""
    z &= U64_MASK
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & U64_MASK
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & U64_MASK
    return z ^ (z >> 31)


def splitmix64_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & U64_MASK
    return state, mix64(state)


def hash_u64(x: int) -> int:
    """First splitmix64 output for state ``x`` (stateless mixing)."""
    return splitmix64_next(x)[1]


def derive_query_seed(global_seed: int, query_index: int) -> int:
    return hash_u64((global_seed ^ query_index) & U64_MASK)


@dataclass(frozen=True)
class PrfKey:
    query_seed: int

    @classmethod
    def for_query(cls, global_seed: int, query_index: int) -> "PrfKey":
        return cls(derive_query_seed(global_seed, query_index))


def prf_score(key: PrfKey | int, doc_id: int) -> int:
    seed = key.query_seed if isinstance(key, PrfKey) else int(key)
    return mix64((seed & U64_MASK) ^ hash_u64(int(doc_id)))


# -- vectorized kernels ------------------------------------------------------


@njit
def _prf_scores_numba(seed, ids):
    out = np.empty(ids.shape[0], dtype=np.uint64)
    for i in range(ids.shape[0]):
        z = ids[i] + _G
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        z = z ^ (z >> _S31)
        z = seed ^ z
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        out[i] = z ^ (z >> _S31)
    return out


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _prf_scores_numpy(seed, ids):
    # uint64 array arithmetic wraps modulo 2**64, matching the reference.
    return _mix_np(seed ^ _mix_np(ids + _G))


_prf_scores = pick(_prf_scores_numba, _prf_scores_numpy)


def prf_scores(key: PrfKey | int, ids) -> np.ndarray:
    """Vectorized ``prf_score`` over an id array."""
    seed = key.query_seed if isinstance(key, PrfKey) else int(key)
    ids = np.ascontiguousarray(ids, dtype=np.uint64)
    return _prf_scores(np.uint64(seed & U64_MASK), ids)


def permute_pool(pool, key: PrfKey | int, *, check_unique: bool = True) -> np.ndarray:
    """Sort ``pool`` by ``(prf_score, doc_id)`` ascending.

    Raises DuplicateIdError if the pool repeats an id.
    """
    ids = np.ascontiguousarray(pool, dtype=np.uint64)
    if ids.size <= 1:
        return ids.copy()
    if check_unique and np.unique(ids).size != ids.size:
        raise DuplicateIdError("candidate pool contains duplicate ids")
    scores = prf_scores(key, ids)
    return ids[np.lexsort((ids, scores))]
