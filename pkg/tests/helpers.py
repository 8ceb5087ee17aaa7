"""Shared builders for randomized test instances."""

import numpy as np

from trafficfill import FactorModel, SparseTensor3


def random_positions(rng, dims, n):
    """n distinct (i, j, k) index triples, as three int64 arrays."""
    total = dims[0] * dims[1] * dims[2]
    flat = rng.choice(total, size=n, replace=False)
    ii = (flat // (dims[1] * dims[2])).astype(np.int64)
    jj = ((flat // dims[2]) % dims[1]).astype(np.int64)
    kk = (flat % dims[2]).astype(np.int64)
    return ii, jj, kk


def random_tensor(rng, dims, n, high=3.0):
    ii, jj, kk = random_positions(rng, dims, n)
    return SparseTensor3(dims, ii, jj, kk, rng.uniform(0.0, high, size=n))


def random_model(rng, dims, rank, low=0.0, high=1.0):
    # entries uniform on (low, high]: strictly positive when low >= 0
    mats = tuple(low + (high - low) * (1.0 - rng.random((d, rank)))
                 for d in dims)
    return FactorModel(mats)


def factorized_tensor(rng, dims, rank, frac=1.0, low=0.0, high=1.0):
    """A ground-truth model plus a tensor holding its values on a random
    fraction of the cells."""
    truth = random_model(rng, dims, rank, low=low, high=high)
    total = dims[0] * dims[1] * dims[2]
    n = max(1, int(round(frac * total)))
    ii, jj, kk = random_positions(rng, dims, n)
    y = truth.predict_entries(ii, jj, kk)
    return truth, SparseTensor3(dims, ii, jj, kk, y)
