"""Random small instances shared by the relaxation and acceptance tests."""

import numpy as np

from lowrank_sdp.library import RRRInstance, encode_separable
from lowrank_sdp.problem import LowRankQuadraticProblem, ObservedMatrix


def random_quadratic(seed, max_side=4, lams=(0.0, 0.5), ks=(1, 2)):
    rng = np.random.default_rng(seed)
    n, m = (int(v) for v in rng.integers(1, max_side + 1, 2))
    nm = n * m
    G = rng.standard_normal((nm, nm))
    H = G @ G.T / nm + 0.5 * np.eye(nm)
    D = rng.standard_normal((n, m))
    lam = float(lams[seed % len(lams)])
    k = min(int(rng.choice(ks)), n)
    return LowRankQuadraticProblem(n, m, H, D, lam=lam, k=k)


def random_separable(seed, max_side=4):
    rng = np.random.default_rng(10_000 + seed)
    n, m = (int(v) for v in rng.integers(1, max_side + 1, 2))
    W = rng.random((n, m)) * (rng.random((n, m)) < 0.7)
    T = rng.standard_normal((n, m))
    gamma = float(10 ** rng.uniform(-1, 2))
    return encode_separable(gamma, W, T, lam=float([0.0, 0.5][seed % 2]), k=min(1 + seed % 2, n))


def random_observed(seed, n=None, m=None, rank=2, density=0.6, eps=0.0):
    rng = np.random.default_rng(20_000 + seed)
    n = n or int(rng.integers(2, 5))
    m = m or int(rng.integers(2, 5))
    r = min(rank, n, m)
    A = rng.standard_normal((n, r)) @ rng.standard_normal((r, m)) + eps * rng.standard_normal((n, m))
    mask = rng.random((n, m)) < density
    return ObservedMatrix.from_mask(A, mask)


def random_rrr(seed):
    rng = np.random.default_rng(30_000 + seed)
    p, m = (int(v) for v in rng.integers(2, 5, 2))
    n = p + int(rng.integers(2, 5))  # full column rank design
    A = rng.standard_normal((n, p))
    B = rng.standard_normal((n, m))
    return RRRInstance(A, B, float(rng.uniform(0.1, 2.0)))
