"""Independent re-implementation of the hub-based long-range sampler.

Prints the (hub, out-degree) sequence for seed 42 on a 16x16 grid, 10 hubs, s = 2.
"""
from rng_oracle import Xoshiro

ROWS = COLS = 16


def cheb(a, b):
    return max(abs(a // COLS - b // COLS), abs(a % COLS - b % COLS))


def sample(rng, pool, k):
    pool = list(pool)
    k = min(k, len(pool))
    for i in range(k):
        j = i + rng.below(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def zipf(rng, s, support):
    norm = 0.0
    for k in range(1, support + 1):
        norm += float(k) ** -s
    target = rng.uniform() * norm
    acc = 0.0
    for k in range(1, support + 1):
        acc += float(k) ** -s
        if target < acc:
            return k
    return support


def run(seed, hubs_n, s=2.0, cap=6):
    rng = Xoshiro(seed)
    active = list(range(ROWS * COLS))
    lists = [[] for _ in active]
    out = []
    for hub in sample(rng, active, hubs_n):
        d = min(cap, zipf(rng, s, len(active)))
        eligible = [j for j in active if j != hub and cheb(hub, j) > 1 and j not in lists[hub]]
        for t in sample(rng, eligible, d):
            lists[hub].append(t)
            lists[t].append(hub)
        out.append((hub, d))
    return out


if __name__ == "__main__":
    print(run(42, 10))
