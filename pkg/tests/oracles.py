"""Independent slow-path oracles shared by unit and acceptance tests.

Everything here deliberately avoids the vectorized production code paths:
scalar loops, exhaustive enumeration, pair counting.
"""
import itertools
import math

import numpy as np


def scalar_rho_p(row_a, row_b, p):
    """Normalized lp distance between two loss rows, one term at a time."""
    m = len(row_a)
    acc = 0.0
    for k in range(m):
        acc += abs(row_a[k] - row_b[k]) ** p
    return (acc / m) ** (1.0 / p)


def brute_force_kendall(x, y):
    """Tau-b by explicit pair counting."""
    n = len(x)
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            a = int(x[i] > x[j]) - int(x[i] < x[j])
            b = int(y[i] > y[j]) - int(y[i] < y[j])
            if a == 0:
                tied_x += 1
            if b == 0:
                tied_y += 1
            if a * b > 0:
                concordant += 1
            elif a * b < 0:
                discordant += 1
    n0 = n * (n - 1) // 2
    return (concordant - discordant) / math.sqrt((n0 - tied_x) * (n0 - tied_y))


def exact_covering_number(dist, delta):
    """Smallest number of closed delta-balls (centers in the set) covering it.

    Exponential set-cover search; keep n small.
    """
    n = dist.shape[0]
    balls = [set(np.nonzero(dist[i] <= delta)[0]) for i in range(n)]
    everything = set(range(n))
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            if set().union(*(balls[i] for i in combo)) == everything:
                return size
    return n
