"""Independent reference computations used only by the tests."""
from functools import lru_cache
from itertools import permutations


def brute_force_max_matching(edges, n_left, n_right):
    """Largest one-to-one pairing, by exhaustive search over assignments."""
    adj = [frozenset(v for u, v in edges if u == i) for i in range(n_left)]

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == n_left:
            return 0
        result = best(i + 1, used)  # leave i unmatched
        for v in adj[i]:
            if not used >> v & 1:
                result = max(result, 1 + best(i + 1, used | (1 << v)))
        return result

    return best(0, 0)


def enumerate_matchings_small(edges, n_left, n_right):
    """Maximum via explicit permutation enumeration (tiny graphs only)."""
    edge_set = set(edges)
    n = max(n_left, n_right)
    best = 0
    for perm in permutations(range(n)):
        best = max(best, sum((i, perm[i]) in edge_set for i in range(n_left)))
    return best


def two_pass_mean_sd(xs):
    n = len(xs)
    mean = sum(xs) / n
    return mean, (sum((x - mean) ** 2 for x in xs) / (n - 1)) ** 0.5
