"""One-to-one note matching under onset, offset and pitch tolerances."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .midi import Note

# absorbs float noise from tick quantization; far below any tolerance of interest
_EPS = 1e-9


@dataclass(frozen=True)
class Tolerances:
    onset_tol: float = 0.050
    offset_min_tol: float = 0.050
    offset_ratio: float = 0.20
    pitch_tol: float = 0.0

    def __post_init__(self):
        for name in ("onset_tol", "offset_min_tol", "offset_ratio", "pitch_tol"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def offset_window(self, ref: Note) -> float:
        return max(self.offset_min_tol, self.offset_ratio * ref.duration)


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int], ...]
    n_ref: int
    n_est: int

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return self.n_est - self.tp

    @property
    def fn(self) -> int:
        return self.n_ref - self.tp


def max_bipartite_matching(edges: Iterable[tuple[int, int]],
                           n_left: int | None = None,
                           n_right: int | None = None) -> list[tuple[int, int]]:
    """Maximum-cardinality matching by Hopcroft-Karp.

    ``edges`` are ``(left, right)`` index pairs.  Edge order is a preference:
    a greedy pass takes edges in the order given before augmenting paths fill
    the matching out to maximum size, so callers control which of several
    equal-size matchings comes back.  Returns pairs sorted by left index.
    """
    edges = list(edges)
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        nbrs = adj.setdefault(u, [])
        if v not in nbrs:
            nbrs.append(v)
    if not adj:
        return []
    left = sorted(adj) if n_left is None else [u for u in range(n_left) if u in adj]
    inf = float("inf")
    match_l: dict[int, int] = {}
    match_r: dict[int, int] = {}
    dist: dict[int, float] = {}

    def bfs() -> bool:
        queue = deque()
        for u in left:
            if u in match_l:
                dist[u] = inf
            else:
                dist[u] = 0
                queue.append(u)
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_r.get(v)
                if w is None:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u: int) -> bool:
        # iterative DFS along the BFS layering; avoids recursion limits
        stack = [(u, iter(adj[u]))]
        path = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for v in it:
                w = match_r.get(v)
                if w is None:
                    path.append((node, v))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[w] == dist[node] + 1:
                    path.append((node, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[node] = inf
                stack.pop()
                if path:
                    path.pop()
        return False

    for u, v in edges:
        if u not in match_l and v not in match_r:
            match_l[u] = v
            match_r[v] = u

    while bfs():
        for u in left:
            if u not in match_l:
                dfs(u)
    return sorted(match_l.items())


def _onset_edges(ref: Sequence[Note], est: Sequence[Note], tol: Tolerances, with_offset: bool):
    edges = []
    for i, r in enumerate(ref):
        window = tol.offset_window(r) if with_offset else None
        for j, e in enumerate(est):
            if abs(r.pitch - e.pitch) > tol.pitch_tol + _EPS:
                continue
            d = abs(r.onset - e.onset)
            if d > tol.onset_tol + _EPS:
                continue
            if with_offset and abs(r.offset - e.offset) > window + _EPS:
                continue
            edges.append((d, i, j))
    # closest onsets first: the preferred pairs among equal-size matchings
    return [(i, j) for _, i, j in sorted(edges)]


def match_onset(ref: Sequence[Note], est: Sequence[Note], tol: Tolerances = Tolerances()) -> MatchResult:
    pairs = max_bipartite_matching(_onset_edges(ref, est, tol, False), len(ref), len(est))
    return MatchResult(tuple(pairs), len(ref), len(est))


def match_onset_offset(ref: Sequence[Note], est: Sequence[Note], tol: Tolerances = Tolerances()) -> MatchResult:
    pairs = max_bipartite_matching(_onset_edges(ref, est, tol, True), len(ref), len(est))
    return MatchResult(tuple(pairs), len(ref), len(est))
