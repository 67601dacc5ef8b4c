"""Joint-measurability structure of Pauli estimation observables.

Two single-coefficient estimation observables can share a sample exactly when
their Pauli strings commute, so the planning problem is: partition a degree
set into commuting cliques and split the sample budget across the cliques.
This module provides the symplectic commutation test, the commutation graph,
greedy and exhaustive clique-partition search scored by the estimation-error
functional, and the optimal integer batch allocation.

Natural logarithms are used throughout the score and allocation formulas.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .pauli import DegreeSet, PauliString

EXHAUSTIVE_MAX_SIZE = 12
GREEDY_RESTARTS = 32
GREEDY_MASTER_SEED = 0x51C0FFEE


def pauli_commute(s: PauliString, t: PauliString) -> bool:
    """True when the two strings' operators commute.

    Symplectic rule: the strings commute iff the number of coordinates where
    both are non-identity and different is even, i.e.
    ``parity(s.x & t.z) == parity(s.z & t.x)``.
    """
    if s.d != t.d:
        raise ValueError(f"length mismatch: {s.d} vs {t.d}")
    a = (s.x_mask & t.z_mask).bit_count() & 1
    b = (s.z_mask & t.x_mask).bit_count() & 1
    return a == b


@dataclass(frozen=True)
class CommutationGraph:
    """Commutation adjacency over a degree set; self-loops are always true."""

    nodes: DegreeSet
    adjacency: np.ndarray

    def __post_init__(self):
        n = len(self.nodes)
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency shape does not match node count")


def build_commutation_graph(nodes: DegreeSet) -> CommutationGraph:
    strings = nodes.strings
    n = len(strings)
    adj = np.ones((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            c = pauli_commute(strings[i], strings[j])
            adj[i, j] = adj[j, i] = c
    return CommutationGraph(nodes, adj)


@dataclass(frozen=True)
class Cover:
    """A partition of a degree set into commuting cliques."""

    subsets: tuple[DegreeSet, ...]

    def __post_init__(self):
        if not self.subsets:
            raise ValueError("a cover needs at least one subset")
        if any(len(b) == 0 for b in self.subsets):
            raise ValueError("cover subsets must be nonempty")
        seen: set[PauliString] = set()
        for b in self.subsets:
            for s in b:
                if s in seen:
                    raise ValueError(f"string {s} appears in more than one subset")
                seen.add(s)

    @property
    def m(self) -> int:
        return len(self.subsets)

    @property
    def d(self) -> int:
        return self.subsets[0].d

    @cached_property
    def covered(self) -> DegreeSet:
        return DegreeSet.of(self.d, (s for b in self.subsets for s in b))

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.subsets)

    def canonical(self) -> "Cover":
        """Subsets reordered lexicographically by content; used for tie-breaks."""
        return Cover(tuple(sorted(self.subsets, key=lambda b: b.strings)))

    def _sort_key(self):
        return tuple(b.strings for b in self.canonical().subsets)

    def to_text(self) -> str:
        return "\n".join(",".join(str(s) for s in b) for b in self.subsets) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Cover":
        subsets = []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln:
                continue
            strings = [PauliString.from_digits(tok.strip()) for tok in ln.split(",")]
            subsets.append(DegreeSet.of(strings[0].d, strings))
        return cls(tuple(subsets))


def is_clique(subset: Iterable[PauliString]) -> bool:
    strings = list(subset)
    return all(
        pauli_commute(s, t) for s, t in itertools.combinations(strings, 2)
    )


def check_cover(cover: Cover, nodes: DegreeSet) -> None:
    """Raise unless the cover partitions ``nodes`` into commuting cliques."""
    if set(cover.covered) != set(nodes):
        raise ValueError("cover does not cover exactly the requested degree set")
    for b in cover.subsets:
        if not is_clique(b):
            raise ValueError(f"subset {{{','.join(map(str, b))}}} is not mutually commuting")


def greedy_cover(graph: CommutationGraph, ordering: Sequence[int]) -> Cover:
    """First-fit clique partition: scan nodes in the given order, each node
    joining the first subset it commutes with entirely, else opening a new one."""
    n = len(graph.nodes)
    if sorted(ordering) != list(range(n)):
        raise ValueError("ordering must be a permutation of the node indices")
    adj = graph.adjacency
    members: list[list[int]] = []
    # compat[k] marks the nodes commuting with every current member of subset k
    compat: list[np.ndarray] = []
    for v in ordering:
        for k, mask in enumerate(compat):
            if mask[v]:
                members[k].append(v)
                compat[k] = mask & adj[v]
                break
        else:
            members.append([v])
            compat.append(adj[v].copy())
    strings = graph.nodes.strings
    subsets = tuple(DegreeSet.of(graph.nodes.d, [strings[i] for i in blk]) for blk in members)
    return Cover(subsets)


def batch_weights(cover: Cover, delta: float) -> np.ndarray:
    """Per-subset weights ``|B_j| * ln(2 |B_j| / delta)`` used by score and allocation."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    sizes = np.array(cover.sizes(), dtype=float)
    return sizes * np.log(2.0 * sizes / delta)


def cover_score(cover: Cover, n: int, delta: float) -> float:
    """Squared estimation-error functional ``(sum_j sqrt(w_j / n))^2``.

    The probability-(1-delta) bound on the summed squared coefficient errors
    is ``8 *`` this value once batches are allocated optimally; the factor 8
    is carried separately by callers that report error bounds.
    """
    if n < 1:
        raise ValueError("n must be positive")
    w = batch_weights(cover, delta)
    return float(np.sqrt(w / n).sum() ** 2)


def singleton_cover(nodes: DegreeSet) -> Cover:
    """The always-valid cover made of one subset per string."""
    return Cover(tuple(DegreeSet.of(nodes.d, [s]) for s in nodes))


def _ordering_candidates(n: int, restarts: int, master_seed: int):
    yield list(range(n))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed)))
    for _ in range(restarts):
        yield list(rng.permutation(n))


def _iter_clique_partitions(adj_masks: list[int], n: int):
    """Yield every partition of ``range(n)`` into cliques, as lists of index lists.

    Nodes are assigned in index order to an existing compatible block or to a
    fresh block, so each clique partition is produced exactly once.
    """
    blocks: list[list[int]] = []
    compat: list[int] = []  # bitmask of nodes compatible with all block members

    def rec(i: int):
        if i == n:
            yield [list(b) for b in blocks]
            return
        bit = 1 << i
        for k in range(len(blocks)):
            if compat[k] & bit:
                blocks[k].append(i)
                saved = compat[k]
                compat[k] = saved & adj_masks[i]
                yield from rec(i + 1)
                compat[k] = saved
                blocks[k].pop()
        blocks.append([i])
        compat.append(adj_masks[i])
        yield from rec(i + 1)
        blocks.pop()
        compat.pop()

    yield from rec(0)


def exhaustive_best_cover(nodes: DegreeSet, n: int, delta: float) -> Cover:
    """True minimizer of the score over all clique partitions; small sets only."""
    if len(nodes) > EXHAUSTIVE_MAX_SIZE:
        raise ValueError(
            f"exhaustive cover search is capped at {EXHAUSTIVE_MAX_SIZE} strings; "
            f"got {len(nodes)}"
        )
    graph = build_commutation_graph(nodes)
    size = len(nodes)
    masks = [
        int(sum(1 << j for j in range(size) if graph.adjacency[i, j]))
        for i in range(size)
    ]
    strings = nodes.strings
    best: tuple[float, tuple, Cover] | None = None
    for blocks in _iter_clique_partitions(masks, size):
        cover = Cover(
            tuple(DegreeSet.of(nodes.d, [strings[i] for i in blk]) for blk in blocks)
        ).canonical()
        key = (cover_score(cover, n, delta), cover._sort_key())
        if best is None or key < (best[0], best[1]):
            best = (key[0], key[1], cover)
    assert best is not None
    return best[2]


def best_cover(
    nodes: DegreeSet,
    n: int,
    delta: float,
    strategy: str = "greedy",
    *,
    restarts: int = GREEDY_RESTARTS,
    master_seed: int = GREEDY_MASTER_SEED,
) -> Cover:
    """Search for a low-score commuting-clique partition of ``nodes``.

    ``greedy`` runs the first-fit heuristic over the lexicographic ordering
    plus ``restarts`` seeded random orderings and keeps the best score (ties
    broken by canonical subset content, so the result is deterministic).
    ``exhaustive`` enumerates all clique partitions and is capped at
    ``EXHAUSTIVE_MAX_SIZE`` strings.
    """
    if len(nodes) == 0:
        raise ValueError("cannot cover an empty degree set")
    if strategy == "exhaustive":
        return exhaustive_best_cover(nodes, n, delta)
    if strategy != "greedy":
        raise ValueError(f"unknown cover strategy {strategy!r}")
    graph = build_commutation_graph(nodes)
    best: tuple[float, tuple, Cover] | None = None
    for ordering in _ordering_candidates(len(nodes), restarts, master_seed):
        cover = greedy_cover(graph, ordering).canonical()
        key = (cover_score(cover, n, delta), cover._sort_key())
        if best is None or key < (best[0], best[1]):
            best = (key[0], key[1], cover)
    assert best is not None
    return best[2]


@dataclass(frozen=True)
class BatchPlan:
    """Integer sample counts, one per cover subset, summing to the budget."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if any(s < 0 for s in self.sizes):
            raise ValueError("batch sizes must be nonnegative")

    @property
    def total(self) -> int:
        return sum(self.sizes)


def allocate_batches(n: int, cover: Cover, delta: float) -> BatchPlan:
    """Split ``n`` samples across the cover subsets to minimize ``sum_j w_j / n_j``.

    The real-valued optimum is ``n_j* = n sqrt(w_j) / sum_k sqrt(w_k)``; the
    integer plan is built greedily, starting from one sample per subset and
    repeatedly giving the next sample to the subset with the largest marginal
    decrease ``w_j / (n_j (n_j + 1))``.  The marginals are decreasing, so the
    greedy plan is an exact integer optimum.
    """
    m = cover.m
    if n < m:
        raise ValueError(f"need at least one sample per subset: n={n} < m={m}")
    w = batch_weights(cover, delta)
    if m == 1:
        return BatchPlan((n,))
    sizes = [1] * m
    # heap of (-marginal decrease, subset index); index breaks exact ties
    heap = [(-w[j] / 2.0, j) for j in range(m)]
    heapq.heapify(heap)
    for _ in range(n - m):
        neg, j = heapq.heappop(heap)
        sizes[j] += 1
        x = sizes[j]
        heapq.heappush(heap, (-w[j] / (x * (x + 1)), j))
    return BatchPlan(tuple(sizes))


def allocation_objective(sizes: Sequence[int], cover: Cover, delta: float) -> float:
    """The quantity ``sum_j w_j / n_j`` that the allocation minimizes."""
    w = batch_weights(cover, delta)
    sizes = np.asarray(sizes, dtype=float)
    if np.any(sizes <= 0):
        return math.inf
    return float((w / sizes).sum())
