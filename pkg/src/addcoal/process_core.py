"""Additive coalescent chains and their merge-event streams.

Starting from n size-1 clusters, pairs merge until one cluster of mass n
remains; a pair of masses (x, y) merges with probability proportional to
x + y.  Three statistically equivalent generators are provided:

* the direct two-stage chain (size-biased predator pick, uniform prey),
* a uniform labeled tree with a uniform edge ordering,
* circular parking with linear probing.

Each of the n-1 merge events records the ordered sizes (s, S), the
size-biased side L and its complement R = s + S - L, an auxiliary
uniform u, and a displacement D uniform on {0, ..., L-1} (in the parking
model D is the physical probe distance).
"""

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _replay


class Embedding(str, enum.Enum):
    """The three equivalent generators of the merge-event stream."""

    DIRECT = "direct"
    TREE = "tree"
    PARKING = "parking"


@dataclass(frozen=True)
class MergeEvent:
    """One coalescence: step k (1-based), sizes, uniforms, displacement."""

    k: int
    s: int
    S: int
    L: int
    R: int
    u: float
    D: int


class EventBatch:
    """Columnar sequence of the n-1 merge events of one chain run."""

    __slots__ = ("n", "s", "S", "L", "R", "u", "D")

    def __init__(self, n, s, S, L, R, u, D):
        self.n = n
        self.s = s
        self.S = S
        self.L = L
        self.R = R
        self.u = u
        self.D = D

    def __len__(self):
        return self.n - 1

    def __getitem__(self, i):
        if isinstance(i, slice):
            raise TypeError("EventBatch does not support slicing")
        i = int(i)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return MergeEvent(
            k=i + 1,
            s=int(self.s[i]),
            S=int(self.S[i]),
            L=int(self.L[i]),
            R=int(self.R[i]),
            u=float(self.u[i]),
            D=int(self.D[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def largest_cluster_at(self, step):
        """Size of the largest cluster after `step` merges (0 <= step <= n-1)."""
        if not 0 <= step <= len(self):
            raise ValueError(f"step must be in [0, {len(self)}]")
        if step == 0:
            return 1
        # merged sizes only ever grow, so the running max is the largest cluster
        return int(np.max(self.s[:step] + self.S[:step]))

    def largest_cluster_curve(self):
        """Largest cluster after each step, length n (index = step count)."""
        out = np.empty(self.n, np.int64)
        out[0] = 1
        np.maximum.accumulate(self.s + self.S, out=out[1:])
        return out

    def spectrum_at(self, step):
        """Cluster-size spectrum {size: count} after `step` merges."""
        if not 0 <= step <= len(self):
            raise ValueError(f"step must be in [0, {len(self)}]")
        spectrum = {1: self.n}
        for i in range(step):
            for size in (int(self.s[i]), int(self.S[i])):
                left = spectrum[size] - 1
                if left:
                    spectrum[size] = left
                else:
                    del spectrum[size]
            merged = int(self.s[i] + self.S[i])
            spectrum[merged] = spectrum.get(merged, 0) + 1
        return spectrum


class ClusterState:
    """Disjoint-set view of the current partition of n unit elements.

    Keeps per-root sizes and a dense array of live roots with back
    pointers so that both the size-biased pick (uniform element, then
    find) and the uniform cluster pick are exact and O(1) amortized.
    """

    __slots__ = ("n", "parent", "size", "roots", "root_pos", "clusters", "merges")

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be a positive integer")
        self.n = n
        self.parent = np.arange(n)
        self.size = np.ones(n, np.int64)
        self.roots = np.arange(n)
        self.root_pos = np.arange(n)
        self.clusters = n
        self.merges = 0

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return int(i)

    def live_roots(self):
        return self.roots[: self.clusters]

    def largest_cluster(self) -> int:
        return int(self.size[self.live_roots()].max())

    def cluster_spectrum(self):
        return dict(Counter(int(x) for x in self.size[self.live_roots()]))


def new_monodisperse(n: int) -> ClusterState:
    """State with n clusters of size 1."""
    return ClusterState(n)


def largest_cluster(state: ClusterState) -> int:
    return state.largest_cluster()


def cluster_spectrum(state: ClusterState):
    return state.cluster_spectrum()


def step_direct(state: ClusterState, rng) -> MergeEvent:
    """Advance the direct chain by one merge, mutating `state`.

    Draw order: predator element, prey index, u, u'.  The predator is the
    cluster of a uniform element (probability |P|/n); the prey is uniform
    among the remaining clusters, realized by swapping the predator out of
    the live-roots array.
    """
    if state.clusters < 2:
        raise ValueError("cannot merge: fewer than two clusters remain")
    a = state.find(int(rng.integers(0, state.n)))
    ia = int(state.root_pos[a])
    last = int(state.roots[state.clusters - 1])
    state.roots[ia] = last
    state.root_pos[last] = ia
    j = int(rng.integers(0, state.clusters - 1))
    b = int(state.roots[j])
    x = int(state.size[a])
    y = int(state.size[b])
    if x < y:
        state.parent[a] = b
        r = b
    else:
        state.parent[b] = a
        r = a
    state.roots[j] = r
    state.root_pos[r] = j
    state.size[r] = x + y
    state.clusters -= 1
    state.merges += 1
    u = float(rng.random())
    d = int(rng.random() * x)
    return MergeEvent(k=state.merges, s=min(x, y), S=max(x, y), L=x, R=y, u=u, D=d)


def _check_n(n):
    if n < 2:
        raise ValueError("simulation needs n >= 2")


def simulate_direct(n: int, rng) -> EventBatch:
    """Full direct-chain run.  Draw order: elements, prey picks, u, u'."""
    _check_n(n)
    elem = rng.integers(0, n, size=n - 1)
    prey_u = rng.random(n - 1)
    u = rng.random(n - 1)
    uprime = rng.random(n - 1)
    s, S, L, R, D = _replay.direct_chain_replay(n, elem, prey_u, uprime)
    return EventBatch(n, s, S, L, R, u, D)


def simulate_parking(n: int, rng) -> EventBatch:
    """Full parking run.  Draw order: first tries, u.

    D is the probed distance, 0 when the first try is empty.
    """
    _check_n(n)
    tries = rng.integers(0, n, size=n - 1)
    u = rng.random(n - 1)
    s, S, L, R, D = _replay.parking_replay(n, tries)
    return EventBatch(n, s, S, L, R, u, D)


def simulate_spanning_tree(n: int, rng) -> EventBatch:
    """Full spanning-tree run.  Draw order: Prufer sequence, edge order, u, u'.

    The tree is uniform over the n**(n-2) labeled trees (Prufer decode),
    the edge insertion order uniform over the (n-1)! permutations, and the
    tree is rooted at vertex 0 to orient bottom/top.
    """
    _check_n(n)
    prufer = rng.integers(0, n, size=max(0, n - 2))
    perm = rng.permutation(n - 1)
    u = rng.random(n - 1)
    uprime = rng.random(n - 1)
    par = _replay.tree_parents_from_prufer(n, prufer)
    s, S, L, R, D = _replay.tree_replay(n, par, perm, uprime)
    return EventBatch(n, s, S, L, R, u, D)


_SIMULATORS = {
    Embedding.DIRECT: simulate_direct,
    Embedding.TREE: simulate_spanning_tree,
    Embedding.PARKING: simulate_parking,
}


def simulate(n: int, rng, embedding=Embedding.DIRECT) -> EventBatch:
    return _SIMULATORS[Embedding(embedding)](n, rng)
