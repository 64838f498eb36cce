"""Exact ground truth at desk scale: enumerations, DP, closed formulas.

Everything here is either an exhaustive enumeration over equally likely
configurations (parking first-try vectors, labeled trees x edge orders)
or a forward dynamic program over integer partitions with exact rational
transition probabilities.  These serve as oracles for the probabilistic
components: at small n the three routes must produce identical
event-sequence distributions.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from . import _replay
from .cost_engine import conditional_mean

PARKING_ENUM_MAX = 8  # 8^7 ~ 2.1e6 first-try vectors
TREE_ENUM_MAX = 6  # 6^4 * 5! = 155,520 ordered trees
DP_MAX = 20  # p(20) = 627 partition states
DP_SEQUENCE_MAX = 7
PMK_EXACT_MAX = 30


# ---------------------------------------------------------------------------
# closed formulas
# ---------------------------------------------------------------------------


def p_mk(m: int, k: int):
    """P(final predator block of an m-chain has size k) = P(L_{m-1,m} = k).

    Exact Fraction for m <= 30, log-space float beyond.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if not 1 <= k <= m - 1:
        raise ValueError(f"k must be in [1, {m - 1}]")
    if m <= PMK_EXACT_MAX:
        num = math.comb(m - 2, k - 1) * k ** (k - 1)
        if m - k >= 2:
            num *= (m - k) ** (m - k - 2)
        return Fraction(num, m ** (m - 2))
    logp = (
        _log_comb(m - 2, k - 1)
        + (k - 1) * math.log(k)
        + (m - k - 2) * math.log(m - k)
        - (m - 2) * math.log(m)
    )
    return math.exp(logp)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def borel_pmf(k: int) -> float:
    """Borel(1) mass k^(k-1) e^-k / k!, the m -> infinity limit of p_{m, m-k}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.exp((k - 1) * math.log(k) - k - math.lgamma(k + 1))


def borel_total_mass(kmax: int = 5000) -> float:
    """Total Borel(1) mass via truncation plus an integral tail estimate.

    The distribution is critical (k^-3/2 tail, infinite mean), so the bare
    partial sums converge like 1/sqrt(kmax); the midpoint-rule integral of
    the smooth continuation over [kmax + 1/2, inf) recovers the tail to
    ~1e-10.  The exact total is 1.
    """
    from scipy.integrate import quad

    def density(x):
        return math.exp((x - 1.0) * math.log(x) - x - math.lgamma(x + 1.0))

    head = sum(borel_pmf(k) for k in range(1, kmax + 1))
    tail, _ = quad(density, kmax + 0.5, math.inf, limit=400)
    return head + tail


def block_config_count(n: int, k: int, blocks) -> int:
    """Number of k-car parking configurations with the given block sizes.

    blocks = (b_0, ..., b_{n-k}) lists the n-k+1 block sizes clockwise,
    starting from the block that receives the k-th arrival; the count is

        multinomial(k-1; b_0 - 1, ..., b_{n-k} - 1) * n * b_0 * prod b_i^(b_i - 2).

    Infeasible vectors (wrong total, or a part < 1) count 0.
    """
    blocks = tuple(int(b) for b in blocks)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}]")
    if len(blocks) != n - k + 1:
        raise ValueError(f"expected {n - k + 1} block sizes, got {len(blocks)}")
    if min(blocks) < 1 or sum(blocks) != n:
        return 0
    count = math.factorial(k - 1)
    for b in blocks:
        count //= math.factorial(b - 1)
    count *= n * blocks[0]
    for b in blocks:
        if b >= 2:
            count *= b ** (b - 2)
    return count


def parking_final_merge_marginal(m: int):
    """Exact law of the final merge's L over all m**(m-1) parking configs."""
    if not 2 <= m <= PARKING_ENUM_MAX:
        raise ValueError(f"parking enumeration supports 2 <= m <= {PARKING_ENUM_MAX}")
    counts = _replay.parking_last_block_counts(m)
    total = m ** (m - 1)
    return {k: Fraction(int(counts[k]), total) for k in range(1, m) if counts[k]}


# ---------------------------------------------------------------------------
# event-sequence distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventSequenceDistribution:
    """Exact law of a full merge-event sequence.

    Keys are tuples of per-step tuples, in field order; values are exact
    Fractions summing to 1.
    """

    n: int
    fields: tuple
    probs: dict

    def project(self, fields) -> "EventSequenceDistribution":
        fields = tuple(fields)
        idx = [self.fields.index(f) for f in fields]
        out = {}
        for seq, p in self.probs.items():
            key = tuple(tuple(step[i] for i in idx) for step in seq)
            out[key] = out.get(key, Fraction(0)) + p
        return EventSequenceDistribution(self.n, fields, out)

    def marginal(self, step: int, field: str):
        """Law of one field at one step (1-based)."""
        i = self.fields.index(field)
        out = {}
        for seq, p in self.probs.items():
            v = seq[step - 1][i]
            out[v] = out.get(v, Fraction(0)) + p
        return out

    def joint(self, step: int, fields):
        idx = [self.fields.index(f) for f in fields]
        out = {}
        for seq, p in self.probs.items():
            key = tuple(seq[step - 1][i] for i in idx)
            out[key] = out.get(key, Fraction(0)) + p
        return out

    def conditional_mean(self, step: int, target: str, given: str):
        """{value of `given`: E[target | given = value]} at one step, exact."""
        joint = self.joint(step, (given, target))
        mass = {}
        weighted = {}
        for (g, tval), p in joint.items():
            mass[g] = mass.get(g, Fraction(0)) + p
            weighted[g] = weighted.get(g, Fraction(0)) + p * tval
        return {g: weighted[g] / mass[g] for g in mass}

    def tv_distance(self, other: "EventSequenceDistribution") -> Fraction:
        if self.fields != other.fields:
            raise ValueError("distributions carry different fields")
        keys = set(self.probs) | set(other.probs)
        zero = Fraction(0)
        diff = sum(abs(self.probs.get(k, zero) - other.probs.get(k, zero)) for k in keys)
        return diff / 2


def _parking_events(n: int, tries) -> tuple:
    """Replay one parking config; (s, S, L, D) per arrival.  Mirrors the
    array kernel's block bookkeeping with plain ints."""
    parent = list(range(n))
    bsize = [1] * n
    empt = list(range(n))
    events = []
    for t in tries:
        e = t
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        ra = e
        p = empt[ra]
        d = (p - t + n) % n
        e = (p + 1) % n
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        rb = e
        x = bsize[ra]
        y = bsize[rb]
        if x < y:
            parent[ra] = rb
            r = rb
        else:
            parent[rb] = ra
            r = ra
        bsize[r] = x + y
        empt[r] = empt[rb]
        events.append((min(x, y), max(x, y), x, d))
    return tuple(events)


def enumerate_parking(n: int) -> EventSequenceDistribution:
    """Exact law of (s, S, L, D) sequences over all n**(n-1) first-try vectors."""
    if not 2 <= n <= PARKING_ENUM_MAX:
        raise ValueError(f"parking enumeration supports 2 <= n <= {PARKING_ENUM_MAX}")
    counts = Counter(
        _parking_events(n, tries) for tries in itertools.product(range(n), repeat=n - 1)
    )
    total = n ** (n - 1)
    probs = {seq: Fraction(c, total) for seq, c in counts.items()}
    return EventSequenceDistribution(n, ("s", "S", "L", "D"), probs)


def _tree_parents(n: int, prufer) -> list:
    """Pure-python Prufer decode + rooting at 0 (reference for the kernel)."""
    degree = [1] * n
    for v in prufer:
        degree[v] += 1
    edges = []
    ptr = 0
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    for v in prufer:
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1 and v < ptr:
            leaf = v
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    edges.append((leaf, n - 1))
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    par = [-1] * n
    stack = [0]
    seen = [False] * n
    seen[0] = True
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                par[w] = v
                stack.append(w)
    return par


def _tree_events(n: int, par, order) -> tuple:
    """Insert edges (par[v], v) for v = order[i] + 1; (s, S, L) per step."""
    parent = list(range(n))
    csize = [1] * n
    events = []
    for idx in order:
        v = idx + 1
        e = par[v]
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        ra = e
        e = v
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        rb = e
        x = csize[ra]
        y = csize[rb]
        if x < y:
            parent[ra] = rb
            r = rb
        else:
            parent[rb] = ra
            r = ra
        csize[r] = x + y
        events.append((min(x, y), max(x, y), x))
    return tuple(events)


def enumerate_spanning_trees(n: int) -> EventSequenceDistribution:
    """Exact law of (s, S, L) sequences over all trees x edge orders."""
    if not 2 <= n <= TREE_ENUM_MAX:
        raise ValueError(f"tree enumeration supports 2 <= n <= {TREE_ENUM_MAX}")
    counts = Counter()
    orders = list(itertools.permutations(range(n - 1)))
    for prufer in itertools.product(range(n), repeat=max(0, n - 2)):
        par = _tree_parents(n, prufer)
        for order in orders:
            counts[_tree_events(n, par, order)] += 1
    total = n ** (n - 2) * math.factorial(n - 1)
    probs = {seq: Fraction(c, total) for seq, c in counts.items()}
    return EventSequenceDistribution(n, ("s", "S", "L"), probs)


# ---------------------------------------------------------------------------
# partition dynamic program
# ---------------------------------------------------------------------------


def _pair_weights(state):
    """Distinct unordered size pairs {x, y} of a partition with their
    multiplicities (number of cluster pairs realizing them)."""
    cnt = Counter(state)
    sizes = sorted(cnt)
    for i, x in enumerate(sizes):
        c = cnt[x]
        if c >= 2:
            yield x, x, c * (c - 1) // 2
        for y in sizes[i + 1 :]:
            yield x, y, c * cnt[y]


def _merge_state(state, x, y):
    out = list(state)
    out.remove(x)
    out.remove(y)
    out.append(x + y)
    out.sort(reverse=True)
    return tuple(out)


@dataclass(frozen=True)
class DpStep:
    k: int
    joint_sS: dict  # (s, S) -> Fraction
    joint_LR: dict  # (L, R) -> Fraction


class PartitionDp:
    """Forward DP over canonical partitions of n with exact probabilities.

    A pair of clusters with sizes (x, y) among m live clusters merges with
    probability (x + y) / (n (m - 1)); given the pair, L = x with
    probability x / (x + y).
    """

    def __init__(self, n: int):
        if not 2 <= n <= DP_MAX:
            raise ValueError(f"partition DP supports 2 <= n <= {DP_MAX}")
        self.n = n
        self.steps = []
        dist = {(1,) * n: Fraction(1)}
        for k in range(1, n):
            m = n - k + 1
            joint_ss = {}
            joint_lr = {}
            ndist = {}
            for state, p in dist.items():
                for x, y, ways in _pair_weights(state):
                    pr = p * Fraction((x + y) * ways, n * (m - 1))
                    key = (x, y)
                    joint_ss[key] = joint_ss.get(key, Fraction(0)) + pr
                    frac_x = Fraction(x, x + y)
                    lr = (x, y)
                    joint_lr[lr] = joint_lr.get(lr, Fraction(0)) + pr * frac_x
                    lr = (y, x)
                    joint_lr[lr] = joint_lr.get(lr, Fraction(0)) + pr * (1 - frac_x)
                    ns = _merge_state(state, x, y)
                    ndist[ns] = ndist.get(ns, Fraction(0)) + pr
            self.steps.append(DpStep(k, joint_ss, joint_lr))
            dist = ndist
        self.final = dist

    def expected_step_cost(self, functional, k: int) -> Fraction:
        step = self.steps[k - 1]
        return sum(
            (p * conditional_mean(functional, x, y) for (x, y), p in step.joint_sS.items()),
            Fraction(0),
        )

    def expected_cumulative_cost(self, functional, upto: int | None = None) -> Fraction:
        upto = self.n - 1 if upto is None else upto
        return sum(
            (self.expected_step_cost(functional, k) for k in range(1, upto + 1)),
            Fraction(0),
        )

    def l_marginal(self, k: int):
        out = {}
        for (l, _), p in self.steps[k - 1].joint_LR.items():
            out[l] = out.get(l, Fraction(0)) + p
        return out

    def conditional_r_given_l(self, k: int):
        """{l: E[R_k | L_k = l]}, exact."""
        mass = {}
        weighted = {}
        for (l, r), p in self.steps[k - 1].joint_LR.items():
            mass[l] = mass.get(l, Fraction(0)) + p
            weighted[l] = weighted.get(l, Fraction(0)) + p * r
        return {l: weighted[l] / mass[l] for l in mass}


def partition_dp(n: int) -> PartitionDp:
    return PartitionDp(n)


def dp_sequence_distribution(n: int) -> EventSequenceDistribution:
    """Exact law of (s, S, L) sequences under the two-stage chain, by
    enumerating all partition paths with their size-biased splits."""
    if not 2 <= n <= DP_SEQUENCE_MAX:
        raise ValueError(f"DP sequence enumeration supports 2 <= n <= {DP_SEQUENCE_MAX}")
    frontier = {(): ((1,) * n, Fraction(1))}
    for k in range(1, n):
        m = n - k + 1
        nxt = {}
        for prefix, (state, p) in frontier.items():
            for x, y, ways in _pair_weights(state):
                pr = p * Fraction((x + y) * ways, n * (m - 1))
                ns = _merge_state(state, x, y)
                if x == y:
                    branches = ((x, Fraction(1)),)
                else:
                    branches = ((x, Fraction(x, x + y)), (y, Fraction(y, x + y)))
                for l, lp in branches:
                    seq = prefix + ((min(x, y), max(x, y), l),)
                    if seq in nxt:
                        nxt[seq] = (ns, nxt[seq][1] + pr * lp)
                    else:
                        nxt[seq] = (ns, pr * lp)
        frontier = nxt
    probs = {seq: p for seq, (_, p) in frontier.items()}
    return EventSequenceDistribution(n, ("s", "S", "L"), probs)
