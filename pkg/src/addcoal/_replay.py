"""Merge-event replay kernels for the three coalescence embeddings.

Each kernel consumes pre-drawn random inputs and replays the chain with
deterministic integer/float arithmetic, so a given seed yields the same
event stream whether or not numba is present.  All uniform-index picks
use ``int(u * m)`` on ``u in [0, 1)``, i.e. plain floor.

Event columns returned by every replay:
    s, S : merged sizes in increasing order
    L    : size of the size-biased side (predator / bottom of edge /
           block before the filled place)
    R    : size of the other side, R = s + S - L
    D    : displacement in {0, ..., L-1}
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def direct_chain_replay(n, elem, prey_u, uprime):
    """Replay the two-stage chain: size-biased predator, uniform prey.

    elem[k] is a uniform element index in [0, n) whose root is the
    predator; prey_u[k] picks uniformly among the other live roots;
    uprime[k] drives the displacement D = floor(u' * L).
    """
    m = n - 1
    s = np.empty(m, np.int64)
    S = np.empty(m, np.int64)
    L = np.empty(m, np.int64)
    R = np.empty(m, np.int64)
    D = np.empty(m, np.int64)
    parent = np.arange(n)
    size = np.ones(n, np.int64)
    roots = np.arange(n)
    pos = np.arange(n)
    nroots = n
    for k in range(m):
        e = elem[k]
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        a = e
        # swap the predator out so the prey pick is uniform on the rest
        ia = pos[a]
        last = roots[nroots - 1]
        roots[ia] = last
        pos[last] = ia
        nroots -= 1
        j = int(prey_u[k] * nroots)
        if j >= nroots:
            j = nroots - 1
        b = roots[j]
        x = size[a]
        y = size[b]
        if x < y:
            parent[a] = b
            r = b
        else:
            parent[b] = a
            r = a
        roots[j] = r
        pos[r] = j
        size[r] = x + y
        L[k] = x
        R[k] = y
        if x <= y:
            s[k] = x
            S[k] = y
        else:
            s[k] = y
            S[k] = x
        D[k] = int(uprime[k] * x)
    return s, S, L, R, D


@njit(cache=True)
def parking_replay(n, tries):
    """Replay circular parking with linear probing.

    tries[c] is the c-th car's uniform first try.  A block is a maximal
    run of occupied places plus the empty place that ends it (clockwise);
    parking a car merges its block with the next one.  D is the probed
    distance, L the size of the block holding the first try, R the size
    of the block after the filled place.
    """
    m = n - 1
    s = np.empty(m, np.int64)
    S = np.empty(m, np.int64)
    L = np.empty(m, np.int64)
    R = np.empty(m, np.int64)
    D = np.empty(m, np.int64)
    parent = np.arange(n)  # disjoint blocks of places
    bsize = np.ones(n, np.int64)
    empt = np.arange(n)  # the block's unique empty place, stored at the root
    for c in range(m):
        t = tries[c]
        e = t
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        ra = e
        p = empt[ra]
        D[c] = (p - t + n) % n
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
        L[c] = x
        R[c] = y
        if x <= y:
            s[c] = x
            S[c] = y
        else:
            s[c] = y
            S[c] = x
    return s, S, L, R, D


@njit(cache=True)
def tree_parents_from_prufer(n, prufer):
    """Decode a Prufer sequence and root the tree at vertex 0.

    Returns par[v] = parent of v (par[0] = -1).
    """
    e1 = np.empty(n - 1, np.int64)
    e2 = np.empty(n - 1, np.int64)
    degree = np.ones(n, np.int64)
    for i in range(n - 2):
        degree[prufer[i]] += 1
    ptr = 0
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    for i in range(n - 2):
        v = prufer[i]
        e1[i] = leaf
        e2[i] = v
        degree[v] -= 1
        if degree[v] == 1 and v < ptr:
            leaf = v
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    e1[n - 2] = leaf
    e2[n - 2] = n - 1
    # CSR adjacency, then BFS from the root
    cnt = np.zeros(n + 1, np.int64)
    for i in range(n - 1):
        cnt[e1[i] + 1] += 1
        cnt[e2[i] + 1] += 1
    for i in range(n):
        cnt[i + 1] += cnt[i]
    adj = np.empty(2 * (n - 1), np.int64)
    fill = cnt[:n].copy()
    for i in range(n - 1):
        adj[fill[e1[i]]] = e2[i]
        fill[e1[i]] += 1
        adj[fill[e2[i]]] = e1[i]
        fill[e2[i]] += 1
    par = np.full(n, -1, np.int64)
    order = np.empty(n, np.int64)
    visited = np.zeros(n, np.uint8)
    order[0] = 0
    visited[0] = 1
    head = 0
    tail = 1
    while head < tail:
        v = order[head]
        head += 1
        for idx in range(cnt[v], cnt[v + 1]):
            w = adj[idx]
            if visited[w] == 0:
                visited[w] = 1
                par[w] = v
                order[tail] = w
                tail += 1
    return par


@njit(cache=True)
def tree_replay(n, par, perm, uprime):
    """Insert the rooted tree's edges in permuted order, merging components.

    Edge j (j = 0..n-2) joins vertex j+1 to its parent.  L is the size of
    the component holding the bottom (parent-side) endpoint, R the size of
    the top component.
    """
    m = n - 1
    s = np.empty(m, np.int64)
    S = np.empty(m, np.int64)
    L = np.empty(m, np.int64)
    R = np.empty(m, np.int64)
    D = np.empty(m, np.int64)
    parent = np.arange(n)
    csize = np.ones(n, np.int64)
    for k in range(m):
        v = perm[k] + 1
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
        L[k] = x
        R[k] = y
        if x <= y:
            s[k] = x
            S[k] = y
        else:
            s[k] = y
            S[k] = x
        D[k] = int(uprime[k] * x)
    return s, S, L, R, D


@njit(cache=True)
def parking_last_block_counts(m):
    """Exact counts of the final merge's L over all m**(m-1) parking configs.

    counts[k] = number of first-try vectors whose last arrival lands in a
    block of size k.  Integer-exact; divide by m**(m-1) for probabilities.
    """
    counts = np.zeros(m, np.int64)
    tries = np.zeros(m - 1, np.int64)
    parent = np.empty(m, np.int64)
    bsize = np.empty(m, np.int64)
    empt = np.empty(m, np.int64)
    while True:
        for i in range(m):
            parent[i] = i
            bsize[i] = 1
            empt[i] = i
        last_l = 0
        for c in range(m - 1):
            t = tries[c]
            e = t
            while parent[e] != e:
                e = parent[e]
            ra = e
            p = empt[ra]
            e = (p + 1) % m
            while parent[e] != e:
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
            last_l = x
        counts[last_l] += 1
        i = 0
        while i < m - 1:
            tries[i] += 1
            if tries[i] < m:
                break
            tries[i] = 0
            i += 1
        if i == m - 1:
            break
    return counts
