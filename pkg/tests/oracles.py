"""Slow, literal reference implementations used only by the test suite.

Each oracle is written from the defining formulas with plain loops and no
code shared with the package.
"""
import itertools
import math

import numpy as np


# -- false-nearest-neighbor regularizer ---------------------------------------

def fnn_loop(h, r_tol=10.0, a_tol=2.0, k=None, activity="second_moment"):
    """Triple-loop transcription of the batch false-neighbor statistics.

    Units are indexed 1..L as in the formulas; the returned arrays are 0-based.
    """
    h = [list(map(float, row)) for row in np.asarray(h)]
    B, L = len(h), len(h[0])
    if k is None:
        k = max(1, math.ceil(0.01 * B))

    def dist(a, b, m):
        return math.sqrt(sum((h[a][i] - h[b][i]) ** 2 for i in range(m)))

    D = [[[dist(a, b, m) for m in range(1, L + 1)] for b in range(B)] for a in range(B)]

    def order(a, m):
        # self first, then by (distance, index)
        others = sorted((D[a][b][m - 1], b) for b in range(B) if b != a)
        return [a] + [b for _, b in others]

    g = {(a, m): order(a, m) for a in range(B) for m in range(1, L + 1)}

    means = [sum(h[b][i] for b in range(B)) / B for i in range(L)]
    R = []
    for m in range(1, L + 1):
        tot = sum((h[b][i] - means[i]) ** 2 for b in range(B) for i in range(m))
        R.append(math.sqrt(tot / (m * B)))

    f_bar = [1.0]
    for m in range(2, L + 1):
        count = 0
        for a in range(B):
            for j in range(1, k + 1):
                d_sorted = D[a][g[(a, m)][j]][m - 1]
                d_lifted = D[a][g[(a, m - 1)][j]][m - 1]
                denom = max(d_sorted ** 2, 1e-12)
                s = (d_lifted ** 2 - d_sorted ** 2) / denom
                r_flag = 1 if s >= r_tol else 0
                a_flag = 1 if d_sorted >= a_tol * max(R[m - 1], 1e-12) else 0
                count += 1 if (r_flag + a_flag) > 0 else 0
        f_bar.append(count / (k * B))

    loss = 0.0
    for m in range(2, L + 1):
        col = [h[b][m - 1] for b in range(B)]
        if activity == "mean":
            act = (sum(col) / B) ** 2
        else:
            act = sum(c * c for c in col) / B
        loss += (1.0 - f_bar[m - 1]) * act
    return np.array(f_bar), np.array(R), loss


# -- dynamic time warping ------------------------------------------------------

def dtw_bruteforce(a, b):
    """Minimum over every monotone boundary-matched warping path."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n, m = len(a), len(b)
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += cost[i, j]
        if acc >= best:
            return
        if i == n - 1 and j == m - 1:
            best = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best


# -- persistence diagrams ------------------------------------------------------

def wasserstein_bruteforce(p, q):
    """Order-1 diagram distance by enumerating every partial matching."""
    p = [tuple(x) for x in p]
    q = [tuple(x) for x in q]

    def diag_cost(pt):
        # Euclidean distance to the diagonal
        return abs(pt[1] - pt[0]) / math.sqrt(2.0)

    best = math.inf
    n, m = len(p), len(q)
    # choose which p's are matched, and to which q's
    for r in range(min(n, m) + 1):
        for ps in itertools.combinations(range(n), r):
            for qs in itertools.permutations(range(m), r):
                c = sum(math.dist(p[i], q[j]) for i, j in zip(ps, qs))
                c += sum(diag_cost(p[i]) for i in range(n) if i not in ps)
                c += sum(diag_cost(q[j]) for j in range(m) if j not in qs)
                best = min(best, c)
    return best


def rips_h1_naive(points):
    """H0/H1 persistence pairs by dense Z/2 column reduction of the full complex."""
    pts = np.asarray(points, float)
    n = len(pts)
    dm = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    simplices = [((i,), 0.0) for i in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        simplices.append(((i, j), dm[i, j]))
    for i, j, k in itertools.combinations(range(n), 3):
        simplices.append(((i, j, k), max(dm[i, j], dm[i, k], dm[j, k])))
    simplices.sort(key=lambda s: (s[1], len(s[0]), s[0]))
    index = {s: t for t, (s, _) in enumerate(simplices)}
    cols = []
    for s, _ in simplices:
        if len(s) == 1:
            cols.append(set())
        else:
            cols.append({index[f] for f in itertools.combinations(s, len(s) - 1)})
    low_owner = {}
    pairs = []
    for j, col in enumerate(cols):
        while col:
            low = max(col)
            if low in low_owner:
                col ^= cols[low_owner[low]]
            else:
                low_owner[low] = j
                pairs.append((low, j))
                break
    h0, h1 = [], []
    for birth_idx, death_idx in pairs:
        b = simplices[birth_idx][1]
        d = simplices[death_idx][1]
        dim = len(simplices[birth_idx][0]) - 1
        if d > b:
            (h0 if dim == 0 else h1).append((b, d))
    return sorted(h0), sorted(h1)


# -- neighbor coverage ---------------------------------------------------------

def coverage_enumeration(yhat, y):
    """Neighbor-coverage score from explicit neighbor-list intersections."""
    yhat, y = np.asarray(yhat, float), np.asarray(y, float)
    N = len(y)

    def lists(c):
        out = []
        for i in range(N):
            d = [(float(np.linalg.norm(c[i] - c[j])), j) for j in range(N) if j != i]
            out.append([j for _, j in sorted(d)])
        return out

    la, lb = lists(yhat), lists(y)
    total = 0.0
    for k in range(1, N):
        kappa = sum(len(set(la[i][:k]) & set(lb[i][:k])) for i in range(N)) / N
        total += (kappa - k * k / N) / (k - k * k / N)
    return total / (N - 1)
