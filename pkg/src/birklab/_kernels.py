"""Integer inner loops: embedding search, permutation screening, mod-p rank scan.

Every kernel has a numba ``@njit`` body and a pure numpy/Python twin with the
same signature.  ``BIRKLAB_NUMBA=0`` (or a missing numba) selects the twins.
Both paths are exact: they only touch small nonnegative integers, and the
mod-p scan only ever *accepts* vectors that are independent over the
rationals.
"""

from __future__ import annotations

import os

import numpy as np

MODP = 2147483647  # 2**31 - 1; products of two residues fit in int64

COVER = 0
EQUAL = 1


def _want_numba() -> bool:
    flag = os.environ.get("BIRKLAB_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


try:  # pragma: no cover - import guard
    if not _want_numba():
        raise ImportError("numba disabled by BIRKLAB_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# embedding search
# ---------------------------------------------------------------------------

def _embed_search_py(G, S, order, cand, mode):
    n = G.shape[0]
    m = order.shape[0]
    phi = np.full(S.shape[0], -1, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    nodes = 0

    def ok(t, u, v):
        if mode == COVER:
            if S[u, u] > G[v, v]:
                return False
        elif S[u, u] != G[v, v]:
            return False
        for s in range(t):
            w = order[s]
            x = phi[w]
            if mode == COVER:
                if S[u, w] > G[v, x] or S[w, u] > G[x, v]:
                    return False
            elif S[u, w] != G[v, x] or S[w, u] != G[x, v]:
                return False
        return True

    def rec(t):
        nonlocal nodes
        if t == m:
            return True
        u = order[t]
        for v in range(n):
            if used[v] or not cand[t, v] or not ok(t, u, v):
                continue
            nodes += 1
            phi[u] = v
            used[v] = True
            if rec(t + 1):
                return True
            used[v] = False
            phi[u] = -1
        return False

    found = rec(0)
    return found, phi, nodes


@njit(cache=True)
def _embed_search_nb(G, S, order, cand, mode):
    n = G.shape[0]
    m = order.shape[0]
    phi = np.full(S.shape[0], -1, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    nxt = np.zeros(m + 1, dtype=np.int64)
    nodes = 0
    t = 0
    while t >= 0:
        if t == m:
            return True, phi, nodes
        u = order[t]
        if phi[u] >= 0:
            used[phi[u]] = False
            phi[u] = -1
        v = nxt[t]
        hit = -1
        while v < n:
            if not used[v] and cand[t, v]:
                good = True
                if mode == COVER:
                    if S[u, u] > G[v, v]:
                        good = False
                elif S[u, u] != G[v, v]:
                    good = False
                s = 0
                while good and s < t:
                    w = order[s]
                    x = phi[w]
                    if mode == COVER:
                        if S[u, w] > G[v, x] or S[w, u] > G[x, v]:
                            good = False
                    elif S[u, w] != G[v, x] or S[w, u] != G[x, v]:
                        good = False
                    s += 1
                if good:
                    hit = v
                    break
            v += 1
        if hit >= 0:
            nodes += 1
            phi[u] = hit
            used[hit] = True
            nxt[t] = hit + 1
            t += 1
            nxt[t] = 0
        else:
            nxt[t] = 0
            t -= 1
    return False, phi, nodes


def embed_search(G, S, order, cand, mode=COVER):
    """Backtrack over injective maps of ``order`` (pattern vertices) into G.

    ``cand[t, v]`` pre-filters G-vertex ``v`` for the ``t``-th pattern vertex.
    Returns ``(found, phi, nodes)`` with ``phi[u] = -1`` for unmapped u.
    """
    G = np.ascontiguousarray(G, dtype=np.int64)
    S = np.ascontiguousarray(S, dtype=np.int64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    cand = np.ascontiguousarray(cand, dtype=np.bool_)
    if HAVE_NUMBA:
        found, phi, nodes = _embed_search_nb(G, S, order, cand, mode)
    else:
        found, phi, nodes = _embed_search_py(G, S, order, cand, mode)
    return bool(found), phi, int(nodes)


# ---------------------------------------------------------------------------
# permutation screening:  S[u, v] (<= or ==) G[p[u], p[v]] for each row p
# ---------------------------------------------------------------------------

def _perm_mask_np(G, S, perms, mode):
    m = S.shape[0]
    if perms.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    img = G[perms[:, :, None], perms[:, None, :]]  # (P, m, m)
    if mode == COVER:
        return np.all(img >= S[None, :m, :m], axis=(1, 2))
    return np.all(img == S[None, :m, :m], axis=(1, 2))


@njit(cache=True)
def _perm_mask_nb(G, S, perms, mode):
    P = perms.shape[0]
    m = perms.shape[1]
    out = np.zeros(P, dtype=np.bool_)
    for r in range(P):
        good = True
        for u in range(m):
            a = perms[r, u]
            for v in range(m):
                g = G[a, perms[r, v]]
                if mode == COVER:
                    if S[u, v] > g:
                        good = False
                        break
                elif S[u, v] != g:
                    good = False
                    break
            if not good:
                break
        out[r] = good
    return out


def perm_mask(G, S, perms, mode=COVER):
    """Vectorised test of every injection row in ``perms`` (pattern -> G)."""
    G = np.ascontiguousarray(G, dtype=np.int64)
    S = np.ascontiguousarray(S, dtype=np.int64)
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    if perms.ndim != 2:
        raise ValueError("perms must be 2-D")
    if HAVE_NUMBA:
        return _perm_mask_nb(G, S, perms, mode)
    return _perm_mask_np(G, S, perms, mode)


# ---------------------------------------------------------------------------
# greedy affine basis of k x k permutation matrices in lexicographic order
# ---------------------------------------------------------------------------

def _modinv(a, p):
    return pow(int(a), p - 2, p)


def _lex_perm_basis_py(k, p, max_scan, target):
    D = k * k
    basis = np.zeros((max(target, 1), D), dtype=np.int64)
    pivots = np.zeros(max(target, 1), dtype=np.int64)
    rank = 0
    perm = np.arange(k, dtype=np.int64)
    base = perm.copy()
    chosen = [perm.copy()]
    scanned = 1
    while rank < target and scanned < max_scan:
        # next permutation in lexicographic order
        i = k - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = k - 1
        while perm[j] <= perm[i]:
            j -= 1
        perm[i], perm[j] = perm[j], perm[i]
        perm[i + 1:] = perm[i + 1:][::-1].copy()
        scanned += 1
        vec = np.zeros(D, dtype=np.int64)
        vec[np.arange(k) * k + perm] += 1
        vec[np.arange(k) * k + base] -= 1
        vec %= p
        for r in range(rank):
            c = vec[pivots[r]]
            if c:
                vec = (vec - c * basis[r]) % p
        nz = np.flatnonzero(vec)
        if nz.size == 0:
            continue
        piv = nz[0]
        vec = (vec * _modinv(vec[piv], p)) % p
        basis[rank] = vec
        pivots[rank] = piv
        rank += 1
        chosen.append(perm.copy())
    return np.array(chosen, dtype=np.int64), scanned


@njit(cache=True)
def _modinv_nb(a, p):
    result = 1
    base = a % p
    e = p - 2
    while e > 0:
        if e & 1:
            result = (result * base) % p
        base = (base * base) % p
        e >>= 1
    return result


@njit(cache=True)
def _lex_perm_basis_nb(k, p, max_scan, target):
    D = k * k
    cap = max(target, 1)
    basis = np.zeros((cap, D), dtype=np.int64)
    pivots = np.zeros(cap, dtype=np.int64)
    chosen = np.zeros((cap + 1, k), dtype=np.int64)
    perm = np.arange(k)
    base = perm.copy()
    chosen[0, :] = perm
    n_chosen = 1
    rank = 0
    scanned = 1
    vec = np.zeros(D, dtype=np.int64)
    while rank < target and scanned < max_scan:
        i = k - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = k - 1
        while perm[j] <= perm[i]:
            j -= 1
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
        lo = i + 1
        hi = k - 1
        while lo < hi:
            tmp = perm[lo]
            perm[lo] = perm[hi]
            perm[hi] = tmp
            lo += 1
            hi -= 1
        scanned += 1
        vec[:] = 0
        for a in range(k):
            vec[a * k + perm[a]] += 1
            vec[a * k + base[a]] -= 1
        for a in range(D):
            vec[a] = vec[a] % p
        for r in range(rank):
            c = vec[pivots[r]]
            if c != 0:
                for a in range(D):
                    vec[a] = (vec[a] - c * basis[r, a]) % p
        piv = -1
        for a in range(D):
            if vec[a] != 0:
                piv = a
                break
        if piv < 0:
            continue
        inv = _modinv_nb(vec[piv], p)
        for a in range(D):
            basis[rank, a] = (vec[a] * inv) % p
        pivots[rank] = piv
        rank += 1
        chosen[n_chosen, :] = perm
        n_chosen += 1
    return chosen[:n_chosen].copy(), scanned


def lex_perm_affine_basis(k, max_scan=1_000_000):
    """Greedy affinely independent permutations of size k in lex order.

    Returns ``(perms, scanned, complete)``; ``complete`` means the selection
    reached the full Birkhoff dimension ``(k-1)**2 + 1``.  A vector is kept
    only if it is independent modulo a prime, hence independent over Q.
    """
    if k < 1:
        raise ValueError("k must be positive")
    target = (k - 1) ** 2
    if HAVE_NUMBA:
        perms, scanned = _lex_perm_basis_nb(k, MODP, max_scan, target)
    else:
        perms, scanned = _lex_perm_basis_py(k, MODP, max_scan, target)
    return perms, int(scanned), perms.shape[0] == target + 1


# ---------------------------------------------------------------------------
# greedy row selection: rows of V independent modulo MODP, in input order
# ---------------------------------------------------------------------------

def _modp_select_py(V, p):
    rows, D = V.shape
    basis = np.zeros((min(rows, D), D), dtype=np.int64)
    pivots = np.zeros(min(rows, D), dtype=np.int64)
    keep = []
    rank = 0
    for r in range(rows):
        if rank == D:
            break
        vec = V[r] % p
        for q in range(rank):
            c = vec[pivots[q]]
            if c:
                vec = (vec - c * basis[q]) % p
        nz = np.flatnonzero(vec)
        if nz.size == 0:
            continue
        piv = nz[0]
        basis[rank] = (vec * _modinv(vec[piv], p)) % p
        pivots[rank] = piv
        rank += 1
        keep.append(r)
    return np.array(keep, dtype=np.int64)


@njit(cache=True)
def _modp_select_nb(V, p):
    rows, D = V.shape
    cap = min(rows, D)
    basis = np.zeros((max(cap, 1), D), dtype=np.int64)
    pivots = np.zeros(max(cap, 1), dtype=np.int64)
    keep = np.zeros(max(cap, 1), dtype=np.int64)
    rank = 0
    vec = np.zeros(D, dtype=np.int64)
    for r in range(rows):
        if rank == D:
            break
        for a in range(D):
            vec[a] = V[r, a] % p
        for q in range(rank):
            c = vec[pivots[q]]
            if c != 0:
                for a in range(D):
                    vec[a] = (vec[a] - c * basis[q, a]) % p
        piv = -1
        for a in range(D):
            if vec[a] != 0:
                piv = a
                break
        if piv < 0:
            continue
        inv = _modinv_nb(vec[piv], p)
        for a in range(D):
            basis[rank, a] = (vec[a] * inv) % p
        pivots[rank] = piv
        keep[rank] = r
        rank += 1
    return keep[:rank].copy()


def modp_independent_rows(V):
    """Indices of a greedy (input-order) set of rows independent mod a prime.

    Independence mod p implies independence over Q; the converse can fail
    only on a measure-zero set of inputs, which callers guard against with
    an exact certificate.
    """
    V = np.ascontiguousarray(V, dtype=np.int64)
    if V.ndim != 2:
        raise ValueError("V must be 2-D")
    if V.shape[0] == 0 or V.shape[1] == 0:
        return np.zeros(0, dtype=np.int64)
    if HAVE_NUMBA:
        return _modp_select_nb(V, MODP)
    return _modp_select_py(V, MODP)
