"""Hot numeric kernels.

Everything that runs per agent per step lives here: the policy network
forward/backward pass, the rotational frame transforms, the bearing-only
analytical rule, the weighted Laplacian with its Jacobi eigensolver, and the
fused one-step training kernel.  Each function is compiled with numba unless
``ANTSWARM_NUMBA=0``; the few primitives where a Python loop would crawl carry
an explicit numpy fallback.

Conventions: positions are ``(N, 2)`` float64 arrays, bearings ``(n, 2)``
unit rows, and the network parameters one flat float64 vector laid out as
``[W_0, b_0, W_1, b_1, ...]`` with each ``W_k`` stored row-major as
``(fan_in, fan_out)``.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import kernel

# encoder x3, trunk x2, direction head, step-size hidden, step-size output
LAYER_NAMES = ("enc1", "enc2", "enc3", "trunk1", "trunk2", "direction", "step_hidden", "step_out")
FAN_IN = (2, 16, 32, 16, 32, 32, 32, 32)
FAN_OUT = (16, 32, 16, 32, 32, 2, 32, 1)


def _offsets():
    w_off, b_off = [], []
    pos = 0
    for fi, fo in zip(FAN_IN, FAN_OUT):
        w_off.append(pos)
        pos += fi * fo
        b_off.append(pos)
        pos += fo
    return tuple(w_off), tuple(b_off), pos


W_OFF, B_OFF, N_PARAMS = _offsets()
FEATURES = FAN_OUT[2]

COHESION_EPS = 1e-6
FRAME_EPS = 1e-12
DIRECTION_EPS = 1e-8
QUANT_SCALE = 2.0**24
JACOBI_TOL = 1e-12


# ---------------------------------------------------------------------------
# dense primitives


def _affine_np(X, W, b):
    return X @ W + b


@kernel(fallback=_affine_np)
def affine(X, W, b):
    n, k = X.shape
    m = W.shape[1]
    out = np.empty((n, m))
    for r in range(n):
        for j in range(m):
            acc = b[j]
            for q in range(k):
                acc += X[r, q] * W[q, j]
            out[r, j] = acc
    return out


def _matmul_t_np(G, W):
    return G @ W.T


@kernel(fallback=_matmul_t_np)
def matmul_t(G, W):
    """``G @ W.T`` for G (n, m) and W (k, m)."""
    n, m = G.shape
    k = W.shape[0]
    out = np.zeros((n, k))
    for r in range(n):
        for q in range(k):
            acc = 0.0
            for j in range(m):
                acc += G[r, j] * W[q, j]
            out[r, q] = acc
    return out


def _acc_outer_np(X, G, grad, w0, b0):
    k = X.shape[1]
    m = G.shape[1]
    grad[w0:w0 + k * m] += (X.T @ G).ravel()
    grad[b0:b0 + m] += G.sum(axis=0)


@kernel(fallback=_acc_outer_np)
def acc_outer(X, G, grad, w0, b0):
    """Accumulate ``X.T @ G`` into a weight slice and ``G`` column sums into a bias slice."""
    n, k = X.shape
    m = G.shape[1]
    for r in range(n):
        for q in range(k):
            x = X[r, q]
            base = w0 + q * m
            for j in range(m):
                grad[base + j] += x * G[r, j]
        for j in range(m):
            grad[b0 + j] += G[r, j]


@kernel
def layer(theta, k):
    w0 = W_OFF[k]
    W = theta[w0:w0 + FAN_IN[k] * FAN_OUT[k]].reshape((FAN_IN[k], FAN_OUT[k]))
    b = theta[B_OFF[k]:B_OFF[k] + FAN_OUT[k]]
    return W, b


# ---------------------------------------------------------------------------
# ordering, frames, quantisation


@kernel
def lex_order(X):
    """Stable lexicographic (x, then y) row order; depends only on row values."""
    o1 = np.argsort(X[:, 1], kind="mergesort")
    xs = X[:, 0][o1]
    o2 = np.argsort(xs, kind="mergesort")
    return o1[o2]


@kernel
def frame_from_bearings(B):
    """Return ``(c, s, degenerate)`` where ``(c, s)`` is the normalised bearing sum.

    The sum runs in lexicographic row order so the frame does not depend on
    the order neighbours were sensed in.
    """
    n = B.shape[0]
    if n == 0:
        return 1.0, 0.0, True
    o = lex_order(B)
    sx = 0.0
    sy = 0.0
    for r in range(n):
        sx += B[o[r], 0]
        sy += B[o[r], 1]
    nrm = math.sqrt(sx * sx + sy * sy)
    if nrm <= FRAME_EPS:
        return 1.0, 0.0, True
    return sx / nrm, sy / nrm, False


@kernel
def rotate_into(B, c, s):
    """Rotate rows by the angle whose cosine/sine are ``(c, -s)``."""
    n = B.shape[0]
    out = np.empty((n, 2))
    for r in range(n):
        x = B[r, 0]
        y = B[r, 1]
        out[r, 0] = c * x + s * y
        out[r, 1] = -s * x + c * y
    return out


@kernel
def quantize(X):
    return np.floor(X * QUANT_SCALE + 0.5) / QUANT_SCALE


# ---------------------------------------------------------------------------
# policy network


@kernel
def policy_forward(theta, X, mean_pool):
    """Forward pass on canonical bearings ``X`` (n >= 1).

    Rows are first put in lexicographic order, which makes the output a
    function of the bearing multiset only (bit-exact, for both poolings).
    Returns ``(dx, dy, sigma, fallback, cache...)``.
    """
    n = X.shape[0]
    order = lex_order(X)
    Xs = X[order]
    W, b = layer(theta, 0)
    H1 = np.tanh(affine(Xs, W, b))
    W, b = layer(theta, 1)
    H2 = np.tanh(affine(H1, W, b))
    W, b = layer(theta, 2)
    H3 = np.tanh(affine(H2, W, b))

    pooled = np.empty((1, FEATURES))
    arg = np.zeros(FEATURES, dtype=np.int64)
    for k in range(FEATURES):
        if mean_pool:
            acc = 0.0
            for r in range(n):
                acc += H3[r, k]
            pooled[0, k] = acc / n
        else:
            best = H3[0, k]
            idx = 0
            for r in range(1, n):
                if H3[r, k] > best:
                    best = H3[r, k]
                    idx = r
            pooled[0, k] = best
            arg[k] = idx

    W, b = layer(theta, 3)
    T1 = np.tanh(affine(pooled, W, b))
    W, b = layer(theta, 4)
    T2 = np.tanh(affine(T1, W, b))
    W, b = layer(theta, 5)
    D = np.tanh(affine(T2, W, b))
    W, b = layer(theta, 6)
    S1 = np.maximum(affine(T2, W, b), 0.0)
    W, b = layer(theta, 7)
    z = affine(S1, W, b)[0, 0]
    if z >= 0.0:
        sigma = 1.0 / (1.0 + math.exp(-z))
    else:
        ez = math.exp(z)
        sigma = ez / (1.0 + ez)

    nrm = math.sqrt(D[0, 0] * D[0, 0] + D[0, 1] * D[0, 1])
    if nrm < DIRECTION_EPS:
        return 1.0, 0.0, 0.0, True, order, Xs, H1, H2, H3, pooled, arg, T1, T2, D, S1
    return (D[0, 0] / nrm, D[0, 1] / nrm, sigma, False,
            order, Xs, H1, H2, H3, pooled, arg, T1, T2, D, S1)


@kernel
def policy_backward(theta, mean_pool, sigma, fallback, order, Xs, H1, H2, H3,
                    pooled, arg, T1, T2, D, S1, g_dx, g_dy, g_sigma, grad):
    """Reverse pass.  Adds parameter gradients into ``grad`` and returns the
    gradient w.r.t. the input bearings in the caller's row order."""
    n = Xs.shape[0]
    dX = np.zeros((n, 2))
    if fallback:
        return dX

    d0 = D[0, 0]
    d1 = D[0, 1]
    nrm = math.sqrt(d0 * d0 + d1 * d1)
    ux = d0 / nrm
    uy = d1 / nrm
    dot = ux * g_dx + uy * g_dy
    dpre_d = np.empty((1, 2))
    dpre_d[0, 0] = (g_dx - ux * dot) / nrm * (1.0 - d0 * d0)
    dpre_d[0, 1] = (g_dy - uy * dot) / nrm * (1.0 - d1 * d1)
    W, b = layer(theta, 5)
    acc_outer(T2, dpre_d, grad, W_OFF[5], B_OFF[5])
    dT2 = matmul_t(dpre_d, W)

    dz = np.empty((1, 1))
    dz[0, 0] = g_sigma * sigma * (1.0 - sigma)
    W, b = layer(theta, 7)
    acc_outer(S1, dz, grad, W_OFF[7], B_OFF[7])
    dS1 = matmul_t(dz, W)
    dpre6 = dS1 * (S1 > 0.0)
    W, b = layer(theta, 6)
    acc_outer(T2, dpre6, grad, W_OFF[6], B_OFF[6])
    dT2 += matmul_t(dpre6, W)

    dpre5 = dT2 * (1.0 - T2 * T2)
    W, b = layer(theta, 4)
    acc_outer(T1, dpre5, grad, W_OFF[4], B_OFF[4])
    dT1 = matmul_t(dpre5, W)
    dpre4 = dT1 * (1.0 - T1 * T1)
    W, b = layer(theta, 3)
    acc_outer(pooled, dpre4, grad, W_OFF[3], B_OFF[3])
    dP = matmul_t(dpre4, W)

    dH3 = np.zeros((n, FEATURES))
    for k in range(FEATURES):
        if mean_pool:
            for r in range(n):
                dH3[r, k] = dP[0, k] / n
        else:
            dH3[arg[k], k] = dP[0, k]

    dpre3 = dH3 * (1.0 - H3 * H3)
    W, b = layer(theta, 2)
    acc_outer(H2, dpre3, grad, W_OFF[2], B_OFF[2])
    dH2 = matmul_t(dpre3, W)
    dpre2 = dH2 * (1.0 - H2 * H2)
    W, b = layer(theta, 1)
    acc_outer(H1, dpre2, grad, W_OFF[1], B_OFF[1])
    dH1 = matmul_t(dpre2, W)
    dpre1 = dH1 * (1.0 - H1 * H1)
    W, b = layer(theta, 0)
    acc_outer(Xs, dpre1, grad, W_OFF[0], B_OFF[0])
    dXs = matmul_t(dpre1, W)
    for r in range(n):
        dX[order[r], 0] = dXs[r, 0]
        dX[order[r], 1] = dXs[r, 1]
    return dX


@kernel
def network_agent_action(B, theta, mean_pool):
    """Full pipeline for one agent: frame, canonicalise, quantise, network,
    rotate back.  Returns ``(dx, dy, sigma, c, s)``."""
    if B.shape[0] == 0:
        return 1.0, 0.0, 0.0, 1.0, 0.0
    c, s, _ = frame_from_bearings(B)
    X = quantize(rotate_into(B, c, s))
    out = policy_forward(theta, X, mean_pool)
    ax = out[0]
    ay = out[1]
    return c * ax - s * ay, s * ax + c * ay, out[2], c, s


# ---------------------------------------------------------------------------
# swarm geometry


def _gather_bearings_np(P, i, V):
    diff = P - P[i]
    d = np.hypot(diff[:, 0], diff[:, 1])
    mask = (d <= V) & (d > 0.0)
    mask[i] = False
    return diff[mask] / d[mask, None]


@kernel(fallback=_gather_bearings_np)
def gather_bearings(P, i, V):
    """Unit bearings from agent ``i`` to every visible, non-coincident agent,
    in index order."""
    N = P.shape[0]
    tmp = np.empty((N, 2))
    n = 0
    for j in range(N):
        if j == i:
            continue
        dx = P[j, 0] - P[i, 0]
        dy = P[j, 1] - P[i, 1]
        d = math.hypot(dx, dy)
        if d <= V and d > 0.0:
            tmp[n, 0] = dx / d
            tmp[n, 1] = dy / d
            n += 1
    return tmp[:n].copy()


@kernel
def component_labels(P, V):
    """Union-find over the visibility graph; label = smallest member index."""
    N = P.shape[0]
    parent = np.arange(N)
    for i in range(N):
        for j in range(i + 1, N):
            dx = P[j, 0] - P[i, 0]
            dy = P[j, 1] - P[i, 1]
            if math.hypot(dx, dy) <= V:
                ri = i
                while parent[ri] != ri:
                    parent[ri] = parent[parent[ri]]
                    ri = parent[ri]
                rj = j
                while parent[rj] != rj:
                    parent[rj] = parent[parent[rj]]
                    rj = parent[rj]
                if ri < rj:
                    parent[rj] = ri
                elif rj < ri:
                    parent[ri] = rj
    labels = np.empty(N, dtype=np.int64)
    for i in range(N):
        r = i
        while parent[r] != r:
            r = parent[r]
        labels[i] = r
    return labels


@kernel
def centroid(P):
    # summed in lexicographic order so the result ignores agent indexing
    o = lex_order(P)
    cx = 0.0
    cy = 0.0
    for r in range(P.shape[0]):
        cx += P[o[r], 0]
        cy += P[o[r], 1]
    return cx / P.shape[0], cy / P.shape[0]


@kernel
def task_loss(P):
    """Max distance to the centroid and its (sub)gradient."""
    N = P.shape[0]
    cx, cy = centroid(P)
    best = -1.0
    ib = 0
    for i in range(N):
        dx = P[i, 0] - cx
        dy = P[i, 1] - cy
        d = math.hypot(dx, dy)
        if d > best:
            best = d
            ib = i
    G = np.zeros((N, 2))
    if best > 0.0:
        ux = (P[ib, 0] - cx) / best
        uy = (P[ib, 1] - cy) / best
        for i in range(N):
            G[i, 0] = -ux / N
            G[i, 1] = -uy / N
        G[ib, 0] += ux
        G[ib, 1] += uy
    return best, G


@kernel
def step_metrics(P, V):
    """``(max centroid distance, component count, largest-component fraction)``."""
    N = P.shape[0]
    value, _ = task_loss(P)
    labels = component_labels(P, V)
    counts = np.zeros(N, dtype=np.int64)
    for i in range(N):
        counts[labels[i]] += 1
    n_comp = 0
    largest = 0
    for i in range(N):
        if counts[i] > 0:
            n_comp += 1
            if counts[i] > largest:
                largest = counts[i]
    return value, n_comp, largest / N


# ---------------------------------------------------------------------------
# controllers


@kernel
def enclosing_sector(B):
    """Smallest sector holding every bearing.

    Returns ``(angle, i1, i2)`` with ``i1``/``i2`` the rows flanking the
    largest angular gap (counter-clockwise from ``i2`` round to ``i1``).
    """
    n = B.shape[0]
    ang = np.empty(n)
    for r in range(n):
        ang[r] = math.atan2(B[r, 1], B[r, 0])
    o = np.argsort(ang, kind="mergesort")
    best_gap = ang[o[0]] + 2.0 * math.pi - ang[o[n - 1]]
    best_r = n - 1
    for r in range(n - 1):
        g = ang[o[r + 1]] - ang[o[r]]
        if g > best_gap:
            best_gap = g
            best_r = r
    sector = 2.0 * math.pi - best_gap
    if sector < 0.0:
        sector = 0.0
    return sector, o[best_r], o[(best_r + 1) % n]


@kernel
def analytical_agent_action(B):
    """Move along the bisector of the enclosing sector when it is below pi."""
    if B.shape[0] == 0:
        return 1.0, 0.0, 0.0
    sector, i1, i2 = enclosing_sector(B)
    if sector >= math.pi:
        return 1.0, 0.0, 0.0
    vx = B[i1, 0] + B[i2, 0]
    vy = B[i1, 1] + B[i2, 1]
    nrm = math.sqrt(vx * vx + vy * vy)
    if nrm == 0.0:
        return 1.0, 0.0, 0.0
    return vx / nrm, vy / nrm, min(nrm / 2.0, 1.0)


@kernel
def network_actions(P, V, theta, mean_pool):
    N = P.shape[0]
    dirs = np.empty((N, 2))
    sig = np.empty(N)
    for i in range(N):
        B = gather_bearings(P, i, V)
        dx, dy, s, _, _ = network_agent_action(B, theta, mean_pool)
        dirs[i, 0] = dx
        dirs[i, 1] = dy
        sig[i] = s
    return dirs, sig


@kernel
def analytical_actions(P, V):
    N = P.shape[0]
    dirs = np.empty((N, 2))
    sig = np.empty(N)
    for i in range(N):
        B = gather_bearings(P, i, V)
        dx, dy, s = analytical_agent_action(B)
        dirs[i, 0] = dx
        dirs[i, 1] = dy
        sig[i] = s
    return dirs, sig


@kernel
def apply_actions(P, dirs, sig, s_max):
    N = P.shape[0]
    out = np.empty((N, 2))
    for i in range(N):
        step = sig[i] * s_max
        out[i, 0] = P[i, 0] + step * dirs[i, 0]
        out[i, 1] = P[i, 1] + step * dirs[i, 1]
    return out


# ---------------------------------------------------------------------------
# spectral


@kernel
def weighted_laplacian(P, V):
    N = P.shape[0]
    L = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            dx = P[j, 0] - P[i, 0]
            dy = P[j, 1] - P[i, 1]
            d = math.hypot(dx, dy)
            if d <= V:
                w = V - d
                L[i, j] = -w
                L[j, i] = -w
                L[i, i] += w
                L[j, j] += w
    return L


@kernel
def jacobi_eigh(A_in):
    """Cyclic Jacobi for a small symmetric matrix; ascending eigenpairs."""
    A = A_in.copy()
    n = A.shape[0]
    Q = np.eye(n)
    scale = max(1.0, math.sqrt(np.sum(A * A)))
    for _sweep in range(100):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j] * A[i, j]
        if math.sqrt(off) <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                th = (A[q, q] - A[p, p]) / (2.0 * apq)
                if th >= 0.0:
                    t = 1.0 / (th + math.sqrt(th * th + 1.0))
                else:
                    t = -1.0 / (-th + math.sqrt(th * th + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    qkp = Q[k, p]
                    qkq = Q[k, q]
                    Q[k, p] = c * qkp - s * qkq
                    Q[k, q] = s * qkp + c * qkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    o = np.argsort(w, kind="mergesort")
    return w[o], Q[:, o].copy()


@kernel
def lambda2_grad(P, V):
    """Algebraic connectivity of the weighted visibility graph, its Fiedler
    vector, the near-degeneracy flag, the position gradient and the spectrum."""
    N = P.shape[0]
    L = weighted_laplacian(P, V)
    w, Q = jacobi_eigh(L)
    lam2 = max(w[1], 0.0)
    v = Q[:, 1].copy()
    gap = False
    if N >= 3:
        gap = (w[2] - w[1]) < 1e-8 * max(1.0, w[N - 1])
    G = np.zeros((N, 2))
    for i in range(N):
        for j in range(i + 1, N):
            dx = P[j, 0] - P[i, 0]
            dy = P[j, 1] - P[i, 1]
            d = math.hypot(dx, dy)
            if d < V and d > 0.0:
                coef = (v[i] - v[j]) * (v[i] - v[j]) / d
                G[i, 0] += coef * dx
                G[i, 1] += coef * dy
                G[j, 0] -= coef * dx
                G[j, 1] -= coef * dy
    return lam2, v, gap, G, w


@kernel
def total_loss(P, V, alpha, beta):
    """``alpha / (lambda2 + eps) + beta * max centroid distance`` and its
    position gradient.  Returns ``(value, cohesion, task, lambda2, grad)``."""
    task, Gt = task_loss(P)
    lam2, _, _, Gl, _ = lambda2_grad(P, V)
    coh = 1.0 / (lam2 + COHESION_EPS)
    G = alpha * (-coh * coh) * Gl + beta * Gt
    return alpha * coh + beta * task, coh, task, lam2, G


# ---------------------------------------------------------------------------
# training


@kernel
def train_step(P, V, theta, mean_pool, s_max, alpha, beta):
    """One synchronous step with the current policy, then the loss on the
    resulting positions and its gradient w.r.t. ``theta``.

    Positions entering the step are constants; only this step's actions carry
    gradient.  Returns ``(loss, cohesion, task, lambda2, grad, next_positions)``.
    """
    N = P.shape[0]
    dirs = np.empty((N, 2))
    sig = np.empty(N)
    for i in range(N):
        B = gather_bearings(P, i, V)
        dx, dy, s, _, _ = network_agent_action(B, theta, mean_pool)
        dirs[i, 0] = dx
        dirs[i, 1] = dy
        sig[i] = s
    Pn = apply_actions(P, dirs, sig, s_max)
    loss, coh, task, lam2, G = total_loss(Pn, V, alpha, beta)

    grad = np.zeros(N_PARAMS)
    for i in range(N):
        B = gather_bearings(P, i, V)
        if B.shape[0] == 0:
            continue
        c, s, _ = frame_from_bearings(B)
        X = quantize(rotate_into(B, c, s))
        out = policy_forward(theta, X, mean_pool)
        if out[3]:
            continue
        gx = G[i, 0]
        gy = G[i, 1]
        gdx_w = s_max * sig[i] * gx
        gdy_w = s_max * sig[i] * gy
        g_sigma = s_max * (dirs[i, 0] * gx + dirs[i, 1] * gy)
        # world -> canonical frame (transpose of the post-rotation)
        gdx = c * gdx_w + s * gdy_w
        gdy = -s * gdx_w + c * gdy_w
        policy_backward(theta, mean_pool, out[2], out[3], out[4], out[5], out[6],
                        out[7], out[8], out[9], out[10], out[11], out[12], out[13],
                        out[14], gdx, gdy, g_sigma, grad)
    return loss, coh, task, lam2, grad, Pn
