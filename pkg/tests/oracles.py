"""Independent reference implementations used only by the tests.

None of these share code with the package: they are deliberately slow,
literal transcriptions of the defining formulas.
"""

import numpy as np


def scalar_dare_bisection(a, c, q, r, tol=1e-15):
    """Positive fixed point of p = a^2 p - a^2 c^2 p^2 / (c^2 p + r) + q by bisection."""

    def g(p):
        return a * a * p - (a * c * p) ** 2 / (c * c * p + r) + q - p

    lo, hi = 0.0, 1.0
    while g(hi) > 0:
        hi *= 2.0
    # g(0) = q >= 0 and g(hi) <= 0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def hankel_entry(i, j):
    # 1-based, straight from the definition
    return (1 + (-1) ** (i + j)) / (2 * (i + j - 1))


def hankel_literal(T):
    return np.array([[hankel_entry(i, j) for j in range(1, T + 1)] for i in range(1, T + 1)])


def power_iteration_deflation(H, k, iters=20000, tol=1e-15, seed=0):
    """Top-k eigenpairs of a PSD matrix by power iteration with Hotelling deflation."""
    rng = np.random.default_rng(seed)
    M = np.array(H, dtype=float)
    vals, vecs = [], []
    for _ in range(k):
        v = rng.standard_normal(M.shape[0])
        for prev in vecs:
            v -= (prev @ v) * prev
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = M @ v
            for prev in vecs:
                w -= (prev @ w) * prev
            new_lam = v @ w
            v = w / np.linalg.norm(w)
            if abs(new_lam - lam) <= tol * abs(new_lam):
                lam = new_lam
                break
            lam = new_lam
        vals.append(lam)
        vecs.append(v)
        M = M - lam * np.outer(v, v)
    return np.array(vals), np.array(vecs).T


def features_kronecker(filters, x_hist, y_hist, t):
    """f_t via the literal Kronecker form (phi_j(t-1:1)^T (x) I) applied to stacked histories."""
    T, k = filters.shape
    m = y_hist.shape[1]
    n = x_hist.shape[1]
    y_stack = y_hist[: t - 1].reshape(-1)  # y_1 .. y_{t-1}
    x_stack = x_hist[: t - 1].reshape(-1)
    parts_y, parts_x = [], []
    for j in range(k):
        # phi_j(t-1:1) lists phi_j(t-1), ..., phi_j(1), matching y_1 .. y_{t-1}
        phi_rev = np.array([filters[s - 1, j] for s in range(t - 1, 0, -1)])
        if m:
            parts_y.append(np.kron(phi_rev[None, :], np.eye(m)) @ y_stack if t > 1 else np.zeros(m))
        if n:
            parts_x.append(np.kron(phi_rev[None, :], np.eye(n)) @ x_stack if t > 1 else np.zeros(n))
    return np.concatenate(parts_y + parts_x + [x_hist[t - 1]])


def batch_ridge(F, Y, alpha):
    """(sum y f^T)(sum f f^T + alpha I)^{-1} with a dense general solver."""
    l = F.shape[1]
    Z = F.T @ F + alpha * np.eye(l)
    return np.linalg.solve(Z.T, (Y.T @ F).T).T


def kalman_loop(A, B, C, D, K, x, y):
    """Predictive-form Kalman filter written out step by step."""
    T = y.shape[0]
    h = np.zeros(A.shape[0])
    out = np.zeros_like(y)
    for t in range(T):
        out[t] = C @ h + D @ x[t]
        h = A @ h + B @ x[t] + K @ (y[t] - out[t])
    return out


def mc_conditional_cov(A, C, Q, R, filters, h_t, y_past, i, draws, seed):
    """Empirical cov of the output features f_{t+i} given h_t and y_1..y_t (input-free)."""
    rng = np.random.default_rng(seed)
    t = y_past.shape[0]
    d, m = A.shape[0], C.shape[0]
    k = filters.shape[1]
    Lq = np.linalg.cholesky(Q) if np.any(Q) else np.zeros_like(Q)
    Lr = np.linalg.cholesky(R)
    samples = np.zeros((draws, k * m))
    for n in range(draws):
        ys = list(y_past)
        h = h_t.copy()
        for _ in range(i - 1):
            h = A @ h + Lq @ rng.standard_normal(d)
            ys.append(C @ h + Lr @ rng.standard_normal(m))
        ys = np.array(ys)
        tt = t + i
        f = []
        for j in range(k):
            acc = np.zeros(m)
            for r in range(1, tt):
                acc += filters[tt - r - 1, j] * ys[r - 1]
            f.append(acc)
        samples[n] = np.concatenate(f)
    return np.cov(samples.T, ddof=1).reshape(k * m, k * m)
