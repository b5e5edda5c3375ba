"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels``
(Cython).  Floating-point operations are written in the same order in both
so the two backends agree to rounding.
"""

import numpy as np

BACKEND = "python"


def _l63_f(x, sigma, rho, beta):
    X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
    out = np.empty_like(x)
    out[..., 0] = -sigma * (X - Y)
    out[..., 1] = rho * X - Y - X * Z
    out[..., 2] = X * Y - beta * Z
    return out


def l63_run(x0, sigma, rho, beta, dt, noise):
    """RK4 steps of Lorenz-63 for a batch ``x0`` of shape (M, 3).

    ``noise`` has shape (n_steps, M, 3) and is added after every step.
    Returns all post-step states, shape (n_steps, M, 3).
    """
    x = np.array(x0, dtype=float)
    n = noise.shape[0]
    out = np.empty((n,) + x.shape)
    h = 0.5 * dt
    dt6 = dt / 6.0
    for k in range(n):
        k1 = _l63_f(x, sigma, rho, beta)
        k2 = _l63_f(x + h * k1, sigma, rho, beta)
        k3 = _l63_f(x + h * k2, sigma, rho, beta)
        k4 = _l63_f(x + dt * k3, sigma, rho, beta)
        x = x + dt6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4) + noise[k]
        out[k] = x
    return out


def _l96_f(x, F):
    xm1 = np.roll(x, 1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    xp1 = np.roll(x, -1, axis=-1)
    return -xm1 * (xm2 - xp1) - x + F


def l96_run(x0, F, dt, noise):
    """RK4 steps of single-scale Lorenz-96, batch ``x0`` of shape (M, K)."""
    x = np.array(x0, dtype=float)
    n = noise.shape[0]
    out = np.empty((n,) + x.shape)
    h = 0.5 * dt
    dt6 = dt / 6.0
    for k in range(n):
        k1 = _l96_f(x, F)
        k2 = _l96_f(x + h * k1, F)
        k3 = _l96_f(x + h * k2, F)
        k4 = _l96_f(x + dt * k3, F)
        x = x + dt6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4) + noise[k]
        out[k] = x
    return out


def _l96_two_f(s, K, J, F, h, b, c, sx):
    X = s[..., :K]
    Y = s[..., K:]
    hcb = h * c / b
    out = np.empty_like(s)
    sumY = Y.reshape(Y.shape[:-1] + (K, J)).sum(axis=-1)
    out[..., :K] = (
        -np.roll(X, 1, axis=-1) * (np.roll(X, 2, axis=-1) - np.roll(X, -1, axis=-1))
        - X + F + sx * hcb * sumY
    )
    out[..., K:] = (
        -c * b * np.roll(Y, -1, axis=-1) * (np.roll(Y, -2, axis=-1) - np.roll(Y, 1, axis=-1))
        - c * Y + hcb * np.repeat(X, J, axis=-1)
    )
    return out


def l96_two_scale_run(s0, K, J, F, h, b, c, dt, n_steps, sx=1.0):
    """RK4 steps of two-scale Lorenz-96 on stacked states ``[X, Y]`` (M, K+J*K).

    ``sx`` multiplies the fast-to-slow coupling term.
    """
    s = np.array(s0, dtype=float)
    out = np.empty((n_steps,) + s.shape)
    hh = 0.5 * dt
    dt6 = dt / 6.0
    for k in range(n_steps):
        k1 = _l96_two_f(s, K, J, F, h, b, c, sx)
        k2 = _l96_two_f(s + hh * k1, K, J, F, h, b, c, sx)
        k3 = _l96_two_f(s + hh * k2, K, J, F, h, b, c, sx)
        k4 = _l96_two_f(s + dt * k3, K, J, F, h, b, c, sx)
        s = s + dt6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k] = s
    return out


def _ks_f(u, c1, c2, c4):
    M, n = u.shape
    p = np.zeros((M, n + 4))
    p[:, 2:-2] = u
    um2 = p[:, :-4]
    um1 = p[:, 1:-3]
    up1 = p[:, 3:-1]
    up2 = p[:, 4:]
    ux = (up1 - um1) * c1
    uxx = (up1 - 2.0 * u + um1) * c2
    return -u * ux - uxx - c4 * (up2 - 4.0 * up1 + 6.0 * u - 4.0 * um1 + um2)


def ks_run(u0, nu, dx, dt, n_sub, noise):
    """KS RK4 with ``n_sub`` sub-steps of ``dt`` per record, batch (M, n).

    Zero Dirichlet boundaries and zero ghost points.  ``noise`` has shape
    (n_records, M, n) and is added once per record.
    """
    shape = np.shape(u0)
    u = np.atleast_2d(np.array(u0, dtype=float))
    noise = np.asarray(noise, dtype=float).reshape((noise.shape[0],) + u.shape)
    c1 = 1.0 / (2.0 * dx)
    c2 = 1.0 / (dx * dx)
    c4 = nu / (dx * dx * dx * dx)
    h = 0.5 * dt
    dt6 = dt / 6.0
    n = noise.shape[0]
    out = np.empty((n,) + u.shape)
    for k in range(n):
        for _ in range(n_sub):
            k1 = _ks_f(u, c1, c2, c4)
            k2 = _ks_f(u + h * k1, c1, c2, c4)
            k3 = _ks_f(u + h * k2, c1, c2, c4)
            k4 = _ks_f(u + dt * k3, c1, c2, c4)
            u = u + dt6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u = u + noise[k]
        out[k] = u
    return out.reshape((n,) + shape)


def linear_assignment(cost):
    """Minimum-cost perfect assignment on a square matrix.

    Shortest-augmenting-path Hungarian method with dual potentials, O(N^3).
    Returns ``perm`` with row ``i`` assigned to column ``perm[i]``.
    """
    a = np.asarray(cost, dtype=float)
    n = a.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            upd = free & (cur < minv[1:])
            minv[1:][upd] = cur[upd]
            way[1:][upd] = j0
            masked = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.intp)
    perm[p[1:] - 1] = np.arange(n)
    return perm


def sinkhorn_log(cost, gamma, n_iter):
    """Log-domain Sinkhorn between uniform marginals, kernel exp(-gamma*C)."""
    C = np.asarray(cost, dtype=float)
    N, M = C.shape
    Kl = -gamma * C
    la = -np.log(N)
    lb = -np.log(M)
    f = np.zeros(N)
    g = np.zeros(M)
    for _ in range(n_iter):
        A = Kl + g[None, :]
        m = A.max(axis=1)
        f = la - (m + np.log(np.exp(A - m[:, None]).sum(axis=1)))
        A = Kl + f[:, None]
        m = A.max(axis=0)
        g = lb - (m + np.log(np.exp(A - m[None, :]).sum(axis=0)))
    return np.exp(Kl + f[:, None] + g[None, :])
