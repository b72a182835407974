"""Independent reference computations for the test suite.

Nothing here calls the package's formula code: derivatives come from
Richardson-extrapolated central differences of explicit callables, index
sums are written as loops, and closed forms are hand-derived.
"""

from itertools import permutations

import numpy as np


def fd(f, x, h=1e-3):
    """Richardson-extrapolated central difference, derivative index appended last."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = 1.0

        def D(s):
            return (np.asarray(f(x + s * e)) - np.asarray(f(x - s * e))) / (2 * s)

        cols.append((4 * D(h / 2) - D(h)) / 3)
    return np.stack(cols, axis=-1)


def pi_matrix(components, x):
    """Full antisymmetric matrix from an explicit ``(i, j) -> f(x)`` upper-triangle map."""
    n = len(x)
    P = np.zeros((n, n))
    for (i, j), f in components.items():
        P[i, j] += f(x)
        P[j, i] -= f(x)
    return P


def brute_jacobiator(P, dP):
    """``J^{ijk}`` by explicit loops from ``P[i, j]`` and ``dP[i, j, l] = d_l pi^{ij}``."""
    n = P.shape[0]
    J = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                s = 0.0
                for l in range(n):
                    s += P[i, l] * dP[j, k, l] + P[j, l] * dP[k, i, l] + P[k, l] * dP[i, j, l]
                J[i, j, k] = s
    return J


def levi_civita_symbol():
    eps = np.zeros((3, 3, 3))
    for p in permutations(range(3)):
        eps[p] = np.linalg.det(np.eye(3)[list(p)])
    return eps


def ball_points(rng, count, n, radius):
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius * rng.uniform(0, 1, (count, 1)) ** (1 / n)


# cotangent calculus by finite differences ------------------------------------


def sharp_fn(Pf, af):
    return lambda x: Pf(x).T @ af(x)


def lie_form(Xf, bf, x):
    """``(L_X b)_i = X^k d_k b_i + b_k d_i X^k``."""
    return fd(bf, x) @ Xf(x) + fd(Xf, x).T @ bf(x)


def cot_bracket(Pf, af, bf, x):
    """``[a, b]_pi = L_{pi# a} b - L_{pi# b} a - d(pi(a, b))``."""
    pab = lambda z: af(z) @ Pf(z) @ bf(z)
    return (
        lie_form(sharp_fn(Pf, af), bf, x)
        - lie_form(sharp_fn(Pf, bf), af, x)
        - fd(pab, x)
    )


def vec_bracket(Xf, Vf, x):
    return fd(Vf, x) @ Xf(x) - fd(Xf, x) @ Vf(x)


def extension_transport_forms(Pf, gamma, a, u, du, K, L):
    """Covariant derivative of ``u`` along ``(gamma, a)`` from explicit affine extensions.

    ``A(x) = a + K (x - gamma)`` extends ``a``; ``Theta_t(x) = u(t) + L (x - gamma(t))``
    extends ``u``. With the flat chart connection,
    ``nabla-bar_a u = nabla_{pi# Theta} A + [A, Theta]_pi + d_t Theta`` at ``gamma``.
    """
    gdot = Pf(gamma).T @ a
    Af = lambda x: a + K @ (x - gamma)
    Tf = lambda x: u + L @ (x - gamma)
    nabla = K @ (Pf(gamma).T @ u)
    return nabla + cot_bracket(Pf, Af, Tf, gamma) + (du - L @ gdot)


def extension_transport_vectors(Pf, gamma, a, v, dv, K, L):
    """Same construction on vectors: ``pi#(nabla_V A) + [pi# A, V] + d_t V``."""
    gdot = Pf(gamma).T @ a
    Af = lambda x: a + K @ (x - gamma)
    Vf = lambda x: v + L @ (x - gamma)
    return Pf(gamma).T @ (K @ v) + vec_bracket(sharp_fn(Pf, Af), Vf, gamma) + (dv - L @ gdot)


# Levi-Civita by linear algebra ------------------------------------------------


def levi_civita_lstsq(P, dP, G, dG):
    """Solve the torsion and metric equations for ``C[p, q, r]`` directly.

    torsion: ``C[p,q,r] - C[q,p,r] = d_r pi^{pq}``
    metric:  ``pi^{pj} d_j g^{qs} = C[p,q,r] g^{rs} + C[p,s,r] g^{qr}``
    Returns the solution and the residual norm of the stacked system.
    """
    n = P.shape[0]
    idx = lambda p, q, r: (p * n + q) * n + r
    rows, rhs = [], []
    for p in range(n):
        for q in range(n):
            for r in range(n):
                row = np.zeros(n**3)
                row[idx(p, q, r)] += 1
                row[idx(q, p, r)] -= 1
                rows.append(row)
                rhs.append(dP[p, q, r])
    for p in range(n):
        for q in range(n):
            for s in range(n):
                row = np.zeros(n**3)
                for r in range(n):
                    row[idx(p, q, r)] += G[r, s]
                    row[idx(p, s, r)] += G[q, r]
                rows.append(row)
                rhs.append(sum(P[p, j] * dG[q, s, j] for j in range(n)))
    A, b = np.array(rows), np.array(rhs)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol.reshape(n, n, n), float(np.linalg.norm(A @ sol - b))


# constant-bivector closed forms ---------------------------------------------------


def constant_omega(Pi):
    n = Pi.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return np.block([[Z, I], [-I, Pi]])


def constant_omega_inv(Pi):
    n = Pi.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return np.block([[Pi, -I], [I, Z]])


def constant_jacobian(Pi, t):
    n = Pi.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return np.block([[I, t * Pi.T], [Z, I]])


def twisted_gauss_legendre(Pi, sigma, y, nodes=32):
    """``int_0^1 J_t^T S J_t dt`` with the closed-form ``J_t`` of a constant bivector.

    ``S_{ab} = sigma(Pi^T y, P e_a, P e_b)`` is constant along the flow.
    """
    n = Pi.shape[0]
    u = Pi.T @ y
    S = np.zeros((2 * n, 2 * n))
    for j in range(n):
        for k in range(n):
            S[j, k] = sum(sigma[i, j, k] * u[i] for i in range(n))
    s, w = np.polynomial.legendre.leggauss(nodes)
    total = np.zeros_like(S)
    for si, wi in zip(s, w):
        t = 0.5 * (si + 1)
        Jt = constant_jacobian(Pi, t)
        total += 0.5 * wi * Jt.T @ S @ Jt
    return total


def full_three_form(entries, n):
    """Antisymmetric array from 0-based ``{(i, j, k): value}``."""
    s = np.zeros((n, n, n))
    for (i, j, k), v in entries.items():
        for p in permutations(range(3)):
            idx = tuple((i, j, k)[m] for m in p)
            s[idx] += v * np.linalg.det(np.eye(3)[list(p)])
    return s
