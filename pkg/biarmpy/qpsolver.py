'''
operator-splitting solver for convex quadratic programs

Solves

    minimize    1/2 x'Hx + g'x
    subject to  A_ineq x <= b_ineq,  A_eq x = b_eq

by rewriting the constraints as l <= Ax <= u and running ADMM iterations
on the equilibrated problem. A single sparse LDL-type factorization of the
regularized KKT matrix is reused until the step size rho is adapted.
Converged iterates are polished by solving the equality-constrained
problem on the guessed active set.
'''

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import sparse
import scipy.sparse.linalg as spla

from .exceptions import QPConvergenceWarning

__all__ = ['QPSolution',
           'solve_qp',
           'solve_bounded_qp',
           'kkt_residuals']

#admm settings
SIGMA = 1e-6
ALPHA = 1.6
RHO = 0.1
RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_SCALE = 1e3
SCALING_ITERS = 10
CHECK_EVERY = 10
ADAPT_EVERY = 50
POLISH_DELTA = 1e-9
POLISH_ROUNDS = 10


@dataclass(eq=False)
class QPSolution:
    '''result of a QP solve

    status is one of 'solved', 'max_iter', 'infeasible' or 'unbounded'.
    For the inequality form, y_ineq >= 0 are the multipliers of
    A_ineq x <= b_ineq and y_eq those of the equalities, so that
    Hx + g + A_ineq'y_ineq + A_eq'y_eq = 0 at the optimum.
    '''
    status: str
    x: np.ndarray
    y: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    polished: bool = False
    objective: float = np.nan
    y_ineq: np.ndarray = None
    y_eq: np.ndarray = None

    @property
    def solved(self):
        return self.status == 'solved'


def _to_csc(M, shape=None):
    if M is None:
        return sparse.csc_matrix(shape)
    return sparse.csc_matrix(M, dtype=np.float64)


def _max_abs(M, axis):
    return np.asarray(abs(M).max(axis=axis).todense()).ravel()


def _equilibrate(P, q, A):
    '''modified Ruiz equilibration of the KKT matrix plus cost scaling'''
    n, m = P.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    c = 1.0
    for _ in range(SCALING_ITERS):
        col = _max_abs(P, 0)
        if m > 0:
            col = np.maximum(col, _max_abs(A, 0))
            e = 1.0 / np.sqrt(np.clip(_max_abs(A, 1), 1e-4, 1e4))
        else:
            e = np.ones(0)
        d = 1.0 / np.sqrt(np.clip(col, 1e-4, 1e4))
        Dm = sparse.diags(d)
        P = (Dm @ P @ Dm).tocsc()
        A = (sparse.diags(e) @ A @ Dm).tocsc()
        q = d * q
        D *= d
        E *= e

        gamma = max(np.mean(_max_abs(P, 0)), np.max(np.abs(q)) if n > 0 else 0.0)
        gamma = 1.0 / np.clip(gamma, 1e-4, 1e4)
        P = gamma * P
        q = gamma * q
        c *= gamma
    return P, q, A, D, E, c


def _rho_vector(l, u, rho):
    rho_vec = np.full(len(l), rho)
    rho_vec[(u - l) < 1e-8] = RHO_EQ_SCALE * rho
    rho_vec[np.isinf(l) & np.isinf(u)] = RHO_MIN
    return rho_vec


def _factor_kkt(P, A, rho_vec):
    n = P.shape[0]
    if A.shape[0] == 0:
        return spla.splu((P + SIGMA * sparse.eye(n)).tocsc())
    kkt = sparse.bmat([[P + SIGMA * sparse.eye(n), A.T],
                       [A, -sparse.diags(1.0 / rho_vec)]], format='csc')
    return spla.splu(kkt)


def _primal_infeasible(delta_y, A, l, u, D, E, eps):
    v = E * delta_y
    norm_v = np.linalg.norm(v, np.inf)
    if norm_v <= eps:
        return False
    support = (np.where(v > 0, u, 0.0) * np.maximum(v, 0.0) +
               np.where(v < 0, l, 0.0) * np.minimum(v, 0.0)).sum()
    if not support < -eps * norm_v:
        return False
    return np.linalg.norm((A.T @ delta_y) / D, np.inf) < eps * norm_v


def _dual_infeasible(delta_x, P, q, A, l, u, D, E, c, eps):
    w = D * delta_x
    norm_w = np.linalg.norm(w, np.inf)
    if norm_w <= eps:
        return False
    if not q.dot(delta_x) / c < -eps * norm_w:
        return False
    if np.linalg.norm((P @ delta_x) / D, np.inf) / c >= eps * norm_w:
        return False
    Aw = (A @ delta_x) / E
    bad_upper = np.isfinite(u) & (Aw > eps * norm_w)
    bad_lower = np.isfinite(l) & (Aw < -eps * norm_w)
    return not np.any(bad_upper | bad_lower)


def _polish(P, q, A, l, u, x, y, tol):
    '''refines an ADMM iterate on its active set

    Rows are moved in and out of the active set until the reduced KKT
    solution is primal feasible and the multipliers have the right signs.
    Returns (x, y) or None when no consistent active set is found.
    '''
    n, m = P.shape[0], A.shape[0]
    if m == 0:
        return spla.spsolve(P.tocsc(), -q).reshape(n), np.zeros(0)
    Ax = A @ x
    equality = (u - l) < 1e-8
    lower = ~equality & np.isfinite(l) & ((Ax - l < -y) | (y < -tol))
    upper = ~equality & ~lower & np.isfinite(u) & ((u - Ax < y) | (y > tol))

    for _ in range(POLISH_ROUNDS):
        active = equality | lower | upper
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            x_pol = spla.spsolve(P.tocsc(), -q).reshape(n)
            Ax = A @ x_pol
            over, under = Ax > u + tol, Ax < l - tol
            if not (np.any(over) or np.any(under)):
                return x_pol, np.zeros(m)
            lower, upper = under, over
            continue
        A_red = A[idx]
        target = np.where(upper[idx], u[idx], l[idx])
        K = sparse.bmat([[P, A_red.T], [A_red, None]], format='csc')
        K_reg = (K + sparse.diags(np.concatenate([np.full(n, POLISH_DELTA),
                                                  np.full(len(idx), -POLISH_DELTA)]))).tocsc()
        rhs = np.concatenate([-q, target])
        try:
            lu = spla.splu(K_reg)
        except RuntimeError:
            return None
        sol = lu.solve(rhs)
        for _ in range(3):
            sol = sol + lu.solve(rhs - K @ sol)

        x_pol = sol[:n]
        y_pol = np.zeros(m)
        y_pol[idx] = sol[n:]

        Ax = A @ x_pol
        wrong_sign = (lower & (y_pol > tol)) | (upper & (y_pol < -tol))
        over = ~active & (Ax > u + tol)
        under = ~active & (Ax < l - tol)
        if not (np.any(wrong_sign) or np.any(over) or np.any(under)):
            return x_pol, y_pol
        lower = (lower & ~wrong_sign) | under
        upper = (upper & ~wrong_sign) | over
    return None


def _residuals(P, q, A, l, u, x, y):
    Ax = A @ x
    pri = np.max(np.maximum(l - Ax, 0.0) + np.maximum(Ax - u, 0.0)) if len(l) else 0.0
    dua = np.linalg.norm(P @ x + q + A.T @ y, np.inf)
    return float(pri), float(dua)


def solve_bounded_qp(P, q, A=None, l=None, u=None, tol=1e-6, max_iter=20000,
                     x0=None, y0=None, polish=True, verbose=False):
    '''solves min 1/2 x'Px + q'x subject to l <= Ax <= u

    Parameters
    ----------
    P : 2d array or sparse matrix
        symmetric positive semidefinite cost matrix (n x n)

    q : 1d array
        linear cost

    A : 2d array or sparse matrix
        constraint matrix (m x n), None for an unconstrained problem

    l, u : 1d arrays
        lower and upper bounds, -inf/inf for one-sided rows

    tol : float
        absolute and relative residual tolerance
        default : 1e-6

    max_iter : int
        iteration cap of the ADMM loop
        default : 20000

    x0, y0 : 1d arrays or None
        warm start for the primal iterate and the bound multipliers

    polish : bool
        whether to refine the solution on the guessed active set
        default : True

    Returns
    -------
    solution : QPSolution
        y holds one multiplier per row, positive on active upper bounds
        and negative on active lower bounds.

    Examples
    --------
    >>> sol = solve_bounded_qp(np.eye(2), np.array([-1., -1.]), np.eye(2),
    ...                        np.array([0., 0.]), np.array([0.5, 2.]))
    >>> sol.status, sol.x.round(6)
    ('solved', array([0.5, 1. ]))
    '''
    P = _to_csc(P)
    n = P.shape[0]
    q = np.asarray(q, dtype=np.float64).reshape(n)
    A = _to_csc(A, (0, n))
    m = A.shape[0]
    l = np.full(m, -np.inf) if l is None else np.asarray(l, dtype=np.float64).reshape(m)
    u = np.full(m, np.inf) if u is None else np.asarray(u, dtype=np.float64).reshape(m)
    if np.any(l > u):
        raise ValueError('lower bounds need to be <= upper bounds')
    P = (P + 1e-8 * sparse.eye(n)).tocsc()

    Ps, qs, As, D, E, c = _equilibrate(P, q, A)
    ls = E * l
    us = E * u

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64) / D
    y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=np.float64) * c / E
    z = np.clip(As @ x, ls, us)

    rho = RHO
    rho_vec = _rho_vector(ls, us, rho)
    lu = _factor_kkt(Ps, As, rho_vec)

    status = 'max_iter'
    pri = dua = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        x_prev, y_prev = x, y
        if m > 0:
            sol = lu.solve(np.concatenate([SIGMA * x - qs, z - y / rho_vec]))
            x_tilde = sol[:n]
            z_tilde = z + (sol[n:] - y) / rho_vec
            x = ALPHA * x_tilde + (1.0 - ALPHA) * x
            z_relaxed = ALPHA * z_tilde + (1.0 - ALPHA) * z
            z = np.clip(z_relaxed + y / rho_vec, ls, us)
            y = y + rho_vec * (z_relaxed - z)
        else:
            x = lu.solve(SIGMA * x - qs)

        if iteration % CHECK_EVERY != 0 and iteration != max_iter:
            continue

        #convergence in the unscaled problem
        Ax = As @ x
        Px = Ps @ x
        Aty = As.T @ y
        pri = np.linalg.norm((Ax - z) / E, np.inf) if m > 0 else 0.0
        dua = np.linalg.norm((Px + qs + Aty) / D, np.inf) / c
        norm_pri = max(np.linalg.norm(Ax / E, np.inf), np.linalg.norm(z / E, np.inf)) if m > 0 else 0.0
        norm_dua = max(np.linalg.norm(Px / D, np.inf), np.linalg.norm(Aty / D, np.inf),
                       np.linalg.norm(qs / D, np.inf)) / c
        if pri <= tol + tol * norm_pri and dua <= tol + tol * norm_dua:
            status = 'solved'
            break

        if m > 0 and _primal_infeasible(y - y_prev, As, l, u, D, E, tol):
            status = 'infeasible'
            break
        if _dual_infeasible(x - x_prev, Ps, qs, As, l, u, D, E, c, tol):
            status = 'unbounded'
            break

        if m > 0 and iteration % ADAPT_EVERY == 0:
            ratio = np.sqrt((pri / max(norm_pri, 1e-10)) / max(dua / max(norm_dua, 1e-10), 1e-10))
            new_rho = float(np.clip(rho * ratio, RHO_MIN, RHO_MAX))
            if new_rho > 5.0 * rho or new_rho < 0.2 * rho:
                rho = new_rho
                rho_vec = _rho_vector(ls, us, rho)
                lu = _factor_kkt(Ps, As, rho_vec)

    if verbose:
        print('qp: %s after %i iterations, residuals %.2e / %.2e' %(status, iteration, pri, dua))

    if status in ('infeasible', 'unbounded'):
        return QPSolution(status, None, None, iteration, float(pri), float(dua))

    x = D * x
    y = E * y / c
    pri, dua = _residuals(P, q, A, l, u, x, y)
    polished = False
    if polish:
        refined = _polish(P, q, A, l, u, x, y, tol)
        if refined is not None:
            pri_pol, dua_pol = _residuals(P, q, A, l, u, refined[0], refined[1])
            if pri_pol <= max(pri, tol) and dua_pol <= max(dua, tol):
                x, y = refined
                pri, dua = pri_pol, dua_pol
                polished = True
                if status == 'max_iter' and pri <= tol and dua <= tol:
                    status = 'solved'

    if status == 'max_iter':
        warnings.warn('QP solver stopped at the iteration limit (%i), residuals %.2e / %.2e'
                      %(max_iter, pri, dua), QPConvergenceWarning)

    objective = float(0.5 * x.dot(P @ x) + q.dot(x))
    return QPSolution(status, x, y, iteration, pri, dua, polished, objective)


def solve_qp(H, g, A_ineq=None, b_ineq=None, A_eq=None, b_eq=None, tol=1e-6,
             max_iter=20000, polish=True, verbose=False):
    '''solves a convex QP in inequality/equality form

    Minimizes 1/2 x'Hx + g'x subject to A_ineq x <= b_ineq and A_eq x = b_eq.

    Parameters
    ----------
    H : 2d array or sparse matrix
        symmetric positive semidefinite, regularized by 1e-8 * I

    g : 1d array
        linear cost term

    A_ineq, b_ineq : 2d array, 1d array or None
        inequality constraints

    A_eq, b_eq : 2d array, 1d array or None
        equality constraints

    tol : float
        KKT residual tolerance
        default : 1e-6

    Returns
    -------
    solution : QPSolution
        status 'infeasible' marks a detected infeasibility certificate,
        x and the duals are None in that case.

    Examples
    --------
    minimize x^2 subject to x >= 1

    >>> sol = solve_qp([[2.0]], [0.0], A_ineq=[[-1.0]], b_ineq=[-1.0])
    >>> '%.6f, %.6f' %(sol.x[0], sol.y_ineq[0])
    '1.000000, 2.000000'

    projection of (3, 1) onto the halfspace x + y <= 2

    >>> sol = solve_qp(2 * np.eye(2), [-6.0, -2.0], A_ineq=[[1.0, 1.0]], b_ineq=[2.0])
    >>> sol.x.round(6)
    array([2., 0.])

    equality constraints carry free-sign multipliers

    >>> sol = solve_qp(2 * np.eye(2), [0.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[1.0])
    >>> sol.x.round(6), round(float(sol.y_eq[0]), 6)
    (array([0.5, 0.5]), -1.0)

    contradicting bounds are reported, not raised

    >>> solve_qp([[2.0]], [0.0], A_ineq=[[1.0], [-1.0]], b_ineq=[0.0, -1.0]).status
    'infeasible'
    '''
    dense_H = not sparse.issparse(H)
    H = _to_csc(H)
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError('H needs to be square, got shape %s' %(H.shape,))
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    if len(g) != n:
        raise ValueError('dimension mismatch: H is %i x %i but g has length %i' %(n, n, len(g)))
    asym = abs(H - H.T).max() if H.nnz else 0.0
    if asym > 1e-9 * (1.0 + abs(H).max()):
        raise ValueError('H needs to be symmetric')
    if dense_H and n <= 200 and np.linalg.eigvalsh(H.toarray()).min() < -1e-8 * (1.0 + abs(H).max()):
        raise ValueError('H needs to be positive semidefinite')

    blocks, lows, ups = [], [], []
    m_ineq = m_eq = 0
    if A_ineq is not None:
        A_ineq = _to_csc(A_ineq)
        b_ineq = np.asarray(b_ineq, dtype=np.float64).reshape(-1)
        if A_ineq.shape != (len(b_ineq), n):
            raise ValueError('A_ineq needs shape (%i, %i), got %s' %(len(b_ineq), n, A_ineq.shape))
        m_ineq = len(b_ineq)
        blocks.append(A_ineq)
        lows.append(np.full(m_ineq, -np.inf))
        ups.append(b_ineq)
    if A_eq is not None:
        A_eq = _to_csc(A_eq)
        b_eq = np.asarray(b_eq, dtype=np.float64).reshape(-1)
        if A_eq.shape != (len(b_eq), n):
            raise ValueError('A_eq needs shape (%i, %i), got %s' %(len(b_eq), n, A_eq.shape))
        m_eq = len(b_eq)
        blocks.append(A_eq)
        lows.append(b_eq)
        ups.append(b_eq)

    if blocks:
        A = sparse.vstack(blocks, format='csc')
        l, u = np.concatenate(lows), np.concatenate(ups)
    else:
        A, l, u = None, None, None

    sol = solve_bounded_qp(H, g, A, l, u, tol=tol, max_iter=max_iter, polish=polish,
                           verbose=verbose)
    if sol.y is not None:
        sol.y_ineq = sol.y[:m_ineq]
        sol.y_eq = sol.y[m_ineq:m_ineq + m_eq]
    return sol


def kkt_residuals(H, g, x, A_ineq=None, b_ineq=None, y_ineq=None, A_eq=None, b_eq=None,
                  y_eq=None):
    '''KKT residuals of a candidate primal-dual pair

    Returns
    -------
    residuals : dict
        'stationarity', 'primal' (constraint violation), 'dual'
        (negative inequality multipliers) and 'complementarity'.

    Examples
    --------
    >>> r = kkt_residuals([[2.0]], [0.0], [1.0], A_ineq=[[-1.0]], b_ineq=[-1.0], y_ineq=[2.0])
    >>> max(r.values())
    0.0
    '''
    H = _to_csc(H)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    grad = H @ x + np.asarray(g, dtype=np.float64).reshape(-1)
    primal = dual = complementarity = 0.0
    if A_ineq is not None:
        A_ineq = _to_csc(A_ineq)
        y_ineq = np.asarray(y_ineq, dtype=np.float64).reshape(-1)
        slack = np.asarray(b_ineq, dtype=np.float64).reshape(-1) - A_ineq @ x
        grad = grad + A_ineq.T @ y_ineq
        if len(slack):
            primal = max(primal, float(np.max(np.maximum(-slack, 0.0))))
            dual = float(np.max(np.maximum(-y_ineq, 0.0)))
            complementarity = float(np.max(np.abs(y_ineq * slack)))
    if A_eq is not None:
        A_eq = _to_csc(A_eq)
        grad = grad + A_eq.T @ np.asarray(y_eq, dtype=np.float64).reshape(-1)
        resid = A_eq @ x - np.asarray(b_eq, dtype=np.float64).reshape(-1)
        if len(resid):
            primal = max(primal, float(np.max(np.abs(resid))))
    return {'stationarity': float(np.linalg.norm(grad, np.inf)),
            'primal': primal,
            'dual': dual,
            'complementarity': complementarity}
