# tdec_coordination/jacobi.py
"""
Symmetric eigenvalue solvers.

jacobi_eigenvalues is a cyclic Jacobi method using round-robin
(tournament) ordering: every round rotates n/2 disjoint index pairs
at once, so a round is a handful of vectorized numpy updates and a
sweep is n-1 rounds covering every (p, q) pair exactly once.
"""

import numpy as np
import scipy.linalg

from .errors import NumericalError

DEFAULT_TOL = 1e-12
DEFAULT_MAX_SWEEPS = 100
SOLVERS = ("jacobi", "lapack")


def _tournament_rounds(n):
    """n-1 (or n for odd n) rounds of disjoint pairs covering all pairs."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(a):
    return np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))


def jacobi_eigenvalues(matrix, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
    """All eigenvalues of a real symmetric matrix (unsorted).

    Converged when the off-diagonal Frobenius norm drops below
    tol * Frobenius norm of the input.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf")
    if not np.allclose(a, a.T, rtol=0, atol=1e-10 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2
    n = a.shape[0]
    if n < 2:
        return np.diag(a).copy()

    threshold = tol * np.linalg.norm(a)
    rounds = _tournament_rounds(n)
    for _ in range(max_sweeps):
        if _off_norm(a) <= threshold:
            return np.diag(a).copy()
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            app = a[p, p]
            aqq = a[q, q]
            theta = np.zeros_like(apq)
            theta[active] = (aqq[active] - app[active]) / (2.0 * apq[active])
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            with np.errstate(over="ignore"):
                t = sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[~active] = 0.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            # A <- J^T A J, columns then rows
            col_p = a[:, p]
            col_q = a[:, q]
            a[:, p] = col_p * c - col_q * s
            a[:, q] = col_p * s + col_q * c
            row_p = a[p, :]
            row_q = a[q, :]
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0

    if _off_norm(a) <= threshold:
        return np.diag(a).copy()
    raise NumericalError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def symmetric_eigenvalues(matrix, solver="jacobi"):
    if solver == "jacobi":
        return jacobi_eigenvalues(matrix)
    if solver == "lapack":
        return scipy.linalg.eigh(np.asarray(matrix, dtype=np.float64), eigvals_only=True)
    raise ValueError(f"unknown eigensolver '{solver}' (expected one of {SOLVERS})")
