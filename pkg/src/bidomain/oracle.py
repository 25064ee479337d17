"""Dense, small-scale reference computations used as ground truth in tests.

Everything here is O(N^3) and guarded by a hard size limit: these routines
exist to verify the sparse production code (block factorisation, pseudo-
inverses, the Schur-type block and its harmonic-mean form), never to solve
production problems.
"""

from __future__ import annotations

import numpy as np

from .errors import OracleError
from .system import BidomainSystem

#: Hard guard on N + N_H for all dense paths.
SIZE_LIMIT = 5000

#: Relative eigenvalue cutoff separating the kernel from the range.
KERNEL_CUTOFF = 1e-10


def _guard(sys: BidomainSystem) -> None:
    if sys.dof > SIZE_LIMIT:
        raise OracleError(
            f"dense oracle refused: {sys.dof} unknowns exceed the "
            f"size guard of {SIZE_LIMIT}"
        )


def pseudo_inverse(s: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix whose kernel is the constants.

    Inverts on the orthogonal complement of the constant vector and returns
    zero on the constants.  Raises OracleError if the numerical kernel does
    not have dimension one or does not point along the constant vector.
    """
    s = np.asarray(s, dtype=float)
    if s.shape[0] != s.shape[1]:
        raise OracleError("pseudo_inverse expects a square matrix")
    if not np.allclose(s, s.T, rtol=0, atol=1e-12 * max(1.0, np.abs(s).max())):
        raise OracleError("pseudo_inverse expects a symmetric matrix")
    eigvals, eigvecs = np.linalg.eigh(s)
    cutoff = KERNEL_CUTOFF * eigvals.max()
    null = eigvals < cutoff
    if null.sum() != 1:
        raise OracleError(
            f"kernel dimension {int(null.sum())} != 1 (cutoff {cutoff:.3e})"
        )
    kernel_vec = eigvecs[:, null][:, 0]
    n = s.shape[0]
    alignment = abs(kernel_vec @ np.full(n, n ** -0.5))
    if alignment < 1.0 - 1e-8:
        raise OracleError("kernel is not spanned by the constant vector")
    inv_vals = np.where(null, 0.0, 1.0 / np.where(null, 1.0, eigvals))
    return (eigvecs * inv_vals) @ eigvecs.T


def dense_lambda(sys: BidomainSystem) -> np.ndarray:
    """The full (N+N_H) x (N+N_H) operator, materialised."""
    _guard(sys)
    n, nh = sys.n, sys.n_heart
    out = np.zeros((n + nh, n + nh))
    out[:n, :n] = sys.stiff_total.toarray()
    si = sys.stiff_intra.toarray()
    out[:nh, n:] += si
    out[n:, :nh] += si
    out[n:, n:] = si + np.diag(sys.gamma * sys.heart_mass_diag)
    return out


def dense_schur_block(sys: BidomainSystem) -> np.ndarray:
    """The lower-right block of the exact block factorisation.

    Equal to the scaled heart mass plus the intra-cellular stiffness minus
    its projection through the bulk pseudo-inverse; symmetric positive
    definite.
    """
    _guard(sys)
    si = sys.stiff_intra.toarray()
    s1_pinv = pseudo_inverse(sys.stiff_total.toarray())
    nh = sys.n_heart
    coupling = si @ s1_pinv[:nh, :nh] @ si
    k = np.diag(sys.gamma * sys.heart_mass_diag) + si - coupling
    return 0.5 * (k + k.T)


def harmonic_mean_identity_error(sys: BidomainSystem, rng: np.random.Generator,
                                 trials: int = 50) -> float:
    """Max error of K0 * (Si^+ + restrict Se^+ pad) x = x on mean-free x.

    The stiffness part of the Schur block acts as the harmonic mean of the
    intra- and extra-cellular stiffness matrices; this checks that identity
    against dense pseudo-inverses.
    """
    _guard(sys)
    nh = sys.n_heart
    k0 = dense_schur_block(sys) - np.diag(sys.gamma * sys.heart_mass_diag)
    si_pinv = pseudo_inverse(sys.stiff_intra.toarray())
    se_pinv = pseudo_inverse(sys.stiff_extra.toarray())
    mean_op = si_pinv + se_pinv[:nh, :nh]
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(nh)
        x -= x.mean()
        err = np.linalg.norm(k0 @ (mean_op @ x) - x) / np.linalg.norm(x)
        worst = max(worst, err)
    return worst


def _dense_lu_factors(sys: BidomainSystem):
    n, nh = sys.n, sys.n_heart
    si = sys.stiff_intra.toarray()
    s1 = sys.stiff_total.toarray()
    s1_pinv = pseudo_inverse(s1)
    k = dense_schur_block(sys)

    lower = np.zeros((n + nh, n + nh))
    lower[:n, :n] = s1
    lower[n:, :nh] = si
    lower[n:, n:] = k

    upper = np.eye(n + nh)
    upper[:n, n:] = s1_pinv[:, :nh] @ si
    return lower, upper, s1_pinv, k


def block_lu_error(sys: BidomainSystem) -> float:
    """Relative Frobenius error of the dense block factorisation."""
    _guard(sys)
    lam = dense_lambda(sys)
    lower, upper, _, _ = _dense_lu_factors(sys)
    return float(np.linalg.norm(lower @ upper - lam) / np.linalg.norm(lam))


def lu_inverse_error(sys: BidomainSystem, rng: np.random.Generator,
                     trials: int = 20) -> float:
    """Max residual of the closed-form inverse factors.

    Checks that the pseudo-inverse of the lower factor composes with it to
    the block diagonal (mean-removing projector, identity), that the upper
    factor inverts exactly, and that the two together solve the coupled
    system for right-hand sides in its range.
    """
    _guard(sys)
    n, nh = sys.n, sys.n_heart
    lam = dense_lambda(sys)
    lower, upper, s1_pinv, k = _dense_lu_factors(sys)
    si = sys.stiff_intra.toarray()
    k_inv = np.linalg.inv(k)

    lower_pinv = np.zeros_like(lower)
    lower_pinv[:n, :n] = s1_pinv
    lower_pinv[n:, :n] = -k_inv @ si @ s1_pinv[:nh, :]
    lower_pinv[n:, n:] = k_inv

    upper_inv = np.eye(n + nh)
    upper_inv[:n, n:] = -s1_pinv[:, :nh] @ si

    proj = np.eye(n + nh)
    proj[:n, :n] -= 1.0 / n
    scale = np.linalg.norm(lower, np.inf) * np.linalg.norm(lower_pinv, np.inf)
    errors = [
        np.linalg.norm(lower @ lower_pinv - proj) / scale,
        np.linalg.norm(lower_pinv @ lower - proj) / scale,
        np.linalg.norm(upper @ upper_inv - np.eye(n + nh)),
    ]
    solve_op = upper_inv @ lower_pinv
    for _ in range(trials):
        y_u = rng.standard_normal(n)
        y_u -= y_u.mean()
        y = np.concatenate([y_u, rng.standard_normal(nh)])
        x = solve_op @ y
        errors.append(np.linalg.norm(lam @ x - y) / np.linalg.norm(y))
    return float(max(errors))
