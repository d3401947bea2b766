"""Bilinear and zero-order-hold discretization of (A, B, dt).

Both rules accept a diagonal spectrum (1-D array, elementwise formulas) or a
dense matrix (2-D array).  Dense solves go through a local LU factorization
with partial pivoting and the matrix exponential is scaling-and-squaring with
a Taylor core, so the module has no external linear-algebra dependency.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiscreteParams",
    "discretize",
    "discretize_bilinear",
    "discretize_zoh",
    "dense_matrix_exp",
    "lu_factor",
    "lu_solve",
]

RULES = ("bilinear", "zoh")


@dataclass
class DiscreteParams:
    """One-step discrete pair (A_bar, B_bar) tagged with its rule and dt."""

    A_bar: np.ndarray
    B_bar: np.ndarray
    rule: str
    dt: float

    @property
    def is_diagonal(self) -> bool:
        return self.A_bar.ndim == 1


def lu_factor(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """LU factorization with partial pivoting; returns (LU, pivot rows).

    Raises ValueError when a pivot is negligible relative to the matrix
    scale, i.e. the matrix is singular to working precision.
    """
    A = np.array(M, dtype=np.result_type(M.dtype, float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("LU factorization needs a square matrix")
    piv = np.arange(n)
    scale = max(float(np.abs(A).max()), np.finfo(float).tiny)
    for k in range(n - 1):
        i = int(np.argmax(np.abs(A[k:, k]))) + k
        if i != k:
            A[[k, i], :] = A[[i, k], :]
            piv[[k, i]] = piv[[i, k]]
        pivot = A[k, k]
        if abs(pivot) <= n * np.finfo(float).eps * scale:
            raise ValueError("matrix is singular to working precision")
        A[k + 1 :, k] /= pivot
        A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :])
    if abs(A[n - 1, n - 1]) <= n * np.finfo(float).eps * scale:
        raise ValueError("matrix is singular to working precision")
    return A, piv


def lu_solve(factored: tuple[np.ndarray, np.ndarray], b: np.ndarray) -> np.ndarray:
    """Solve M x = b for one or several right-hand sides."""
    LU, piv = factored
    n = LU.shape[0]
    x = np.array(b, dtype=np.result_type(LU.dtype, b.dtype))
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    x = x[piv, :]
    for k in range(1, n):
        x[k, :] -= LU[k, :k] @ x[:k, :]
    for k in range(n - 1, -1, -1):
        x[k, :] -= LU[k, k + 1 :] @ x[k + 1 :, :]
        x[k, :] /= LU[k, k]
    return x[:, 0] if squeeze else x


def dense_matrix_exp(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Taylor core.

    The input is scaled down to 1-norm <= 0.5, the series is summed to
    machine convergence, and the result squared back up.
    """
    M = np.asarray(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix exponential needs a square matrix")
    dtype = np.result_type(M.dtype, float)
    norm = float(np.abs(M).sum(axis=0).max()) if n else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    A = M.astype(dtype) / (2.0**squarings)
    E = np.eye(n, dtype=dtype)
    term = np.eye(n, dtype=dtype)
    for k in range(1, 60):
        term = term @ A / k
        E += term
        if np.abs(term).max() <= np.finfo(float).eps * max(np.abs(E).max(), 1.0):
            break
    for _ in range(squarings):
        E = E @ E
    return E


def _as_system(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim == 1:
        if B.shape != A.shape:
            raise ValueError("diagonal A and B must have the same length")
        return A, B, True
    if A.ndim == 2 and A.shape[0] == A.shape[1] and B.shape == (A.shape[0],):
        return A, B, False
    raise ValueError("A must be a vector or square matrix with matching B")


def discretize_bilinear(A: np.ndarray, B: np.ndarray, dt: float) -> DiscreteParams:
    """Tustin map: A_bar = (I - dt/2 A)^-1 (I + dt/2 A), B_bar = (I - dt/2 A)^-1 dt B."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    A, B, diagonal = _as_system(A, B)
    if diagonal:
        denom = 1.0 - (dt / 2.0) * A
        if (np.abs(denom) < 1e-300).any():
            raise ValueError("singular bilinear resolvent: some A_n equals 2/dt")
        A_bar = (1.0 + (dt / 2.0) * A) / denom
        B_bar = dt * B / denom
    else:
        n = A.shape[0]
        eye = np.eye(n, dtype=np.result_type(A.dtype, float))
        factored = lu_factor(eye - (dt / 2.0) * A)
        A_bar = lu_solve(factored, eye + (dt / 2.0) * A)
        B_bar = lu_solve(factored, dt * B)
    return DiscreteParams(A_bar=A_bar, B_bar=B_bar, rule="bilinear", dt=float(dt))


def _phi1(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1) / z with a series branch near zero to avoid cancellation."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-8
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs**2 / 6.0 + zs**3 / 24.0
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0) / zb
    return out


def discretize_zoh(A: np.ndarray, B: np.ndarray, dt: float) -> DiscreteParams:
    """Zero-order hold: A_bar = exp(dt A), B_bar = (dt A)^-1 (exp(dt A) - I) dt B.

    The dense path evaluates both blocks from one exponential of the
    augmented matrix [[dt A, dt B], [0, 0]], which equals the series limit
    and therefore also covers singular A.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A, B, diagonal = _as_system(A, B)
    if diagonal:
        z = dt * np.asarray(A, dtype=complex)
        A_bar = np.exp(z)
        B_bar = _phi1(z) * dt * B
    else:
        n = A.shape[0]
        dtype = np.result_type(A.dtype, B.dtype, float)
        W = np.zeros((n + 1, n + 1), dtype=dtype)
        W[:n, :n] = dt * A
        W[:n, n] = dt * B
        E = dense_matrix_exp(W)
        A_bar = E[:n, :n]
        B_bar = E[:n, n]
    return DiscreteParams(A_bar=A_bar, B_bar=B_bar, rule="zoh", dt=float(dt))


def discretize(A: np.ndarray, B: np.ndarray, dt: float, rule: str) -> DiscreteParams:
    """Dispatch on the rule name ('bilinear' or 'zoh')."""
    if rule == "bilinear":
        return discretize_bilinear(A, B, dt)
    if rule == "zoh":
        return discretize_zoh(A, B, dt)
    raise ValueError(f"unknown discretization rule '{rule}' (choose from {RULES})")
