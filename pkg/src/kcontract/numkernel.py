"""Dense real linear algebra kernel.

Eigenvalues, symmetric inertia counting, Lyapunov solves and definiteness
tests. Everything here operates on plain numpy arrays (real entries) and is
pure: no global state, safe to share across threads. Targets are small dense
matrices (n <= 20); the Lyapunov solver deliberately uses the O(n^6)
Kronecker vectorization because at this scale robustness beats speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ZERO_TOL = 1e-9
SYMMETRY_RTOL = 1e-12


class NumericalError(RuntimeError):
    """Raised when a dense kernel operation cannot produce a trustworthy result."""


@dataclass(frozen=True)
class InertiaTriple:
    """Eigenvalue sign counts (negative, zero, positive), multiplicities included."""

    neg: int
    zero: int
    pos: int

    def as_tuple(self):
        return (self.neg, self.zero, self.pos)

    def __iter__(self):
        return iter(self.as_tuple())

    def __eq__(self, other):
        if isinstance(other, tuple):
            return self.as_tuple() == other
        if isinstance(other, InertiaTriple):
            return self.as_tuple() == other.as_tuple()
        return NotImplemented


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by nonincreasing real part, ties by nonincreasing imag part."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    @property
    def real(self):
        return self.values.real

    def top_real_sum(self, k: int) -> float:
        """Sum of the k largest real parts."""
        if not 1 <= k <= len(self.values):
            raise ValueError(f"k={k} out of range for spectrum of size {len(self.values)}")
        return float(self.values.real[:k].sum())


def as_square(M, name="matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def check_symmetric(S, name="matrix") -> np.ndarray:
    """Validate symmetry to relative tolerance and return the symmetrized array."""
    S = as_square(S, name)
    scale = np.abs(S).max()
    if scale > 0 and np.abs(S - S.T).max() > max(SYMMETRY_RTOL * scale, 1e-300):
        raise ValueError(f"{name} is not symmetric (relative asymmetry above {SYMMETRY_RTOL})")
    return 0.5 * (S + S.T)


def spectral_norm(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def eigenvalues(M) -> Spectrum:
    """Eigenvalues of a square matrix in the deterministic spectrum ordering.

    Conjugate pairs come out exactly conjugate (real input, LAPACC real Schur
    path); ordering is nonincreasing real part with ties broken by
    nonincreasing imaginary part, so repeated calls agree.
    """
    M = as_square(M)
    if M.shape[0] == 0:
        return Spectrum(np.empty(0, dtype=complex))
    try:
        vals = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise NumericalError(f"eigenvalue iteration failed to converge: {exc}") from exc
    order = np.lexsort((-vals.imag, -vals.real))
    return Spectrum(vals[order])


def eigenvalues_symmetric(S) -> np.ndarray:
    """Ascending real eigenvalues of a symmetric matrix."""
    S = check_symmetric(S)
    if S.shape[0] == 0:
        return np.empty(0)
    return np.linalg.eigvalsh(S)


def inertia_symmetric(S, zero_tol: float = DEFAULT_ZERO_TOL) -> InertiaTriple:
    """Count eigenvalues of symmetric S below/within/above +-zero_tol*||S||."""
    w = eigenvalues_symmetric(S)
    scale = np.abs(w).max() if w.size else 0.0
    thr = zero_tol * scale
    neg = int(np.sum(w < -thr))
    pos = int(np.sum(w > thr))
    return InertiaTriple(neg, len(w) - neg - pos, pos)


def inertia_general(M, zero_tol: float = DEFAULT_ZERO_TOL) -> InertiaTriple:
    """Inertia of a general square matrix from real parts of its eigenvalues."""
    spec = eigenvalues(M)
    re = spec.real
    scale = max(np.abs(re).max() if re.size else 0.0, 1.0)
    thr = zero_tol * scale
    neg = int(np.sum(re < -thr))
    pos = int(np.sum(re > thr))
    return InertiaTriple(neg, len(re) - neg - pos, pos)


def solve_linear(A, b) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular linear system: {exc}") from exc


def solve_lyapunov(A, Q, allow_consistent_singular: bool = False) -> np.ndarray:
    """Solve A'P + PA = -Q for symmetric P by Kronecker vectorization.

    Raises NumericalError naming the offending eigenvalue pair when the
    spectrum of A is resonant (lambda_i + lambda_j ~ 0), in which case the
    n^2 x n^2 system is singular. With allow_consistent_singular, a resonant
    but consistent system is solved in the least-squares sense instead
    (minimum-norm solution); the residual check still applies.
    """
    A = as_square(A, "A")
    Q = check_symmetric(Q, "Q")
    n = A.shape[0]
    if Q.shape[0] != n:
        raise ValueError(f"Q has shape {Q.shape}, expected {(n, n)}")
    if n == 0:
        return np.zeros((0, 0))
    vals = eigenvalues(A).values
    scale = max(np.abs(vals).max(), 1.0)
    resonant = None
    for i in range(n):
        for j in range(i, n):
            if abs(vals[i] + vals[j]) <= 1e-12 * scale:
                resonant = (vals[i], vals[j])
                break
        if resonant:
            break
    if resonant and not allow_consistent_singular:
        raise NumericalError(
            "resonant spectrum: eigenvalues "
            f"{resonant[0]:.6g} and {resonant[1]:.6g} sum to ~0; Lyapunov system singular"
        )
    eye = np.eye(n)
    # vec(A'P + PA) = (I (x) A' + A' (x) I) vec(P), column-major vec
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = -Q.reshape(n * n, order="F")
    if resonant:
        vecP = np.linalg.lstsq(K, rhs, rcond=None)[0]
    else:
        vecP = solve_linear(K, rhs)
    P = vecP.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    resid = np.abs(A.T @ P + P @ A + Q).max()
    bound = 1e-8 * (spectral_norm(A) * spectral_norm(P) + spectral_norm(Q))
    if resid > max(bound, 1e-300):
        if resonant:
            raise NumericalError(
                "resonant spectrum: eigenvalues "
                f"{resonant[0]:.6g} and {resonant[1]:.6g} sum to ~0 and the "
                f"system is inconsistent (residual {resid:.3e})"
            )
        raise NumericalError(
            f"Lyapunov residual {resid:.3e} exceeds tolerance {bound:.3e}"
        )
    return P


def is_neg_def(S, slack: float = 0.0):
    """(verdict, margin): margin is lambda_max(S); verdict is margin < slack."""
    w = eigenvalues_symmetric(S)
    margin = float(w[-1]) if w.size else -np.inf
    return margin < slack, margin


def is_pos_def(S, slack: float = 0.0):
    """(verdict, margin) for positive definiteness; margin is lambda_min(S)."""
    w = eigenvalues_symmetric(S)
    margin = float(w[0]) if w.size else np.inf
    return margin > slack, margin


def sym(M) -> np.ndarray:
    """Symmetric part (M + M') / 2."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)
