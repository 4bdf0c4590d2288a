"""k-order stabilizability and k-contractive feedback synthesis.

The decomposition splits the state space into the controllable subspace and
its orthogonal complement (staircase form); stabilizability of order k asks
the uncontrollable block to be k-contractive or smaller than k. Certificates
are built blockwise: a shifted controllability Gramian on the controllable
block, inertia-constrained Lyapunov solutions on the uncontrollable block,
glued with a small coupling weight kappa found by bisection. All W_i share
the Gramian block, which forces the colinearity B'W_i^{-1} = B'W_0^{-1} and
a single gain K = (rho/2) B'W_0^{-1} with infinite gain margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lin_contraction import GROUP_RTOL_LADDER, group_real_parts
from .numkernel import (
    NumericalError,
    as_square,
    eigenvalues,
    inertia_symmetric,
    solve_lyapunov,
    spectral_norm,
    sym,
)

RANK_CUTOFF = 1e-10
KAPPA_HALVINGS = 60
EPSILON_HALVINGS = 40


@dataclass
class KalmanDecomposition:
    """Orthogonal staircase form: z = T x, T A T' = [[Ac, A12], [0, Au]]."""

    T: np.ndarray
    Ac: np.ndarray
    A12: np.ndarray
    Au: np.ndarray
    Bc: np.ndarray
    nc: int
    nu: int


@dataclass
class StabilizabilityCertificate:
    """Stabilizability certificate: W_i of inertia (d_i, 0, n - d_i) with shared
    controllable-block factor, so B'W_i^{-1} is the same row space for all i."""

    ell: int
    mus: list
    ds: list
    mats: list
    k: int
    colinear: bool

    @property
    def weights(self):
        return [self.ds[i + 1] - self.ds[i] for i in range(self.ell)]

    @property
    def rate_sum(self):
        return float(sum(h * mu for h, mu in zip(self.weights, self.mus)))


def controllability_matrix(A, B) -> np.ndarray:
    A = as_square(A, "A")
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def kalman_decompose(A, B) -> KalmanDecomposition:
    """Orthogonal change of basis isolating the controllable subspace.

    The basis comes from a full SVD of the controllability matrix with rank
    cutoff 1e-10 * sigma_max; nu = 0 (fully controllable) is admitted, as is
    nc = 0 (B = 0).
    """
    A = as_square(A, "A")
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    C = controllability_matrix(A, B)
    U, s, _ = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > RANK_CUTOFF * s[0])) if s.size and s[0] > 0 else 0
    T = U.T  # z = T x
    At = T @ A @ T.T
    Bt = T @ B
    return KalmanDecomposition(
        T=T,
        Ac=At[:rank, :rank],
        A12=At[:rank, rank:],
        Au=At[rank:, rank:],
        Bc=Bt[:rank, :],
        nc=rank,
        nu=n - rank,
    )


def k_order_stabilizable(A, B, k: int):
    """(verdict, diagnostics): feasible iff nu < k or the uncontrollable block
    is k-contractive."""
    A = as_square(A, "A")
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    dec = kalman_decompose(A, B)
    if dec.nu < k:
        return True, {"nu": dec.nu, "reason": f"uncontrollable dimension {dec.nu} < k={k}"}
    margin = eigenvalues(dec.Au).top_real_sum(k)
    return margin < 0, {
        "nu": dec.nu,
        "uncontrollable_topk_sum": margin,
        "reason": f"uncontrollable block top-{k} real-part sum = {margin:.6g}",
    }


def _gramian_block(Ac, Bc, mu):
    """W_c > 0 with W_c(Ac - mu I)' + (Ac - mu I)W_c - Bc Bc' = -2 gamma W_c."""
    nc = Ac.shape[0]
    if nc == 0:
        return np.zeros((0, 0)), 1.0
    Ahat = Ac - mu * np.eye(nc)
    gamma = max(1.0, 1.0 - eigenvalues(Ahat).real.min())
    M = -gamma * np.eye(nc) - Ahat  # Hurwitz with margin >= 1 by construction
    Wc = solve_lyapunov(M.T, Bc @ Bc.T)
    w = np.linalg.eigvalsh(Wc)
    if w[0] <= 0:
        raise NumericalError(
            "controllable-block Gramian is not positive definite "
            f"(lambda_min = {w[0]:.3e}); controllability detection failed"
        )
    return Wc, gamma


def _uncontrollable_block(Au, mu):
    """W_u with W_u(Au - mu I)' + (Au - mu I)W_u = -I; inertia matches the
    eigenvalue split of Au around mu."""
    nu = Au.shape[0]
    if nu == 0:
        return np.zeros((0, 0))
    Ahat = Au - mu * np.eye(nu)
    return solve_lyapunov(Ahat.T, np.eye(nu))


def _design_margin(A, B, W, mu):
    """Half-form margin of W A' + A W - B B' < 2 mu W."""
    BBt = B @ B.T
    return float(np.linalg.eigvalsh(sym(A @ W) - 0.5 * BBt - mu * W).max())


def _near_resonant(vals, mu, rtol=1e-6):
    """True when some eigenvalue pair satisfies lambda_a + lambda_b ~ 2 mu,
    which makes the shifted Lyapunov solution blow up in norm."""
    shifted = np.asarray(vals) - mu
    scale = max(np.abs(shifted).max(), 1.0)
    n = len(shifted)
    for a in range(n):
        for b in range(a, n):
            if abs(shifted[a] + shifted[b]) <= rtol * scale:
                return True
    return False


def _assemble(dec: KalmanDecomposition, A, B, Wc, Wu, mu):
    """Glue blockdiag(Wc, kappa Wu), bisecting kappa until the inequality holds.

    Blocks are balanced to comparable norms first so the assembled matrix
    stays well-conditioned and its inertia is numerically unambiguous.
    """
    n = dec.nc + dec.nu
    if Wu.size:
        Wu = Wu / spectral_norm(Wu)
    kappa = spectral_norm(Wc) if Wc.size else 1.0
    kappa = max(kappa, 1e-8)
    for _ in range(KAPPA_HALVINGS):
        Wz = np.zeros((n, n))
        Wz[:dec.nc, :dec.nc] = Wc
        Wz[dec.nc:, dec.nc:] = kappa * Wu
        W = dec.T.T @ Wz @ dec.T
        if _design_margin(A, B, W, mu) < 0:
            return W, kappa
        kappa *= 0.5
    raise NumericalError(
        f"coupling weight bisection exhausted after {KAPPA_HALVINGS} halvings at mu={mu:.6g}"
    )


def construct_W(A, B, mu: float, staircase: KalmanDecomposition | None = None) -> np.ndarray:
    """One solution of W A' + A W - B B' < 2 mu W with inertia fixed by mu.

    Requires mu off the real-part set of the uncontrollable block; the result
    has inertia (rho, 0, n - rho) with rho the count of uncontrollable
    eigenvalues with real part above mu.
    """
    A = as_square(A, "A")
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    dec = staircase if staircase is not None else kalman_decompose(A, B)
    if dec.nu > 0:
        re_u = eigenvalues(dec.Au).real
        scale = max(np.abs(re_u).max(), 1.0)
        if np.any(np.abs(re_u - mu) <= 1e-9 * scale):
            raise NumericalError(
                f"mu={mu:.6g} lies on the real-part set of the uncontrollable block"
            )
    Wc, _ = _gramian_block(dec.Ac, dec.Bc, mu)
    Wu = _uncontrollable_block(dec.Au, mu)
    W, _ = _assemble(dec, A, B, Wc, Wu, mu)
    return W


def stabilizability_certificate(A, B, k: int) -> StabilizabilityCertificate:
    """Construct certificate data for a k-order stabilizable pair.

    Rates and breakpoints come from the grouped real parts of the
    uncontrollable block; when k exceeds its dimension nu >= 1, the two-rate
    branch applies with mu_0 above the whole block spectrum and mu_1 closing
    the budget nu mu_0 + mu_1 <= -1. All W_i share the controllable-block
    Gramian built at the smallest rate, which yields colinearity.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    feasible, diag = k_order_stabilizable(A, B, k)
    if not feasible:
        raise ValueError(f"pair is not {k}-order stabilizable: {diag['reason']}")
    B = np.asarray(B, dtype=float).reshape(n, -1)
    dec = kalman_decompose(A, B)
    nu = dec.nu

    last_err = None
    for rtol in GROUP_RTOL_LADDER:
        try:
            mus, ds = _rate_schedule(dec, k, n, rtol)
            cert = _assemble_certificate(dec, A, B, k, mus, ds)
            _validate_certificate(A, B, cert)
            return cert
        except NumericalError as exc:
            last_err = exc
            if nu == 0 or k > nu:
                break  # those branches do not depend on the grouping tolerance
    raise NumericalError(f"certificate construction failed: {last_err}")


def _rate_schedule(dec: KalmanDecomposition, k, n, rtol):
    nu = dec.nu
    if nu == 0:
        return [0.0], [0, k]
    if k > nu:
        vals_u = eigenvalues(dec.Au).real
        mu0 = float(vals_u.max() + 1.0)
        mu1 = float(min(-nu * mu0, vals_u.min()) - 1.0)
        return [mu0, mu1], [0, nu, nu + 1]
    vals_u = eigenvalues(dec.Au).values
    alphas, hbars, dbars = group_real_parts(vals_u, rtol=rtol)
    in_range = [d for d in dbars if d <= k - 1]
    p_k = max(in_range)
    c_k = len(in_range)
    budget = (k - p_k) * alphas[c_k - 1] + sum(hbars[i] * alphas[i] for i in range(c_k - 1))
    if budget >= 0:
        raise NumericalError("grouped rate budget is not negative")
    gaps = [alphas[i] - alphas[i + 1] for i in range(len(alphas) - 1)]
    # staying strictly below half the gap keeps every rate away from pair
    # midpoints, where the shifted Lyapunov system turns resonant
    eps0 = abs(budget) / (k + n)
    if gaps:
        eps0 = min(0.45 * min(gaps), eps0)
    eps = eps0
    for _ in range(EPSILON_HALVINGS):
        if budget + eps * k > 0:
            eps *= 0.5
            continue
        cand = [alphas[i] + eps for i in range(c_k)]
        if any(_near_resonant(vals_u, mu) for mu in cand):
            eps *= 0.5
            continue
        return cand, dbars[:c_k] + [k - p_k + dbars[c_k - 1]]
    raise NumericalError("could not select a nondegenerate rate offset")


def _assemble_certificate(dec, A, B, k, mus, ds) -> StabilizabilityCertificate:
    mu_min = min(mus)
    Wc, _ = _gramian_block(dec.Ac, dec.Bc, mu_min)
    mats = []
    for mu in mus:
        Wu = _uncontrollable_block(dec.Au, mu)
        W, _ = _assemble(dec, A, B, Wc, Wu, mu)
        mats.append(W)
    return StabilizabilityCertificate(
        ell=len(mus), mus=[float(m) for m in mus], ds=ds, mats=mats, k=k, colinear=True,
    )


def _validate_certificate(A, B, cert: StabilizabilityCertificate):
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    for i, (W, mu, d) in enumerate(zip(cert.mats, cert.mus, cert.ds)):
        # W is nonsingular by construction; a tight zero tolerance keeps a
        # small coupling weight from masquerading as a zero eigenvalue
        inertia = inertia_symmetric(W, zero_tol=1e-13)
        if inertia != (d, 0, n - d):
            raise NumericalError(
                f"W_{i} inertia {inertia.as_tuple()} != required ({d}, 0, {n - d})"
            )
        m = _design_margin(A, B, W, mu)
        if not m < 0:
            raise NumericalError(f"design inequality {i} violated (margin {m:.3e})")
    if cert.rate_sum > 0:
        raise NumericalError(f"rate budget violated: {cert.rate_sum:.6g} > 0")
    if cert.colinear and spectral_norm(B) > 0:
        rows0 = B.T @ np.linalg.inv(cert.mats[0])
        scale = max(spectral_norm(rows0), 1e-300)
        for i, W in enumerate(cert.mats[1:], start=1):
            dev = spectral_norm(B.T @ np.linalg.inv(W) - rows0)
            if dev > 1e-6 * scale:
                raise NumericalError(
                    f"colinearity violated by W_{i}: relative deviation {dev / scale:.3e}"
                )


def certificate_margins(A, B, cert: StabilizabilityCertificate):
    """Half-form margins of the ell design inequalities (diagnostics)."""
    A = as_square(A, "A")
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    return [_design_margin(A, B, W, mu) for W, mu in zip(cert.mats, cert.mus)]


def synthesize_gain(cert: StabilizabilityCertificate, B, rho: float = 1.0) -> np.ndarray:
    """K = (rho/2) B' W_0^{-1}; any rho >= 1 preserves k-contraction of A - BK."""
    if rho < 1.0:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if not cert.colinear:
        raise ValueError("gain formula requires a colinear certificate")
    W0 = cert.mats[0]
    B = np.asarray(B, dtype=float).reshape(W0.shape[0], -1)
    return (rho / 2.0) * (B.T @ np.linalg.inv(W0))
