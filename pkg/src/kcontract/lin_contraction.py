"""Necessary-and-sufficient k-contraction machinery for LTI systems.

The spectral test sums the k largest eigenvalue real parts; the certificate
route realizes the same property through a family of generalized Lyapunov
inequalities A'P_i + P_i A < 2 mu_i P_i with prescribed inertia of each P_i
and a weighted rate budget sum(h_i mu_i) <= 0.

Margins for a generalized inequality are always reported in the rate-
normalized half form: margin = lambda_max(sym(P (A - mu I))). A condition
holds strictly iff its margin is negative; relative slack s accepts margins
below s * ||P||_2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .numkernel import (
    NumericalError,
    as_square,
    check_symmetric,
    eigenvalues,
    inertia_symmetric,
    solve_lyapunov,
    spectral_norm,
    sym,
)

REAL_PART_GROUP_RTOL = 1e-8
# defective eigenvalue clusters come out of the eigensolver spread by up to
# ~||A|| * eps_machine^(1/chain); coarser regroups recover them
GROUP_RTOL_LADDER = (REAL_PART_GROUP_RTOL, 3e-7, 1e-5, 3e-4)
EPSILON_HALVINGS = 40


@dataclass
class ContractionCertificate:
    """Data realizing the generalized Lyapunov test for k-contraction.

    ell rates mu_0 > ... > mu_{ell-1}, breakpoints d_0 = 0 < d_1 < ... <
    d_{ell-1} <= k-1 plus the closing d_ell <= k, weights h_i = d_{i+1} - d_i,
    and symmetric matrices P_i of inertia (d_i, 0, n - d_i).
    """

    ell: int
    mus: list
    ds: list
    mats: list
    k: int

    @property
    def weights(self):
        return [self.ds[i + 1] - self.ds[i] for i in range(self.ell)]

    @property
    def rate_sum(self):
        return float(sum(h * mu for h, mu in zip(self.weights, self.mus)))


@dataclass
class VerificationReport:
    """Accept/reject outcome with per-condition margins.

    margins is a list of (condition label, margin) pairs; a strict condition
    holds when its margin is below the slack threshold recorded in
    diagnostics. data carries machine-readable extras (worst vertices, ...).
    """

    verdict: bool
    margins: list
    diagnostics: str = ""
    data: dict = field(default_factory=dict)

    def margin(self, label):
        for lab, m in self.margins:
            if lab == label:
                return m
        raise KeyError(label)


def eigen_sum_max(A, k: int) -> float:
    """Sum of the k largest real parts of eigenvalues of A."""
    A = as_square(A, "A")
    return eigenvalues(A).top_real_sum(k)


def k_contractive_lti(A, k: int):
    """(verdict, margin): margin is the top-k real-part sum, negative iff contractive."""
    margin = eigen_sum_max(A, k)
    return margin < 0.0, margin


def group_real_parts(values, rtol: float = REAL_PART_GROUP_RTOL):
    """Distinct real parts alpha_1 > ... > alpha_q with multiplicities h_bar.

    Two eigenvalues share a bucket when their real parts differ by less than
    rtol * (1 + |alpha|); returns (alphas, h_bars, d_bars) with d_bar_0 = 0 and
    d_bar_i the count of eigenvalues strictly above bucket i.
    """
    re = np.sort(np.asarray([v.real for v in values]))[::-1]
    alphas, hbars = [], []
    for r in re:
        if alphas and abs(r - alphas[-1]) < rtol * (1.0 + abs(alphas[-1])):
            hbars[-1] += 1
        else:
            alphas.append(float(r))
            hbars.append(1)
    dbars = [0]
    for h in hbars[:-1]:
        dbars.append(dbars[-1] + h)
    return alphas, hbars, dbars


def shifted_inertia_certificate(A, mu: float) -> np.ndarray:
    """Solve (A - mu I)'P + P(A - mu I) = -I.

    The result has inertia (p, 0, n - p) with p the number of eigenvalues of A
    with real part above mu, and satisfies A'P + PA < 2 mu P strictly.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    vals = eigenvalues(A).values
    scale = max(np.abs(vals).max() if n else 0.0, 1.0)
    if any(abs(v.real - mu) <= 1e-9 * scale for v in vals):
        raise NumericalError(f"mu={mu:.6g} lies on the real-part set of the spectrum")
    # a resonance lambda_i + lambda_j = 2 mu with mu strictly between real-part
    # groups leaves the shifted system singular but consistent; the
    # minimum-norm solution keeps the inertia property
    return solve_lyapunov(A - mu * np.eye(n), np.eye(n), allow_consistent_singular=True)


def _condition_margin(A, P, mu) -> float:
    """Half-form margin of A'P + PA < 2 mu P."""
    return float(np.linalg.eigvalsh(sym(P @ (A - mu * np.eye(len(A))))).max())


def build_certificate(A, k: int) -> ContractionCertificate:
    """Construct a certificate for a k-contractive A.

    Groups eigenvalues by distinct real parts, keeps the groups intersecting
    [0, k-1], and picks a common rate offset eps > 0 small enough that the
    weighted rate budget stays nonpositive while every shifted Lyapunov solve
    is nonresonant. eps starts at min(0.45 gap, |budget|/(k+n)) and is halved
    on degeneracy, at most a fixed number of times. Every candidate is gated
    through the verifier; if a grouping tolerance proves too fine for a
    defective cluster, the construction retries with a coarser one.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    contractive, margin = k_contractive_lti(A, k)
    if not contractive:
        raise ValueError(
            f"system is not {k}-contractive: top-{k} real-part sum = {margin:.6g} >= 0"
        )
    vals = eigenvalues(A).values
    last_err = None
    for rtol in GROUP_RTOL_LADDER:
        try:
            cert = _build_with_grouping(A, k, vals, rtol)
        except NumericalError as exc:
            last_err = exc
            continue
        if verify_certificate(A, k, cert).verdict:
            return cert
        last_err = NumericalError(
            f"certificate at grouping tolerance {rtol:g} failed verification"
        )
    raise NumericalError(
        f"certificate construction failed for a {k}-contractive system"
        + (f" (last error: {last_err})" if last_err else "")
    )


def _build_with_grouping(A, k, vals, rtol) -> ContractionCertificate:
    n = A.shape[0]
    alphas, hbars, dbars = group_real_parts(vals, rtol=rtol)
    in_range = [d for d in dbars if d <= k - 1]
    p_k = max(in_range)
    c_k = len(in_range)
    ell = c_k
    # budget = (k - p_k) alpha_{c_k} + sum_{i<c_k-1} hbar_i alpha_{i+1}; this
    # equals the top-k real-part sum when the grouping is exact
    budget = (k - p_k) * alphas[c_k - 1] + sum(
        hbars[i] * alphas[i] for i in range(c_k - 1)
    )
    if budget >= 0:
        raise NumericalError("grouped rate budget is not negative")
    gaps = [alphas[i] - alphas[i + 1] for i in range(len(alphas) - 1)]
    # strictly below half the smallest gap: pair midpoints make the shifted
    # Lyapunov system resonant
    eps0 = abs(budget) / (k + n)
    if gaps:
        eps0 = min(0.45 * min(gaps), eps0)
    eps = eps0
    last_err = None
    for _ in range(EPSILON_HALVINGS):
        mus = [alphas[i] + eps for i in range(ell)]
        if budget + eps * k > 0:
            eps *= 0.5
            continue
        scale = max(np.abs(vals).max(), 1.0)
        if any(min(abs(vals[a] + vals[b] - 2 * mu)
                   for a in range(n) for b in range(a, n)) <= 1e-9 * scale
               for mu in mus):
            eps *= 0.5
            continue
        try:
            mats = [shifted_inertia_certificate(A, mu) for mu in mus]
        except NumericalError as exc:
            last_err = exc
            eps *= 0.5
            continue
        ds = dbars[:ell] + [k - p_k + dbars[ell - 1]]
        return ContractionCertificate(ell=ell, mus=mus, ds=ds, mats=mats, k=k)
    raise NumericalError(
        f"could not select a nondegenerate rate offset after {EPSILON_HALVINGS} halvings"
        + (f" (last error: {last_err})" if last_err else "")
    )


def verify_certificate(A, k: int, cert: ContractionCertificate, slack: float = 0.0) -> VerificationReport:
    """Check a certificate against the staged generalized Lyapunov conditions.

    Structural violations (inertia, breakpoint ordering, rate budget) reject;
    only dimension mismatches raise. slack is relative: condition i accepts
    when its margin is below slack * ||P_i||_2.
    """
    A = as_square(A, "A")
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    if cert.ell != len(cert.mus) or cert.ell != len(cert.mats) or len(cert.ds) != cert.ell + 1:
        raise ValueError("certificate field lengths are inconsistent")
    for P in cert.mats:
        if np.asarray(P).shape != (n, n):
            raise ValueError("certificate matrix dimension does not match A")

    margins = []
    problems = []
    ds = cert.ds
    if ds[0] != 0 or any(ds[i] >= ds[i + 1] for i in range(cert.ell)):
        problems.append(f"breakpoints not strictly increasing from 0: {ds}")
    if cert.ell >= 1 and ds[cert.ell - 1] > k - 1:
        problems.append(f"d_{cert.ell - 1}={ds[cert.ell - 1]} exceeds k-1={k - 1}")
    if ds[cert.ell] > k:
        problems.append(f"closing breakpoint d_ell={ds[cert.ell]} exceeds k={k}")

    for i, (P, mu, d) in enumerate(zip(cert.mats, cert.mus, cert.ds)):
        P = check_symmetric(P, f"P_{i}")
        inertia = inertia_symmetric(P)
        if inertia != (d, 0, n - d):
            problems.append(
                f"P_{i} inertia {inertia.as_tuple()} != required ({d}, 0, {n - d})"
            )
        m = _condition_margin(A, P, mu)
        margins.append((f"P_{i}", m))
        if not m < slack * max(spectral_norm(P), 1e-300):
            problems.append(f"condition P_{i} margin {m:.6g} not below slack")

    rate = cert.rate_sum
    margins.append(("rate_sum", rate))
    if rate > 0:
        problems.append(f"weighted rate sum {rate:.6g} > 0")

    verdict = not problems
    return VerificationReport(
        verdict=verdict,
        margins=margins,
        diagnostics="; ".join(problems) if problems else f"all conditions hold (slack={slack:g})",
        data={"slack": slack},
    )


def variable_counts(n: int, k: int):
    """(N1, N2): unknown counts for the compound-LMI route vs the staged route."""
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    c = comb(n, k)
    n1 = c * (c + 1) // 2 + 1
    n2 = k * n * (n - 1) // 2 + k
    return n1, n2
