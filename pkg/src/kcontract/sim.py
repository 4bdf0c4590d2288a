"""Trajectory, variational-compound and volume dynamics.

Fixed-step classical RK4 throughout: traces are bit-for-bit reproducible
across runs, which matters more than speed at this scale. The compound state
is integrated directly in its C(n,k)-dimensional space with the exact linear
dynamics ydot = J(x)^[k] y; minors are never differentiated numerically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .compound import additive_compound, multiplicative_compound
from .nl_verify import Box, NonlinearModel


@dataclass
class Trace:
    """Time-stamped states, optionally with compound-volume norms."""

    times: np.ndarray
    states: np.ndarray
    compound_norms: np.ndarray | None = None
    truncated: bool = False  # set when integration hit a non-finite state

    def __len__(self):
        return len(self.times)

    @property
    def dim(self):
        return self.states.shape[1]


@dataclass
class EquilibriumInfo:
    point: np.ndarray
    eigenvalues: np.ndarray
    stable: bool      # Jacobian Hurwitz
    repelling: bool   # negated Jacobian Hurwitz

    @property
    def label(self):
        if self.stable:
            return "stable"
        if self.repelling:
            return "repelling"
        return "saddle"

    @property
    def unstable(self):
        return not self.stable


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(field, x0, t_end: float, h: float = 1e-3, record_every: int = 1) -> Trace:
    """Integrate xdot = field(x) with fixed-step RK4 from x0 to t_end.

    Non-finite states truncate the trace (flagged), they never propagate.
    record_every thins the stored samples; the step size is unaffected.
    """
    if h <= 0 or t_end <= 0:
        raise ValueError("h and t_end must be positive")
    x = np.asarray(x0, dtype=float).copy()
    n_steps = int(round(t_end / h))
    times = [0.0]
    states = [x.copy()]
    truncated = False
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            x = _rk4_step(lambda y: np.asarray(field(y), dtype=float), x, h)
            if not np.all(np.isfinite(x)):
                truncated = True
                break
            if i % record_every == 0 or i == n_steps:
                times.append(i * h)
                states.append(x.copy())
    return Trace(np.asarray(times), np.asarray(states), truncated=truncated)


def integrate_batch(field_batch, X0, t_end: float, h: float = 1e-3, record_every: int = 1):
    """Vectorized RK4 over a batch of initial conditions (rows of X0).

    field_batch maps an (m, n) state block to an (m, n) derivative block.
    Returns (times, trajectory array of shape (n_samples, m, n)).
    """
    if h <= 0 or t_end <= 0:
        raise ValueError("h and t_end must be positive")
    X = np.asarray(X0, dtype=float).copy()
    n_steps = int(round(t_end / h))
    times = [0.0]
    out = [X.copy()]
    for i in range(1, n_steps + 1):
        k1 = field_batch(X)
        k2 = field_batch(X + 0.5 * h * k1)
        k3 = field_batch(X + 0.5 * h * k2)
        k4 = field_batch(X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if i % record_every == 0 or i == n_steps:
            times.append(i * h)
            out.append(X.copy())
    return np.asarray(times), np.asarray(out)


def integrate_compound(model: NonlinearModel, x0, V0, k: int, t_end: float,
                       h: float = 1e-3, record_every: int = 1) -> Trace:
    """Co-integrate x(t) and the compound state y(t) with ydot = J(x)^[k] y.

    V0 is n x k with independent columns; y(0) is its k-th multiplicative
    compound. The trace records |y(t)| alongside the state samples.
    """
    x0 = np.asarray(x0, dtype=float)
    V0 = np.asarray(V0, dtype=float).reshape(model.dim, -1)
    if V0.shape[1] != k:
        raise ValueError(f"V0 must have k={k} columns")
    if np.linalg.matrix_rank(V0) < k:
        raise ValueError("V0 columns must be linearly independent")
    y0 = multiplicative_compound(V0, k).ravel()
    n = model.dim

    def aug_field(z):
        x, y = z[:n], z[n:]
        Ck = additive_compound(model.jacobian(x), k)
        return np.concatenate([np.asarray(model.f(x), dtype=float), Ck @ y])

    tr = integrate(aug_field, np.concatenate([x0, y0]), t_end, h, record_every)
    norms = np.linalg.norm(tr.states[:, n:], axis=1)
    return Trace(tr.times, tr.states[:, :n], compound_norms=norms, truncated=tr.truncated)


def fit_decay(trace: Trace):
    """Least-squares exponential fit |y(t)| ~ b |y(0)| exp(-a t) on the trailing half.

    Returns (a, b, residual); a is the decay rate (negative means growth).
    """
    if trace.compound_norms is None:
        raise ValueError("trace has no compound norms")
    norms = np.asarray(trace.compound_norms, dtype=float)
    if np.any(norms <= 0):
        raise ValueError("compound norms must be positive for a log-linear fit")
    half = len(norms) // 2
    t = trace.times[half:]
    y = np.log(norms[half:])
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = coef
    a = -float(slope)
    b = float(np.exp(intercept) / norms[0])
    residual = float(np.sqrt(res[0] / len(t))) if len(res) else 0.0
    return a, b, residual


@dataclass
class ImmersionGrid:
    """Sampled immersion of [0,1]^k: nodes at i/(resolution-1) per axis.

    points has shape (resolution,)*k + (n,); k in {1, 2}.
    """

    k: int
    resolution: int
    points: np.ndarray

    @staticmethod
    def from_function(fn, k: int, resolution: int, dim: int):
        if k not in (1, 2):
            raise ValueError("only k in {1, 2} immersions are supported")
        if resolution < 3:
            raise ValueError("resolution must be at least 3")
        axes = [np.linspace(0.0, 1.0, resolution)] * k
        if k == 1:
            pts = np.array([fn(np.array([r])) for r in axes[0]], dtype=float)
            return ImmersionGrid(1, resolution, pts.reshape(resolution, dim))
        pts = np.empty((resolution, resolution, dim))
        for i, r1 in enumerate(axes[0]):
            for j, r2 in enumerate(axes[1]):
                pts[i, j] = fn(np.array([r1, r2]))
        return ImmersionGrid(2, resolution, pts)


def flow_immersion(grid: ImmersionGrid, field, t_end: float, h: float = 1e-3,
                   field_batch=None) -> ImmersionGrid:
    """Flow every grid node with the same steps so differences stay synchronous.

    field_batch, when given, evaluates a whole (m, n) block of states at once
    and dominates the runtime for fine grids.
    """
    shape = grid.points.shape
    flat = grid.points.reshape(-1, shape[-1])
    if field_batch is None:
        def field_batch(X):
            return np.stack([np.asarray(field(x), dtype=float) for x in X])

    _, traj = integrate_batch(field_batch, flat, t_end, h,
                              record_every=max(1, int(round(t_end / h))))
    return ImmersionGrid(grid.k, grid.resolution, traj[-1].reshape(shape))


def volume_of_immersion(grid: ImmersionGrid, P) -> float:
    """Midpoint-rule volume with the metric P (> 0): integral of sqrt det(D' P D).

    Cell-center derivatives come from averaged corner differences (central,
    O(res^-2)); roundoff-negative determinants are clamped at zero and
    flagged with a warning.
    """
    P = np.asarray(P, dtype=float)
    res = grid.resolution
    hstep = 1.0 / (res - 1)
    w = np.linalg.eigvalsh(0.5 * (P + P.T))
    if w[0] <= 0:
        raise ValueError("metric P must be positive definite")
    if grid.k == 1:
        diffs = (grid.points[1:] - grid.points[:-1]) / hstep
        vals = np.sqrt(np.maximum(np.einsum("id,de,ie->i", diffs, P, diffs), 0.0))
        return float(vals.sum() * hstep)
    pts = grid.points
    d1 = (pts[1:, :-1] + pts[1:, 1:] - pts[:-1, :-1] - pts[:-1, 1:]) / (2 * hstep)
    d2 = (pts[:-1, 1:] + pts[1:, 1:] - pts[:-1, :-1] - pts[1:, :-1]) / (2 * hstep)
    g11 = np.einsum("ijd,de,ije->ij", d1, P, d1)
    g12 = np.einsum("ijd,de,ije->ij", d1, P, d2)
    g22 = np.einsum("ijd,de,ije->ij", d2, P, d2)
    det = g11 * g22 - g12 ** 2
    n_neg = int(np.sum(det < 0))
    if n_neg:
        warnings.warn(f"clamped {n_neg} negative cell determinants (degenerate immersion)",
                      RuntimeWarning, stacklevel=2)
    return float(np.sqrt(np.maximum(det, 0.0)).sum() * hstep ** 2)


def finite_difference_jacobian(field, x, eps: float = 1e-6):
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = eps
        J[:, j] = (np.asarray(field(x + e), dtype=float)
                   - np.asarray(field(x - e), dtype=float)) / (2 * eps)
    return J


def find_equilibria(field, box: Box, seeds: int = 27, newton_steps: int = 80,
                    tol: float = 1e-12, dedup: float = 1e-6):
    """Damped Newton from seeded points; classify by the Jacobian spectrum.

    Returns a list of EquilibriumInfo, deduplicated within `dedup`. An empty
    list is a legitimate outcome.
    """
    rng = np.random.default_rng(0)
    starts = [box.center()]
    starts.extend(box.sample(rng, max(0, seeds - 1)))
    found = []
    scale = max(float(np.linalg.norm(box.upper - box.lower)), 1.0)
    for s in starts:
        x = np.asarray(s, dtype=float).copy()
        ok = False
        for _ in range(newton_steps):
            fx = np.asarray(field(x), dtype=float)
            if np.linalg.norm(fx) < tol * scale:
                ok = True
                break
            J = finite_difference_jacobian(field, x)
            try:
                step = np.linalg.solve(J, -fx)
            except np.linalg.LinAlgError:
                break
            # damping: backtrack until the residual shrinks
            lam = 1.0
            fn = np.linalg.norm(fx)
            for _ in range(30):
                xn = x + lam * step
                if np.linalg.norm(np.asarray(field(xn), dtype=float)) < fn:
                    break
                lam *= 0.5
            else:
                break
            x = x + lam * step
            if not np.all(np.isfinite(x)):
                break
        if not ok or not box.contains(x, tol=0.05 * scale):
            continue
        if any(np.linalg.norm(x - e.point) < dedup for e in found):
            continue
        J = finite_difference_jacobian(field, x)
        ev = np.linalg.eigvals(J)
        found.append(EquilibriumInfo(
            point=x,
            eigenvalues=ev,
            stable=bool(ev.real.max() < 0),
            repelling=bool(ev.real.min() > 0),
        ))
    found.sort(key=lambda e: tuple(np.round(e.point, 9)))
    return found


def classify_attractor(trace: Trace, tol: float = 1e-3) -> str:
    """Label the trace's limit behavior: fixed_point, limit_cycle, or unresolved.

    The first half of the trace is discarded as transient. fixed_point needs
    terminal speed and trailing displacement below tol; limit_cycle needs a
    recurrence: the final state is revisited within tol by a sample at least a
    quarter-window earlier, with an excursion away from it in between.
    unresolved is the honest fallback.
    """
    n = len(trace)
    if n < 8:
        return "unresolved"
    tail_start = n // 2
    tail = trace.states[tail_start:]
    times = trace.times[tail_start:]
    end = tail[-1]
    dt = times[-1] - times[-2]
    speed = float(np.linalg.norm(tail[-1] - tail[-2]) / dt) if dt > 0 else np.inf

    disp = float(np.max(np.linalg.norm(tail - end, axis=1)))
    if speed < tol and disp < tol:
        return "fixed_point"
    if speed >= tol:
        dists = np.linalg.norm(tail - end, axis=1)
        m = len(tail)
        guard = max(2, m // 4)  # recurrence must not be mere adjacency
        early = dists[: m - guard]
        if early.size and early.min() < tol:
            hit = int(np.argmin(early))
            if dists[hit:].max() > 10 * tol:  # genuinely left the neighborhood
                return "limit_cycle"
    return "unresolved"


def trace_to_csv(trace: Trace, path):
    """Write t, x1..xn[, compound_norm] rows with 12 significant digits."""
    n = trace.dim
    header = "t," + ",".join(f"x{i + 1}" for i in range(n))
    if trace.compound_norms is not None:
        header += ",compound_norm"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(len(trace)):
            row = [f"{trace.times[i]:.12g}"] + [f"{v:.12g}" for v in trace.states[i]]
            if trace.compound_norms is not None:
                row.append(f"{trace.compound_norms[i]:.12g}")
            fh.write(",".join(row) + "\n")
