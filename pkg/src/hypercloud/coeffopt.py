"""Frequency-coefficient estimation: per-candidate box QPs with the
adjacency-nonnegativity constraints handled by cutting planes.

The inner solver is accelerated projected gradient with a diagonal
preconditioner; cut constraints enter through a multiplier-stabilized
(augmented-Lagrangian) quadratic penalty, escalated when violations stall,
with a cyclic-projection feasibility polish as the endgame.  Constraint
separation is exact whenever the unordered triple count fits the scan cap
and falls back to a deterministic screened scan beyond it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .pointcloud import PointCloud
from .rng import make_rng
from .spectral import SpectrumBasis

logger = logging.getLogger(__name__)

CUT_TOL = 1e-8
DEFAULT_CUT_BUDGET = 256
DEFAULT_CUT_ROUNDS = 50
# Auto-enforcement limit on C(N+2, 3).  Covers N <= 17; beyond that,
# data-estimated bases essentially never admit an entrywise-nonnegative
# reconstruction with a forced unit coefficient, so every candidate would
# end infeasible-within-budget.  Pass enforce_cuts=True to override.
ENFORCE_TRIPLE_CAP = 1000
# exact-separation limit; beyond it the scan is screened (top rows + fixed
# pseudo-random batch)
SCAN_TRIPLE_CAP = 2_000_000
SCREEN_TOP_ROWS = 48
SCREEN_SAMPLE = 200_000
_DENSE_GRAM_CAP = 1500
_SEPARATION_SEED = 0x5EED_5CAB


class InfeasibleWithinBudget(RuntimeError):
    """Raised when every candidate solve ends with unresolved cut violations."""


@dataclass(frozen=True)
class SmoothnessSystem:
    """Per-component data projections backing the smoothness objective.

    coeffs[r, i] = f_r . X_i; the full projection matrices W_i (column r
    equals coeffs[r, i] * f_r) are materialized on demand.
    """

    basis: SpectrumBasis
    columns: np.ndarray          # N x 3 coordinate columns
    coeffs: np.ndarray           # N x 3 projections
    gram: np.ndarray | None      # V^T V, cached when affordable

    @property
    def n(self) -> int:
        return self.basis.n

    def w_matrix(self, i: int) -> np.ndarray:
        return self.basis.vectors * self.coeffs[:, i]

    @property
    def component_energy(self) -> np.ndarray:
        """Data energy per component, sum_i coeffs[r, i]^2."""
        return np.sum(self.coeffs * self.coeffs, axis=1)

    def smoothness(self, sigma: np.ndarray) -> float:
        """sum_i ||X_i - W_i sigma||^2."""
        V = self.basis.vectors
        total = 0.0
        for i in range(3):
            resid = self.columns[:, i] - V @ (self.coeffs[:, i] * sigma)
            total += float(resid @ resid)
        return total


def build_smoothness_system(cloud: PointCloud, basis: SpectrumBasis) -> SmoothnessSystem:
    if cloud.n != basis.n:
        raise ValueError(f"cloud has {cloud.n} points but basis dim is {basis.n}")
    V = basis.vectors
    cols = cloud.coords
    coeffs = V.T @ cols
    gram = V.T @ V if basis.n <= _DENSE_GRAM_CAP else None
    return SmoothnessSystem(basis=basis, columns=cols, coeffs=coeffs, gram=gram)


@dataclass(frozen=True)
class QpSolution:
    """Result of one constrained coefficient solve."""

    sigma: np.ndarray
    objective: float
    forced_index: int
    active_cuts: list
    kkt_residual: float
    feasible_within_budget: bool = True
    cut_rounds: int = 0
    round_objectives: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sigma": [float(v) for v in self.sigma],
            "objective": self.objective,
            "forced_index": int(self.forced_index),
            "kkt_residual": self.kkt_residual,
            "cut_count": len(self.active_cuts),
            "cut_rounds": self.cut_rounds,
            "feasible_within_budget": self.feasible_within_budget,
        }


def triple_count(n: int) -> int:
    """Number of unordered index triples i1 <= i2 <= i3."""
    return (n + 2) * (n + 1) * n // 6


def _triple_values_slab(V: np.ndarray, sigma: np.ndarray, i1: int) -> np.ndarray:
    """Dense slab T[i1, :, :] of the sigma-weighted symmetric product tensor."""
    w = sigma * V[i1]
    return (V * w) @ V.T


def most_violated_triples(basis: SpectrumBasis, sigma: np.ndarray, budget: int,
                          tol: float = CUT_TOL,
                          scan_cap: int = SCAN_TRIPLE_CAP) -> list:
    """Most negative entries of the reconstructed third-order tensor.

    Scans unordered triples i1 <= i2 <= i3 and returns up to `budget`
    tuples (i1, i2, i3, value) with value < -tol, most negative first.
    The scan is exhaustive when the triple count is within scan_cap;
    beyond it a deterministic screened scan inspects the rows with the
    largest Hoelder bounds plus a fixed pseudo-random batch, so results
    are a sound but incomplete subset at scale.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    V = basis.vectors
    sigma = np.asarray(sigma, dtype=np.float64)
    n = basis.n
    if sigma.shape != (n,):
        raise ValueError(f"sigma must have shape ({n},)")
    if triple_count(n) <= scan_cap:
        found = _scan_exact(V, sigma, tol)
    else:
        found = _scan_screened(V, sigma, tol)
    found.sort(key=lambda t: (t[3], t[0], t[1], t[2]))
    return found[:budget]


def _scan_exact(V: np.ndarray, sigma: np.ndarray, tol: float) -> list:
    n = V.shape[0]
    out = []
    for i1 in range(n):
        slab = _triple_values_slab(V, sigma, i1)
        sub = slab[i1:, i1:]
        iu = np.triu_indices(n - i1)
        vals = sub[iu]
        neg = vals < -tol
        if np.any(neg):
            for j2, j3, v in zip(iu[0][neg], iu[1][neg], vals[neg]):
                out.append((i1, i1 + int(j2), i1 + int(j3), float(v)))
    return out


def _scan_screened(V: np.ndarray, sigma: np.ndarray, tol: float) -> list:
    n = V.shape[0]
    found = {}
    # rows most able to produce large-magnitude products (Hoelder 3-norm bound)
    bound = np.power(np.abs(V) ** 3 @ np.maximum(sigma, 0.0), 1.0 / 3.0)
    top = np.argsort(-bound, kind="stable")[:min(n, SCREEN_TOP_ROWS)]
    top = np.sort(top)
    Vs = V[top]
    for a, i1 in enumerate(top):
        w = sigma * Vs[a]
        slab = (Vs * w) @ Vs.T
        for b in range(a, len(top)):
            for c in range(b, len(top)):
                v = slab[b, c]
                if v < -tol:
                    key = (int(i1), int(top[b]), int(top[c]))
                    if v < found.get(key, 0.0):
                        found[key] = float(v)
    rng = make_rng(_SEPARATION_SEED)
    remaining = SCREEN_SAMPLE
    while remaining > 0:
        m = min(remaining, 50_000)
        remaining -= m
        idx = np.sort(rng.integers(0, n, size=(m, 3)), axis=1)
        prod = V[idx[:, 0]] * V[idx[:, 1]] * sigma
        vals = np.einsum("tr,tr->t", prod, V[idx[:, 2]])
        neg = np.flatnonzero(vals < -tol)
        for t in neg:
            key = (int(idx[t, 0]), int(idx[t, 1]), int(idx[t, 2]))
            if vals[t] < found.get(key, 0.0):
                found[key] = float(vals[t])
    return [(i1, i2, i3, v) for (i1, i2, i3), v in found.items()]


class _Quadratic:
    """Objective alpha * Smooth(sigma) + beta * sigma^T sigma as
    sigma^T Q sigma - 2 b^T sigma + c0, with a matvec that avoids
    materializing Q at scale."""

    def __init__(self, system: SmoothnessSystem, alpha: float, beta: float):
        self.alpha = alpha
        self.beta = beta
        self.system = system
        n = system.n
        C = system.coeffs
        self.b = alpha * np.sum(C * C, axis=1)
        self.c0 = alpha * float(np.sum(system.columns * system.columns))
        if system.gram is not None:
            self.Q = beta * np.eye(n) + alpha * (system.gram * (C @ C.T))
            self.diag = np.diag(self.Q).copy()
        else:
            self.Q = None
            V = system.basis.vectors
            gram_diag = np.einsum("ij,ij->j", V, V)
            self.diag = beta + alpha * np.sum(C * C, axis=1) * gram_diag

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.Q is not None:
            return self.Q @ v
        sys = self.system
        V = sys.basis.vectors
        out = self.beta * v
        for i in range(3):
            ci = sys.coeffs[:, i]
            out += self.alpha * (ci * (V.T @ (V @ (ci * v))))
        return out

    def value(self, sigma: np.ndarray) -> float:
        return float(sigma @ self.matvec(sigma) - 2.0 * (self.b @ sigma) + self.c0)


def _project(x: np.ndarray, forced: int) -> np.ndarray:
    y = np.clip(x, 0.0, 1.0)
    y[forced] = 1.0
    return y


def _penalized(quad: _Quadratic, G: np.ndarray | None, mu: float,
               lag: np.ndarray | None, x: np.ndarray):
    """Augmented-Lagrangian value and gradient for cuts G x >= 0.

    With multipliers `lag` (zeros = plain quadratic penalty):
       q(x) + (1/(2 mu)) sum_c [max(0, lag_c - mu g_c.x)^2 - lag_c^2]
    """
    mv = quad.matvec(x)
    val = float(x @ mv - 2.0 * (quad.b @ x) + quad.c0)
    grad = 2.0 * (mv - quad.b)
    if G is not None and len(G):
        if lag is None:
            lag = np.zeros(len(G))
        hinge = np.maximum(0.0, lag - mu * (G @ x))
        val += (float(hinge @ hinge) - float(lag @ lag)) / (2.0 * mu)
        grad -= G.T @ hinge
    return val, grad


def _solve_inner(quad: _Quadratic, G: np.ndarray | None, mu: float,
                 lag: np.ndarray | None, forced: int,
                 x0: np.ndarray, tol: float, max_iter: int):
    """Monotone accelerated projected gradient on the penalized objective."""
    d = quad.diag.copy()
    if G is not None and len(G):
        d = d + mu * np.sum(G * G, axis=0)
    d = np.maximum(d, 1e-300)
    inv_sqrt_d = 1.0 / np.sqrt(d)

    def op(v):
        w = inv_sqrt_d * v
        out = 2.0 * quad.matvec(w)
        if G is not None and len(G):
            out += mu * (G.T @ (G @ w))
        return inv_sqrt_d * out

    # deterministic power iteration for the preconditioned Lipschitz bound
    v = np.ones_like(x0) / np.sqrt(x0.size)
    lam = 1.0
    for _ in range(15):
        w = op(v)
        lam = float(np.linalg.norm(w))
        if lam <= 0:
            lam = 1.0
            break
        v = w / lam
    step = 1.0 / (1.05 * lam + 1e-30)

    x = _project(x0.copy(), forced)
    fx, gx = _penalized(quad, G, mu, lag, x)
    y = x.copy()
    t_momentum = 1.0
    scale = max(1.0, float(np.abs(quad.b).max(initial=0.0)))
    residual = np.inf
    check_every = 8
    f_checkpoint = fx
    stalls = 0
    for it in range(max_iter):
        fy, gy = _penalized(quad, G, mu, lag, y)
        x_new = _project(y - step * (gy / d), forced)
        f_new, g_new = _penalized(quad, G, mu, lag, x_new)
        if f_new > fx:
            # momentum overshoot: plain step from the best iterate
            x_new = _project(x - step * (gx / d), forced)
            f_new, g_new = _penalized(quad, G, mu, lag, x_new)
            t_momentum = 1.0
            if f_new > fx:
                x_new, f_new, g_new = x, fx, gx
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
        y = _project(x_new + ((t_momentum - 1.0) / t_next) * (x_new - x), forced)
        t_momentum = t_next
        x, fx, gx = x_new, f_new, g_new
        if it % check_every == 0 or it == max_iter - 1:
            pg = (x - _project(x - gx / d, forced)) * d
            residual = float(np.abs(pg).max())
            if residual <= tol * scale:
                break
            # stiff phases bottom out above the pg tolerance; stop once the
            # objective stops moving at working precision
            if f_checkpoint - fx <= 1e-15 * (1.0 + abs(fx)):
                stalls += 1
                if stalls >= 3:
                    break
            else:
                stalls = 0
            f_checkpoint = fx
    return x, residual


def _polish_feasibility(x: np.ndarray, G: np.ndarray, forced: int,
                        tol: float, sweeps: int = 200) -> np.ndarray:
    """Cyclic projection onto violated cut half-spaces and the box."""
    norms_sq = np.sum(G * G, axis=1)
    for _ in range(sweeps):
        slack = G @ x
        worst = np.argsort(slack)
        moved = False
        for c in worst:
            if slack[c] >= -tol:
                break
            if norms_sq[c] <= 0:
                continue
            x = x + G[c] * (-(G[c] @ x) / norms_sq[c])
            x = _project(x, forced)
            moved = True
        if not moved:
            break
        if float((G @ x).min(initial=0.0)) >= -tol:
            break
    return x


def solve_qp_fixed_max(system: SmoothnessSystem, basis: SpectrumBasis, forced: int,
                       alpha: float, beta: float, *,
                       cut_budget: int = DEFAULT_CUT_BUDGET,
                       cut_rounds: int = DEFAULT_CUT_ROUNDS,
                       enforce_cuts: bool | None = None,
                       scan_cap: int = SCAN_TRIPLE_CAP,
                       inner_tol: float = 1e-11,
                       max_inner_iter: int = 4000,
                       _quad: "_Quadratic | None" = None) -> QpSolution:
    """Minimize the smoothness-plus-ridge objective with sigma[forced] = 1.

    Box constraints are handled by projection; adjacency-nonnegativity
    constraints are generated as cutting planes, each round re-solving with
    an escalated quadratic penalty until the discovered cuts are satisfied
    within CUT_TOL.  enforce_cuts None enforces automatically when the
    triple count is within ENFORCE_TRIPLE_CAP (exhaustive separation is
    affordable there); pass True/False to override.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    n = system.n
    if system.basis is not basis and not np.array_equal(system.basis.vectors,
                                                        basis.vectors):
        raise ValueError("system was built from a different basis")
    if not 0 <= forced < n:
        raise ValueError(f"forced index {forced} out of range for N={n}")
    if enforce_cuts is None:
        enforce_cuts = triple_count(n) <= ENFORCE_TRIPLE_CAP

    quad = _quad if _quad is not None else _Quadratic(system, alpha, beta)
    x = _project(quad.b / np.maximum(quad.diag, 1e-300), forced)

    cuts: list = []
    cut_keys = set()
    G: np.ndarray | None = None
    round_objectives: list = []
    feasible = True
    rounds_used = 0
    residual = np.inf

    x, residual = _solve_inner(quad, None, 0.0, None, forced, x,
                               inner_tol, max_inner_iter)
    round_objectives.append(quad.value(x))
    if enforce_cuts:
        scale = max(1.0, float(np.abs(quad.b).max(initial=0.0)))
        lag = np.zeros(0)
        exhausted = False
        for _round in range(cut_rounds):
            violated = most_violated_triples(basis, x, cut_budget,
                                             tol=CUT_TOL, scan_cap=scan_cap)
            if not violated:
                break
            rounds_used += 1
            new = [(i1, i2, i3) for (i1, i2, i3, _) in violated
                   if (i1, i2, i3) not in cut_keys]
            cut_keys.update(new)
            cuts.extend(new)
            G = _cut_matrix(basis.vectors, cuts)
            lag = np.concatenate([lag, np.zeros(len(cuts) - len(lag))])
            mu = 10.0 * scale
            prev_viol = np.inf
            for _ in range(40):
                x, residual = _solve_inner(quad, G, mu, lag, forced, x,
                                           inner_tol, max_inner_iter)
                slack = G @ x
                viol = max(0.0, -float(slack.min()))
                lag = np.maximum(0.0, lag - mu * slack)
                if viol <= CUT_TOL:
                    break
                if viol > 0.25 * prev_viol:
                    mu *= 5.0
                prev_viol = max(viol, 1e-300)
            if float((G @ x).min()) < -CUT_TOL:
                x = _polish_feasibility(x, G, forced, CUT_TOL)
                if float((G @ x).min()) < -CUT_TOL:
                    # discovered cuts alone cannot be met: infeasible, stop early
                    round_objectives.append(quad.value(x))
                    feasible = False
                    break
            round_objectives.append(quad.value(x))
        else:
            exhausted = cut_rounds > 0
        if exhausted:
            final = most_violated_triples(basis, x, 1, tol=CUT_TOL,
                                          scan_cap=scan_cap)
            feasible = not final
        if G is not None and float((G @ x).min()) < -CUT_TOL:
            feasible = False
    return QpSolution(sigma=x,
                      objective=quad.value(x),
                      forced_index=forced,
                      active_cuts=list(cuts),
                      kkt_residual=residual,
                      feasible_within_budget=feasible,
                      cut_rounds=rounds_used,
                      round_objectives=round_objectives)


def _cut_matrix(V: np.ndarray, cuts: list) -> np.ndarray:
    rows = np.empty((len(cuts), V.shape[1]))
    for k, (i1, i2, i3) in enumerate(cuts):
        rows[k] = V[i1] * V[i2] * V[i3]
    return rows


def default_candidates(system: SmoothnessSystem, limit_small: int = 64,
                       limit_large: int = 16) -> list:
    """All indices at small N, else the highest-data-energy components."""
    n = system.n
    if n <= limit_small:
        return list(range(n))
    energy = system.component_energy
    top = np.argsort(-energy, kind="stable")[:limit_large]
    return sorted(int(i) for i in top)


def estimate_coefficients(cloud: PointCloud, basis: SpectrumBasis,
                          alpha: float = 1e-3, beta: float = 1.0,
                          candidates=None, **solver_options) -> QpSolution:
    """Best coefficient solve over candidate positions of the unit maximum.

    Runs solve_qp_fixed_max per candidate and returns the feasible solution
    with the lowest objective (lowest candidate index on ties).  Raises
    InfeasibleWithinBudget when no candidate finishes feasible.
    """
    system = build_smoothness_system(cloud, basis)
    return estimate_coefficients_from_system(system, alpha=alpha, beta=beta,
                                             candidates=candidates,
                                             **solver_options)


def estimate_coefficients_from_system(system: SmoothnessSystem, *,
                                      alpha: float = 1e-3, beta: float = 1.0,
                                      candidates=None,
                                      **solver_options) -> QpSolution:
    if candidates is None:
        candidates = default_candidates(system)
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ValueError("candidate set must be nonempty")
    n = system.n
    if candidates[0] < 0 or candidates[-1] >= n:
        raise ValueError("candidate indices out of range")
    quad = _Quadratic(system, alpha, beta)
    best: QpSolution | None = None
    any_feasible = False
    for k in candidates:
        sol = solve_qp_fixed_max(system, system.basis, k, alpha, beta,
                                 _quad=quad, **solver_options)
        if sol.feasible_within_budget:
            any_feasible = True
            if best is None or sol.objective < best.objective:
                best = sol
    if not any_feasible or best is None:
        raise InfeasibleWithinBudget(
            f"all {len(candidates)} candidates ended infeasible within budget")
    return best
