"""MAP estimation of a correlation matrix under an elementwise Laplace prior.

The estimator minimizes, over valid correlation matrices R,

    log det(R) + tr(R^{-1} Rt) + lambda_eff * ||P * (R - S)||_1

where Rt is the empirical correlation matrix, P a nonnegative penalty
matrix with zero diagonal, S an optional shrinkage target (zero
off-diagonals by default), and ||.||_1 sums absolute values over the full
matrix (both triangles). The log-det term is concave, so an outer
majorize-minimize loop replaces it with its tangent plane at the current
iterate; the resulting convex inner problem is solved by generalized
gradient descent: a gradient step on the smooth part followed by
elementwise soft-thresholding of the off-diagonal entries, with a
backtracking line search and step-size reduction whenever a proposed step
leaves the positive definite cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite
from .matrices import (
    CorrelationMatrix,
    PenaltyMatrix,
    SpdFactorization,
    spd_factorize,
    validate_correlation,
)

# Step sizes below this abort the line search (returned as a warning flag).
STEP_FLOOR = 1e-14

# Off-diagonal magnitudes below this count as exact zeros in reports.
EXACT_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    lambda_eff is the coefficient multiplying the full-matrix l1 penalty;
    pipeline callers working from T observed periods pass lambda/(T-1).
    """

    lambda_eff: float
    target: CorrelationMatrix | None = None
    outer_tol: float = 1e-7
    inner_tol: float = 1e-8
    max_outer: int = 100
    max_inner: int = 2000
    alpha0: float = 1.0
    beta: float = 0.5
    c1: float = 1e-4
    pd_floor: float = 1e-8

    def __post_init__(self):
        if self.lambda_eff < 0:
            raise ValueError("lambda_eff must be nonnegative")
        if not (self.outer_tol > 0 and self.inner_tol > 0 and self.pd_floor > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.beta < 1 and 0 < self.c1 < 1):
            raise ValueError("beta and c1 must lie in (0, 1)")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Result of a solve: the estimate plus convergence diagnostics."""

    estimate: CorrelationMatrix
    objective_trace: tuple[float, ...]
    inner_step_counts: tuple[int, ...]
    converged: bool
    exact_zero_count: int
    step_underflow: bool

    def to_json_dict(self) -> dict:
        return {
            "objective_trace": list(self.objective_trace),
            "inner_step_counts": list(self.inner_step_counts),
            "converged": self.converged,
            "exact_zero_count": self.exact_zero_count,
            "step_underflow": self.step_underflow,
            "n_outer": len(self.objective_trace) - 1,
        }


def _values(m) -> np.ndarray:
    if isinstance(m, (CorrelationMatrix, PenaltyMatrix)):
        return m.values
    return np.asarray(m, dtype=float)


def _target_values(target, dim: int) -> np.ndarray:
    if target is None:
        s = np.eye(dim)
    else:
        s = _values(target).copy()
    return s


def _penalty_value(r: np.ndarray, p: np.ndarray, lambda_eff: float, s: np.ndarray) -> float:
    # P has zero diagonal, so the diagonal never contributes.
    return lambda_eff * float(np.sum(p * np.abs(r - s)))


def objective(
    r,
    r_tilde,
    p,
    lambda_eff: float,
    target=None,
    _fact: SpdFactorization | None = None,
) -> float:
    """Penalized negative log-posterior value at R (up to an additive constant).

    Raises NotPositiveDefinite when R is not strictly positive definite.
    """
    rv = _values(r)
    rt = _values(r_tilde)
    pv = _values(p)
    fact = _fact if _fact is not None else spd_factorize(rv)
    s = _target_values(target, rv.shape[0])
    return (
        fact.log_det
        + float(np.trace(fact.solve(rt)))
        + _penalty_value(rv, pv, lambda_eff, s)
    )


def soft_threshold(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Elementwise shrink-toward-zero: sign(x) * max(|x| - a, 0)."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - a, 0.0)


def _candidate(
    r: np.ndarray,
    grad: np.ndarray,
    p: np.ndarray,
    lambda_eff: float,
    t: float,
    s: np.ndarray,
) -> np.ndarray:
    """Soft-thresholded gradient step, off-diagonal only, symmetrized."""
    v = r - t * grad
    cand = s + soft_threshold(v - s, t * lambda_eff * p)
    cand = 0.5 * (cand + cand.T)
    np.fill_diagonal(cand, 1.0)
    return cand


def prox_step(
    r_current,
    r_i_inverse: np.ndarray,
    r_tilde,
    p,
    lambda_eff: float,
    t: float,
    target=None,
) -> np.ndarray:
    """One generalized gradient step of the inner problem.

    The smooth-part gradient at R is R_i^{-1} - R^{-1} Rt R^{-1}; the step
    moves against it and soft-thresholds the off-diagonal entries with
    per-entry threshold t*lambda_eff*P. The result is symmetric with unit
    diagonal but not necessarily positive definite; callers must test it
    via factorization.
    """
    rv = _values(r_current)
    rt = _values(r_tilde)
    pv = _values(p)
    fact = spd_factorize(rv)
    inner = fact.solve(rt)
    grad = r_i_inverse - fact.solve(inner.T).T
    grad = 0.5 * (grad + grad.T)
    s = _target_values(target, rv.shape[0])
    return _candidate(rv, grad, pv, lambda_eff, t, s)


def _inner_solve(
    fact_i: SpdFactorization,
    r_i: np.ndarray,
    rt: np.ndarray,
    p: np.ndarray,
    s: np.ndarray,
    cfg: SolverConfig,
) -> tuple[np.ndarray, SpdFactorization, int, bool]:
    """Minimize tr(R_i^{-1} R) + tr(R^{-1} Rt) + penalty over correlation matrices.

    Returns (iterate, its factorization, proposal count, step_underflow).
    """
    ri_inv = fact_i.inverse()

    def smooth_grad(fact: SpdFactorization) -> np.ndarray:
        inner = fact.solve(rt)
        g = ri_inv - fact.solve(inner.T).T
        return 0.5 * (g + g.T)

    def f_value(r: np.ndarray, fact: SpdFactorization) -> float:
        return (
            float(np.sum(ri_inv * r))
            + float(np.trace(fact.solve(rt)))
            + _penalty_value(r, p, cfg.lambda_eff, s)
        )

    r = r_i.copy()
    fact = fact_i
    f = f_value(r, fact)
    grad = smooth_grad(fact)
    alpha = cfg.alpha0
    steps = 0
    scale = 1.0 + float(np.linalg.norm(r))

    while steps < cfg.max_inner:
        cand = _candidate(r, grad, p, cfg.lambda_eff, alpha, s)
        delta = cand - r
        dn2 = float(np.sum(delta * delta))
        if dn2 <= (1e-15 * scale) ** 2:
            break  # stationary: the prox step no longer moves
        steps += 1
        accepted = False
        try:
            fact_c = spd_factorize(cand, pd_floor=cfg.pd_floor)
        except NotPositiveDefinite:
            fact_c = None
        if fact_c is not None:
            f_new = f_value(cand, fact_c)
            if f_new < f:
                # Armijo test in the modified form: the unknown subgradient
                # direction term is approximated by twice the smooth gradient.
                rhs = f + cfg.c1 * (dn2 / alpha + 2.0 * float(np.sum(grad * delta)))
                armijo = f_new <= rhs
                rel = (f - f_new) / max(abs(f), 1e-300)
                r, fact, f = cand, fact_c, f_new
                grad = smooth_grad(fact)
                accepted = True
                if not armijo:
                    alpha *= cfg.beta
                if rel < cfg.inner_tol:
                    break
        if not accepted:
            alpha *= cfg.beta
            if alpha < STEP_FLOOR:
                return r, fact, steps, True
    return r, fact, steps, False


def inner_solve(r_i, r_tilde, p, config: SolverConfig) -> np.ndarray:
    """Solve the tangent-plane (inner) problem starting from R_i."""
    rv = _values(r_i)
    fact_i = spd_factorize(rv, pd_floor=config.pd_floor)
    s = _target_values(config.target, rv.shape[0])
    out, _, _, _ = _inner_solve(fact_i, rv, _values(r_tilde), _values(p), s, config)
    return out


def solve_lpoc(r_tilde, p, config: SolverConfig, initial=None) -> SolveReport:
    """Run the full majorize-minimize loop from R_0 = r_tilde (or ``initial``).

    Alternates tangent-plane updates of the log-det term with inner solves
    until the relative change of the full objective drops below
    ``config.outer_tol``. The objective trace is nonincreasing (up to float
    noise); the final estimate passes strict validation.
    """
    rt = _values(r_tilde)
    labels = r_tilde.labels if isinstance(r_tilde, CorrelationMatrix) else None
    pv = _values(p)
    if pv.shape != rt.shape:
        raise DimensionMismatch(f"penalty shape {pv.shape} does not match matrix shape {rt.shape}")
    r0 = rt.copy() if initial is None else _values(initial).copy()
    fact = spd_factorize(r0, pd_floor=config.pd_floor)
    s = _target_values(config.target, rt.shape[0])

    if config.lambda_eff == 0.0 and initial is None:
        # Unpenalized case from the default start: the minimizer is the
        # (strictly PD) empirical matrix itself, so return it unchanged.
        off_mask = ~np.eye(rt.shape[0], dtype=bool)
        return SolveReport(
            estimate=validate_correlation(rt, strict=True, labels=labels,
                                          pd_floor=config.pd_floor),
            objective_trace=(objective(rt, rt, pv, 0.0, config.target, _fact=fact),),
            inner_step_counts=(),
            converged=True,
            exact_zero_count=int(np.sum(np.abs(rt[off_mask]) < EXACT_ZERO_TOL)),
            step_underflow=False,
        )

    r = r0
    trace = [objective(r, rt, pv, config.lambda_eff, config.target, _fact=fact)]
    inner_counts: list[int] = []
    converged = False
    underflow = False
    for _ in range(config.max_outer):
        r_new, fact_new, steps, uf = _inner_solve(fact, r, rt, pv, s, config)
        f_new = objective(r_new, rt, pv, config.lambda_eff, config.target, _fact=fact_new)
        inner_counts.append(steps)
        rel = abs(trace[-1] - f_new) / max(abs(trace[-1]), 1e-12)
        trace.append(f_new)
        r, fact = r_new, fact_new
        underflow = underflow or uf
        if uf:
            break
        if rel < config.outer_tol:
            converged = True
            break

    off_mask = ~np.eye(r.shape[0], dtype=bool)
    zero_count = int(np.sum(np.abs(r[off_mask]) < EXACT_ZERO_TOL))

    estimate = validate_correlation(r, strict=True, labels=labels, pd_floor=config.pd_floor)
    return SolveReport(
        estimate=estimate,
        objective_trace=tuple(trace),
        inner_step_counts=tuple(inner_counts),
        converged=converged,
        exact_zero_count=zero_count,
        step_underflow=underflow,
    )
