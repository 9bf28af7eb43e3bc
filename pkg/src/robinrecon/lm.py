"""Outer Levenberg-Marquardt loop for the boundary coefficient.

Each iteration measures the data misfit on the accessible segment, sets
the regularization weight beta to the squared misfit, solves one adjoint
problem, and updates the coefficient by the closed-form minimizer of a
quadratic surrogate: delta = u * w / (A + beta) on the inaccessible
segment, followed by nodal clamping to the admissible box.

Exactness notes.  The elliptic residual norm is computed first and beta
is literally residual * residual, so the squared relation holds bit for
bit in the history.  The parabolic beta is the space-time integral
itself and the recorded residual is its square root.  The update is the
exact minimizer of the surrogate quadratic in the segment inner product,
whatever SPD weighting that inner product carries, because both terms of
the quadratic use the same one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import elliptic as ell
from . import fem
from . import parabolic as par
from .mesh import SegmentTag


class TraceGuardError(RuntimeError):
    """The forward trace on the accessible segment came too close to zero.

    The update divides the residual by that trace, so a near-zero value
    is a hard error rather than something to smooth over.
    """


class LmRunError(RuntimeError):
    """A step failed mid-run; carries the last good state for postmortem."""

    def __init__(self, message: str, state: "LmState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class LmConfig:
    """Knobs of the outer loop.

    eps is the relative-change stopping tolerance, A the surrogate
    majorization constant.  gamma_min / gamma_max override the problem's
    admissible box when set; leaving them None uses the problem's own
    bounds.  residual_floor, when set, stops the run once the measured
    residual norm drops below it (the computable half of a noise-level
    stopping rule).  trace_guard is the minimum |u| tolerated on the
    accessible segment before the division errors out.
    """

    eps: float
    A: float = 1.0
    max_iters: int = 100
    gamma_min: float | None = None
    gamma_max: float | None = None
    residual_floor: float | None = None
    trace_guard: float = 1e-8
    solver_tol: float = 1e-10

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.A <= 0.0:
            raise ValueError(f"A must be positive, got {self.A}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.trace_guard <= 0.0:
            raise ValueError("trace_guard must be positive")


@dataclass(frozen=True)
class HistoryRow:
    """One completed step.

    residual and beta are measured at the iterate the step started from;
    rel_change compares the new iterate against it and rel_error (when
    the exact coefficient is known) grades the new iterate.  n_clamped
    counts nodes where the box projection actually moved the update.
    """

    k: int
    residual: float
    beta: float
    rel_change: float
    rel_error: float | None
    n_clamped: int


@dataclass(frozen=True)
class LmState:
    """Iterate k with the latest measured residual and the step history."""

    k: int
    gamma: np.ndarray
    residual_norm: float | None = None
    beta: float | None = None
    history: list[HistoryRow] = field(default_factory=list)
    stop_reason: str | None = None


def _resolve_bounds(prob, cfg: LmConfig) -> tuple[float, float]:
    g1 = prob.gamma_min if cfg.gamma_min is None else cfg.gamma_min
    g2 = prob.gamma_max if cfg.gamma_max is None else cfg.gamma_max
    if g1 <= 0.0 or g2 < g1:
        raise ValueError(f"invalid coefficient bounds [{g1}, {g2}]")
    return g1, g2


def _check_guard(u_a: np.ndarray, seg_nodes: np.ndarray, guard: float,
                 level: int | None = None) -> None:
    bad = np.flatnonzero(np.abs(u_a) < guard)
    if bad.size == 0:
        return
    where = "" if level is None else f"time level {level}: "
    ids = ", ".join(str(seg_nodes[j]) for j in bad[:5])
    more = "" if bad.size <= 5 else f" (+{bad.size - 5} more)"
    raise TraceGuardError(
        f"{where}|u| < {guard:g} on the accessible segment at node(s) "
        f"{ids}{more}; smallest |u| = {np.abs(u_a[bad]).min():.3e}"
    )


def _elliptic_quantities(
    prob: ell.EllipticProblem,
    gamma: np.ndarray,
    z: np.ndarray,
    trace_guard: float,
    solver_tol: float,
) -> tuple[float, float, np.ndarray]:
    """Residual norm, beta and the raw update direction u*w on the segment."""
    mesh = prob.mesh
    seg_a = mesh.segment_nodes(SegmentTag.ACCESSIBLE)
    seg_i = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    z = np.asarray(z, dtype=float)
    if z.shape != seg_a.shape:
        raise ValueError(
            f"data has shape {z.shape}, accessible segment has {seg_a.shape}"
        )
    operator = ell.assemble_operator(prob, gamma)
    u = ell.solve_forward(prob, gamma, tol=solver_tol, operator=operator)
    u_a = u[seg_a]
    r = z - u_a
    residual_norm = float(
        np.sqrt(fem.boundary_inner(mesh, SegmentTag.ACCESSIBLE, r, r))
    )
    beta = residual_norm * residual_norm
    _check_guard(u_a, seg_a, trace_guard)
    p = r / u_a
    w = ell.solve_adjoint(prob, gamma, u, p, tol=solver_tol, operator=operator)
    return residual_norm, beta, u[seg_i] * w[seg_i]


def _parabolic_quantities(
    prob: par.ParabolicProblem,
    gamma: np.ndarray,
    z: np.ndarray,
    trace_guard: float,
    solver_tol: float,
) -> tuple[float, float, np.ndarray]:
    """Space-time analogue of the elliptic step quantities."""
    mesh = prob.mesh
    seg_a = mesh.segment_nodes(SegmentTag.ACCESSIBLE)
    z = np.asarray(z, dtype=float)
    if z.shape != (prob.nt + 1, seg_a.size):
        raise ValueError(
            f"data has shape {z.shape}, expected {(prob.nt + 1, seg_a.size)}"
        )
    operator = par.build_operator(prob, gamma)
    u = par.solve_forward_parabolic(prob, gamma, tol=solver_tol, operator=operator)
    u_a = u[:, seg_a]
    r = z - u_a
    beta = par.space_time_inner(mesh, SegmentTag.ACCESSIBLE, r, r, prob.dt)
    residual_norm = float(np.sqrt(beta))
    # The initial level carries no quadrature weight, so the guard and the
    # division skip it; with a zero initial value it would be 0/0.
    p = np.zeros_like(r)
    for n in range(1, prob.nt + 1):
        _check_guard(u_a[n], seg_a, trace_guard, level=n)
        p[n] = r[n] / u_a[n]
    w = par.solve_adjoint_parabolic(
        prob, gamma, u, p, tol=solver_tol, operator=operator
    )
    u_i = par.trace_series(mesh, SegmentTag.INACCESSIBLE, u)
    w_i = par.trace_series(mesh, SegmentTag.INACCESSIBLE, w)
    grad = par.time_integral_boundary(u_i * w_i, prob.dt)
    return residual_norm, beta, grad


def _advance(prob, state: LmState, residual_norm: float, beta: float,
             grad: np.ndarray, cfg: LmConfig,
             gamma_star: np.ndarray | None) -> LmState:
    mesh = prob.mesh
    g1, g2 = _resolve_bounds(prob, cfg)
    raw = state.gamma + grad / (cfg.A + beta)
    new_gamma = np.clip(raw, g1, g2)
    n_clamped = int(np.count_nonzero(new_gamma != raw))
    tag = SegmentTag.INACCESSIBLE
    rel_change = fem.boundary_norm(mesh, tag, new_gamma - state.gamma) / \
        fem.boundary_norm(mesh, tag, state.gamma)
    rel_error = None
    if gamma_star is not None:
        gamma_star = np.asarray(gamma_star, dtype=float)
        rel_error = fem.boundary_norm(mesh, tag, new_gamma - gamma_star) / \
            fem.boundary_norm(mesh, tag, gamma_star)
    row = HistoryRow(
        k=state.k + 1,
        residual=residual_norm,
        beta=beta,
        rel_change=float(rel_change),
        rel_error=None if rel_error is None else float(rel_error),
        n_clamped=n_clamped,
    )
    return LmState(
        k=state.k + 1,
        gamma=new_gamma,
        residual_norm=residual_norm,
        beta=beta,
        history=[*state.history, row],
        stop_reason=None,
    )


def lm_step_elliptic(
    prob: ell.EllipticProblem,
    state: LmState,
    z: np.ndarray,
    cfg: LmConfig,
    gamma_star: np.ndarray | None = None,
) -> LmState:
    """One elliptic iteration: forward, adjoint, closed-form update, clamp."""
    residual_norm, beta, grad = _elliptic_quantities(
        prob, state.gamma, z, cfg.trace_guard, cfg.solver_tol
    )
    return _advance(prob, state, residual_norm, beta, grad, cfg, gamma_star)


def lm_step_parabolic(
    prob: par.ParabolicProblem,
    state: LmState,
    z: np.ndarray,
    cfg: LmConfig,
    gamma_star: np.ndarray | None = None,
) -> LmState:
    """One parabolic iteration; z holds data at every time level."""
    residual_norm, beta, grad = _parabolic_quantities(
        prob, state.gamma, z, cfg.trace_guard, cfg.solver_tol
    )
    return _advance(prob, state, residual_norm, beta, grad, cfg, gamma_star)


def _step_function(prob):
    if isinstance(prob, ell.EllipticProblem):
        return lm_step_elliptic
    if isinstance(prob, par.ParabolicProblem):
        return lm_step_parabolic
    raise TypeError(f"unsupported problem type {type(prob).__name__}")


def run(
    prob,
    gamma0: np.ndarray,
    z: np.ndarray,
    cfg: LmConfig,
    gamma_star: np.ndarray | None = None,
) -> LmState:
    """Iterate from gamma0 until one of the stopping rules fires.

    Stops on relative change <= eps ("rel_change"), on the measured
    residual dropping below cfg.residual_floor when one is configured
    ("residual_floor"), or on the iteration cap ("max_iters"); the final
    state's stop_reason records which.  A failing step raises LmRunError
    carrying the last completed state so the history is not lost.
    """
    seg_i = prob.mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    gamma0 = np.array(gamma0, dtype=float)
    if gamma0.shape != seg_i.shape:
        raise ValueError(
            f"gamma0 has shape {gamma0.shape}, segment has {seg_i.shape}"
        )
    g1, g2 = _resolve_bounds(prob, cfg)
    if np.any(gamma0 < g1) or np.any(gamma0 > g2):
        raise ValueError(f"gamma0 leaves the admissible box [{g1}, {g2}]")
    step = _step_function(prob)
    state = LmState(k=0, gamma=gamma0)
    reason = "max_iters"
    for _ in range(cfg.max_iters):
        try:
            state = step(prob, state, z, cfg, gamma_star=gamma_star)
        except (TraceGuardError, fem.LinearSolveError) as exc:
            raise LmRunError(
                f"iteration {state.k + 1} failed: {exc}", state=state
            ) from exc
        if state.history[-1].rel_change <= cfg.eps:
            reason = "rel_change"
            break
        if (cfg.residual_floor is not None
                and state.residual_norm < cfg.residual_floor):
            reason = "residual_floor"
            break
    return replace(state, stop_reason=reason)


def make_surrogate_objective(
    prob,
    gamma_k: np.ndarray,
    z: np.ndarray,
    beta_k: float,
    A: float = 1.0,
    trace_guard: float = 1e-8,
    solver_tol: float = 1e-10,
):
    """Evaluator of the step's surrogate quadratic, up to its constant.

    Returns J(gamma) = A * ||gamma - gamma_k - G/A||^2 + beta_k *
    ||gamma - gamma_k||^2 in the segment norm, where G = u * w is the
    same raw direction the step uses.  Its exact global minimizer is
    gamma_k + G / (A + beta_k), which is what the pre-clamp update takes;
    the callable exists so tests can probe that claim.
    """
    gamma_k = np.asarray(gamma_k, dtype=float)
    if isinstance(prob, ell.EllipticProblem):
        _, _, grad = _elliptic_quantities(prob, gamma_k, z, trace_guard, solver_tol)
    elif isinstance(prob, par.ParabolicProblem):
        _, _, grad = _parabolic_quantities(prob, gamma_k, z, trace_guard, solver_tol)
    else:
        raise TypeError(f"unsupported problem type {type(prob).__name__}")
    mesh = prob.mesh
    tag = SegmentTag.INACCESSIBLE
    shift = grad / A

    def objective(gamma: np.ndarray) -> float:
        s = np.asarray(gamma, dtype=float) - gamma_k
        t = s - shift
        return (A * fem.boundary_inner(mesh, tag, t, t)
                + beta_k * fem.boundary_inner(mesh, tag, s, s))

    return objective
