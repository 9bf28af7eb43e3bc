"""Time-dependent diffusion with a Robin condition, implicit Euler in time.

A trajectory is stored as a 2-D array of shape (nt + 1, n_nodes), row n
holding the nodal field at time t_n = n * dt.  The forward and derivative
problems march forward with the constant operator S = M/dt + K_a + B_gamma
and data evaluated at the new time level.  The adjoint problem is the
algebraic transpose of that march: loads enter at levels N down to 1 and
the sweep runs backward.  Pairing trajectories with the right-endpoint
rule (weight dt on levels 1..N, nothing on level 0) makes the space-time
adjoint identity hold to solver precision, not just to O(dt).

Note the backward sweep places the level-N load inside the terminal solve
instead of starting from an explicit zero terminal value.  Starting from
zero and loading levels N-1..0 would also be a consistent discretization
of the continuous adjoint, but it is not the transpose of the forward
march and leaves an O(dt) gap in the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import fem
from .mesh import Mesh, SegmentTag


@dataclass(frozen=True)
class ParabolicProblem:
    """Data of the time-dependent problem.

    a is the diffusion coefficient (scalar or callable of x, y); f, g, h
    are the volume source, Robin data and flux data, each a scalar or a
    callable of (x, y, t) vectorized in x and y; u0 the initial value
    (scalar or callable of x, y); T the final time and nt the number of
    implicit Euler steps.  There is no reaction term in this problem
    class, the operator is M/dt + K_a + B_gamma.
    """

    mesh: Mesh
    a: object
    f: object
    g: object
    h: object
    u0: object
    T: float
    nt: int
    gamma_min: float = 0.1
    gamma_max: float = 10.0

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError(f"final time must be positive, got {self.T}")
        if self.nt < 1:
            raise ValueError(f"need at least one time step, got nt={self.nt}")
        if self.gamma_min <= 0.0:
            raise ValueError(f"gamma_min must be positive, got {self.gamma_min}")
        if self.gamma_max < self.gamma_min:
            raise ValueError("gamma_max must not be below gamma_min")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)


@dataclass(frozen=True)
class ParabolicOperator:
    """Preassembled pieces of one implicit Euler march."""

    S: sparse.csr_matrix
    M: sparse.csr_matrix
    dt: float


def build_operator(prob: ParabolicProblem, gamma: np.ndarray) -> ParabolicOperator:
    """Assemble S = M/dt + K_a + B_gamma once for a whole sweep."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < prob.gamma_min) or np.any(gamma > prob.gamma_max):
        raise ValueError(
            f"gamma leaves the admissible box "
            f"[{prob.gamma_min}, {prob.gamma_max}]"
        )
    K = fem.assemble_stiffness(prob.mesh, prob.a)
    M = fem.assemble_mass(prob.mesh, 1.0)
    S = (M / prob.dt + K
         + fem.assemble_boundary_mass(prob.mesh, SegmentTag.INACCESSIBLE, gamma))
    return ParabolicOperator(S=S.tocsr(), M=M, dt=prob.dt)


def _at_time(data, t: float):
    """Freeze the time argument of a data function; scalars pass through."""
    if callable(data):
        return lambda x, y: data(x, y, t)
    return data


def _initial_field(prob: ParabolicProblem) -> np.ndarray:
    if callable(prob.u0):
        return np.asarray(
            prob.u0(prob.mesh.nodes[:, 0], prob.mesh.nodes[:, 1]), dtype=float
        ) * np.ones(prob.mesh.n_nodes)
    return np.full(prob.mesh.n_nodes, float(prob.u0))


def solve_forward_parabolic(
    prob: ParabolicProblem,
    gamma: np.ndarray,
    tol: float = 1e-10,
    operator: ParabolicOperator | None = None,
) -> np.ndarray:
    """March the state forward from the interpolated initial value.

    Each step solves S u_n = (M/dt) u_{n-1} + loads(t_n), data evaluated
    at the new time level.  Returns the full (nt + 1, n_nodes) trajectory.
    """
    op = build_operator(prob, gamma) if operator is None else operator
    mesh = prob.mesh
    U = np.empty((prob.nt + 1, mesh.n_nodes))
    U[0] = _initial_field(prob)
    for n in range(1, prob.nt + 1):
        t = n * op.dt
        b = op.M @ (U[n - 1] / op.dt)
        b += fem.assemble_load(mesh, _at_time(prob.f, t))
        b += fem.assemble_boundary_load(
            mesh, SegmentTag.INACCESSIBLE, _at_time(prob.g, t)
        )
        b += fem.assemble_boundary_load(
            mesh, SegmentTag.ACCESSIBLE, _at_time(prob.h, t)
        )
        U[n] = fem.solve_spd(op.S, b, tol=tol, x0=U[n - 1])
    return U


def solve_derivative_parabolic(
    prob: ParabolicProblem,
    gamma: np.ndarray,
    u: np.ndarray,
    d: np.ndarray,
    tol: float = 1e-10,
    operator: ParabolicOperator | None = None,
) -> np.ndarray:
    """Sensitivity trajectory for a perturbation d of gamma.

    u must be the forward trajectory at gamma.  Starts from zero and takes
    the boundary load of -(d * u_n) on the inaccessible side at each step.
    """
    op = build_operator(prob, gamma) if operator is None else operator
    mesh = prob.mesh
    seg_i = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    d = np.asarray(d, dtype=float)
    W = np.zeros((prob.nt + 1, mesh.n_nodes))
    for n in range(1, prob.nt + 1):
        b = op.M @ (W[n - 1] / op.dt)
        b -= fem.assemble_boundary_load(
            mesh, SegmentTag.INACCESSIBLE, d * u[n, seg_i]
        )
        W[n] = fem.solve_spd(op.S, b, tol=tol, x0=W[n - 1])
    return W


def solve_adjoint_parabolic(
    prob: ParabolicProblem,
    gamma: np.ndarray,
    u: np.ndarray,
    p: np.ndarray,
    tol: float = 1e-10,
    operator: ParabolicOperator | None = None,
) -> np.ndarray:
    """Adjoint trajectory for accessible-side weights p, backward in time.

    p has shape (nt + 1, accessible node count); row 0 is never used since
    the right-endpoint pairing gives the initial level zero weight.  The
    sweep is the exact transpose of the derivative march: the terminal
    solve already carries the level-N load, earlier levels add theirs on
    the way down, and level 0 is a plain continuation without load.
    """
    op = build_operator(prob, gamma) if operator is None else operator
    mesh = prob.mesh
    seg_a = mesh.segment_nodes(SegmentTag.ACCESSIBLE)
    p = np.asarray(p, dtype=float)
    if p.shape[0] != prob.nt + 1:
        raise ValueError(
            f"weight series has {p.shape[0]} levels, expected {prob.nt + 1}"
        )
    W = np.zeros((prob.nt + 1, mesh.n_nodes))
    N = prob.nt
    b = -fem.assemble_boundary_load(mesh, SegmentTag.ACCESSIBLE, p[N] * u[N, seg_a])
    W[N] = fem.solve_spd(op.S, b, tol=tol)
    for n in range(N - 1, 0, -1):
        b = op.M @ (W[n + 1] / op.dt)
        b -= fem.assemble_boundary_load(
            mesh, SegmentTag.ACCESSIBLE, p[n] * u[n, seg_a]
        )
        W[n] = fem.solve_spd(op.S, b, tol=tol, x0=W[n + 1])
    if N >= 1:
        b = op.M @ (W[1] / op.dt)
        W[0] = fem.solve_spd(op.S, b, tol=tol, x0=W[1])
    return W


def trace_series(mesh: Mesh, tag: SegmentTag, u: np.ndarray) -> np.ndarray:
    """Restrict a trajectory to one segment, shape (nt + 1, segment nodes)."""
    return u[:, mesh.segment_nodes(tag)]


def time_integral_boundary(
    series: np.ndarray, dt: float, weights: np.ndarray | None = None
) -> np.ndarray:
    """Integrate a segment-field time series over time.

    The default weights are the right-endpoint rectangle rule, dt on
    levels 1..N and zero on level 0, matching the implicit Euler pairing
    used by the adjoint sweep.  Returns one segment field.
    """
    series = np.asarray(series, dtype=float)
    if weights is None:
        weights = np.full(series.shape[0], dt)
        weights[0] = 0.0
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape[0] != series.shape[0]:
            raise ValueError(
                f"{weights.shape[0]} weights for {series.shape[0]} levels"
            )
    return weights @ series


def space_time_inner(
    mesh: Mesh, tag: SegmentTag, u: np.ndarray, v: np.ndarray, dt: float
) -> float:
    """Space-time inner product of two segment-field series.

    Right-endpoint rule in time on top of the segment inner product in
    space, the scalar companion of time_integral_boundary.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"series shapes differ: {u.shape} vs {v.shape}")
    total = 0.0
    for n in range(1, u.shape[0]):
        total += dt * fem.boundary_inner(mesh, tag, u[n], v[n])
    return total
