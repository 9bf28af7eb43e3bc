"""P1 finite element assembly and a preconditioned CG solver.

All matrices built here are symmetric.  Domain integrals use the 3-point
edge-midpoint rule on triangles, which is exact for products of two P1
functions, so the mass matrix is the consistent one.  Boundary integrals
use 2-point Gauss per edge, exact for cubics, so a linearly interpolated
weight times two P1 basis functions is integrated without error.  Keeping
the quadrature exact at this degree is what makes the discrete adjoint
identity hold to solver precision downstream.

Boundary fields (Robin coefficients, measurement residuals, directions)
are plain 1-D arrays indexed by the sorted node list of one segment, see
Mesh.segment_nodes.  Nodal fields on the whole mesh are 1-D arrays of
length n_nodes.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import sparse

from .mesh import Mesh, SegmentTag, triangle_areas

# 2-point Gauss on the unit interval [0, 1]
_GAUSS_XI = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GAUSS_W = np.array([0.5, 0.5])


class LinearSolveError(RuntimeError):
    """Base class for failures of the sparse SPD solver."""


class ConvergenceFailure(LinearSolveError):
    """CG exhausted its iteration cap without reaching the tolerance."""


class CurvatureBreakdown(LinearSolveError):
    """CG met a direction of non-positive curvature, the matrix is not SPD."""


def solve_spd(
    A: sparse.spmatrix,
    b: np.ndarray,
    tol: float = 1e-10,
    x0: np.ndarray | None = None,
    max_iter: int | None = None,
    stats: dict | None = None,
) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A.

    Preconditioned conjugate gradients with a diagonal (Jacobi)
    preconditioner.  Stops when ||b - A x||_2 <= tol * ||b||_2.  The
    iteration is a fixed deterministic recurrence: identical inputs give
    bit-identical solutions.

    Parameters
    ----------
    tol : relative residual tolerance, must lie in (0, 1).
    x0 : optional warm start (used by the time steppers).
    max_iter : iteration cap, defaults to 10 * dimension.
    stats : optional dict, receives {"iterations": k} on return.

    Raises
    ------
    ConvergenceFailure if the cap is hit, CurvatureBreakdown if a search
    direction has non-positive curvature (an SPD violation upstream).
    """
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must be in (0, 1), got {tol}")
    n = A.shape[0]
    if max_iter is None:
        max_iter = 10 * n

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        if stats is not None:
            stats["iterations"] = 0
        return np.zeros(n)

    diag = A.diagonal()
    if np.any(diag <= 0.0):
        bad = int(np.argmin(diag))
        raise CurvatureBreakdown(
            f"non-positive diagonal entry {diag[bad]:g} at row {bad}"
        )

    x = np.zeros(n) if x0 is None else x0.astype(float, copy=True)
    r = b - A @ x
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    threshold = tol * norm_b

    if np.linalg.norm(r) <= threshold:
        if stats is not None:
            stats["iterations"] = 0
        return x

    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise CurvatureBreakdown(
                f"non-positive curvature {pAp:g} at iteration {k}"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= threshold:
            if stats is not None:
                stats["iterations"] = k
            return x
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise ConvergenceFailure(
        f"no convergence in {max_iter} iterations "
        f"(residual {np.linalg.norm(r):.3e}, target {threshold:.3e})"
    )


def _coeff_on_points(coeff, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate a scalar constant or a vectorized callable on points."""
    if callable(coeff):
        return np.broadcast_to(np.asarray(coeff(x, y), dtype=float), x.shape).copy()
    return np.full(x.shape, float(coeff))


def _triangle_geometry(mesh: Mesh):
    """Areas and P1 gradient components for every triangle."""
    p = mesh.nodes[mesh.triangles]          # (m, 3, 2)
    area = triangle_areas(mesh)
    if np.any(area <= 0.0):
        raise ValueError("mesh contains a non-positively oriented triangle")
    x = p[:, :, 0]
    y = p[:, :, 1]
    # grad phi_i = (b_i, c_i) / (2 area), cyclic differences
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return p, area, b, c


def _scatter(mesh: Mesh, local: np.ndarray) -> sparse.csr_matrix:
    """Sum (m, 3, 3) local matrices into the global sparse matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    return sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(n, n)
    ).tocsr()


def assemble_stiffness(mesh: Mesh, a) -> sparse.csr_matrix:
    """Stiffness matrix, entries integral of a * grad(phi_i) . grad(phi_j).

    The diffusion coefficient is evaluated once per triangle at the
    centroid; P1 gradients are constant per element so this is the exact
    element integral for piecewise constant a.  Non-positive samples are
    rejected, an elliptic operator needs a > 0.
    """
    p, area, b, c = _triangle_geometry(mesh)
    centroid = p.mean(axis=1)
    a_val = _coeff_on_points(a, centroid[:, 0], centroid[:, 1])
    if np.any(a_val <= 0.0):
        raise ValueError("diffusion coefficient must be positive everywhere")
    scale = a_val / (4.0 * area)
    local = scale[:, None, None] * (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    )
    return _scatter(mesh, local)


# P1 basis values at the three edge midpoints of the reference triangle.
_MID_PHI = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])


def _edge_midpoints(p: np.ndarray) -> np.ndarray:
    """Edge midpoints of each triangle, shape (m, 3, 2)."""
    return np.stack([
        0.5 * (p[:, 0] + p[:, 1]),
        0.5 * (p[:, 1] + p[:, 2]),
        0.5 * (p[:, 2] + p[:, 0]),
    ], axis=1)


def assemble_mass(mesh: Mesh, c) -> sparse.csr_matrix:
    """Mass matrix, entries integral of c * phi_i * phi_j.

    Midpoint quadrature is exact for the P1 x P1 product, so constant c
    reproduces the consistent mass matrix (area/12) [[2,1,1],[1,2,1],[1,1,2]]
    without quadrature error.  Negative samples are rejected.
    """
    p, area, _, _ = _triangle_geometry(mesh)
    mid = _edge_midpoints(p)
    c_val = _coeff_on_points(c, mid[:, :, 0], mid[:, :, 1])   # (m, 3)
    if np.any(c_val < 0.0):
        raise ValueError("mass coefficient must be nonnegative")
    # sum_q (area/3) c_q phi(q) phi(q)^T
    outer = _MID_PHI[:, :, None] * _MID_PHI[:, None, :]        # (3, 3, 3)
    local = (area[:, None, None] / 3.0) * np.einsum(
        "mq,qij->mij", c_val, outer
    )
    return _scatter(mesh, local)


def assemble_load(mesh: Mesh, f) -> np.ndarray:
    """Volume load vector, entries integral of f * phi_i (midpoint rule)."""
    p, area, _, _ = _triangle_geometry(mesh)
    mid = _edge_midpoints(p)
    f_val = _coeff_on_points(f, mid[:, :, 0], mid[:, :, 1])    # (m, 3)
    local = (area[:, None] / 3.0) * (f_val @ _MID_PHI)         # (m, 3)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


def _segment_edge_data(mesh: Mesh, tag: SegmentTag):
    """Edges of a segment with lengths and local indices into its node list."""
    edges = mesh.edges_of(tag)
    if edges.shape[0] == 0:
        raise ValueError(f"segment {tag.name} has no edges")
    seg_nodes = np.unique(edges)
    local = np.searchsorted(seg_nodes, edges)                  # (k, 2)
    d = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    return edges, seg_nodes, local, length


def _boundary_weight_at_gauss(mesh, tag, weight, edges, seg_nodes, local):
    """Weight values at the two Gauss points of every segment edge.

    A callable is sampled at the physical Gauss points; an array is taken
    as nodal values on the segment and interpolated linearly along each
    edge; a scalar is broadcast.
    """
    if callable(weight):
        p0 = mesh.nodes[edges[:, 0]]
        p1 = mesh.nodes[edges[:, 1]]
        gx = p0[:, 0, None] + _GAUSS_XI[None, :] * (p1[:, 0] - p0[:, 0])[:, None]
        gy = p0[:, 1, None] + _GAUSS_XI[None, :] * (p1[:, 1] - p0[:, 1])[:, None]
        return _coeff_on_points(weight, gx, gy)
    w = np.asarray(weight, dtype=float)
    if w.ndim == 0:
        return np.full((edges.shape[0], 2), float(w))
    if w.shape != seg_nodes.shape:
        raise ValueError(
            f"boundary weight has {w.shape[0]} entries, "
            f"segment {tag.name} has {seg_nodes.shape[0]} nodes"
        )
    w0 = w[local[:, 0]]
    w1 = w[local[:, 1]]
    return w0[:, None] * (1.0 - _GAUSS_XI)[None, :] + w1[:, None] * _GAUSS_XI[None, :]


def assemble_boundary_mass(mesh: Mesh, tag: SegmentTag, weight) -> sparse.csr_matrix:
    """Weighted boundary mass on one segment, as a global sparse matrix.

    Entry (i, j) is the integral over the segment of weight * phi_i * phi_j.
    With a nodal weight the integrand is cubic per edge and the 2-point
    Gauss rule evaluates it exactly, so the matrix depends linearly on the
    nodal weight values.  That linearity is what the derivative solver
    differentiates, do not change the quadrature here without revisiting it.
    """
    edges, seg_nodes, local, length = _segment_edge_data(mesh, tag)
    w_gauss = _boundary_weight_at_gauss(mesh, tag, weight, edges, seg_nodes, local)

    phi = np.stack([1.0 - _GAUSS_XI, _GAUSS_XI], axis=0)       # (2, q)
    # local 2x2 block per edge: length * sum_q wq * w(xi_q) phi_i phi_j
    blk = np.einsum(
        "q,eq,iq,jq->eij", _GAUSS_W, w_gauss, phi, phi
    ) * length[:, None, None]

    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    n = mesh.n_nodes
    return sparse.coo_matrix((blk.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_boundary_load(mesh: Mesh, tag: SegmentTag, g) -> np.ndarray:
    """Boundary load vector, entries integral over the segment of g * phi_i."""
    edges, seg_nodes, local, length = _segment_edge_data(mesh, tag)
    g_gauss = _boundary_weight_at_gauss(mesh, tag, g, edges, seg_nodes, local)
    phi = np.stack([1.0 - _GAUSS_XI, _GAUSS_XI], axis=0)
    contrib = np.einsum("q,eq,iq->ei", _GAUSS_W, g_gauss, phi) * length[:, None]
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, edges.ravel(), contrib.ravel())
    return out


def segment_mass(mesh: Mesh, tag: SegmentTag) -> sparse.csr_matrix:
    """Unweighted mass matrix of one segment in its local node numbering."""
    edges, seg_nodes, local, length = _segment_edge_data(mesh, tag)
    ns = seg_nodes.shape[0]
    l6 = length / 6.0
    data = np.column_stack([2.0 * l6, l6, l6, 2.0 * l6]).ravel()
    rows = np.column_stack([local[:, 0], local[:, 0], local[:, 1], local[:, 1]]).ravel()
    cols = np.column_stack([local[:, 0], local[:, 1], local[:, 0], local[:, 1]]).ravel()
    return sparse.coo_matrix((data, (rows, cols)), shape=(ns, ns)).tocsr()


def trace(mesh: Mesh, tag: SegmentTag, u: np.ndarray) -> np.ndarray:
    """Restrict a nodal field to the node list of one segment."""
    return u[mesh.segment_nodes(tag)]


def boundary_inner(mesh: Mesh, tag: SegmentTag, u: np.ndarray, v: np.ndarray) -> float:
    """L2 inner product of two segment fields (linear interpolation per edge).

    Exact for the quadratic integrand of two P1 segment functions.
    """
    edges, seg_nodes, local, length = _segment_edge_data(mesh, tag)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != seg_nodes.shape or v.shape != seg_nodes.shape:
        raise ValueError(
            f"segment {tag.name} has {seg_nodes.shape[0]} nodes, "
            f"got fields of size {u.shape} and {v.shape}"
        )
    u0, u1 = u[local[:, 0]], u[local[:, 1]]
    v0, v1 = v[local[:, 0]], v[local[:, 1]]
    per_edge = length / 6.0 * (2.0 * u0 * v0 + u0 * v1 + u1 * v0 + 2.0 * u1 * v1)
    return float(per_edge.sum())


def boundary_norm(mesh: Mesh, tag: SegmentTag, u: np.ndarray) -> float:
    """Segment L2 norm, the square root of the self inner product."""
    return float(np.sqrt(boundary_inner(mesh, tag, u, u)))
