import numpy as np
import pytest
from scipy import sparse

from robinrecon import fem
from robinrecon.mesh import SegmentTag, build_rect_mesh, classify_boundary

LX, LY = 1.0, 2.0
AREA = LX * LY

# frozen on the 8x16 reference system below; the CG recurrence is
# deterministic, so this is a regression anchor, not an estimate
CG_ITERATIONS_8X16 = 63


def make_mesh(nx=8, ny=16):
    return classify_boundary(build_rect_mesh(nx, ny, LX, LY))


def nodal(mesh, fn):
    return fn(mesh.nodes[:, 0], mesh.nodes[:, 1])


# ---------------------------------------------------------------------------
# assembly oracles: integrals of polynomials the quadrature must nail
# ---------------------------------------------------------------------------

def test_mass_reproduces_polynomial_integrals():
    mesh = make_mesh()
    M = fem.assemble_mass(mesh, 1.0)
    ones = np.ones(mesh.n_nodes)
    x = nodal(mesh, lambda x, y: x)
    y = nodal(mesh, lambda x, y: y)
    assert ones @ (M @ ones) == pytest.approx(AREA, rel=1e-13)
    # integral of x*y over the rectangle = (1/2) * (4/2) = 1
    assert x @ (M @ y) == pytest.approx(1.0, rel=1e-13)
    # integral of y^2 = 8/3; quadratic integrands are still exact
    assert y @ (M @ y) == pytest.approx(8.0 / 3.0, rel=1e-13)


def test_mass_weight_scales_linearly():
    mesh = make_mesh(4, 8)
    M1 = fem.assemble_mass(mesh, 1.0)
    M3 = fem.assemble_mass(mesh, 3.0)
    np.testing.assert_allclose(M3.toarray(), 3.0 * M1.toarray(), rtol=1e-14)
    with pytest.raises(ValueError):
        fem.assemble_mass(mesh, -1.0)


def test_stiffness_on_linear_fields():
    mesh = make_mesh()
    K = fem.assemble_stiffness(mesh, 1.0)
    x = nodal(mesh, lambda x, y: x)
    y = nodal(mesh, lambda x, y: y)
    ones = np.ones(mesh.n_nodes)
    assert x @ (K @ x) == pytest.approx(AREA, rel=1e-13)
    assert x @ (K @ y) == pytest.approx(0.0, abs=1e-13)
    np.testing.assert_allclose(K @ ones, 0.0, atol=1e-13)
    with pytest.raises(ValueError):
        fem.assemble_stiffness(mesh, 0.0)


def test_load_vector_integrates_sources():
    mesh = make_mesh()
    b1 = fem.assemble_load(mesh, 1.0)
    bx = fem.assemble_load(mesh, lambda x, y: x)
    assert b1.sum() == pytest.approx(AREA, rel=1e-13)
    assert bx.sum() == pytest.approx(0.5 * LY, rel=1e-13)


def test_boundary_mass_is_exact_for_cubics():
    mesh = make_mesh()
    y_global = nodal(mesh, lambda x, y: y)
    ones = np.ones(mesh.n_nodes)
    B = fem.assemble_boundary_mass(mesh, SegmentTag.INACCESSIBLE, lambda x, y: y)
    # integral over x = 1 of y * 1 * y dy = 8/3, a cubic integrand
    assert ones @ (B @ y_global) == pytest.approx(8.0 / 3.0, rel=1e-13)
    assert ones @ (B @ ones) == pytest.approx(LY ** 2 / 2.0, rel=1e-13)


def test_boundary_mass_callable_matches_nodal_array():
    """A linear weight interpolates exactly, both input forms must agree."""
    mesh = make_mesh()
    seg = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    weight = 1.0 + 0.5 * mesh.nodes[seg, 1]
    B_arr = fem.assemble_boundary_mass(mesh, SegmentTag.INACCESSIBLE, weight)
    B_fn = fem.assemble_boundary_mass(
        mesh, SegmentTag.INACCESSIBLE, lambda x, y: 1.0 + 0.5 * y
    )
    np.testing.assert_allclose(B_arr.toarray(), B_fn.toarray(), atol=1e-14)


def test_boundary_mass_rejects_missized_weight():
    mesh = make_mesh()
    with pytest.raises(ValueError):
        fem.assemble_boundary_mass(mesh, SegmentTag.INACCESSIBLE, np.ones(5))


def test_boundary_load_on_the_accessible_segment():
    mesh = make_mesh()
    b = fem.assemble_boundary_load(mesh, SegmentTag.ACCESSIBLE, 1.0)
    # accessible perimeter: bottom + left + top = 1 + 2 + 1
    assert b.sum() == pytest.approx(4.0, rel=1e-13)
    seg_i = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    interior_i = seg_i[1:-1]
    assert np.all(b[interior_i] == 0.0), "load must not leak across segments"


def test_segment_inner_product_and_norm():
    mesh = make_mesh(16, 32)
    seg = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    y = mesh.nodes[seg, 1]
    ones = np.ones(seg.size)
    assert fem.boundary_inner(mesh, SegmentTag.INACCESSIBLE, y, y) == \
        pytest.approx(8.0 / 3.0, rel=1e-12)
    assert fem.boundary_norm(mesh, SegmentTag.INACCESSIBLE, ones) == \
        pytest.approx(np.sqrt(LY), rel=1e-13)
    with pytest.raises(ValueError):
        fem.boundary_inner(mesh, SegmentTag.INACCESSIBLE, ones, ones[:-1])


def test_segment_mass_matches_inner_product():
    mesh = make_mesh()
    seg = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    M = fem.segment_mass(mesh, SegmentTag.INACCESSIBLE)
    rng = np.random.default_rng(7)
    u = rng.standard_normal(seg.size)
    v = rng.standard_normal(seg.size)
    direct = fem.boundary_inner(mesh, SegmentTag.INACCESSIBLE, u, v)
    assert u @ (M @ v) == pytest.approx(direct, rel=1e-13)


def test_trace_picks_segment_values():
    mesh = make_mesh()
    u = nodal(mesh, lambda x, y: x + 10.0 * y)
    tr = fem.trace(mesh, SegmentTag.INACCESSIBLE, u)
    seg = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    np.testing.assert_array_equal(tr, u[seg])
    assert np.all(tr == LX + 10.0 * mesh.nodes[seg, 1])


# ---------------------------------------------------------------------------
# solver behavior
# ---------------------------------------------------------------------------

def reference_system():
    mesh = make_mesh()
    K = fem.assemble_stiffness(mesh, 1.0)
    M = fem.assemble_mass(mesh, 1.0)
    B = fem.assemble_boundary_mass(mesh, SegmentTag.INACCESSIBLE, 2.0)
    A = (K + M + B).tocsr()
    b = fem.assemble_load(mesh, lambda x, y: np.cos(np.pi * y) + x)
    return A, b


def test_solve_spd_reaches_tolerance():
    A, b = reference_system()
    stats = {}
    x = fem.solve_spd(A, b, tol=1e-10, stats=stats)
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)
    assert stats["iterations"] == CG_ITERATIONS_8X16


def test_solve_spd_zero_rhs_shortcut():
    A, _ = reference_system()
    stats = {}
    x = fem.solve_spd(A, np.zeros(A.shape[0]), stats=stats)
    assert np.all(x == 0.0)
    assert stats["iterations"] == 0


def test_solve_spd_warm_start_at_solution():
    A, b = reference_system()
    x = fem.solve_spd(A, b, tol=1e-10)
    stats = {}
    again = fem.solve_spd(A, b, tol=1e-10, x0=x, stats=stats)
    assert stats["iterations"] == 0
    np.testing.assert_array_equal(again, x)


def test_solve_spd_is_deterministic():
    A, b = reference_system()
    x1 = fem.solve_spd(A, b, tol=1e-10)
    x2 = fem.solve_spd(A, b, tol=1e-10)
    np.testing.assert_array_equal(x1, x2)


def test_solve_spd_rejects_bad_tolerance():
    A, b = reference_system()
    with pytest.raises(ValueError):
        fem.solve_spd(A, b, tol=0.0)


def test_solve_spd_detects_indefinite_matrix():
    A = sparse.diags([1.0, -1.0, 1.0]).tocsr()
    with pytest.raises(fem.CurvatureBreakdown):
        fem.solve_spd(A, np.ones(3))


def test_solve_spd_reports_stalled_convergence():
    A, b = reference_system()
    with pytest.raises(fem.ConvergenceFailure):
        fem.solve_spd(A, b, tol=1e-12, max_iter=2)
