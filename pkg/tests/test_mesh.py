import numpy as np
import pytest

from robinrecon.mesh import (
    SegmentTag,
    build_rect_mesh,
    classify_boundary,
    dump_mesh,
    triangle_areas,
)

NX, NY = 16, 32
LX, LY = 1.0, 2.0


def make_mesh():
    return classify_boundary(build_rect_mesh(NX, NY, LX, LY))


def test_counts_on_reference_mesh():
    mesh = make_mesh()
    assert mesh.n_nodes == (NX + 1) * (NY + 1) == 561
    assert mesh.triangles.shape == (2 * NX * NY, 3)
    assert mesh.boundary_edges.shape == (2 * (NX + NY), 2)


def test_total_area_is_exact():
    mesh = make_mesh()
    areas = triangle_areas(mesh)
    assert np.all(areas > 0.0)
    # uniform splitting: every triangle has half a cell's area
    cell = (LX / NX) * (LY / NY)
    np.testing.assert_allclose(areas, cell / 2.0, rtol=1e-14)
    assert areas.sum() == pytest.approx(LX * LY, rel=1e-14)


def test_classification_splits_the_boundary():
    mesh = make_mesh()
    inacc = mesh.edges_of(SegmentTag.INACCESSIBLE)
    acc = mesh.edges_of(SegmentTag.ACCESSIBLE)
    assert inacc.shape[0] == NY
    assert acc.shape[0] == 2 * NX + NY
    # the inaccessible segment is exactly the x = LX side
    assert np.all(mesh.nodes[inacc.ravel(), 0] == LX)
    # every accessible edge has at least one node off that side
    assert np.all((mesh.nodes[acc, 0] != LX).any(axis=1))


def test_segment_nodes_sorted_and_shared_corners():
    mesh = make_mesh()
    seg_i = mesh.segment_nodes(SegmentTag.INACCESSIBLE)
    seg_a = mesh.segment_nodes(SegmentTag.ACCESSIBLE)
    assert seg_i.size == NY + 1
    # corners (LX, 0) and (LX, LY) belong to both segments
    assert seg_a.size == 2 * (NX + NY) - (NY + 1) + 2
    y = mesh.nodes[seg_i, 1]
    assert np.all(np.diff(y) > 0.0), "inaccessible nodes must ascend in y"
    assert y[0] == 0.0 and y[-1] == LY


def test_unclassified_mesh_refuses_segment_queries():
    raw = build_rect_mesh(4, 4, 1.0, 1.0)
    with pytest.raises(ValueError):
        raw.edges_of(SegmentTag.ACCESSIBLE)


def test_build_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        build_rect_mesh(0, 4, 1.0, 2.0)
    with pytest.raises(ValueError):
        build_rect_mesh(4, 4, -1.0, 2.0)


def test_dump_is_deterministic():
    mesh = make_mesh()
    text = dump_mesh(mesh)
    assert text == dump_mesh(mesh)
    lines = [line for line in text.splitlines() if line.strip()]
    total = mesh.n_nodes + mesh.triangles.shape[0] + mesh.boundary_edges.shape[0]
    assert len(lines) == total
    tagged = sum(line.endswith(" inaccessible") for line in lines)
    assert tagged == NY
