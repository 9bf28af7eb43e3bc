"""Structured triangulations of a rectangle with tagged boundary segments.

The domain (0, lx) x (0, ly) is split into nx * ny equal cells and each
cell is cut along its lower-left to upper-right diagonal, giving two
counterclockwise triangles per cell.  Boundary edges carry a segment tag
once classified: the side x = lx is the inaccessible segment (where the
Robin coefficient lives), the remaining three sides form the accessible
segment (where measurements are taken).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class SegmentTag(Enum):
    INACCESSIBLE = 0
    ACCESSIBLE = 1


@dataclass(frozen=True)
class Mesh:
    """Triangulation of a rectangle.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array, node coordinates.
    triangles : (n_tri, 3) int array, counterclockwise node triples.
    boundary_edges : (n_bedges, 2) int array, node pairs on the boundary.
    boundary_tags : (n_bedges,) int array of SegmentTag values, or None
        before classify_boundary has been applied.
    nx, ny : cell counts per axis.
    lx, ly : side lengths.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray | None
    nx: int
    ny: int
    lx: float
    ly: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def edges_of(self, tag: SegmentTag) -> np.ndarray:
        """Boundary edges carrying the given tag, as an (k, 2) int array."""
        if self.boundary_tags is None:
            raise ValueError("mesh boundary has not been classified yet")
        return self.boundary_edges[self.boundary_tags == tag.value]

    def segment_nodes(self, tag: SegmentTag) -> np.ndarray:
        """Sorted unique node ids on the given boundary segment.

        On the inaccessible side the ascending-id order coincides with
        ascending y, which the profile output relies on.
        """
        return np.unique(self.edges_of(tag))


def build_rect_mesh(nx: int, ny: int, lx: float, ly: float) -> Mesh:
    """Build the structured triangulation of (0, lx) x (0, ly).

    Nodes are numbered lexicographically, id = j * (nx + 1) + i for grid
    position (i, j), so ids increase along x first, then y.  Each cell is
    split along the lower-left to upper-right diagonal.  Boundary edges
    are stored counterclockwise (bottom, right, top, left) and untagged;
    call classify_boundary to assign segment tags.

    Returns a mesh with (nx+1)(ny+1) nodes, 2*nx*ny triangles and
    2*(nx+ny) boundary edges.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    if lx <= 0 or ly <= 0:
        raise ValueError(f"side lengths must be positive, got lx={lx}, ly={ly}")

    # linspace pins the first and last coordinates to exactly 0 and the
    # side length, so boundary tests can compare x == lx without slack.
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    xv, yv = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xv.ravel(), yv.ravel()])

    def nid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            ll = nid(i, j)
            lr = nid(i + 1, j)
            ul = nid(i, j + 1)
            ur = nid(i + 1, j + 1)
            triangles[k] = (ll, lr, ur)
            triangles[k + 1] = (ll, ur, ul)
            k += 2

    edges = []
    for i in range(nx):                      # bottom, left to right
        edges.append((nid(i, 0), nid(i + 1, 0)))
    for j in range(ny):                      # right, bottom to top
        edges.append((nid(nx, j), nid(nx, j + 1)))
    for i in range(nx, 0, -1):               # top, right to left
        edges.append((nid(i, ny), nid(i - 1, ny)))
    for j in range(ny, 0, -1):               # left, top to bottom
        edges.append((nid(0, j), nid(0, j - 1)))
    boundary_edges = np.array(edges, dtype=np.int64)

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=boundary_edges,
        boundary_tags=None,
        nx=nx,
        ny=ny,
        lx=float(lx),
        ly=float(ly),
    )


def classify_boundary(mesh: Mesh) -> Mesh:
    """Tag boundary edges: both endpoints on x = lx means inaccessible,
    everything else accessible.  Returns a new mesh, tags filled in."""
    x = mesh.nodes[:, 0]
    on_right = x[mesh.boundary_edges] == mesh.lx
    tags = np.where(
        on_right.all(axis=1),
        SegmentTag.INACCESSIBLE.value,
        SegmentTag.ACCESSIBLE.value,
    ).astype(np.int64)
    return replace(mesh, boundary_tags=tags)


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for counterclockwise)."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def dump_mesh(mesh: Mesh) -> str:
    """Plain-text dump: nodes, triangles, then tagged boundary edges.

    Meant for debugging and golden-file tests, not for interchange.
    """
    lines = []
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{i} {x:.17g} {y:.17g}")
    for i, (a, b, c) in enumerate(mesh.triangles):
        lines.append(f"{i} {a} {b} {c}")
    for k, (a, b) in enumerate(mesh.boundary_edges):
        if mesh.boundary_tags is None:
            tag = "untagged"
        else:
            tag = SegmentTag(mesh.boundary_tags[k]).name.lower()
        lines.append(f"{a} {b} {tag}")
    return "\n".join(lines) + "\n"
