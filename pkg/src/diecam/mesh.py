"""Triangle mesh loading, cleaning, adjacency and colored export.

Meshes arrive as STL (binary or text, auto-detected) and are normalized into
an indexed triangle list with recomputed facet normals. Stored STL normals
are only consulted to disambiguate winding: when a stored normal opposes the
winding normal the facet is flipped, otherwise the stored value is ignored.
All downstream math trusts winding-derived normals exclusively.
"""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .colors import OUT_OF_RANGE, scalar_to_rgb
from .errors import EmptyMeshError, MeshFormatError

logger = logging.getLogger(__name__)

MERGE_TOLERANCE_MM = 1e-6
MIN_FACET_AREA_MM2 = 1e-9
NORMAL_AGREEMENT_COSINE = 1e-3

_BINARY_RECORD = np.dtype([
    ("normal", "<f4", (3,)),
    ("verts", "<f4", (3, 3)),
    ("attr", "<u2"),
])


@dataclass(frozen=True)
class CleaningOptions:
    """Knobs for mesh normalization; defaults match the toolkit contract."""

    merge_tolerance: float = MERGE_TOLERANCE_MM
    min_facet_area: float = MIN_FACET_AREA_MM2


@dataclass(frozen=True)
class EdgeRecord:
    """Shared manifold edge between exactly two facets."""

    facets: tuple[int, int]
    vertices: tuple[int, int]
    length: float


@dataclass
class MeshDiagnostics:
    facet_count: int = 0
    vertex_count: int = 0
    degenerate_removed: int = 0
    vertices_merged: int = 0
    flipped_facets: int = 0
    boundary_edge_count: int = 0
    non_manifold_edges: list = field(default_factory=list)
    undercut_facet_count: int = 0
    bounding_box: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    @property
    def non_manifold_edge_count(self) -> int:
        return len(self.non_manifold_edges)

    def to_dict(self) -> dict:
        return {
            "facet_count": self.facet_count,
            "vertex_count": self.vertex_count,
            "degenerate_removed": self.degenerate_removed,
            "vertices_merged": self.vertices_merged,
            "flipped_facets": self.flipped_facets,
            "boundary_edge_count": self.boundary_edge_count,
            "non_manifold_edge_count": self.non_manifold_edge_count,
            "non_manifold_edges": [list(map(int, e[:2])) for e in self.non_manifold_edges],
            "undercut_facet_count": self.undercut_facet_count,
            "bounding_box": [list(self.bounding_box[0]), list(self.bounding_box[1])],
        }


class TriMesh:
    """Indexed triangle mesh, immutable after construction.

    Attributes
    ----------
    vertices : (V, 3) float64
    facets : (F, 3) int64
        Vertex indices, winding consistent with ``facet_normals``.
    facet_normals : (F, 3) float64, unit length
    facet_areas : (F,) float64, mm^2
    facet_centroids : (F, 3) float64
    """

    def __init__(self, vertices: np.ndarray, facets: np.ndarray,
                 diagnostics: MeshDiagnostics | None = None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.facets = np.ascontiguousarray(facets, dtype=np.int64)
        tri = self.vertices[self.facets]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(cross, axis=1)
        self.facet_areas = 0.5 * norms
        safe = np.where(norms > 0.0, norms, 1.0)
        self.facet_normals = cross / safe[:, None]
        self.facet_centroids = tri.mean(axis=1)
        self.diagnostics = diagnostics or MeshDiagnostics()
        self._edge_adjacency: dict[tuple[int, int], EdgeRecord] | None = None
        self._neighbors: list[tuple[int, ...]] | None = None
        self._boundary_edges: list[tuple[int, int, int]] | None = None

    def __len__(self) -> int:
        return len(self.facets)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        used = self.vertices[np.unique(self.facets)]
        return used.min(axis=0), used.max(axis=0)

    @property
    def z_max(self) -> float:
        return float(self.bounds[1][2])

    # -- adjacency ---------------------------------------------------------

    @property
    def edge_adjacency(self) -> dict[tuple[int, int], EdgeRecord]:
        if self._edge_adjacency is None:
            build_adjacency(self)
        return self._edge_adjacency

    def edge_record(self, i: int, j: int) -> EdgeRecord | None:
        """Record for the shared edge of facets i and j, order-insensitive."""
        key = (i, j) if i < j else (j, i)
        return self.edge_adjacency.get(key)

    def neighbors(self, i: int) -> tuple[int, ...]:
        if self._neighbors is None:
            build_adjacency(self)
        return self._neighbors[i]

    @property
    def boundary_edges(self) -> list[tuple[int, int, int]]:
        """(vertex_a, vertex_b, facet) for every edge used by one facet only."""
        if self._boundary_edges is None:
            build_adjacency(self)
        return self._boundary_edges

    def facet_triangle(self, i: int) -> np.ndarray:
        return self.vertices[self.facets[i]]


def build_adjacency(mesh: TriMesh) -> TriMesh:
    """Populate edge records, neighbor lists and boundary/non-manifold data.

    Every facet contributes its three undirected vertex-pair edges. Edges
    used by exactly two facets become :class:`EdgeRecord` entries; edges used
    by one facet are boundary; edges used by three or more are reported as
    non-manifold diagnostics and excluded from adjacency rather than
    rejecting the mesh.
    """
    f = mesh.facets
    n = len(f)
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    edges = np.sort(edges, axis=1)
    owners = np.concatenate([np.arange(n)] * 3)

    order = np.lexsort((owners, edges[:, 1], edges[:, 0]))
    edges = edges[order]
    owners = owners[order]

    adjacency: dict[tuple[int, int], EdgeRecord] = {}
    neighbors: list[list[int]] = [[] for _ in range(n)]
    boundary: list[tuple[int, int, int]] = []
    non_manifold: list[tuple[int, int, tuple[int, ...]]] = []

    change = np.any(np.diff(edges, axis=0) != 0, axis=1)
    starts = np.concatenate([[0], np.nonzero(change)[0] + 1, [len(edges)]])
    verts = mesh.vertices
    for a, b in zip(starts[:-1], starts[1:]):
        group = owners[a:b]
        va, vb = int(edges[a, 0]), int(edges[a, 1])
        if b - a == 2:
            i, j = int(group[0]), int(group[1])
            length = float(np.linalg.norm(verts[va] - verts[vb]))
            adjacency[(i, j)] = EdgeRecord((i, j), (va, vb), length)
            neighbors[i].append(j)
            neighbors[j].append(i)
        elif b - a == 1:
            boundary.append((va, vb, int(group[0])))
        else:
            non_manifold.append((va, vb, tuple(int(g) for g in group)))

    mesh._edge_adjacency = adjacency
    mesh._neighbors = [tuple(sorted(ns)) for ns in neighbors]
    mesh._boundary_edges = boundary
    mesh.diagnostics.boundary_edge_count = len(boundary)
    mesh.diagnostics.non_manifold_edges = non_manifold
    return mesh


def mesh_from_triangles(triangles: np.ndarray,
                        stored_normals: np.ndarray | None = None,
                        options: CleaningOptions = CleaningOptions()) -> TriMesh:
    """Build a cleaned mesh from a (F, 3, 3) triangle soup.

    Cleaning merges vertices on a ``merge_tolerance`` quantization grid
    (idempotent: re-cleaning a cleaned mesh is the identity), removes facets
    with area <= ``min_facet_area`` or repeated vertex indices, and orients
    each facet with the winding normal, flipped when a stored normal clearly
    opposes it.
    """
    tri = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    if tri.size == 0:
        raise EmptyMeshError("mesh contains no facets")

    flat = tri.reshape(-1, 3)
    keys = np.round(flat / options.merge_tolerance).astype(np.int64)
    uniq_keys, inverse = np.unique(keys, axis=0, return_inverse=True)
    first = np.full(len(uniq_keys), len(flat), dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(len(flat)))
    vertices = flat[first]
    facets = inverse.reshape(-1, 3)
    merged = len(flat) - len(uniq_keys)

    v = vertices[facets]
    cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    area = 0.5 * np.linalg.norm(cross, axis=1)
    distinct = ((facets[:, 0] != facets[:, 1])
                & (facets[:, 1] != facets[:, 2])
                & (facets[:, 2] != facets[:, 0]))
    keep = (area > options.min_facet_area) & distinct
    dropped = int(np.count_nonzero(~keep))
    facets = facets[keep]
    if len(facets) == 0:
        raise EmptyMeshError("mesh contains no non-degenerate facets")
    cross = cross[keep]

    flipped = 0
    if stored_normals is not None:
        stored = np.asarray(stored_normals, dtype=np.float64).reshape(-1, 3)[keep]
        dots = np.einsum("ij,ij->i", stored, cross)
        wind_norm = np.linalg.norm(cross, axis=1)
        stored_norm = np.linalg.norm(stored, axis=1)
        scale = wind_norm * np.where(stored_norm > 0.0, stored_norm, 1.0)
        cosine = dots / scale
        flip = cosine < -NORMAL_AGREEMENT_COSINE
        flipped = int(np.count_nonzero(flip))
        facets[flip] = facets[flip][:, ::-1]

    diag = MeshDiagnostics(
        degenerate_removed=dropped,
        vertices_merged=merged,
        flipped_facets=flipped,
    )
    mesh = TriMesh(vertices, facets, diag)
    lo, hi = mesh.bounds
    diag.facet_count = len(mesh)
    diag.vertex_count = len(mesh.vertices)
    diag.bounding_box = (tuple(map(float, lo)), tuple(map(float, hi)))
    diag.undercut_facet_count = int(np.count_nonzero(mesh.facet_normals[:, 2] < 0.0))
    build_adjacency(mesh)
    return mesh


# -- STL input -----------------------------------------------------------

_FACET_RE = re.compile(
    rb"facet\s+normal\s+(\S+)\s+(\S+)\s+(\S+)"
    rb".*?vertex\s+(\S+)\s+(\S+)\s+(\S+)"
    rb"\s+vertex\s+(\S+)\s+(\S+)\s+(\S+)"
    rb"\s+vertex\s+(\S+)\s+(\S+)\s+(\S+)",
    re.DOTALL,
)


def _parse_text_stl(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    rows = _FACET_RE.findall(data)
    if not rows:
        raise MeshFormatError("text STL contains no facets")
    try:
        arr = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise MeshFormatError(f"text STL has malformed numbers: {exc}") from exc
    normals = arr[:, 0:3]
    triangles = arr[:, 3:12].reshape(-1, 3, 3)
    return triangles, normals


def _parse_binary_stl(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(data) < 84:
        raise MeshFormatError("binary STL truncated before facet count")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) != expected:
        raise MeshFormatError(
            f"binary STL length {len(data)} does not match declared "
            f"{count} facets ({expected} bytes expected)")
    records = np.frombuffer(data, dtype=_BINARY_RECORD, count=count, offset=84)
    return records["verts"].astype(np.float64), records["normal"].astype(np.float64)


def _looks_like_text(data: bytes) -> bool:
    head = data[:512].lstrip()
    return head.startswith(b"solid") and b"facet" in data[:4096]


def _binary_size_consistent(data: bytes) -> bool:
    if len(data) < 84:
        return False
    (count,) = struct.unpack_from("<I", data, 80)
    return len(data) == 84 + 50 * count


def load_stl_bytes(data: bytes, options: CleaningOptions = CleaningOptions(),
                   source: str = "<bytes>") -> TriMesh:
    """Parse and clean STL content, auto-detecting binary vs text layout.

    Content that starts with ``solid`` but contains no facet syntax falls
    back to the binary reader when the record arithmetic matches; anything
    else is rejected as ambiguous rather than guessed at.
    """
    if len(data) < 15:
        raise MeshFormatError(f"{source}: too short to be STL content")

    if _looks_like_text(data):
        triangles, normals = _parse_text_stl(data)
    elif _binary_size_consistent(data):
        triangles, normals = _parse_binary_stl(data)
    elif data[:512].lstrip().startswith(b"solid"):
        raise MeshFormatError(
            f"{source}: header says text STL but no facet records found and "
            "binary record arithmetic does not match (ambiguous format)")
    else:
        raise MeshFormatError(f"{source}: not recognizable STL content")

    mesh = mesh_from_triangles(triangles, normals, options)
    logger.info("loaded %s: %d facets, %d vertices", source,
                len(mesh), len(mesh.vertices))
    return mesh


def load_stl(path, options: CleaningOptions = CleaningOptions()) -> TriMesh:
    """Load and clean an STL file; see ``load_stl_bytes`` for detection."""
    with open(path, "rb") as fh:
        data = fh.read()
    return load_stl_bytes(data, options, source=str(path))


# -- output --------------------------------------------------------------

def write_stl(mesh: TriMesh, path, binary: bool = False, name: str = "diecam") -> None:
    """Write the mesh as STL.

    Text output keeps full float64 precision (%.17g) so a write/read cycle
    is exact; binary output follows the 32-bit format definition.
    """
    tri = mesh.vertices[mesh.facets]
    if binary:
        records = np.zeros(len(tri), dtype=_BINARY_RECORD)
        records["normal"] = mesh.facet_normals.astype(np.float32)
        records["verts"] = tri.astype(np.float32)
        with open(path, "wb") as fh:
            fh.write(b"\x00" * 80)
            fh.write(struct.pack("<I", len(tri)))
            fh.write(records.tobytes())
        return
    lines = [f"solid {name}"]
    for n, t in zip(mesh.facet_normals, tri):
        lines.append(f"  facet normal {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}")
        lines.append("    outer loop")
        for v in t:
            lines.append(f"      vertex {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    lines.append("")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))


def export_colored_mesh(mesh: TriMesh, facet_scalars, scale: str = "rainbow") -> str:
    """Render the mesh to a text PLY with one RGB color per face.

    Scalars must lie in [0, 1]; NaN marks a facet as out of scale and paints
    it the documented neutral gray. Output is byte-deterministic for
    identical inputs.
    """
    scalars = np.asarray(facet_scalars, dtype=np.float64)
    if scalars.shape != (len(mesh),):
        raise ValueError(
            f"expected {len(mesh)} facet scalars, got shape {scalars.shape}")
    finite = scalars[np.isfinite(scalars)]
    if finite.size and (finite.min() < -1e-9 or finite.max() > 1.0 + 1e-9):
        raise ValueError("facet scalars must lie in [0, 1]")
    colors = scalar_to_rgb(scalars, scale)
    return mesh_to_ply(mesh, colors)


def mesh_to_ply(mesh: TriMesh, face_colors: np.ndarray) -> str:
    """Assemble a text PLY document with uchar RGB per face."""
    out = [
        "ply",
        "format ascii 1.0",
        "comment diecam colored mesh",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {len(mesh.facets)}",
        "property list uchar int vertex_indices",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for v in mesh.vertices:
        out.append(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for f, c in zip(mesh.facets, face_colors):
        out.append(f"3 {f[0]} {f[1]} {f[2]} {c[0]} {c[1]} {c[2]}")
    out.append("")
    return "\n".join(out)


GRAY = OUT_OF_RANGE
