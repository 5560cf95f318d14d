"""Parametric test meshes: analytic surfaces and a synthetic die benchmark.

Everything here is deterministic. Generators emit triangle soups with an
expected-normal hint per facet; mesh cleaning flips any triangle whose
winding disagrees, so orientation is consistent by construction.

The synthetic die is a circular die block: flat parting plane, pocket with
drafted walls (sharp crease into a flat bottom, filleted rim into the
parting plane) and a central dome protrusion blended into the bottom. The
default parameters land near 30k facets.
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

import numpy as np

from .mesh import CleaningOptions, TriMesh, mesh_from_triangles, write_stl


def _mesh(triangles: np.ndarray, normals: np.ndarray | None = None) -> TriMesh:
    return mesh_from_triangles(triangles, normals, CleaningOptions())


def _quads_to_triangles(p00, p10, p11, p01):
    """Split quad grids (arrays of matching shape) into two triangle fans."""
    t1 = np.stack([p00, p10, p11], axis=1)
    t2 = np.stack([p00, p11, p01], axis=1)
    return np.concatenate([t1, t2], axis=0)


def plane_patch(width: float = 80.0, depth: float = 40.0, nx: int = 20,
                ny: int = 10, z: float = 0.0) -> TriMesh:
    """Horizontal rectangular patch at height z, normals up."""
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, depth, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    grid = np.stack([gx, gy, np.full_like(gx, z)], axis=-1)
    p00 = grid[:-1, :-1].reshape(-1, 3)
    p10 = grid[1:, :-1].reshape(-1, 3)
    p11 = grid[1:, 1:].reshape(-1, 3)
    p01 = grid[:-1, 1:].reshape(-1, 3)
    tris = _quads_to_triangles(p00, p10, p11, p01)
    normals = np.tile([0.0, 0.0, 1.0], (len(tris), 1))
    return _mesh(tris, normals)


def ramp_patch(slope_deg: float, azimuth_deg: float, length: float = 60.0,
               width: float = 40.0, nu: int = 24, nv: int = 16) -> TriMesh:
    """Planar ramp ascending along the given azimuth at the given slope."""
    a = math.radians(slope_deg)
    phi = math.radians(azimuth_deg)
    along = np.array([math.cos(phi) * math.cos(a),
                      math.sin(phi) * math.cos(a),
                      math.sin(a)])
    across = np.array([-math.sin(phi), math.cos(phi), 0.0])
    us = np.linspace(0.0, length, nu + 1)
    for_grid = us[:, None, None] * along[None, None, :] \
        + np.linspace(0.0, width, nv + 1)[None, :, None] * across[None, None, :]
    p00 = for_grid[:-1, :-1].reshape(-1, 3)
    p10 = for_grid[1:, :-1].reshape(-1, 3)
    p11 = for_grid[1:, 1:].reshape(-1, 3)
    p01 = for_grid[:-1, 1:].reshape(-1, 3)
    tris = _quads_to_triangles(p00, p10, p11, p01)
    normal = np.array([-math.sin(a) * math.cos(phi),
                       -math.sin(a) * math.sin(phi),
                       math.cos(a)])
    normals = np.tile(normal, (len(tris), 1))
    return _mesh(tris, normals)


def _revolve(profile: np.ndarray,
             segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Revolve an (r, z) polyline a full turn about the z axis.

    Returns (triangles, expected_normals). The expected 2D surface normal of
    a profile segment (dr, dz) is (-dz, dr) normalized, which points to the
    void side for profiles walked from the axis outward without undercuts.
    """
    prof = np.asarray(profile, dtype=np.float64)
    phis = np.linspace(0.0, 2.0 * math.pi, segments + 1)[:-1]
    nxt = np.roll(np.arange(segments), -1)
    half_step = math.pi / segments
    cos_p, sin_p = np.cos(phis), np.sin(phis)

    def ring(i: int) -> np.ndarray:
        r, z = prof[i]
        return np.stack([r * cos_p, r * sin_p, np.full_like(cos_p, z)], axis=1)

    tris = []
    normals = []
    for i in range(len(prof) - 1):
        a, b = ring(i), ring(i + 1)
        dr, dz = prof[i + 1] - prof[i]
        n2 = np.array([-dz, dr])
        norm = np.linalg.norm(n2)
        if norm <= 0.0:
            continue
        n2 /= norm
        a2, b2 = a[nxt], b[nxt]
        tris.append(np.stack([a, b, b2], axis=1))
        tris.append(np.stack([a, b2, a2], axis=1))
        mid_phi = phis + half_step
        n3 = np.stack([n2[0] * np.cos(mid_phi),
                       n2[0] * np.sin(mid_phi),
                       np.full_like(mid_phi, n2[1])], axis=1)
        normals.append(n3)
        normals.append(n3)
    triangles = np.concatenate(tris, axis=0)
    expected = np.concatenate(normals, axis=0)
    return triangles, expected


def revolve_profile(profile, segments: int) -> TriMesh:
    tris, normals = _revolve(np.asarray(profile, dtype=np.float64), segments)
    return _mesh(tris, normals)


def cylinder_wall(radius: float = 30.0, height: float = 40.0,
                  segments: int = 120, rings: int = 10) -> TriMesh:
    """Open vertical cylinder wall, normals outward (pure draft surface)."""
    zs = np.linspace(0.0, height, rings + 1)
    profile = np.stack([np.full_like(zs, radius), zs], axis=1)
    # walked upward: (dr, dz) = (0, +); (-dz, dr) points inward, so flip
    tris, normals = _revolve(profile, segments)
    return _mesh(tris, -normals)


def hemisphere(radius: float = 30.0, polar_step_deg: float = 1.0,
               segments: int = 120) -> TriMesh:
    """Upper hemisphere, normals outward, apex at +z."""
    thetas = np.deg2rad(np.arange(0.0, 90.0 + polar_step_deg / 2.0,
                                  polar_step_deg))
    profile = np.stack([radius * np.sin(thetas), radius * np.cos(thetas)],
                       axis=1)
    return revolve_profile(profile, segments)


def cone_band(slope_deg: float = 45.0, r_inner: float = 20.0,
              r_outer: float = 40.0, segments: int = 180,
              rings: int = 12, z_inner: float = 30.0) -> TriMesh:
    """Conical band descending outward at the given slope, normals up-out."""
    rs = np.linspace(r_inner, r_outer, rings + 1)
    zs = z_inner - (rs - r_inner) * math.tan(math.radians(slope_deg))
    return revolve_profile(np.stack([rs, zs], axis=1), segments)


def planar_fan(n: int = 6, radius: float = 10.0) -> TriMesh:
    """Open fan of n triangles sharing the origin (n - 1 interior edges)."""
    angles = np.linspace(0.0, math.pi, n + 1)
    rim = np.stack([radius * np.cos(angles), radius * np.sin(angles),
                    np.zeros_like(angles)], axis=1)
    tris = np.stack([
        np.zeros((n, 3)),
        rim[:-1],
        rim[1:],
    ], axis=1)
    return _mesh(tris, np.tile([0.0, 0.0, 1.0], (n, 1)))


def tetrahedron(scale: float = 10.0) -> TriMesh:
    """Closed tetrahedron, outward normals (each facet has 3 neighbors)."""
    v = scale * np.array([
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ])
    faces = [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)]
    tris = np.array([[v[a], v[b], v[c]] for a, b, c in faces])
    center = v.mean(axis=0)
    normals = []
    for a, b, c in faces:
        n = np.cross(v[b] - v[a], v[c] - v[a])
        if n @ (v[[a, b, c]].mean(axis=0) - center) < 0:
            n = -n
        normals.append(n)
    return _mesh(tris, np.array(normals))


def unit_cube(scale: float = 10.0) -> TriMesh:
    """Closed axis-aligned cube with outward normals."""
    lo, hi = 0.0, scale
    corners = np.array([[x, y, z] for x in (lo, hi)
                        for y in (lo, hi) for z in (lo, hi)])
    quads = [
        ((0, 1, 3, 2), (-1, 0, 0)), ((4, 6, 7, 5), (1, 0, 0)),
        ((0, 4, 5, 1), (0, -1, 0)), ((2, 3, 7, 6), (0, 1, 0)),
        ((0, 2, 6, 4), (0, 0, -1)), ((1, 5, 7, 3), (0, 0, 1)),
    ]
    tris, normals = [], []
    for (a, b, c, d), n in quads:
        tris.append([corners[a], corners[b], corners[c]])
        tris.append([corners[a], corners[c], corners[d]])
        normals.extend([n, n])
    return _mesh(np.array(tris, dtype=np.float64),
                 np.array(normals, dtype=np.float64))


def random_soup(seed: int, count: int, scale: float = 50.0) -> TriMesh:
    """Random triangle soup; degenerate slivers are cleaned away."""
    rng = np.random.default_rng(seed)
    tris = rng.uniform(-scale, scale, size=(count, 3, 3))
    return _mesh(tris, None)


# -- synthetic die benchmark -------------------------------------------------

@dataclass(frozen=True)
class DieParams:
    """Synthetic die geometry; defaults tessellate to roughly 30k facets."""

    outer_radius: float = 75.0
    parting_z: float = 40.0
    floor_z: float = 10.0
    wall_base_radius: float = 42.0
    draft_deg: float = 5.0
    rim_fillet: float = 2.0
    crest_sphere_radius: float = 15.0
    crest_apex_z: float = 35.0
    cone_slope_deg: float = 60.0
    base_fillet: float = 2.0
    segments: int = 84
    cap_step_deg: float = 2.0
    cone_step: float = 1.0
    base_fillet_step_deg: float = 5.0
    floor_step: float = 0.8
    wall_step: float = 0.8
    rim_step_deg: float = 3.0
    parting_step: float = 0.95


def _arc(center: np.ndarray, radius: float, a0: float, a1: float,
         step_deg: float) -> np.ndarray:
    count = max(2, int(math.ceil(abs(a1 - a0) / math.radians(step_deg))) + 1)
    angs = np.linspace(a0, a1, count)
    return np.stack([center[0] + radius * np.cos(angs),
                     center[1] + radius * np.sin(angs)], axis=1)


def _line(p0: np.ndarray, p1: np.ndarray, step: float) -> np.ndarray:
    length = float(np.linalg.norm(p1 - p0))
    count = max(2, int(math.ceil(length / step)) + 1)
    t = np.linspace(0.0, 1.0, count)
    return p0[None, :] + t[:, None] * (p1 - p0)[None, :]


def die_profile(p: DieParams = DieParams()) -> np.ndarray:
    """(r, z) polyline of the die surface, walked from the axis outward."""
    alpha = math.radians(p.cone_slope_deg)
    delta = math.radians(p.draft_deg)

    # protrusion cap: sphere about (0, apex - R), polar 0 .. cone slope
    cap_center = np.array([0.0, p.crest_apex_z - p.crest_sphere_radius])
    thetas = np.deg2rad(np.arange(0.0, p.cone_slope_deg + p.cap_step_deg / 2,
                                  p.cap_step_deg))
    cap = np.stack([
        p.crest_sphere_radius * np.sin(thetas),
        cap_center[1] + p.crest_sphere_radius * np.cos(thetas),
    ], axis=1)
    edge = cap[-1]

    # cone flank down to the base fillet tangency
    fillet_cz = p.floor_z + p.base_fillet
    tangent_z = fillet_cz - p.base_fillet * math.cos(alpha)
    t = (edge[1] - tangent_z) / math.sin(alpha)
    cone_end = np.array([edge[0] + t * math.cos(alpha), tangent_z])
    cone = _line(edge, cone_end, p.cone_step)

    # concave base fillet, tangent to cone and floor
    fillet_c = np.array([cone_end[0] + p.base_fillet * math.sin(alpha),
                         fillet_cz])
    a0 = math.atan2(cone_end[1] - fillet_c[1], cone_end[0] - fillet_c[0])
    fillet = _arc(fillet_c, p.base_fillet, a0, -math.pi / 2.0,
                  p.base_fillet_step_deg)

    # flat floor out to the sharp wall crease
    floor_start = np.array([fillet_c[0], p.floor_z])
    floor_end = np.array([p.wall_base_radius, p.floor_z])
    floor = _line(floor_start, floor_end, p.floor_step)

    # drafted wall up to the rim fillet tangency
    rim_cz = p.parting_z - p.rim_fillet
    wall_top_z = rim_cz + p.rim_fillet * math.sin(delta)
    s = (wall_top_z - p.floor_z) / math.cos(delta)
    wall_top = np.array([p.wall_base_radius + s * math.sin(delta), wall_top_z])
    wall = _line(floor_end, wall_top, p.wall_step)

    # convex rim fillet, tangent to wall and parting plane
    rim_c = np.array([wall_top[0] + p.rim_fillet * math.cos(delta), rim_cz])
    a0 = math.atan2(wall_top[1] - rim_c[1], wall_top[0] - rim_c[0])
    rim = _arc(rim_c, p.rim_fillet, a0, math.pi / 2.0, p.rim_step_deg)

    # parting plane annulus
    parting = _line(np.array([rim_c[0], p.parting_z]),
                    np.array([p.outer_radius, p.parting_z]), p.parting_step)

    parts = [cap, cone[1:], fillet[1:], floor[1:], wall[1:], rim[1:],
             parting[1:]]
    return np.concatenate(parts, axis=0)


def synthetic_die(params: DieParams = DieParams()) -> TriMesh:
    """The benchmark die mesh (pocket, drafted flank, dome protrusion)."""
    return revolve_profile(die_profile(params), params.segments)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m diecam.meshgen",
        description="Write parametric test meshes as STL files.")
    parser.add_argument("shape", choices=[
        "die", "plane", "ramp", "cylinder", "hemisphere", "cone", "cube"])
    parser.add_argument("output")
    parser.add_argument("--binary", action="store_true",
                        help="write 32-bit binary STL instead of text")
    parser.add_argument("--segments", type=int, default=None)
    args = parser.parse_args(argv)
    builders = {
        "die": lambda: synthetic_die(
            DieParams(segments=args.segments) if args.segments else DieParams()),
        "plane": plane_patch,
        "ramp": lambda: ramp_patch(30.0, 30.0),
        "cylinder": cylinder_wall,
        "hemisphere": hemisphere,
        "cone": cone_band,
        "cube": unit_cube,
    }
    mesh = builders[args.shape]()
    write_stl(mesh, args.output, binary=args.binary)
    print(f"{args.output}: {len(mesh)} facets")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
