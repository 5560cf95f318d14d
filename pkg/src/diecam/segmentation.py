"""Feature segmentation: region growing, continuity grouping, topology.

Elementary regions are edge-connected runs of facets sharing one contact
class; undercut facets never join a region. Small regions dissolve into the
neighbor they share the most boundary with. Grouping then merges adjacent
regions whose continuity verdicts are compatible, re-checking the verdict on
every union and rolling back merges that break it.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import OverrideError
from .indicators import (
    CLASS_UNDERCUT,
    KIND_ORIENTED,
    KIND_ZLEVEL,
    ContinuityClass,
    ContinuityParams,
    ContinuityProfile,
    ToolAxis,
    classify_continuity,
)
from .mesh import TriMesh

logger = logging.getLogger(__name__)

DEFAULT_MIN_REGION_AREA_FRAC = 0.01
DEFAULT_EPSILON_CONVEXITY = 1e-6
CONTAINMENT_EPS_MM = 1e-3

RELATION_CONCAVE = "contact_concave"
RELATION_CONVEX = "contact_convex"
RELATION_TANGENT = "contact_tangent"
RELATION_PROXIMITY = "proximity"

CONVEXITY_CONCAVE = "concave"
CONVEXITY_CONVEX = "convex"
CONVEXITY_TANGENT = "tangent"


@dataclass(frozen=True)
class GeometricFeature:
    """A machinable region of uniform contact class."""

    id: int
    facet_ids: tuple[int, ...]
    contact_class: str
    continuity: ContinuityClass
    area: float
    z_range: tuple[float, float]
    depth_from_top: float
    principal_direction: float
    mean_z: float
    centroid: tuple[float, float, float]
    elementary_ids: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.contact_class,
            "continuity": self.continuity.to_dict(),
            "facet_ids": list(self.facet_ids),
            "area": self.area,
            "z_range": list(self.z_range),
            "depth_from_top": self.depth_from_top,
            "principal_direction": self.principal_direction,
            "mean_z": self.mean_z,
            "centroid": list(self.centroid),
        }


@dataclass(frozen=True)
class TopologicalRelation:
    feature_a: int
    feature_b: int
    kind: str
    shared_edge_length: float = 0.0
    min_distance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "feature_a": self.feature_a,
            "feature_b": self.feature_b,
            "kind": self.kind,
            "shared_edge_length": self.shared_edge_length,
            "min_distance": self.min_distance,
        }


@dataclass(frozen=True)
class ContainmentNote:
    """Waiver: the contained feature never rises above the container."""

    container_id: int
    contained_id: int
    note: str

    def to_dict(self) -> dict:
        return {
            "container_id": self.container_id,
            "contained_id": self.contained_id,
            "note": self.note,
        }


@dataclass
class SegmentationResult:
    features: list[GeometricFeature]
    relations: list[TopologicalRelation]
    waivers: list[ContainmentNote]
    facet_feature: np.ndarray  # feature id per facet, -1 for undercut
    elementary_regions: list[tuple[int, ...]]


# -- region growing --------------------------------------------------------

def grow_elementary_features(mesh: TriMesh, indicators,
                             min_region_area_frac: float = DEFAULT_MIN_REGION_AREA_FRAC,
                             ) -> list[tuple[tuple[int, ...], str]]:
    """Partition non-undercut facets into same-class connected regions.

    Returns (facet_ids, contact_class) pairs ordered by smallest member
    facet. Regions below ``min_region_area_frac`` of the total mesh area are
    absorbed, smallest first, into the adjacent region sharing the longest
    boundary; isolated small regions survive.
    """
    classes = indicators.contact_class
    if classes is None:
        raise ValueError("contact classes must be assigned before growing")
    n = len(mesh)
    assignment = np.full(n, -1, dtype=np.int64)
    regions: list[list[int]] = []
    for seed in range(n):
        if assignment[seed] >= 0 or classes[seed] == CLASS_UNDERCUT:
            continue
        region_id = len(regions)
        cls = classes[seed]
        members = []
        queue = deque([seed])
        assignment[seed] = region_id
        while queue:
            i = queue.popleft()
            members.append(i)
            for j in mesh.neighbors(i):
                if assignment[j] < 0 and classes[j] == cls:
                    assignment[j] = region_id
                    queue.append(j)
        regions.append(members)

    region_class = [str(classes[r[0]]) for r in regions]
    region_area = [float(mesh.facet_areas[r].sum()) for r in regions]
    threshold = min_region_area_frac * float(mesh.facet_areas.sum())

    # boundary length between region pairs, for absorption choices
    boundary: dict[tuple[int, int], float] = {}
    for (i, j), record in mesh.edge_adjacency.items():
        ra, rb = int(assignment[i]), int(assignment[j])
        if ra < 0 or rb < 0 or ra == rb:
            continue
        key = (ra, rb) if ra < rb else (rb, ra)
        boundary[key] = boundary.get(key, 0.0) + record.length

    alive = [True] * len(regions)
    neigh_len: list[dict[int, float]] = [dict() for _ in regions]
    for (ra, rb), length in boundary.items():
        neigh_len[ra][rb] = length
        neigh_len[rb][ra] = length

    def smallest_absorbable() -> int | None:
        best = None
        for rid, ok in enumerate(alive):
            if not ok or region_area[rid] >= threshold or not neigh_len[rid]:
                continue
            if best is None or (region_area[rid], min(regions[rid])) < \
                    (region_area[best], min(regions[best])):
                best = rid
        return best

    while True:
        rid = smallest_absorbable()
        if rid is None:
            break
        target = max(neigh_len[rid].items(), key=lambda kv: (kv[1], -kv[0]))[0]
        regions[target].extend(regions[rid])
        region_area[target] += region_area[rid]
        alive[rid] = False
        for other, length in neigh_len[rid].items():
            if other == target:
                continue
            neigh_len[other].pop(rid, None)
            neigh_len[other][target] = neigh_len[other].get(target, 0.0) + length
            neigh_len[target][other] = neigh_len[target].get(other, 0.0) + length
        neigh_len[target].pop(rid, None)
        neigh_len[rid] = {}

    out = []
    for rid, ok in enumerate(alive):
        if ok:
            members = tuple(sorted(regions[rid]))
            out.append((members, region_class[rid]))
    out.sort(key=lambda rc: rc[0][0])
    return out


# -- feature assembly ------------------------------------------------------

def _axis_heights(mesh: TriMesh, axis_vec: np.ndarray, facet_ids) -> np.ndarray:
    verts = np.unique(mesh.facets[list(facet_ids)])
    return mesh.vertices[verts] @ axis_vec


def _principal_direction(mesh: TriMesh, axis: ToolAxis, facet_ids) -> float:
    """Azimuth (degrees, mod 180) of the region's longest planar extent."""
    ids = list(facet_ids)
    if len(ids) == 1:
        return 0.0
    u, v = axis.plane_basis()
    centroids = mesh.facet_centroids[ids]
    weights = mesh.facet_areas[ids]
    total = weights.sum()
    if total <= 0.0:
        return 0.0
    xy = np.stack([centroids @ u, centroids @ v], axis=1)
    mean = (weights[:, None] * xy).sum(axis=0) / total
    d = xy - mean
    cov = (weights[:, None, None] * d[:, :, None] * d[:, None, :]).sum(axis=0) / total
    if np.allclose(cov, 0.0, atol=1e-15):
        return 0.0
    evals, evecs = np.linalg.eigh(cov)
    main = evecs[:, int(np.argmax(evals))]
    angle = float(np.degrees(np.arctan2(main[1], main[0]))) % 180.0
    return angle


def make_feature(fid: int, facet_ids, contact_class: str, mesh: TriMesh,
                 profile: ContinuityProfile, params: ContinuityParams,
                 axis: ToolAxis, mesh_top: float,
                 elementary_ids=()) -> GeometricFeature:
    """Assemble a feature record with freshly computed descriptors."""
    ids = tuple(sorted(int(i) for i in facet_ids))
    axis_vec = axis.vector
    heights = _axis_heights(mesh, axis_vec, ids)
    z_lo, z_hi = float(heights.min()), float(heights.max())
    weights = mesh.facet_areas[list(ids)]
    area = float(weights.sum())
    centroids = mesh.facet_centroids[list(ids)]
    centroid = (weights[:, None] * centroids).sum(axis=0) / max(area, 1e-30)
    mean_z = float(centroid @ axis_vec)
    return GeometricFeature(
        id=fid,
        facet_ids=ids,
        contact_class=contact_class,
        continuity=classify_continuity(ids, profile, params),
        area=area,
        z_range=(z_lo, z_hi),
        depth_from_top=float(mesh_top - z_lo),
        principal_direction=_principal_direction(mesh, axis, ids),
        mean_z=mean_z,
        centroid=(float(centroid[0]), float(centroid[1]), float(centroid[2])),
        elementary_ids=tuple(elementary_ids),
    )


def _compatible(a: GeometricFeature, b: GeometricFeature,
                profile: ContinuityProfile, params: ContinuityParams) -> bool:
    if a.contact_class != b.contact_class:
        return False
    ca, cb = a.continuity, b.continuity
    if ca.kind != cb.kind:
        return False
    if ca.kind == KIND_ORIENTED:
        return ca.direction_deg == cb.direction_deg
    if ca.kind == KIND_ZLEVEL:
        mean_a, _ = profile.region_kappa_stats(a.facet_ids)
        mean_b, _ = profile.region_kappa_stats(b.facet_ids)
        return abs(mean_a - mean_b) <= params.epsilon_z
    return ca.kind in ("indifferent",)


def _merge_verdict_holds(merged: ContinuityClass, template: ContinuityClass) -> bool:
    if merged.kind != template.kind:
        return False
    if template.kind == KIND_ORIENTED:
        return merged.direction_deg == template.direction_deg
    return True


def group_by_continuity(mesh: TriMesh, features: list[GeometricFeature],
                        profile: ContinuityProfile, params: ContinuityParams,
                        axis: ToolAxis, mesh_top: float,
                        ) -> list[GeometricFeature]:
    """Merge adjacent same-class features with compatible continuity.

    Each candidate union is re-classified; the merge only commits when the
    union still carries the shared verdict (same kind, same direction for
    oriented regions). Runs to a fixpoint in deterministic order.
    """
    feats = {f.id: f for f in features}
    facet_owner = {}
    for f in features:
        for i in f.facet_ids:
            facet_owner[i] = f.id

    def adjacent_pairs() -> list[tuple[int, int]]:
        pairs = set()
        for (i, j) in mesh.edge_adjacency:
            fa = facet_owner.get(i, -1)
            fb = facet_owner.get(j, -1)
            if fa < 0 or fb < 0 or fa == fb:
                continue
            pairs.add((fa, fb) if fa < fb else (fb, fa))
        return sorted(pairs, key=lambda p: (feats[p[0]].facet_ids[0],
                                            feats[p[1]].facet_ids[0]))

    changed = True
    while changed:
        changed = False
        for aid, bid in adjacent_pairs():
            a, b = feats[aid], feats[bid]
            if not _compatible(a, b, profile, params):
                continue
            union = a.facet_ids + b.facet_ids
            verdict = classify_continuity(union, profile, params)
            if not _merge_verdict_holds(verdict, a.continuity):
                continue  # rollback: keep the parts
            merged = make_feature(
                min(aid, bid), union, a.contact_class, mesh, profile, params,
                axis, mesh_top,
                elementary_ids=a.elementary_ids + b.elementary_ids)
            feats.pop(bid if merged.id == aid else aid)
            feats[merged.id] = merged
            for i in merged.facet_ids:
                facet_owner[i] = merged.id
            changed = True
            break
    return [feats[k] for k in sorted(feats, key=lambda k: feats[k].facet_ids[0])]


# -- convexity and relations ------------------------------------------------

def edge_convexity(mesh: TriMesh, i: int, j: int,
                   eps: float = DEFAULT_EPSILON_CONVEXITY) -> str:
    """Classify the shared edge of facets i and j as concave/convex/tangent.

    Uses the lower-index facet as reference so the result is argument-order
    independent: with reference normal n and centroids c_ref, c_other, the
    edge is convex when n . (c_other - c_ref) < -eps, concave when > eps.
    """
    a, b = (i, j) if i < j else (j, i)
    n = mesh.facet_normals[a]
    d = float(n @ (mesh.facet_centroids[b] - mesh.facet_centroids[a]))
    if d > eps:
        return CONVEXITY_CONCAVE
    if d < -eps:
        return CONVEXITY_CONVEX
    return CONVEXITY_TANGENT


def feature_relations(mesh: TriMesh, features: list[GeometricFeature],
                      proximity_distance: float,
                      eps_convexity: float = DEFAULT_EPSILON_CONVEXITY,
                      ) -> list[TopologicalRelation]:
    """Contact relations from shared boundaries plus proximity relations.

    Contact kind is the edge-length-weighted majority convexity of the
    shared boundary (ties fall to tangent). Non-touching pairs closer than
    ``proximity_distance`` (minimum vertex distance, KD-tree accelerated)
    become proximity relations.
    """
    owner = np.full(len(mesh), -1, dtype=np.int64)
    for f in features:
        owner[list(f.facet_ids)] = f.id

    votes: dict[tuple[int, int], dict[str, float]] = {}
    for (i, j), record in mesh.edge_adjacency.items():
        fa, fb = int(owner[i]), int(owner[j])
        if fa < 0 or fb < 0 or fa == fb:
            continue
        key = (fa, fb) if fa < fb else (fb, fa)
        kind = edge_convexity(mesh, i, j, eps_convexity)
        bucket = votes.setdefault(key, {CONVEXITY_CONCAVE: 0.0,
                                        CONVEXITY_CONVEX: 0.0,
                                        CONVEXITY_TANGENT: 0.0})
        bucket[kind] += record.length

    relations: list[TopologicalRelation] = []
    for (fa, fb) in sorted(votes):
        bucket = votes[(fa, fb)]
        total = sum(bucket.values())
        concave, convex = bucket[CONVEXITY_CONCAVE], bucket[CONVEXITY_CONVEX]
        if concave > convex and concave > bucket[CONVEXITY_TANGENT]:
            kind = RELATION_CONCAVE
        elif convex > concave and convex > bucket[CONVEXITY_TANGENT]:
            kind = RELATION_CONVEX
        else:
            kind = RELATION_TANGENT
        relations.append(TopologicalRelation(
            fa, fb, kind, shared_edge_length=float(total), min_distance=0.0))

    touching = {(r.feature_a, r.feature_b) for r in relations}
    trees = {}
    points = {}
    for f in features:
        verts = np.unique(mesh.facets[list(f.facet_ids)])
        pts = mesh.vertices[verts]
        points[f.id] = pts
        trees[f.id] = cKDTree(pts)
    ordered = sorted(f.id for f in features)
    for ia, fa in enumerate(ordered):
        for fb in ordered[ia + 1:]:
            if (fa, fb) in touching:
                continue
            dists, _ = trees[fb].query(points[fa], k=1)
            dmin = float(np.min(dists))
            if dmin <= proximity_distance:
                relations.append(TopologicalRelation(
                    fa, fb, RELATION_PROXIMITY,
                    shared_edge_length=0.0, min_distance=dmin))
    relations.sort(key=lambda r: (r.feature_a, r.feature_b))
    return relations


def protrusion_containment(features: list[GeometricFeature],
                           relations: list[TopologicalRelation],
                           eps: float = CONTAINMENT_EPS_MM,
                           ) -> list[ContainmentNote]:
    """Waivers for features that never rise above a flat container.

    For every flat feature a and any other feature b with
    b.z_max <= a.z_min + eps, record that machining a may ignore b.
    ``relations`` is accepted for signature stability; containment is a
    height statement and holds regardless of adjacency.
    """
    del relations
    notes = []
    for a in features:
        if a.contact_class != "flat":
            continue
        for b in features:
            if b.id == a.id:
                continue
            if b.z_range[1] <= a.z_range[0] + eps:
                notes.append(ContainmentNote(
                    container_id=a.id,
                    contained_id=b.id,
                    note=(f"feature {b.id} does not exceed feature {a.id}; "
                          f"approaches over feature {a.id} may ignore it"),
                ))
    notes.sort(key=lambda n: (n.container_id, n.contained_id))
    return notes


# -- ring subdivision (optional) --------------------------------------------

def split_rings_by_kappa(mesh: TriMesh, feature: GeometricFeature,
                         profile: ContinuityProfile, params: ContinuityParams,
                         axis: ToolAxis, mesh_top: float,
                         ring_count: int = 3) -> list[GeometricFeature]:
    """Subdivide one feature into kappa-quantile rings (opt-in).

    Facets are bucketed by kappa quantile, then each bucket splits into its
    edge-connected components. Intended for transition bands around
    revolution features; never applied unless requested by config.
    """
    ids = np.array(feature.facet_ids)
    k = profile.kappa[ids]
    if ring_count < 2 or len(ids) < ring_count:
        return [feature]
    edges = np.quantile(k, np.linspace(0.0, 1.0, ring_count + 1))
    buckets = np.clip(np.searchsorted(edges, k, side="right") - 1, 0, ring_count - 1)
    members = set(int(i) for i in ids)
    bucket_of = {int(i): int(b) for i, b in zip(ids, buckets)}
    seen: set[int] = set()
    parts: list[list[int]] = []
    for start in sorted(members):
        if start in seen:
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            i = queue.popleft()
            comp.append(i)
            for j in mesh.neighbors(i):
                if j in members and j not in seen and bucket_of[j] == bucket_of[i]:
                    seen.add(j)
                    queue.append(j)
        parts.append(comp)
    if len(parts) <= 1:
        return [feature]
    return [
        make_feature(feature.id + idx, part, feature.contact_class, mesh,
                     profile, params, axis, mesh_top,
                     elementary_ids=feature.elementary_ids)
        for idx, part in enumerate(parts)
    ]


def apply_merge_override(mesh: TriMesh, features: list[GeometricFeature],
                         pair: tuple[int, int], profile: ContinuityProfile,
                         params: ContinuityParams, axis: ToolAxis,
                         mesh_top: float) -> list[GeometricFeature]:
    """Force-union two features (operator decision, no compatibility check)."""
    by_id = {f.id: f for f in features}
    a, b = pair
    if a not in by_id or b not in by_id or a == b:
        raise OverrideError(f"merge override references unknown features {pair}")
    fa, fb = by_id[a], by_id[b]
    if fa.contact_class != fb.contact_class:
        raise OverrideError(
            f"cannot merge features {a} and {b}: contact classes differ "
            f"({fa.contact_class} vs {fb.contact_class})")
    merged = make_feature(min(a, b), fa.facet_ids + fb.facet_ids,
                          fa.contact_class, mesh, profile, params, axis,
                          mesh_top,
                          elementary_ids=fa.elementary_ids + fb.elementary_ids)
    rest = [f for f in features if f.id not in (a, b)]
    return rest + [merged]


def renumber(features: list[GeometricFeature]) -> list[GeometricFeature]:
    """Deterministic ids: ascending by smallest member facet."""
    ordered = sorted(features, key=lambda f: f.facet_ids[0])
    out = []
    for new_id, f in enumerate(ordered):
        out.append(GeometricFeature(
            id=new_id, facet_ids=f.facet_ids, contact_class=f.contact_class,
            continuity=f.continuity, area=f.area, z_range=f.z_range,
            depth_from_top=f.depth_from_top,
            principal_direction=f.principal_direction, mean_z=f.mean_z,
            centroid=f.centroid, elementary_ids=f.elementary_ids))
    return out
