"""Pipeline orchestration: configuration, stage runners, JSON documents.

Every stage document embeds the configuration that produced it plus the
SHA-256 of the mesh geometry, so artifacts are self-describing and any two
runs over equal inputs serialize to byte-identical JSON (sorted keys,
two-space indent, trailing newline).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .association import (
    DEFAULT_CLEARANCE_MM,
    DEFAULT_JUNCTION_FACTOR,
    STRATEGY_PARALLEL_CURVE,
    STRATEGY_PARALLEL_PLANES,
    STRATEGY_ZLEVEL,
    TIP_TYPES,
    CuttingTool,
    MachiningFeature,
    MachiningStrategy,
    TechnologicalData,
    junction_check,
    make_machining_feature,
    select_strategy,
    select_tool,
    tool_library_from_json,
)
from .errors import ArtifactError, OverrideError, SchemaError
from .indicators import (
    DEFAULT_TAU_DRAFT,
    DEFAULT_TAU_FLAT,
    ContactMapConfig,
    ContinuityParams,
    ContinuityProfile,
    FacetIndicators,
    ToolAxis,
    classify_contact,
    compute_indicators,
    contact_map,
    continuity_residuals,
    default_directions,
)
from .mesh import TriMesh
from .planner import (
    PARKING_MARGIN_MM,
    build_sequence,
    order_process,
)
from .segmentation import (
    CONTAINMENT_EPS_MM,
    DEFAULT_EPSILON_CONVEXITY,
    DEFAULT_MIN_REGION_AREA_FRAC,
    RELATION_CONCAVE,
    RELATION_TANGENT,
    SegmentationResult,
    apply_merge_override,
    feature_relations,
    group_by_continuity,
    grow_elementary_features,
    make_feature,
    protrusion_containment,
    renumber,
    split_rings_by_kappa,
)

PLAN_SCHEMA_VERSION = 1


def canonical_json(document) -> str:
    """Serialize a document deterministically (stable keys, fixed layout)."""
    return json.dumps(document, sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def mesh_sha256(mesh: TriMesh) -> str:
    """Hash of the cleaned geometry (vertices then facet indices)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(mesh.facets, dtype=np.int64).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class FeatureOp:
    """One operator edit of the segmentation, applied in submission order.

    Feature ids in an op refer to the segmentation as published after the
    previous op (ids are renumbered after every step), which is exactly what
    an interactive client sees when it submits the next edit.
    """

    op: str                       # "merge" | "split"
    features: tuple[int, ...]     # merge: the pair; split: one target
    ring_count: int = 3

    def __post_init__(self):
        if self.op == "merge":
            if len(self.features) != 2 or len(set(self.features)) != 2:
                raise OverrideError(
                    f"merge op needs two distinct feature ids, got "
                    f"{list(self.features)}")
        elif self.op == "split":
            if len(self.features) != 1:
                raise OverrideError(
                    f"split op needs exactly one feature id, got "
                    f"{list(self.features)}")
            if self.ring_count < 2:
                raise OverrideError(
                    f"split ring_count must be >= 2, got {self.ring_count}")
        else:
            raise OverrideError(f"unknown feature op {self.op!r}")

    def to_dict(self) -> dict:
        doc = {"op": self.op, "features": list(self.features)}
        if self.op == "split":
            doc["ring_count"] = self.ring_count
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureOp":
        if not isinstance(doc, dict) or "op" not in doc:
            raise SchemaError("feature op must be an object with 'op'",
                              path="feature_ops")
        return cls(op=str(doc["op"]),
                   features=tuple(int(i) for i in doc.get("features", ())),
                   ring_count=int(doc.get("ring_count", 3)))


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob that affects analysis output, in one serializable place."""

    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    tau_draft: float = DEFAULT_TAU_DRAFT
    tau_flat: float = DEFAULT_TAU_FLAT
    directions: str = "0:90:10"
    epsilon_pp: float = 0.05
    coverage_min: float = 0.95
    epsilon_z: float = 0.05
    tau_zmin: float = 0.3
    min_region_area_frac: float = DEFAULT_MIN_REGION_AREA_FRAC
    proximity_distance: float | None = None
    epsilon_convexity: float = DEFAULT_EPSILON_CONVEXITY
    containment_eps: float = CONTAINMENT_EPS_MM
    clearance_mm: float = DEFAULT_CLEARANCE_MM
    junction_factor: float = DEFAULT_JUNCTION_FACTOR
    parking_margin_mm: float = PARKING_MARGIN_MM
    feature_ops: tuple[FeatureOp, ...] = ()
    tool_overrides: tuple[tuple[int, str], ...] = ()
    strategy_overrides: tuple[tuple[int, str, float | None], ...] = ()
    single_tool: str | None = None
    order_by: str = "tool"

    def __post_init__(self):
        axis = ToolAxis.from_vector(np.asarray(self.axis, dtype=np.float64))
        object.__setattr__(self, "axis",
                           tuple(float(c) for c in axis.vector))
        object.__setattr__(self, "feature_ops", tuple(self.feature_ops))
        if self.single_tool is not None and self.single_tool not in TIP_TYPES:
            raise OverrideError(
                f"unknown tip type {self.single_tool!r} for single_tool; "
                f"expected one of {list(TIP_TYPES)}")
        if self.order_by not in ("tool", "z"):
            raise OverrideError(
                f"unknown ordering policy {self.order_by!r}; expected "
                "'tool' or 'z'")

    @property
    def tool_axis(self) -> ToolAxis:
        return ToolAxis(self.axis)

    def map_config(self) -> ContactMapConfig:
        return ContactMapConfig(tau_draft=self.tau_draft,
                                tau_flat=self.tau_flat,
                                axis=self.tool_axis)

    def direction_list(self):
        return default_directions(self.tool_axis, self.directions)

    def continuity_params(self) -> ContinuityParams:
        return ContinuityParams(epsilon_pp=self.epsilon_pp,
                                coverage_min=self.coverage_min,
                                epsilon_z=self.epsilon_z,
                                tau_zmin=self.tau_zmin)

    def to_dict(self) -> dict:
        return {
            "axis": list(self.axis),
            "tau_draft": self.tau_draft,
            "tau_flat": self.tau_flat,
            "directions": self.directions,
            "epsilon_pp": self.epsilon_pp,
            "coverage_min": self.coverage_min,
            "epsilon_z": self.epsilon_z,
            "tau_zmin": self.tau_zmin,
            "min_region_area_frac": self.min_region_area_frac,
            "proximity_distance": self.proximity_distance,
            "epsilon_convexity": self.epsilon_convexity,
            "containment_eps": self.containment_eps,
            "clearance_mm": self.clearance_mm,
            "junction_factor": self.junction_factor,
            "parking_margin_mm": self.parking_margin_mm,
            "feature_ops": [op.to_dict() for op in self.feature_ops],
            "tool_overrides": {str(f): t for f, t in self.tool_overrides},
            "strategy_overrides": {
                str(f): {"feed_kind": k, "direction_deg": d}
                for f, k, d in self.strategy_overrides},
            "single_tool": self.single_tool,
            "order_by": self.order_by,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise SchemaError("config must be a JSON object", path="config")
        simple = {
            "tau_draft", "tau_flat", "directions", "epsilon_pp",
            "coverage_min", "epsilon_z", "tau_zmin", "min_region_area_frac",
            "proximity_distance", "epsilon_convexity", "containment_eps",
            "clearance_mm", "junction_factor", "parking_margin_mm",
            "single_tool", "order_by",
        }
        kwargs = {}
        for key, value in data.items():
            if key == "axis":
                kwargs["axis"] = tuple(float(c) for c in value)
            elif key == "feature_ops":
                kwargs["feature_ops"] = tuple(FeatureOp.from_dict(d)
                                              for d in value)
            elif key == "tool_overrides":
                kwargs["tool_overrides"] = tuple(
                    sorted((int(f), str(t)) for f, t in value.items()))
            elif key == "strategy_overrides":
                kwargs["strategy_overrides"] = tuple(sorted(
                    (int(f), str(v["feed_kind"]),
                     None if v.get("direction_deg") is None
                     else float(v["direction_deg"]))
                    for f, v in value.items()))
            elif key in simple:
                kwargs[key] = value
            else:
                raise SchemaError(f"unknown config field {key!r}",
                                  path=f"config.{key}")
        return cls(**kwargs)

    def fingerprint(self, stage: str, extra: dict | None = None) -> str:
        doc = {"stage": stage, "config": self.to_dict()}
        if extra:
            doc["extra"] = extra
        return _sha256_text(canonical_json(doc))


def default_tool_library() -> list[CuttingTool]:
    """Stock library: one ball nose and one corner end mill."""
    text = resources.files("diecam.data").joinpath(
        "tool_library.json").read_text(encoding="utf-8")
    return tool_library_from_json(text)


def default_technological_data() -> TechnologicalData:
    return TechnologicalData(material="X38CrMoV5", roughness_rt_um=16.0,
                             form_tolerance_mm=0.1)


def default_compatibility() -> dict[str, list[str]]:
    """Part material to tool cutting material compatibility."""
    return {
        "X38CrMoV5": ["carbide", "coated_carbide"],
        "40CrMnMo8": ["carbide", "coated_carbide", "hss_cobalt"],
    }


def largest_tool_diameter(tools) -> float:
    return max(t.diameter_mm for t in tools) if tools else 10.0


# -- stage runners -----------------------------------------------------------

def run_segmentation(mesh: TriMesh, config: PipelineConfig,
                     indicators: FacetIndicators,
                     profile: ContinuityProfile,
                     proximity_distance: float) -> SegmentationResult:
    """Full geometric segmentation with operator edits applied in order."""
    params = config.continuity_params()
    axis = config.tool_axis
    mesh_top = mesh.z_max
    regions = grow_elementary_features(
        mesh, indicators, min_region_area_frac=config.min_region_area_frac)
    features = [
        make_feature(fid, facet_ids, contact_class, mesh, profile, params,
                     axis, mesh_top, elementary_ids=(fid,))
        for fid, (facet_ids, contact_class) in enumerate(regions)
    ]
    features = group_by_continuity(mesh, features, profile, params, axis,
                                   mesh_top)
    features = renumber(features)
    for op in config.feature_ops:
        if op.op == "split":
            target = op.features[0]
            matches = [f for f in features if f.id == target]
            if not matches:
                raise OverrideError(f"cannot split unknown feature {target}")
            pieces = split_rings_by_kappa(mesh, matches[0], profile, params,
                                          axis, mesh_top,
                                          ring_count=op.ring_count)
            features = [f for f in features if f.id != target] + list(pieces)
        else:
            features = apply_merge_override(mesh, features,
                                            (op.features[0], op.features[1]),
                                            profile, params, axis, mesh_top)
        features = renumber(features)

    facet_feature = np.full(len(mesh.facets), -1, dtype=np.int64)
    for feat in features:
        facet_feature[list(feat.facet_ids)] = feat.id
    relations = feature_relations(
        mesh, features, proximity_distance=proximity_distance,
        eps_convexity=config.epsilon_convexity)
    waivers = protrusion_containment(features, relations,
                                     eps=config.containment_eps)
    return SegmentationResult(
        features=features, relations=relations, waivers=waivers,
        facet_feature=facet_feature,
        elementary_regions=[ids for ids, _ in regions])


def run_association(mesh: TriMesh, seg: SegmentationResult,
                    config: PipelineConfig, tools,
                    tech: TechnologicalData, compatibility=None):
    """Bind a tool and a strategy to every feature.

    Returns (bindings, junction_reports, warnings); bindings is a list of
    (MachiningFeature, CuttingTool, MachiningStrategy) in feature id order.
    Failed junction checks surface as warnings, never as silent tool swaps:
    unifying tools is the operator's call, via a tool override.
    """
    warnings: list[str] = []
    mesh_top = mesh.z_max
    tool_over = dict(config.tool_overrides)
    strat_over = {f: (kind, direction)
                  for f, kind, direction in config.strategy_overrides}
    tool_by_id = {tool.id: tool for tool in tools}
    for fid, tool_id in tool_over.items():
        if tool_id not in tool_by_id:
            raise OverrideError(
                f"tool override for feature {fid} references unknown tool "
                f"{tool_id!r}")
    known = {f.id for f in seg.features}
    for fid in sorted(set(tool_over) | set(strat_over)):
        if fid not in known:
            raise OverrideError(
                f"override references unknown feature {fid}")

    bindings = []
    for feature in seg.features:
        mf = make_machining_feature(feature, tech, seg.relations,
                                    seg.waivers)
        if feature.id in tool_over:
            tool = tool_by_id[tool_over[feature.id]]
            depth = mesh_top - feature.z_range[0]
            if tool.tool_length_mm < depth or \
                    tool.overall_length_mm < depth + config.clearance_mm:
                warnings.append(
                    f"tool override {tool.id} on feature {feature.id} fails "
                    f"the accessibility check at depth {depth:g} mm")
        else:
            tool = select_tool(mf, tools, mesh_top,
                               clearance_mm=config.clearance_mm,
                               compatibility=compatibility,
                               tip_override=config.single_tool)
        strategy = select_strategy(mf, tool)
        if config.single_tool is not None:
            # contingency mode: hold every feature to one-level contours
            strategy = MachiningStrategy(
                feed_kind=STRATEGY_ZLEVEL, direction_deg=None,
                sweeping_mode=strategy.sweeping_mode,
                cutting_mode=strategy.cutting_mode,
                pitch_mm=strategy.pitch_mm,
                machining_tolerance_mm=strategy.machining_tolerance_mm)
        if feature.id in strat_over:
            kind, direction = strat_over[feature.id]
            if kind not in (STRATEGY_PARALLEL_PLANES, STRATEGY_ZLEVEL,
                            STRATEGY_PARALLEL_CURVE):
                raise OverrideError(
                    f"unknown strategy {kind!r} for feature {feature.id}")
            if kind != STRATEGY_ZLEVEL and direction is None:
                raise OverrideError(
                    f"strategy override for feature {feature.id} needs a "
                    "feed direction")
            strategy = MachiningStrategy(
                feed_kind=kind,
                direction_deg=None if kind == STRATEGY_ZLEVEL else direction,
                sweeping_mode=strategy.sweeping_mode,
                cutting_mode=strategy.cutting_mode,
                pitch_mm=strategy.pitch_mm,
                machining_tolerance_mm=strategy.machining_tolerance_mm)
        bindings.append((mf, tool, strategy))

    junctions = _junction_reports(bindings, seg, config.junction_factor)
    for report in junctions:
        if report["status"] == "degrade":
            warnings.append(report["reason"])
    return bindings, junctions, warnings


def _junction_reports(bindings, seg: SegmentationResult,
                      junction_factor: float) -> list[dict]:
    by_id = {mf.id: (mf, tool) for mf, tool, _ in bindings}
    reports = []
    for rel in seg.relations:
        if rel.kind not in (RELATION_CONCAVE, RELATION_TANGENT):
            continue
        if rel.feature_a not in by_id or rel.feature_b not in by_id:
            continue
        mf_a, tool_a = by_id[rel.feature_a]
        mf_b, tool_b = by_id[rel.feature_b]
        if tool_a.id == tool_b.id:
            continue
        result = junction_check(mf_a, mf_b, tool_a, tool_b,
                                junction_factor=junction_factor)
        reports.append({"feature_a": rel.feature_a,
                        "feature_b": rel.feature_b,
                        **result.to_dict()})
    return reports


@dataclass
class AnalysisStages:
    """Lazy per-mesh analysis state shared by the CLI and the service."""

    mesh: TriMesh
    config: PipelineConfig
    tools: list[CuttingTool] = field(default_factory=default_tool_library)
    tech: TechnologicalData = field(
        default_factory=default_technological_data)
    compatibility: dict | None = None

    def __post_init__(self):
        # resolve the proximity default here so every published document
        # records the effective distance instead of null
        if self.config.proximity_distance is None:
            self.config = replace(
                self.config,
                proximity_distance=largest_tool_diameter(self.tools))
        self._indicators = None
        self._profile = None
        self._segmentation = None

    def indicators(self) -> FacetIndicators:
        if self._indicators is None:
            ind = compute_indicators(self.mesh, self.config.tool_axis)
            classify_contact(ind, self.config.map_config())
            self._indicators = ind
        return self._indicators

    def profile(self) -> ContinuityProfile:
        if self._profile is None:
            self._profile = continuity_residuals(
                self.mesh, self.indicators(), self.config.direction_list())
        return self._profile

    def segmentation(self) -> SegmentationResult:
        if self._segmentation is None:
            self._segmentation = run_segmentation(
                self.mesh, self.config, self.indicators(), self.profile(),
                proximity_distance=self.config.proximity_distance)
        return self._segmentation

    def association(self):
        return run_association(self.mesh, self.segmentation(), self.config,
                               self.tools, self.tech, self.compatibility)

    def plan(self) -> dict:
        bindings, junctions, warnings = self.association()
        return plan_document(self.mesh, self.config, self.segmentation(),
                             bindings, junctions, warnings, self.tools,
                             self.tech, self.compatibility)


# -- documents ---------------------------------------------------------------

def contact_document(mesh: TriMesh, config: PipelineConfig,
                     indicators: FacetIndicators) -> dict:
    doc = contact_map(mesh, indicators, config.map_config())
    doc["schema"] = 1
    doc["mesh_sha256"] = mesh_sha256(mesh)
    return doc


def continuity_document(mesh: TriMesh, config: PipelineConfig,
                        profile: ContinuityProfile) -> dict:
    params = config.continuity_params()
    in_plane = profile.rho <= params.epsilon_pp
    return {
        "schema": 1,
        "mesh_sha256": mesh_sha256(mesh),
        "config": {
            "axis": list(config.axis),
            "directions": config.directions,
            **params.to_dict(),
        },
        "directions_deg": [d.angle_deg for d in profile.directions],
        "kappa": [float(k) for k in profile.kappa],
        "in_plane": {
            f"{d.angle_deg:g}": [int(v) for v in in_plane[:, j]]
            for j, d in enumerate(profile.directions)
        },
    }


def segmentation_document(mesh: TriMesh, config: PipelineConfig,
                          seg: SegmentationResult) -> dict:
    return {
        "schema": 1,
        "mesh_sha256": mesh_sha256(mesh),
        "config": config.to_dict(),
        "features": [f.to_dict() for f in seg.features],
        "relations": [r.to_dict() for r in seg.relations],
        "waivers": [w.to_dict() for w in seg.waivers],
        "facet_feature": [int(i) for i in seg.facet_feature],
    }


def _binding_dict(mf: MachiningFeature, tool: CuttingTool,
                  strategy: MachiningStrategy) -> dict:
    return {
        "feature_id": mf.id,
        "tool_id": tool.id,
        "strategy": strategy.to_dict(),
        "technological": mf.technological.to_dict(),
        "machining": mf.machining.to_dict(),
    }


def association_document(mesh: TriMesh, config: PipelineConfig,
                         bindings, junctions, warnings, tools,
                         tech: TechnologicalData, compatibility) -> dict:
    return {
        "schema": 1,
        "mesh_sha256": mesh_sha256(mesh),
        "config": config.to_dict(),
        "technological_data": tech.to_dict(),
        "tool_library": [tool.to_dict() for tool in tools],
        "compatibility": compatibility,
        "bindings": [_binding_dict(*b) for b in bindings],
        "junction_checks": junctions,
        "warnings": list(warnings),
    }


def plan_document(mesh: TriMesh, config: PipelineConfig,
                  seg: SegmentationResult, bindings, junctions, warnings,
                  tools, tech: TechnologicalData, compatibility) -> dict:
    """Assemble the ordered process plan document."""
    axis = config.tool_axis
    sequences = []
    for mf, tool, strategy in bindings:
        sequences.append(build_sequence(
            mf, tool, strategy, mesh, axis,
            parking_margin_mm=config.parking_margin_mm,
            clearance_mm=config.clearance_mm))
    process = order_process(sequences, seg.waivers, order_by=config.order_by)
    by_id = {seq.id: seq for seq in sequences}
    return {
        "plan_schema": PLAN_SCHEMA_VERSION,
        "mesh_summary": {
            "sha256": mesh_sha256(mesh),
            "facet_count": len(mesh.facets),
            "bounding_box": [list(mesh.diagnostics.bounding_box[0]),
                             list(mesh.diagnostics.bounding_box[1])],
        },
        "config": config.to_dict(),
        "technological_data": tech.to_dict(),
        "tool_library": [tool.to_dict() for tool in tools],
        "compatibility": compatibility,
        "features": [f.to_dict() for f in seg.features],
        "relations": [r.to_dict() for r in seg.relations],
        "waivers": [w.to_dict() for w in seg.waivers],
        "bindings": [_binding_dict(*b) for b in bindings],
        "junction_checks": junctions,
        "sequences": [by_id[sid].to_dict() for sid in process.order],
        "process": process.to_dict(),
        "warnings": list(warnings),
    }


def run_plan(mesh: TriMesh, config: PipelineConfig, tools=None, tech=None,
             compatibility=None) -> dict:
    """One-call pipeline from cleaned mesh to plan document."""
    stages = AnalysisStages(
        mesh=mesh, config=config,
        tools=list(tools) if tools is not None else default_tool_library(),
        tech=tech if tech is not None else default_technological_data(),
        compatibility=compatibility)
    return stages.plan()


def verify_mesh_sha(document: dict, mesh: TriMesh, artifact: str) -> None:
    """Guard stage chaining: the artifact must describe this mesh."""
    recorded = document.get("mesh_sha256") or \
        document.get("mesh_summary", {}).get("sha256")
    if recorded != mesh_sha256(mesh):
        raise ArtifactError(
            f"{artifact} was produced from a different mesh; re-run the "
            "earlier stages", artifact=artifact)
