"""Tooling rules: technological data, tool selection, strategy, pitch.

Finishing work is carried by two tip families: ball noses for drafted and
blended surfaces, corner end mills for flat ones. Flat end mills stay in the
model for roughing data but are never picked by the finishing rules.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from .errors import (
    JunctionRelationError,
    PitchDomainError,
    RoughnessCriterionError,
    SchemaError,
    ToolSelectionError,
)
from .indicators import (
    KIND_INDIFFERENT,
    KIND_ORIENTED,
    ContinuityClass,
)
from .segmentation import (
    RELATION_CONCAVE,
    RELATION_TANGENT,
    ContainmentNote,
    GeometricFeature,
    TopologicalRelation,
)

logger = logging.getLogger(__name__)

TIP_BALL = "ball_nose"
TIP_CORNER = "corner_end"
TIP_FLAT = "flat_end"
TIP_TYPES = (TIP_BALL, TIP_CORNER, TIP_FLAT)

STRATEGY_PARALLEL_PLANES = "parallel_planes"
STRATEGY_ZLEVEL = "z_level"
STRATEGY_PARALLEL_CURVE = "parallel_curve"

SWEEP_ZIGZAG = "zigzag"
CUT_UPWARD = "upward"

DEFAULT_CLEARANCE_MM = 5.0
DEFAULT_JUNCTION_FACTOR = 0.05
FLAT_END_PITCH_FACTOR = 0.6


@dataclass(frozen=True)
class TechnologicalData:
    """Finish requirements for the part."""

    material: str
    roughness_rt_um: float
    form_tolerance_mm: float
    tolerance_factor: float = 1.0

    def __post_init__(self):
        if self.roughness_rt_um <= 0.0:
            raise SchemaError("roughness_Rt_um must be > 0",
                              path="roughness_Rt_um")
        if self.form_tolerance_mm <= 0.0:
            raise SchemaError("form_tolerance_mm must be > 0",
                              path="form_tolerance_mm")
        if self.tolerance_factor <= 0.0:
            raise SchemaError("tolerance_factor must be > 0",
                              path="tolerance_factor")

    def to_dict(self) -> dict:
        return {
            "material": self.material,
            "roughness_Rt_um": self.roughness_rt_um,
            "form_tolerance_mm": self.form_tolerance_mm,
            "tolerance_factor": self.tolerance_factor,
        }


def technological_data_from_dict(doc: dict) -> TechnologicalData:
    """Validate and build technological data from its JSON form.

    Only the total roughness criterion R_t is supported; documents carrying
    any other roughness key are rejected so nobody silently machines to the
    wrong criterion.
    """
    if not isinstance(doc, dict):
        raise SchemaError("technological data must be an object", path="$")
    for key in doc:
        if key.startswith("roughness_") and key != "roughness_Rt_um":
            raise RoughnessCriterionError(
                f"unsupported roughness criterion {key!r}: only roughness_Rt_um "
                "is accepted; convert other criteria before import")
    missing = [k for k in ("material", "roughness_Rt_um", "form_tolerance_mm")
               if k not in doc]
    if missing:
        raise SchemaError(f"technological data missing {missing}",
                          path=missing[0])
    return TechnologicalData(
        material=str(doc["material"]),
        roughness_rt_um=float(doc["roughness_Rt_um"]),
        form_tolerance_mm=float(doc["form_tolerance_mm"]),
        tolerance_factor=float(doc.get("tolerance_factor", 1.0)),
    )


@dataclass(frozen=True)
class MachiningData:
    """Derived machining targets for one feature."""

    scallop_height_um: float
    machining_tolerance_mm: float

    def to_dict(self) -> dict:
        return {
            "scallop_height_um": self.scallop_height_um,
            "machining_tolerance_mm": self.machining_tolerance_mm,
        }


@dataclass(frozen=True)
class CuttingTool:
    id: str
    tip_type: str
    diameter_mm: float
    corner_radius_mm: float
    overall_length_mm: float
    tool_length_mm: float
    material: str

    def __post_init__(self):
        where = f"tool {self.id!r}"
        if self.tip_type not in TIP_TYPES:
            raise SchemaError(f"{where}: unknown tip_type {self.tip_type!r}",
                              path="tip_type")
        if self.diameter_mm <= 0.0:
            raise SchemaError(f"{where}: diameter_mm must be > 0",
                              path="diameter_mm")
        if not (0.0 < self.tool_length_mm <= self.overall_length_mm):
            raise SchemaError(
                f"{where}: requires 0 < tool_length_mm <= overall_length_mm",
                path="tool_length_mm")
        r, d = self.corner_radius_mm, self.diameter_mm
        if self.tip_type == TIP_BALL and abs(r - 0.5 * d) > 1e-6:
            raise SchemaError(
                f"{where}: ball nose requires corner_radius_mm = diameter_mm / 2",
                path="corner_radius_mm")
        if self.tip_type == TIP_CORNER and not (0.0 < r < 0.5 * d):
            raise SchemaError(
                f"{where}: corner end mill requires 0 < corner_radius_mm < "
                "diameter_mm / 2", path="corner_radius_mm")
        if self.tip_type == TIP_FLAT and r != 0.0:
            raise SchemaError(
                f"{where}: flat end mill requires corner_radius_mm = 0",
                path="corner_radius_mm")

    @property
    def tip_radius_mm(self) -> float:
        """Radius of the tip arc that forms scallops (full radius for balls)."""
        if self.tip_type == TIP_BALL:
            return 0.5 * self.diameter_mm
        if self.tip_type == TIP_CORNER:
            return self.corner_radius_mm
        return 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tip_type": self.tip_type,
            "diameter_mm": self.diameter_mm,
            "corner_radius_mm": self.corner_radius_mm,
            "overall_length_mm": self.overall_length_mm,
            "tool_length_mm": self.tool_length_mm,
            "material": self.material,
        }


def tool_library_from_json(text_or_doc) -> list[CuttingTool]:
    """Parse and validate a tool library document.

    Errors carry the list index of the offending entry, e.g. ``tools[2]``.
    """
    doc = json.loads(text_or_doc) if isinstance(text_or_doc, (str, bytes)) else text_or_doc
    if not isinstance(doc, list):
        raise SchemaError("tool library must be a JSON array", path="$")
    tools = []
    seen = set()
    for idx, entry in enumerate(doc):
        where = f"tools[{idx}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: must be an object", path=where)
        required = ("id", "tip_type", "diameter_mm", "corner_radius_mm",
                    "overall_length_mm", "tool_length_mm", "material")
        for key in required:
            if key not in entry:
                raise SchemaError(f"{where}.{key}: missing", path=f"{where}.{key}")
        try:
            tool = CuttingTool(
                id=str(entry["id"]),
                tip_type=str(entry["tip_type"]),
                diameter_mm=float(entry["diameter_mm"]),
                corner_radius_mm=float(entry["corner_radius_mm"]),
                overall_length_mm=float(entry["overall_length_mm"]),
                tool_length_mm=float(entry["tool_length_mm"]),
                material=str(entry["material"]),
            )
        except SchemaError as exc:
            raise SchemaError(f"{where}.{exc.details.get('path', '?')}: {exc.message}",
                              path=where) from exc
        if tool.id in seen:
            raise SchemaError(f"{where}.id: duplicate tool id {tool.id!r}",
                              path=f"{where}.id")
        seen.add(tool.id)
        tools.append(tool)
    return tools


def compatible_tools(tools: list[CuttingTool], part_material: str,
                     table: dict | None) -> list[CuttingTool]:
    """Filter tools by the material compatibility table.

    No table means everything is compatible. With a table, the part material
    must be present; unknown materials are an error rather than a silent
    empty result.
    """
    if table is None:
        return list(tools)
    if part_material not in table:
        known = ", ".join(sorted(table))
        raise SchemaError(
            f"part material {part_material!r} not in compatibility table "
            f"(knows: {known})", path=part_material)
    allowed = set(table[part_material])
    return [t for t in tools if t.material in allowed]


@dataclass(frozen=True)
class MachiningStrategy:
    """Strategy binding for one feature."""

    feed_kind: str                      # parallel_planes | z_level | parallel_curve
    direction_deg: float | None
    sweeping_mode: str = SWEEP_ZIGZAG
    cutting_mode: str = CUT_UPWARD
    pitch_mm: float = 0.0
    machining_tolerance_mm: float = 0.0

    def to_dict(self) -> dict:
        return {
            "feed_kind": self.feed_kind,
            "direction_deg": self.direction_deg,
            "sweeping_mode": self.sweeping_mode,
            "cutting_mode": self.cutting_mode,
            "pitch_mm": self.pitch_mm,
            "machining_tolerance_mm": self.machining_tolerance_mm,
        }


@dataclass
class MachiningFeature:
    """Geometric feature enriched with machining context."""

    geometric: GeometricFeature
    technological: TechnologicalData
    machining: MachiningData
    relations: list[TopologicalRelation] = field(default_factory=list)
    waivers: list[ContainmentNote] = field(default_factory=list)

    @property
    def id(self) -> int:
        return self.geometric.id


def make_machining_feature(feature: GeometricFeature,
                           tech: TechnologicalData,
                           relations: list[TopologicalRelation],
                           waivers: list[ContainmentNote]) -> MachiningFeature:
    """Attach technological context and derive machining targets.

    The machining tolerance transposes the form tolerance directly, scaled
    by the declared tolerance factor; the scallop target is the roughness
    criterion itself.
    """
    machining = MachiningData(
        scallop_height_um=tech.roughness_rt_um,
        machining_tolerance_mm=tech.form_tolerance_mm * tech.tolerance_factor,
    )
    mine = [r for r in relations
            if feature.id in (r.feature_a, r.feature_b)]
    my_waivers = [w for w in waivers
                  if feature.id in (w.container_id, w.contained_id)]
    return MachiningFeature(feature, tech, machining, mine, my_waivers)


# -- selection rules ---------------------------------------------------------

def required_tip_type(contact_class: str) -> str:
    """Finishing rule: flat regions take corner end mills, the rest balls."""
    return TIP_CORNER if contact_class == "flat" else TIP_BALL


def select_tool(mf: MachiningFeature, tools: list[CuttingTool],
                mesh_top: float, clearance_mm: float = DEFAULT_CLEARANCE_MM,
                compatibility: dict | None = None,
                tip_override: str | None = None) -> CuttingTool:
    """Pick the largest accessible tool of the class-required tip type.

    Accessibility against the feature's depth below the mesh top:
    tool_length >= depth and overall_length >= depth + clearance. Ties on
    diameter resolve by tool id. ``tip_override`` restricts the library to
    one tip type and suspends the class rule (single-tool contingency).
    """
    depth = mesh_top - mf.geometric.z_range[0]
    tip = tip_override or required_tip_type(mf.geometric.contact_class)
    pool = compatible_tools(tools, mf.technological.material, compatibility)
    candidates = [t for t in pool if t.tip_type == tip]
    if not candidates:
        raise ToolSelectionError(
            f"feature {mf.id}: no {tip} tool available for material "
            f"{mf.technological.material!r} (empty compatible set)",
            feature_id=mf.id, tip_type=tip)
    accessible = [t for t in candidates
                  if t.tool_length_mm >= depth
                  and t.overall_length_mm >= depth + clearance_mm]
    if not accessible:
        needed = depth + clearance_mm
        raise ToolSelectionError(
            f"feature {mf.id}: no {tip} tool passes accessibility at depth "
            f"{depth:g} mm; minimum TL {needed:g} mm required",
            feature_id=mf.id, tip_type=tip, minimum_tool_length_mm=needed)
    accessible.sort(key=lambda t: (-t.diameter_mm, t.id))
    choice = accessible[0]
    logger.debug("feature %d: tool %s (depth %.3f)", mf.id, choice.id, depth)
    return choice


def compute_pitch(tool: CuttingTool, scallop_height_um: float) -> float:
    """Transverse pitch leaving at most the target scallop height.

    Ball nose and corner end mill scallops form between the tip arcs of
    adjacent passes: p = 2 * sqrt(2 R h - h^2) with R the tip arc radius.
    Flat end mills have no tip arc; their pitch is the conventional 0.6 D
    coverage stepover.
    """
    if scallop_height_um <= 0.0:
        raise PitchDomainError(
            f"scallop height must be > 0, got {scallop_height_um}")
    if tool.tip_type == TIP_FLAT:
        return FLAT_END_PITCH_FACTOR * tool.diameter_mm
    radius = tool.tip_radius_mm
    h = scallop_height_um / 1000.0
    if h >= radius:
        raise PitchDomainError(
            f"scallop height {h} mm must stay below the tip radius "
            f"{radius} mm of tool {tool.id!r}")
    return 2.0 * math.sqrt(2.0 * radius * h - h * h)


def select_strategy(mf: MachiningFeature, tool: CuttingTool) -> MachiningStrategy:
    """Bind the feature's continuity verdict to a finishing strategy.

    Indifferent regions sweep parallel planes along their longest extent;
    oriented regions along their selected feed angle; z-level and undefined
    regions take z-level contours. Parallel-curve machining exists in the
    model but is only reachable through an explicit override.
    """
    cont = mf.geometric.continuity
    pitch = compute_pitch(tool, mf.machining.scallop_height_um)
    tol = mf.machining.machining_tolerance_mm
    if cont.kind == KIND_INDIFFERENT:
        return MachiningStrategy(STRATEGY_PARALLEL_PLANES,
                                 mf.geometric.principal_direction,
                                 pitch_mm=pitch, machining_tolerance_mm=tol)
    if cont.kind == KIND_ORIENTED:
        return MachiningStrategy(STRATEGY_PARALLEL_PLANES, cont.direction_deg,
                                 pitch_mm=pitch, machining_tolerance_mm=tol)
    return MachiningStrategy(STRATEGY_ZLEVEL, None,
                             pitch_mm=pitch, machining_tolerance_mm=tol)


@dataclass(frozen=True)
class JunctionResult:
    status: str            # "ok" | "degrade"
    mismatch_mm: float
    tolerance_mm: float
    reason: str

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "mismatch_mm": self.mismatch_mm,
            "tolerance_mm": self.tolerance_mm,
            "reason": self.reason,
        }


def junction_check(mf_a: MachiningFeature, mf_b: MachiningFeature,
                   tool_a: CuttingTool, tool_b: CuttingTool,
                   junction_factor: float = DEFAULT_JUNCTION_FACTOR) -> JunctionResult:
    """Estimate the seam mismatch where two tools meet.

    Applies to features joined by a concave or tangent contact; the heuristic
    surface mismatch is |R_tip_a - R_tip_b| * junction_factor, compared to
    the tighter of the two form tolerances. A failing junction degrades to a
    recommendation to unify tooling; the caller decides.
    """
    related = any(
        r.kind in (RELATION_CONCAVE, RELATION_TANGENT)
        and {r.feature_a, r.feature_b} == {mf_a.id, mf_b.id}
        for r in mf_a.relations)
    if not related:
        raise JunctionRelationError(
            f"features {mf_a.id} and {mf_b.id} are not related by a concave "
            "or tangent contact")
    mismatch = abs(tool_a.tip_radius_mm - tool_b.tip_radius_mm) * junction_factor
    tolerance = min(mf_a.machining.machining_tolerance_mm,
                    mf_b.machining.machining_tolerance_mm)
    if mismatch > tolerance:
        return JunctionResult(
            "degrade", mismatch, tolerance,
            f"junction mismatch {mismatch:g} mm exceeds tolerance "
            f"{tolerance:g} mm: unify tool across features "
            f"{mf_a.id} and {mf_b.id}")
    return JunctionResult("ok", mismatch, tolerance, "within tolerance")
